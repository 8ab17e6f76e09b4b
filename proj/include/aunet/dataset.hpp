#ifndef AUNET_DATASET_HPP
#define AUNET_DATASET_HPP

#include "aunet/nifti.hpp"
#include "aunet/preprocess.hpp"
#include "aunet/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace aunet {

enum class Modality { Flair, T1ce };

Modality parse_modality(const std::string& name);
std::string to_string(Modality modality);

/// On-disk location of one case.
struct CaseRecord {
  std::string id;
  std::filesystem::path flair;
  std::filesystem::path t1ce;
  std::filesystem::path seg;
};

/// One case in memory. All three volumes share dims; seg holds raw labels {0,1,2,4}.
struct CaseVolumes {
  std::string id;
  Volume flair;
  Volume t1ce;
  Volume seg;
};

/// Case directories under `root`, sorted by id. A directory qualifies when it holds
/// flair/t1ce/seg volumes named either `flair.nii` or `<anything>_flair.nii` (likewise
/// for t1ce and seg).
std::vector<CaseRecord> discover_cases(const std::filesystem::path& root);

CaseVolumes load_case(const CaseRecord& record);

/// Unprocessed window slices of a case.
struct RawSlice {
  Index z;
  Image flair;
  Image t1ce;
  LabelImage mask;
};

std::vector<RawSlice> extract_slices(const CaseVolumes& c, const SliceWindow& window);

/// One training item: image [modalities,H,W] in [0,1] and a one-hot mask [classes,H,W].
struct SliceSample {
  std::string case_id;
  Index z = 0;
  TensorF image;
  TensorF mask;
};

struct PipelineOptions {
  SliceWindow window;
  Index image_size = 128;
  std::vector<Modality> modalities{Modality::Flair, Modality::T1ce};
  LabelRemap remap;
  int num_classes = 4;
};

/// normalize each modality volume, window, resize, remap, one-hot.
std::vector<SliceSample> preprocess_case(const CaseVolumes& c, const PipelineOptions& options);

/// Single-slice variant used by explanation tooling: returns the sample at absolute z.
SliceSample preprocess_slice(const CaseVolumes& c, Index z, const PipelineOptions& options);

struct SplitRatios {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::vector<std::string> excluded;
  std::uint64_t seed = 0;
};

inline const std::vector<std::string> kDefaultExclusions{"BraTS20_Training_355"};

/// Removes exclusions, shuffles with `seed`, then takes floor(n*ratio) ids for validation
/// and test; the remainder goes to training.
DatasetSplit split_dataset(std::vector<std::string> ids,
                           const std::vector<std::string>& exclusions = kDefaultExclusions,
                           const SplitRatios& ratios = {}, std::uint64_t seed = 42);

struct Batch {
  TensorF images;  // [B,modalities,H,W]
  TensorF masks;   // [B,classes,H,W]
  std::vector<std::size_t> indices;
};

TensorF stack_images(const std::vector<SliceSample>& samples, const std::vector<std::size_t>& idx);
TensorF stack_masks(const std::vector<SliceSample>& samples, const std::vector<std::size_t>& idx);

/// Epoch-wise batches over a fixed sample list. With shuffling on, each epoch visits a
/// fresh permutation drawn from the seeded generator; the last batch may be short.
class BatchGenerator {
 public:
  BatchGenerator(std::shared_ptr<const std::vector<SliceSample>> samples, std::size_t batch_size,
                 bool shuffle, std::uint64_t seed);

  /// Next batch of the current epoch, or nullopt once it is exhausted. The call after
  /// nullopt starts a new epoch.
  std::optional<Batch> next_batch();

  std::size_t sample_count() const { return samples_->size(); }
  std::size_t batch_size() const { return batch_size_; }
  std::size_t batches_per_epoch() const;
  const std::vector<SliceSample>& samples() const { return *samples_; }

 private:
  void start_epoch();

  std::shared_ptr<const std::vector<SliceSample>> samples_;
  std::size_t batch_size_;
  bool shuffle_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  bool in_epoch_ = false;
};

}  // namespace aunet

#endif  // AUNET_DATASET_HPP
