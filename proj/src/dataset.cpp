#include "aunet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace aunet {

Modality parse_modality(const std::string& name) {
  if (name == "flair") return Modality::Flair;
  if (name == "t1ce") return Modality::T1ce;
  throw ContractError("unknown modality '" + name + "' (expected flair or t1ce)");
}

std::string to_string(Modality modality) {
  return modality == Modality::Flair ? "flair" : "t1ce";
}

namespace {

std::optional<std::filesystem::path> find_volume(const std::filesystem::path& dir,
                                                 const std::string& key) {
  const std::filesystem::path plain = dir / (key + ".nii");
  if (std::filesystem::is_regular_file(plain)) return plain;
  const std::string suffix = "_" + key + ".nii";
  std::optional<std::filesystem::path> found;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      if (!found || entry.path() < *found) found = entry.path();
    }
  }
  return found;
}

}  // namespace

std::vector<CaseRecord> discover_cases(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) {
    throw ContractError("data root " + root.string() + " is not a directory");
  }
  std::vector<CaseRecord> cases;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    auto flair = find_volume(entry.path(), "flair");
    auto t1ce = find_volume(entry.path(), "t1ce");
    auto seg = find_volume(entry.path(), "seg");
    if (flair && t1ce && seg) {
      cases.push_back({entry.path().filename().string(), *flair, *t1ce, *seg});
    }
  }
  std::sort(cases.begin(), cases.end(),
            [](const CaseRecord& a, const CaseRecord& b) { return a.id < b.id; });
  return cases;
}

CaseVolumes load_case(const CaseRecord& record) {
  CaseVolumes c{record.id, read_nifti(record.flair), read_nifti(record.t1ce),
                read_nifti(record.seg)};
  if (c.flair.dims != c.t1ce.dims || c.flair.dims != c.seg.dims) {
    throw ShapeError("case " + record.id + ": modality volumes differ in dimensions");
  }
  return c;
}

std::vector<RawSlice> extract_slices(const CaseVolumes& c, const SliceWindow& window) {
  std::vector<RawSlice> out;
  for (Index z : window_indices(c.flair.dims[2], window)) {
    out.push_back({z, axial_slice(c.flair, z), axial_slice(c.t1ce, z), axial_labels(c.seg, z)});
  }
  return out;
}

namespace {

SliceSample make_sample(const std::string& id, Index z, const Volume& flair, const Volume& t1ce,
                        const Volume& seg, const PipelineOptions& o) {
  const Index size = o.image_size;
  SliceSample s;
  s.case_id = id;
  s.z = z;
  s.image = TensorF({static_cast<Index>(o.modalities.size()), size, size});
  for (std::size_t m = 0; m < o.modalities.size(); ++m) {
    const Volume& v = o.modalities[m] == Modality::Flair ? flair : t1ce;
    const Image resized = resize_image(axial_slice(v, z), size, size);
    s.image.vec().segment(static_cast<Index>(m) * size * size, size * size) =
        Eigen::Map<const Eigen::VectorXf>(resized.data(), size * size);
  }
  const LabelImage labels = resize_mask(remap_labels(axial_labels(seg, z), o.remap), size, size);
  s.mask = one_hot(labels, o.num_classes);
  return s;
}

}  // namespace

std::vector<SliceSample> preprocess_case(const CaseVolumes& c, const PipelineOptions& options) {
  if (options.modalities.empty()) throw ContractError("at least one modality is required");
  const Volume flair = normalize(c.flair);
  const Volume t1ce = normalize(c.t1ce);
  std::vector<SliceSample> out;
  for (Index z : window_indices(c.flair.dims[2], options.window)) {
    out.push_back(make_sample(c.id, z, flair, t1ce, c.seg, options));
  }
  return out;
}

SliceSample preprocess_slice(const CaseVolumes& c, Index z, const PipelineOptions& options) {
  if (z < 0 || z >= c.flair.dims[2]) {
    throw RangeError("slice " + std::to_string(z) + " outside depth " +
                     std::to_string(c.flair.dims[2]));
  }
  return make_sample(c.id, z, normalize(c.flair), normalize(c.t1ce), c.seg, options);
}

DatasetSplit split_dataset(std::vector<std::string> ids, const std::vector<std::string>& exclusions,
                           const SplitRatios& ratios, std::uint64_t seed) {
  const double total = ratios.train + ratios.validation + ratios.test;
  if (std::abs(total - 1.0) > 1e-9 || ratios.train < 0 || ratios.validation < 0 || ratios.test < 0) {
    throw ContractError("split ratios must be non-negative and sum to 1");
  }
  DatasetSplit split;
  split.seed = seed;
  const std::set<std::string> excluded(exclusions.begin(), exclusions.end());
  std::vector<std::string> kept;
  std::set<std::string> unique;
  for (std::string& id : ids) {
    if (!unique.insert(id).second) continue;
    if (excluded.count(id)) {
      split.excluded.push_back(id);
    } else {
      kept.push_back(std::move(id));
    }
  }
  if (kept.empty()) throw ContractError("no case ids left after exclusions");
  std::sort(kept.begin(), kept.end());
  std::mt19937_64 rng(seed);
  std::shuffle(kept.begin(), kept.end(), rng);
  const double n = static_cast<double>(kept.size());
  const auto n_val = static_cast<std::size_t>(std::floor(n * ratios.validation + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(n * ratios.test + 1e-9));
  const std::size_t n_train = kept.size() - n_val - n_test;
  split.train.assign(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(kept.begin() + static_cast<std::ptrdiff_t>(n_train),
                          kept.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(kept.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), kept.end());
  return split;
}

namespace {

TensorF stack(const std::vector<SliceSample>& samples, const std::vector<std::size_t>& idx,
              bool masks) {
  const TensorF& first = masks ? samples.at(idx.at(0)).mask : samples.at(idx.at(0)).image;
  const Index per = first.size();
  TensorF out({static_cast<Index>(idx.size()), first.dim(0), first.dim(1), first.dim(2)});
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const TensorF& t = masks ? samples.at(idx[b]).mask : samples.at(idx[b]).image;
    if (t.shape() != first.shape()) {
      throw ShapeError("batch samples differ in shape: " + shape_string(t.shape()) + " vs " +
                       shape_string(first.shape()));
    }
    out.vec().segment(static_cast<Index>(b) * per, per) = t.vec();
  }
  return out;
}

}  // namespace

TensorF stack_images(const std::vector<SliceSample>& samples, const std::vector<std::size_t>& idx) {
  return stack(samples, idx, false);
}

TensorF stack_masks(const std::vector<SliceSample>& samples, const std::vector<std::size_t>& idx) {
  return stack(samples, idx, true);
}

BatchGenerator::BatchGenerator(std::shared_ptr<const std::vector<SliceSample>> samples,
                               std::size_t batch_size, bool shuffle, std::uint64_t seed)
    : samples_(std::move(samples)), batch_size_(batch_size), shuffle_(shuffle), rng_(seed) {
  if (!samples_ || samples_->empty()) throw ContractError("batch generator needs samples");
  if (batch_size_ < 1) throw ContractError("batch size must be >= 1");
}

std::size_t BatchGenerator::batches_per_epoch() const {
  return (samples_->size() + batch_size_ - 1) / batch_size_;
}

void BatchGenerator::start_epoch() {
  order_.resize(samples_->size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (shuffle_) std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
  in_epoch_ = true;
}

std::optional<Batch> BatchGenerator::next_batch() {
  if (!in_epoch_) start_epoch();
  if (cursor_ >= order_.size()) {
    in_epoch_ = false;
    return std::nullopt;
  }
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  Batch b;
  b.indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                   order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  b.images = stack_images(*samples_, b.indices);
  b.masks = stack_masks(*samples_, b.indices);
  return b;
}

}  // namespace aunet
