#ifndef AUNET_TRAINING_HPP
#define AUNET_TRAINING_HPP

#include "aunet/adam.hpp"
#include "aunet/dataset.hpp"
#include "aunet/losses.hpp"
#include "aunet/metrics.hpp"
#include "aunet/model.hpp"

#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aunet {

struct EarlyStopping {
  bool enabled = true;
  int patience = 10;
};

struct PlateauSchedule {
  bool enabled = true;
  double factor = 0.2;
  int patience = 5;
  double min_lr = 1e-7;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 16;
  int max_epochs = 50;
  LossKind loss = LossKind::Combined;
  double dice_epsilon = kDiceEpsilon;
  /// Validation loss must drop by at least this much to count as an improvement.
  double min_delta = 1e-4;
  EarlyStopping early_stopping;
  PlateauSchedule plateau;
  std::uint64_t seed = 7;
  /// Wall-clock seconds per epoch go into History only when set; otherwise 0 is recorded
  /// so that reruns produce identical histories.
  bool record_wall_time = false;

  void validate() const;
};

struct HistoryRow {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double train_dice = 0;
  double val_dice = 0;
  double lr = 0;
  double seconds = 0;
};

using History = std::vector<HistoryRow>;

struct PlateauState {
  double best = std::numeric_limits<double>::infinity();
  int wait = 0;
};

/// Returns the learning rate for the next epoch. An epoch improves when its loss is below
/// the best so far by at least min_delta; after `patience` consecutive epochs without
/// improvement the rate is multiplied by `factor` (floored at min_lr) and the count restarts.
double plateau_update(PlateauState& state, double val_loss, double lr,
                      const PlateauSchedule& schedule, double min_delta = 1e-4);

enum class StopDecision { Continue, Stop };

struct EarlyStopState {
  double best = std::numeric_limits<double>::infinity();
  int wait = 0;
  int epochs_seen = 0;
  int best_epoch = 0;
  bool improved = false;  // the last update was an improvement
};

/// Stops once `patience` consecutive epochs fail to improve. On improvement the caller
/// snapshots the weights (state.improved is set); on Stop it restores that snapshot.
StopDecision early_stop_update(EarlyStopState& state, double val_loss, int patience,
                               double min_delta = 1e-4);

/// Everything the callbacks carry between epochs.
struct CallbackState {
  PlateauState plateau;
  EarlyStopState early_stop;
  std::optional<ParameterSet<float>> best_weights;
};

class DivergedTraining : public std::runtime_error {
 public:
  DivergedTraining(int epoch, std::size_t batch, double loss);
  int epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  int epoch_;
  std::size_t batch_;
};

struct TrainHooks {
  std::function<void(const HistoryRow&)> on_epoch;
  /// Called with the current weights whenever validation loss improves.
  std::function<void(const AttentionUNet<float>&, int epoch)> on_improvement;
};

struct TrainResult {
  History history;
  bool stopped_early = false;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

/// Adam over the training batches each epoch, then validation loss/Dice, then the plateau
/// and early-stop rules. On early stop the best-validation weights are restored.
TrainResult train(AttentionUNet<float>& model, BatchGenerator& train_batches,
                  BatchGenerator& val_batches, const TrainConfig& config,
                  const TrainHooks& hooks = {});

/// Maps a batch to class probabilities [B,classes,H,W].
using Predictor = std::function<TensorF(const Batch&)>;

/// One full pass over `batches`, accumulating counts and soft-Dice sums.
MetricsAccumulator accumulate_metrics(const Predictor& predictor, BatchGenerator& batches,
                                      int num_classes = 4, double epsilon = kDiceEpsilon);

MetricsReport evaluate(const Predictor& predictor, BatchGenerator& batches, int num_classes = 4,
                       double epsilon = kDiceEpsilon);
MetricsReport evaluate(const AttentionUNet<float>& model, BatchGenerator& batches,
                       double epsilon = kDiceEpsilon);

Predictor model_predictor(const AttentionUNet<float>& model);

inline constexpr const char* kHistoryHeader = "epoch,train_loss,val_loss,train_dice,val_dice,lr,seconds";

/// CSV with kHistoryHeader and one row per epoch, reals at 6 significant digits.
void write_history_csv(const History& history, const std::filesystem::path& path);
History read_history_csv(const std::filesystem::path& path);

}  // namespace aunet

#endif  // AUNET_TRAINING_HPP
