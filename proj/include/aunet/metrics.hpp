#ifndef AUNET_METRICS_HPP
#define AUNET_METRICS_HPP

#include "aunet/losses.hpp"
#include "aunet/tensor.hpp"

#include <cstdint>
#include <vector>

namespace aunet {

/// Per-class pixel counts. For every class tp + fp + fn + tn == total.
struct ConfusionCounts {
  int num_classes = 0;
  std::int64_t total = 0;
  std::vector<std::int64_t> tp, fp, fn, tn;

  explicit ConfusionCounts(int classes = 4);
  ConfusionCounts& operator+=(const ConfusionCounts& other);

  std::int64_t sum_tp() const;
  std::int64_t sum_fp() const;
  std::int64_t sum_fn() const;
  std::int64_t sum_tn() const;

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Exact counts from two label maps of equal shape with values in [0, num_classes).
ConfusionCounts confusion_counts(const LabelMap& truth, const LabelMap& pred, int num_classes = 4);

/// Micro-averaged (TP+eps)/(TP+FN+eps) with counts summed over classes.
double sensitivity(const ConfusionCounts& counts, double epsilon = kDiceEpsilon);
/// Micro-averaged (TN+eps)/(TN+FP+eps).
double specificity(const ConfusionCounts& counts, double epsilon = kDiceEpsilon);
/// Mean of TP/(TP+FP+FN) over classes with a nonzero denominator.
double mean_iou(const ConfusionCounts& counts);
/// Sum of TP over the pixel count.
double categorical_accuracy(const ConfusionCounts& counts);

double mean_iou(const LabelMap& truth, const LabelMap& pred, int num_classes = 4);

// Tensor forms take one-hot truth and probabilities (or one-hot predictions) of shape
// [N,C,H,W] and threshold both by per-pixel argmax.
template <typename Scalar>
double sensitivity(const Tensor<Scalar>& y_true, const Tensor<Scalar>& y_pred,
                   double epsilon = kDiceEpsilon);
template <typename Scalar>
double specificity(const Tensor<Scalar>& y_true, const Tensor<Scalar>& y_pred,
                   double epsilon = kDiceEpsilon);
template <typename Scalar>
double categorical_accuracy(const Tensor<Scalar>& y_true, const Tensor<Scalar>& y_pred);

struct MetricsReport {
  double dice = 0;
  double mean_iou = 0;
  double categorical_accuracy = 0;
  double sensitivity = 0;
  double specificity = 0;
  std::vector<double> per_class_dice;
};

/// Accumulates counts and soft-Dice sums over batches so the final report does not
/// depend on how the data was batched.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(int num_classes = 4, double epsilon = kDiceEpsilon);

  template <typename Scalar>
  void add(const Tensor<Scalar>& y_true, const Tensor<Scalar>& probs);

  MetricsReport report() const;
  /// Loss over everything seen: mean cross-entropy plus the selected Dice term.
  double loss(LossKind kind) const;
  double soft_dice() const;
  const ConfusionCounts& counts() const { return counts_; }

 private:
  int num_classes_;
  double epsilon_;
  ConfusionCounts counts_;
  std::vector<double> intersection_, truth_sum_, pred_sum_;
  double cross_entropy_sum_ = 0;
  std::int64_t pixels_ = 0;
};

}  // namespace aunet

#endif  // AUNET_METRICS_HPP
