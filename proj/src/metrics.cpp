#include "aunet/metrics.hpp"

#include "aunet/kernels.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace aunet {

ConfusionCounts::ConfusionCounts(int classes)
    : num_classes(classes),
      tp(static_cast<std::size_t>(classes)),
      fp(static_cast<std::size_t>(classes)),
      fn(static_cast<std::size_t>(classes)),
      tn(static_cast<std::size_t>(classes)) {}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
  if (other.num_classes != num_classes) throw ContractError("confusion counts class mismatch");
  total += other.total;
  for (std::size_t c = 0; c < tp.size(); ++c) {
    tp[c] += other.tp[c];
    fp[c] += other.fp[c];
    fn[c] += other.fn[c];
    tn[c] += other.tn[c];
  }
  return *this;
}

namespace {
std::int64_t total_of(const std::vector<std::int64_t>& v) {
  return std::accumulate(v.begin(), v.end(), std::int64_t{0});
}
}  // namespace

std::int64_t ConfusionCounts::sum_tp() const { return total_of(tp); }
std::int64_t ConfusionCounts::sum_fp() const { return total_of(fp); }
std::int64_t ConfusionCounts::sum_fn() const { return total_of(fn); }
std::int64_t ConfusionCounts::sum_tn() const { return total_of(tn); }

ConfusionCounts confusion_counts(const LabelMap& truth, const LabelMap& pred, int num_classes) {
  if (truth.shape() != pred.shape()) {
    throw ShapeError("confusion_counts: label maps " + shape_string(truth.shape()) + " and " +
                     shape_string(pred.shape()));
  }
  // Joint histogram of (true, predicted) pairs.
  std::vector<std::int64_t> joint(static_cast<std::size_t>(num_classes * num_classes), 0);
  for (Index i = 0; i < truth.size(); ++i) {
    const std::int32_t t = truth[i], p = pred[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
      throw ContractError("label out of range at pixel " + std::to_string(i) + ": (" +
                          std::to_string(t) + "," + std::to_string(p) + ")");
    }
    ++joint[static_cast<std::size_t>(t * num_classes + p)];
  }
  ConfusionCounts counts(num_classes);
  counts.total = truth.size();
  for (int c = 0; c < num_classes; ++c) {
    std::int64_t row = 0, col = 0;
    for (int k = 0; k < num_classes; ++k) {
      row += joint[static_cast<std::size_t>(c * num_classes + k)];
      col += joint[static_cast<std::size_t>(k * num_classes + c)];
    }
    const std::size_t s = static_cast<std::size_t>(c);
    counts.tp[s] = joint[static_cast<std::size_t>(c * num_classes + c)];
    counts.fn[s] = row - counts.tp[s];
    counts.fp[s] = col - counts.tp[s];
    counts.tn[s] = counts.total - counts.tp[s] - counts.fn[s] - counts.fp[s];
  }
  return counts;
}

double sensitivity(const ConfusionCounts& counts, double epsilon) {
  const double tp = static_cast<double>(counts.sum_tp());
  return (tp + epsilon) / (tp + static_cast<double>(counts.sum_fn()) + epsilon);
}

double specificity(const ConfusionCounts& counts, double epsilon) {
  const double tn = static_cast<double>(counts.sum_tn());
  return (tn + epsilon) / (tn + static_cast<double>(counts.sum_fp()) + epsilon);
}

double mean_iou(const ConfusionCounts& counts) {
  double sum = 0;
  int present = 0;
  for (std::size_t c = 0; c < counts.tp.size(); ++c) {
    const std::int64_t denom = counts.tp[c] + counts.fp[c] + counts.fn[c];
    if (denom == 0) continue;
    sum += static_cast<double>(counts.tp[c]) / static_cast<double>(denom);
    ++present;
  }
  if (present == 0) throw ContractError("mean_iou: no class present in either label map");
  return sum / present;
}

double categorical_accuracy(const ConfusionCounts& counts) {
  if (counts.total == 0) throw ContractError("categorical_accuracy of an empty label map");
  return static_cast<double>(counts.sum_tp()) / static_cast<double>(counts.total);
}

double mean_iou(const LabelMap& truth, const LabelMap& pred, int num_classes) {
  return mean_iou(confusion_counts(truth, pred, num_classes));
}

namespace {

template <typename Scalar>
ConfusionCounts thresholded_counts(const Tensor<Scalar>& y_true, const Tensor<Scalar>& y_pred) {
  if (y_true.shape() != y_pred.shape()) {
    throw ShapeError("metric inputs differ: " + shape_string(y_true.shape()) + " vs " +
                     shape_string(y_pred.shape()));
  }
  require_rank4(y_true, "metric input");
  return confusion_counts(kernels::argmax_channels(y_true), kernels::argmax_channels(y_pred),
                          static_cast<int>(y_true.dim(1)));
}

}  // namespace

template <typename Scalar>
double sensitivity(const Tensor<Scalar>& y_true, const Tensor<Scalar>& y_pred, double epsilon) {
  return sensitivity(thresholded_counts(y_true, y_pred), epsilon);
}

template <typename Scalar>
double specificity(const Tensor<Scalar>& y_true, const Tensor<Scalar>& y_pred, double epsilon) {
  return specificity(thresholded_counts(y_true, y_pred), epsilon);
}

template <typename Scalar>
double categorical_accuracy(const Tensor<Scalar>& y_true, const Tensor<Scalar>& y_pred) {
  return categorical_accuracy(thresholded_counts(y_true, y_pred));
}

MetricsAccumulator::MetricsAccumulator(int num_classes, double epsilon)
    : num_classes_(num_classes),
      epsilon_(epsilon),
      counts_(num_classes),
      intersection_(static_cast<std::size_t>(num_classes)),
      truth_sum_(static_cast<std::size_t>(num_classes)),
      pred_sum_(static_cast<std::size_t>(num_classes)) {}

template <typename Scalar>
void MetricsAccumulator::add(const Tensor<Scalar>& y_true, const Tensor<Scalar>& probs) {
  counts_ += thresholded_counts(y_true, probs);
  if (y_true.dim(1) != num_classes_) {
    throw ShapeError("metrics accumulator expects " + std::to_string(num_classes_) +
                     " classes, got " + shape_string(y_true.shape()));
  }
  const Index n = y_true.dim(0), plane = y_true.dim(2) * y_true.dim(3);
  for (Index i = 0; i < n; ++i) {
    for (int k = 0; k < num_classes_; ++k) {
      const Index off = (i * num_classes_ + k) * plane;
      const auto t = y_true.vec().segment(off, plane).template cast<double>();
      const auto p = probs.vec().segment(off, plane).template cast<double>();
      const std::size_t s = static_cast<std::size_t>(k);
      intersection_[s] += t.dot(p);
      truth_sum_[s] += t.sum();
      pred_sum_[s] += p.sum();
      for (Index q = 0; q < plane; ++q) {
        if (t[q] != 0.0) cross_entropy_sum_ -= t[q] * std::log(p[q] + kCrossEntropyClamp);
      }
    }
  }
  pixels_ += n * plane;
}

double MetricsAccumulator::soft_dice() const {
  double inter = 0, total = 0;
  for (std::size_t k = 0; k < intersection_.size(); ++k) {
    inter += intersection_[k];
    total += truth_sum_[k] + pred_sum_[k];
  }
  return (2.0 * inter + epsilon_) / (total + epsilon_);
}

MetricsReport MetricsAccumulator::report() const {
  if (pixels_ == 0) throw ContractError("metrics requested before any data was added");
  MetricsReport r;
  r.dice = soft_dice();
  r.mean_iou = mean_iou(counts_);
  r.categorical_accuracy = categorical_accuracy(counts_);
  r.sensitivity = sensitivity(counts_, epsilon_);
  r.specificity = specificity(counts_, epsilon_);
  for (std::size_t k = 0; k < intersection_.size(); ++k) {
    r.per_class_dice.push_back((2.0 * intersection_[k] + epsilon_) /
                               (truth_sum_[k] + pred_sum_[k] + epsilon_));
  }
  return r;
}

double MetricsAccumulator::loss(LossKind kind) const {
  if (pixels_ == 0) throw ContractError("loss requested before any data was added");
  const double ce = cross_entropy_sum_ / static_cast<double>(pixels_);
  if (kind == LossKind::Combined) return ce + (1.0 - soft_dice());
  const MetricsReport r = report();
  double mean = 0;
  for (double d : r.per_class_dice) mean += d;
  return ce + (1.0 - mean / static_cast<double>(r.per_class_dice.size()));
}

template double sensitivity(const Tensor<float>&, const Tensor<float>&, double);
template double sensitivity(const Tensor<double>&, const Tensor<double>&, double);
template double specificity(const Tensor<float>&, const Tensor<float>&, double);
template double specificity(const Tensor<double>&, const Tensor<double>&, double);
template double categorical_accuracy(const Tensor<float>&, const Tensor<float>&);
template double categorical_accuracy(const Tensor<double>&, const Tensor<double>&);
template void MetricsAccumulator::add(const Tensor<float>&, const Tensor<float>&);
template void MetricsAccumulator::add(const Tensor<double>&, const Tensor<double>&);

}  // namespace aunet
