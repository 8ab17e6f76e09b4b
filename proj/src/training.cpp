#include "aunet/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace aunet {

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ContractError("learning rate must be positive");
  if (batch_size < 1) throw ContractError("batch size must be >= 1");
  if (max_epochs < 1) throw ContractError("max epochs must be >= 1");
  if (!(dice_epsilon > 0)) throw ContractError("dice epsilon must be positive");
  if (min_delta < 0) throw ContractError("min_delta must be non-negative");
  if (early_stopping.patience < 1) throw ContractError("early-stop patience must be >= 1");
  if (!(plateau.factor > 0 && plateau.factor < 1)) {
    throw ContractError("plateau factor must lie in (0,1)");
  }
  if (plateau.patience < 1) throw ContractError("plateau patience must be >= 1");
  if (!(plateau.min_lr > 0 && plateau.min_lr < learning_rate)) {
    throw ContractError("plateau min lr must satisfy 0 < min_lr < learning rate");
  }
}

double plateau_update(PlateauState& state, double val_loss, double lr,
                      const PlateauSchedule& schedule, double min_delta) {
  if (val_loss < state.best - min_delta) {
    state.best = val_loss;
    state.wait = 0;
    return lr;
  }
  if (++state.wait < schedule.patience) return lr;
  state.wait = 0;
  if (lr <= schedule.min_lr) return lr;
  return std::max(lr * schedule.factor, schedule.min_lr);
}

StopDecision early_stop_update(EarlyStopState& state, double val_loss, int patience,
                               double min_delta) {
  ++state.epochs_seen;
  state.improved = val_loss < state.best - min_delta;
  if (state.improved) {
    state.best = val_loss;
    state.best_epoch = state.epochs_seen;
    state.wait = 0;
    return StopDecision::Continue;
  }
  return ++state.wait >= patience ? StopDecision::Stop : StopDecision::Continue;
}

DivergedTraining::DivergedTraining(int epoch, std::size_t batch, double loss)
    : std::runtime_error("training diverged: loss " + std::to_string(loss) + " at epoch " +
                         std::to_string(epoch) + ", batch " + std::to_string(batch)),
      epoch_(epoch),
      batch_(batch) {}

Predictor model_predictor(const AttentionUNet<float>& model) {
  return [&model](const Batch& b) { return predict(model, b.images); };
}

MetricsAccumulator accumulate_metrics(const Predictor& predictor, BatchGenerator& batches,
                                      int num_classes, double epsilon) {
  MetricsAccumulator acc(num_classes, epsilon);
  while (auto batch = batches.next_batch()) acc.add(batch->masks, predictor(*batch));
  return acc;
}

MetricsReport evaluate(const Predictor& predictor, BatchGenerator& batches, int num_classes,
                       double epsilon) {
  return accumulate_metrics(predictor, batches, num_classes, epsilon).report();
}

MetricsReport evaluate(const AttentionUNet<float>& model, BatchGenerator& batches,
                       double epsilon) {
  return evaluate(model_predictor(model), batches, model.config.num_classes, epsilon);
}

TrainResult train(AttentionUNet<float>& model, BatchGenerator& train_batches,
                  BatchGenerator& val_batches, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.validate();
  TrainResult result;
  AdamState<float> adam;
  CallbackState callbacks;
  double lr = config.learning_rate;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    double loss_sum = 0, dice_sum = 0;
    std::size_t seen = 0, batch_index = 0;
    while (auto batch = train_batches.next_batch()) {
      ++batch_index;
      Graph<float> g;
      BoundModel<float> bound(g, model);
      const ForwardOutput out = forward(bound, g.constant(batch->images));
      const Var target = g.constant(batch->masks);
      const Var loss = loss_node(g, out.probs, target, config.loss, config.dice_epsilon);
      const double value = g.value(loss).item();
      if (!std::isfinite(value)) throw DivergedTraining(epoch, batch_index, value);
      g.backward(loss);
      adam_step(model.params, bound.gradients(), adam, lr);

      const double n = static_cast<double>(batch->indices.size());
      loss_sum += value * n;
      dice_sum += dice_coefficient(batch->masks, g.value(out.probs), config.dice_epsilon) * n;
      seen += batch->indices.size();
    }

    const MetricsAccumulator val =
        accumulate_metrics(model_predictor(model), val_batches, model.config.num_classes,
                           config.dice_epsilon);
    HistoryRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(seen);
    row.train_dice = dice_sum / static_cast<double>(seen);
    row.val_loss = val.loss(config.loss);
    row.val_dice = val.soft_dice();
    row.lr = lr;
    if (config.record_wall_time) {
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    if (!std::isfinite(row.val_loss)) throw DivergedTraining(epoch, 0, row.val_loss);
    result.history.push_back(row);
    if (hooks.on_epoch) hooks.on_epoch(row);

    if (config.plateau.enabled) {
      lr = plateau_update(callbacks.plateau, row.val_loss, lr, config.plateau, config.min_delta);
    }
    const StopDecision decision =
        early_stop_update(callbacks.early_stop, row.val_loss, config.early_stopping.patience,
                          config.min_delta);
    if (callbacks.early_stop.improved) {
      callbacks.best_weights = model.params;
      result.best_epoch = epoch;
      result.best_val_loss = row.val_loss;
      if (hooks.on_improvement) hooks.on_improvement(model, epoch);
    }
    if (config.early_stopping.enabled && decision == StopDecision::Stop) {
      if (callbacks.best_weights) model.params = *callbacks.best_weights;
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

void write_history_csv(const History& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write history to " + path.string());
  out << kHistoryHeader << '\n';
  char line[512];
  for (const HistoryRow& r : history) {
    std::snprintf(line, sizeof line, "%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", r.epoch, r.train_loss,
                  r.val_loss, r.train_dice, r.val_dice, r.lr, r.seconds);
    out << line;
  }
  if (!out) throw std::runtime_error("failed writing history to " + path.string());
}

History read_history_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read history from " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kHistoryHeader) {
    throw std::runtime_error(path.string() + ": missing or unexpected history header");
  }
  History history;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(fields, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != 7) throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    history.push_back({static_cast<int>(v[0]), v[1], v[2], v[3], v[4], v[5], v[6]});
  }
  return history;
}

}  // namespace aunet
