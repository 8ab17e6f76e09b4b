// Acceptance suite: one PASS/FAIL line per criterion. Run with criterion numbers as
// arguments to select a subset, e.g. `acceptance 1 4 7`.

#include "aunet/cli.hpp"
#include "aunet/explain.hpp"
#include "aunet/nifti.hpp"
#include "aunet/phantom.hpp"
#include "aunet/training.hpp"
#include "aunet/weights_io.hpp"

#include "metric_oracle.hpp"
#include "nifti_fixture.hpp"
#include "support.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

using namespace aunet;
using namespace aunet::testing;
namespace fs = std::filesystem;
using kernels::Padding;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects failed checks; the first few are kept for the report line.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    if (failures_.size() < 3) failures_.push_back(what);
    ++failed_;
  }
  Outcome outcome(const std::string& summary) const {
    Outcome o{failed_ == 0, summary};
    if (failed_) {
      o.detail += "; " + std::to_string(failed_) + "/" + std::to_string(checks_) + " checks failed:";
      for (const auto& f : failures_) o.detail += " [" + f + "]";
    }
    return o;
  }

 private:
  int checks_ = 0;
  int failed_ = 0;
  std::vector<std::string> failures_;
};

std::string fmt(double v, const char* spec = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

Var project(Graph<double>& g, Var v, const TensorD& weights) {
  return g.sum(g.mul(v, g.constant(weights)));
}

// ---------------------------------------------------------------------------------------
// 1. gradient suite

Outcome gradient_suite() {
  Checker c;
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<Index> d35(3, 5);
  constexpr double kTol = 1e-5;
  double worst = 0;
  auto check = [&](const std::string& name, const ScalarBuilder& build, const TensorD& point) {
    const double err = graph_gradient_error(build, point);
    worst = std::max(worst, err);
    c.expect(err <= kTol, name + " " + fmt(err));
  };

  for (int trial = 0; trial < 3; ++trial) {
    const Index n = d35(rng), cin = d35(rng), cout = d35(rng), h = d35(rng), w = d35(rng);
    const TensorD x = random_tensor({n, cin, h, w}, rng);
    const TensorD k = random_tensor({cout, cin, 3, 3}, rng);
    const TensorD b = random_tensor({cout}, rng);
    for (Padding p : {Padding::Same, Padding::Valid}) {
      const Index oh = p == Padding::Same ? h : h - 2, ow = p == Padding::Same ? w : w - 2;
      const TensorD wt = random_tensor({n, cout, oh, ow}, rng);
      auto conv = [&](int which) {
        return [&, which, p](Graph<double>& g, Var v) {
          return project(g,
                         g.conv2d(which == 0 ? v : g.constant(x), which == 1 ? v : g.constant(k),
                                  which == 2 ? v : g.constant(b), p),
                         wt);
        };
      };
      check("conv2d input", conv(0), x);
      check("conv2d kernel", conv(1), k);
      check("conv2d bias", conv(2), b);
    }

    const TensorD kt = random_tensor({cin, cout, 2, 2}, rng);
    const TensorD wt = random_tensor({n, cout, 2 * h, 2 * w}, rng);
    auto up = [&](int which) {
      return [&, which](Graph<double>& g, Var v) {
        return project(g,
                       g.conv_transpose2x2(which == 0 ? v : g.constant(x),
                                           which == 1 ? v : g.constant(kt),
                                           which == 2 ? v : g.constant(b)),
                       wt);
      };
    };
    const TensorD bt = random_tensor({cout}, rng);
    check("conv_transpose input", up(0), x);
    check("conv_transpose kernel", up(1), kt);
    check("conv_transpose bias",
          [&](Graph<double>& g, Var v) {
            return project(g, g.conv_transpose2x2(g.constant(x), g.constant(kt), v), wt);
          },
          bt);

    const TensorD pooled_in = random_tensor({n, cin, 4, 4}, rng);
    const TensorD wp = random_tensor({n, cin, 2, 2}, rng);
    check("maxpool", [&](Graph<double>& g, Var v) { return project(g, g.maxpool2x2(v), wp); },
          pooled_in);

    const Shape shape{n, cin, h, w};
    const TensorD a = random_away_from_zero(shape, rng);
    const TensorD y = random_tensor(shape, rng);
    const TensorD we = random_tensor(shape, rng);
    const TensorD gate = random_tensor({n, 1, h, w}, rng);
    check("relu", [&](Graph<double>& g, Var v) { return project(g, g.relu(v), we); }, a);
    check("sigmoid", [&](Graph<double>& g, Var v) { return project(g, g.sigmoid(v), we); }, a);
    check("softmax", [&](Graph<double>& g, Var v) { return project(g, g.softmax_channels(v), we); },
          random_tensor(shape, rng, -2, 2));
    check("add", [&](Graph<double>& g, Var v) { return project(g, g.add(v, g.constant(y)), we); }, a);
    check("affine", [&](Graph<double>& g, Var v) { return project(g, g.affine(v, -1.5, 0.25), we); },
          a);
    check("mul", [&](Graph<double>& g, Var v) { return project(g, g.mul(v, g.constant(y)), we); }, a);
    check("mul broadcast gate",
          [&](Graph<double>& g, Var v) { return project(g, g.mul(g.constant(a), v), we); }, gate);
    check("sum", [&](Graph<double>& g, Var v) { return g.sum(g.mul(v, v)); }, a);

    const TensorD other = random_tensor({n, cout, h, w}, rng);
    const TensorD wc = random_tensor({n, cin + cout, h, w}, rng);
    check("concat first",
          [&](Graph<double>& g, Var v) { return project(g, g.concat_channels(v, g.constant(other)), wc); },
          a);
    check("concat second",
          [&](Graph<double>& g, Var v) { return project(g, g.concat_channels(g.constant(a), v), wc); },
          other);

    const TensorD target = random_one_hot(n, 4, h, w, rng);
    const TensorD probs = random_tensor(target.shape(), rng, 0.05, 1.0);
    check("cross_entropy", [&](Graph<double>& g, Var v) { return g.cross_entropy(v, g.constant(target)); },
          probs);
    check("soft_dice", [&](Graph<double>& g, Var v) { return g.soft_dice(v, g.constant(target), 1e-6); },
          probs);
    check("mean_class_dice",
          [&](Graph<double>& g, Var v) { return g.mean_class_dice(v, g.constant(target), 1e-6); }, probs);
    TensorD mask = random_tensor({n, 1, h, w}, rng, 0, 1);
    for (Index i = 0; i < mask.size(); ++i) mask[i] = mask[i] > 0.5 ? 1.0 : 0.0;
    check("channel_score",
          [&](Graph<double>& g, Var v) { return g.channel_score(g.mul(v, v), {1, 2, 3}); }, probs);
    check("channel_score masked",
          [&](Graph<double>& g, Var v) { return g.channel_score(g.mul(v, v), {1, 3}, &mask); }, probs);
  }

  ModelConfig tiny;
  tiny.depth = 2;
  tiny.base_filters = 4;
  tiny.seed = 5;
  double end_to_end = 0;
  for (bool attention : {true, false}) {
    tiny.attention = attention;
    AttentionUNet<double> m = build_model<double>(tiny);
    for (auto& e : m.params) {
      if (e.value.rank() == 1) e.value = random_tensor(e.value.shape(), rng, -0.1, 0.1);
    }
    const TensorD x = random_tensor({1, 2, 32, 32}, rng, 0, 1);
    const TensorD y = random_one_hot(1, 4, 32, 32, rng);
    const LossKind kind = attention ? LossKind::Combined : LossKind::CategoricalDice;
    const double err = model_gradient_error(m, x, y, kind);
    end_to_end = std::max(end_to_end, err);
    c.expect(err <= 1e-3, "end-to-end " + fmt(err));
  }
  return c.outcome("worst op error " + fmt(worst) + ", end-to-end " + fmt(end_to_end));
}

// ---------------------------------------------------------------------------------------
// 2. overfit

struct ReachedTarget {
  int epoch;
};

Outcome overfit() {
  PipelineOptions opts;
  opts.window = default_phantom_window(16);
  opts.image_size = 64;
  auto samples = std::make_shared<std::vector<SliceSample>>(
      preprocess_case(generate_phantom(2024, 1, {64, 64, 16}).front().volumes, opts));
  Checker c;
  c.expect(samples->size() == 8, "slice count " + std::to_string(samples->size()));

  ModelConfig mc;
  mc.base_filters = 8;
  mc.seed = 1;
  AttentionUNet<float> model = build_model<float>(mc);
  TrainConfig tc;
  tc.learning_rate = 1e-4;
  tc.batch_size = 1;
  tc.max_epochs = 300;
  tc.early_stopping.enabled = false;
  tc.plateau.enabled = false;
  BatchGenerator tr(samples, 1, true, 3), va(samples, 8, false, 3);
  TrainHooks hooks;
  // Validation runs on the training slices, so each history row is a train-set evaluation.
  hooks.on_epoch = [](const HistoryRow& row) {
    if (row.val_dice >= 0.95 && row.val_loss < 0.1) throw ReachedTarget{row.epoch};
  };
  int epochs = tc.max_epochs;
  try {
    train(model, tr, va, tc, hooks);
  } catch (const ReachedTarget& r) {
    epochs = r.epoch;
  }
  BatchGenerator again(samples, 8, false, 3);
  const MetricsAccumulator acc = accumulate_metrics(model_predictor(model), again);
  const double dice = acc.report().dice;
  const double loss = acc.loss(LossKind::Combined);
  c.expect(dice >= 0.95, "dice " + fmt(dice));
  c.expect(loss < 0.1, "loss " + fmt(loss));
  return c.outcome("train dice " + fmt(dice) + ", combined loss " + fmt(loss) + " after " +
                   std::to_string(epochs) + " epochs");
}

// ---------------------------------------------------------------------------------------
// 3. ablation

Outcome ablation() {
  constexpr int kCases = 20;
  constexpr Index kSize = 64;
  const auto phantoms = generate_phantom(77, kCases, {kSize, kSize, 16});
  std::vector<std::string> ids;
  for (const auto& p : phantoms) ids.push_back(p.volumes.id);
  const DatasetSplit split = split_dataset(ids, {}, {}, 42);

  auto samples_for = [&](const std::vector<std::string>& which, std::vector<Modality> modalities) {
    PipelineOptions opts;
    opts.window = default_phantom_window(16);
    opts.image_size = kSize;
    opts.modalities = std::move(modalities);
    auto out = std::make_shared<std::vector<SliceSample>>();
    for (const auto& p : phantoms) {
      if (std::find(which.begin(), which.end(), p.volumes.id) == which.end()) continue;
      auto s = preprocess_case(p.volumes, opts);
      out->insert(out->end(), s.begin(), s.end());
    }
    return out;
  };

  struct Variant {
    const char* name;
    std::vector<Modality> modalities;
    bool attention;
    double dice = 0;
    double tumour_dice = 0;  // mean over classes 1..3
  };
  std::vector<Variant> variants{{"dual+attention", {Modality::Flair, Modality::T1ce}, true},
                                {"flair+attention", {Modality::Flair}, true},
                                {"dual, no attention", {Modality::Flair, Modality::T1ce}, false}};
  for (auto& v : variants) {
    auto train_samples = samples_for(split.train, v.modalities);
    auto val_samples = samples_for(split.validation, v.modalities);
    ModelConfig mc;
    mc.in_channels = static_cast<int>(v.modalities.size());
    mc.attention = v.attention;
    mc.base_filters = 8;
    mc.seed = 11;
    TrainConfig tc;
    tc.learning_rate = 1e-3;
    tc.batch_size = 8;
    tc.max_epochs = 40;
    tc.early_stopping.enabled = false;
    AttentionUNet<float> model = build_model<float>(mc);
    AttentionUNet<float> best = model;
    TrainHooks hooks;
    hooks.on_improvement = [&](const AttentionUNet<float>& m, int) { best = m; };
    BatchGenerator tr(train_samples, tc.batch_size, true, 5), va(val_samples, 16, false, 5);
    train(model, tr, va, tc, hooks);
    BatchGenerator eval(val_samples, 16, false, 5);
    const MetricsReport r = evaluate(best, eval);
    v.dice = r.dice;
    v.tumour_dice = (r.per_class_dice[1] + r.per_class_dice[2] + r.per_class_dice[3]) / 3.0;
  }
  Checker c;
  c.expect(variants[0].dice >= variants[1].dice - 0.02, "dual vs single");
  c.expect(variants[0].dice >= variants[2].dice - 0.02, "attention on vs off");
  std::string summary = "validation dice:";
  for (const auto& v : variants) {
    summary += std::string(" ") + v.name + " " + fmt(v.dice, "%.4f") + " (tumour classes " +
               fmt(v.tumour_dice, "%.4f") + ");";
  }
  summary.pop_back();
  return c.outcome(summary);
}

// ---------------------------------------------------------------------------------------
// 4. metric oracle

Outcome metric_oracle_equivalence() {
  std::mt19937_64 rng(404);
  Checker c;
  for (int i = 0; i < 1000; ++i) {
    const LabelMap truth = random_labels(1, 16, 16, rng);
    LabelMap pred = random_labels(1, 16, 16, rng);
    // Mix in near-perfect and class-missing instances alongside uniform noise.
    if (i % 4 == 1) {
      pred = truth;
      pred[rng() % 256] = static_cast<std::int32_t>(rng() % 4);
    } else if (i % 4 == 2) {
      for (Index k = 0; k < pred.size(); ++k) pred[k] = pred[k] == 3 ? 0 : pred[k];
    }
    const std::string diff = compare_with_oracle(truth, pred, 1, 16, 16);
    c.expect(diff.empty(), "instance " + std::to_string(i) + ": " + diff);
  }
  return c.outcome("1000 random 16x16 instances");
}

// ---------------------------------------------------------------------------------------
// 5. structural invariants

Outcome structural_invariants() {
  Checker c;
  std::mt19937_64 rng(505);
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    const TensorF logits = random_tensor({2, 4, 8, 8}, rng, -30, 30).cast<float>();
    const TensorF p = kernels::softmax_channels(logits);
    for (Index n = 0; n < 2; ++n)
      for (Index y = 0; y < 8; ++y)
        for (Index x = 0; x < 8; ++x) {
          double s = 0;
          for (Index k = 0; k < 4; ++k) s += p(n, k, y, x);
          worst = std::max(worst, std::abs(s - 1.0));
        }
  }
  c.expect(worst <= 1e-6, "softmax sum error " + fmt(worst));

  for (int i = 0; i < 20; ++i) {
    LabelImage labels(12, 9);
    for (Index k = 0; k < labels.size(); ++k) labels.data()[k] = static_cast<std::int32_t>(rng() % 4);
    const TensorF hot = one_hot(labels, 4);
    const LabelMap back = kernels::argmax_channels(hot.reshaped({1, 4, 12, 9}));
    bool same = true;
    for (Index k = 0; k < labels.size(); ++k) same &= back[k] == labels.data()[k];
    c.expect(same, "one-hot/argmax round trip");
  }

  const auto standard = generate_phantom(9, 1, {32, 32, 155}).front().volumes;
  PipelineOptions opts;
  opts.image_size = 32;
  const auto samples = preprocess_case(standard, opts);
  c.expect(samples.size() == 100, "slices per volume " + std::to_string(samples.size()));
  c.expect(!samples.empty() && samples.front().z == 22 && samples.back().z == 121, "window 22..121");

  bool has_enhancing = false, four_survives = false;
  for (Index z = 0; z < 155; ++z) {
    const LabelImage m = remap_labels(axial_labels(standard.seg, z));
    four_survives |= (m == 4).any();
    has_enhancing |= (m == 3).any();
  }
  c.expect(!four_survives, "label 4 survived remapping");
  c.expect(has_enhancing, "no enhancing tumour after remap");
  return c.outcome("softmax sum error " + fmt(worst) + ", " + std::to_string(samples.size()) +
                   " slices from z 22");
}

// ---------------------------------------------------------------------------------------
// 6. grad-cam

struct Explained {
  std::string triptych;
  std::string csv;
};

Explained explain_once(const AttentionUNet<float>& model, const TensorF& input, const Image& gray,
                       const fs::path& dir) {
  fs::create_directories(dir);
  GradCamConfig cfg;
  const Heatmap cam = normalize_heatmap(gradcam(model, input, cfg).heatmap);
  const Heatmap heat = gaussian_smooth(resize_heatmap(cam, gray.rows(), gray.cols()), cfg.sigma);
  render_triptych(gray, heat, overlay(gray, heat, cfg.alpha), dir);
  write_heatmap_csv(heat, dir / "heatmap.csv");
  return {read_bytes(dir / "triptych.ppm"), read_bytes(dir / "heatmap.csv")};
}

Outcome gradcam_properties() {
  Checker c;
  ModelConfig mc;
  mc.depth = 3;
  mc.base_filters = 4;
  mc.seed = 66;
  const AttentionUNet<double> model = build_model<double>(mc);
  std::mt19937_64 rng(606);
  int zero_maps = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const TensorD x = random_tensor({1, 2, 32, 32}, rng, 0, 1);
    for (bool masked : {false, true}) {
      GradCamConfig cfg;
      cfg.masked = masked;
      const Heatmap raw = gradcam(model, x, cfg).heatmap;
      c.expect((raw.values >= 0).all(), "negative heatmap value");
      const Heatmap n = normalize_heatmap(raw);
      const double mx = n.values.maxCoeff();
      if (mx == 0) ++zero_maps;
      c.expect(mx == 1.0 || (n.values == 0).all(), "normalized max " + fmt(mx));
      for (double s : {0.5, 2.0, 8.0, 3.0}) {
        cfg.score_scale = s;
        const Heatmap scaled = normalize_heatmap(gradcam(model, x, cfg).heatmap);
        const bool bitwise = (scaled.values == n.values).all();
        // Powers of two scale every intermediate exactly; other factors round.
        if (s != 3.0) {
          c.expect(bitwise, "not bitwise invariant under scale " + fmt(s));
        } else {
          c.expect((scaled.values - n.values).abs().maxCoeff() <= 1e-12, "scale 3 drift");
        }
      }
    }
  }
  for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
    Heatmap flat{ImageOf<double>::Constant(40, 33, 0.42), false};
    const double err = (gaussian_smooth(flat, sigma).values - 0.42).abs().maxCoeff();
    c.expect(err <= 1e-6, "smoothing constant error " + fmt(err));
  }

  TempDir dir("aunet-accept-cam");
  const AttentionUNet<float> fmodel = model.cast<float>();
  const TensorF input = random_tensor({1, 2, 32, 32}, rng, 0, 1).cast<float>();
  Image gray = Eigen::Map<const Image>(input.data(), 32, 32);
  const Explained a = explain_once(fmodel, input, gray, dir / "a");
  const Explained b = explain_once(fmodel, input, gray, dir / "b");
  c.expect(!a.triptych.empty() && a.triptych == b.triptych, "triptych differs across runs");
  c.expect(!a.csv.empty() && a.csv == b.csv, "heatmap csv differs across runs");
  return c.outcome("10 maps, scale invariance bitwise for powers of two, reruns identical" +
                   std::string(zero_maps ? ", " + std::to_string(zero_maps) + " all-zero" : ""));
}

// ---------------------------------------------------------------------------------------
// 7. callbacks

Outcome callback_traces() {
  Checker c;
  {
    // factor 0.2, patience 2, min_lr 1e-7, min_delta 1e-4
    PlateauSchedule p;
    p.patience = 2;
    PlateauState s;
    const std::vector<double> losses{1.0, 0.8, 0.8, 0.8, 0.79995, 0.7, 0.7, 0.7, 0.7, 0.7, 0.7};
    const std::vector<double> expected{1e-3, 1e-3, 1e-3, 2e-4, 2e-4, 2e-4, 2e-4, 4e-5,
                                       4e-5, 8e-6, 8e-6};
    double lr = 1e-3;
    for (std::size_t i = 0; i < losses.size(); ++i) {
      lr = plateau_update(s, losses[i], lr, p);
      c.expect(std::abs(lr - expected[i]) <= 1e-15, "plateau epoch " + std::to_string(i + 1));
    }
    PlateauState floor_state;
    double tiny = 3e-7;
    p.patience = 1;
    for (int i = 0; i < 6; ++i) tiny = plateau_update(floor_state, 1.0, tiny, p);
    c.expect(tiny == p.min_lr, "plateau floor");
  }
  {
    // patience 3: improvements at 1, 2, 5; stop on the third stale epoch after 5.
    EarlyStopState s;
    const std::vector<double> losses{1.0, 0.9, 0.95, 0.9, 0.85, 0.86, 0.85, 0.8501, 0.7};
    const std::vector<bool> stop{false, false, false, false, false, false, false, true};
    for (std::size_t i = 0; i < stop.size(); ++i) {
      const bool stopped = early_stop_update(s, losses[i], 3) == StopDecision::Stop;
      c.expect(stopped == stop[i], "early stop epoch " + std::to_string(i + 1));
    }
    c.expect(s.best_epoch == 5, "best epoch " + std::to_string(s.best_epoch));
  }
  {
    PipelineOptions opts;
    opts.window = default_phantom_window(8);
    opts.image_size = 16;
    auto samples = std::make_shared<std::vector<SliceSample>>(
        preprocess_case(generate_phantom(3, 1, {32, 32, 8}).front().volumes, opts));
    ModelConfig mc;
    mc.depth = 2;
    mc.base_filters = 2;
    TrainConfig tc;
    tc.max_epochs = 40;
    tc.batch_size = 4;
    tc.learning_rate = 0.05;
    tc.plateau.enabled = false;
    tc.early_stopping.patience = 2;
    tc.min_delta = 0.05;
    AttentionUNet<float> m = build_model<float>(mc);
    std::optional<ParameterSet<float>> snapshot;
    int snapshot_epoch = 0;
    TrainHooks hooks;
    hooks.on_improvement = [&](const AttentionUNet<float>& cur, int epoch) {
      snapshot = cur.params;
      snapshot_epoch = epoch;
    };
    BatchGenerator tr(samples, 4, true, 4), va(samples, 4, false, 4);
    const TrainResult r = train(m, tr, va, tc, hooks);
    c.expect(r.stopped_early, "training did not stop early");
    c.expect(snapshot.has_value() && m.params == *snapshot, "weights not restored to best epoch");
    c.expect(snapshot_epoch == r.best_epoch, "snapshot epoch");
    c.expect(r.history.size() == static_cast<std::size_t>(r.best_epoch + 2), "stop epoch");
  }
  return c.outcome("plateau and early-stop traces, restoration after early stop");
}

// ---------------------------------------------------------------------------------------
// 8. persistence

Outcome persistence() {
  Checker c;
  TempDir dir("aunet-accept-io");
  ModelConfig mc;
  mc.depth = 3;
  mc.base_filters = 4;
  mc.seed = 88;
  const AttentionUNet<float> m = build_model<float>(mc);
  save_weights(m, dir / "a.weights");
  const AttentionUNet<float> back = load_weights<float>(dir / "a.weights", mc);
  c.expect(back.params == m.params, "weights differ after load");
  save_weights(back, dir / "b.weights");
  c.expect(read_bytes(dir / "a.weights") == read_bytes(dir / "b.weights"), "weights bytes differ");

  std::mt19937_64 rng(808);
  Volume v;
  v.dims = {5, 4, 3};
  v.voxels = Eigen::ArrayXf::Random(60) * 1000.0f;
  for (bool big : {false, true}) {
    const std::string tag = big ? "big" : "little";
    write_nifti(dir / (tag + ".nii"), v, NiftiDatatype::Float32, big);
    const Volume r = read_nifti(dir / (tag + ".nii"));
    c.expect(r.dims == v.dims && (r.voxels == v.voxels).all(), "library round trip " + tag);

    NiftiFixture f({5, 4, 3}, big);
    for (Index i = 0; i < 60; ++i) f.append(v.voxels[i]);
    f.write(dir / (tag + "_fixture.nii"));
    const Volume rf = read_nifti(dir / (tag + "_fixture.nii"));
    c.expect(rf.dims == v.dims && (rf.voxels == v.voxels).all(), "fixture round trip " + tag);
  }
  Volume labels = v;
  labels.voxels = (v.voxels.abs() / 300.0f).floor();
  write_nifti(dir / "labels.nii", labels, NiftiDatatype::Int16, true);
  c.expect((read_nifti(dir / "labels.nii").voxels == labels.voxels).all(), "int16 round trip");

  History h;
  std::uniform_real_distribution<double> u(0, 2);
  for (int e = 1; e <= 25; ++e) h.push_back({e, u(rng), u(rng), u(rng) / 2, u(rng) / 2, 1e-4 / e, 0});
  write_history_csv(h, dir / "h.csv");
  const History hb = read_history_csv(dir / "h.csv");
  c.expect(hb.size() == h.size(), "history rows");
  for (std::size_t i = 0; i < std::min(h.size(), hb.size()); ++i) {
    const auto close = [](double a, double b) { return std::abs(a - b) <= 5e-6 * std::abs(a); };
    c.expect(hb[i].epoch == h[i].epoch && close(h[i].train_loss, hb[i].train_loss) &&
                 close(h[i].val_loss, hb[i].val_loss) && close(h[i].train_dice, hb[i].train_dice) &&
                 close(h[i].val_dice, hb[i].val_dice) && close(h[i].lr, hb[i].lr),
             "history row " + std::to_string(i + 1));
  }
  write_history_csv(hb, dir / "h2.csv");
  c.expect(read_bytes(dir / "h.csv") == read_bytes(dir / "h2.csv"), "history rewrite differs");
  return c.outcome("weights bitwise, NIfTI both byte orders, history CSV stable");
}

// ---------------------------------------------------------------------------------------
// 9. determinism

int cli(std::vector<std::string> args, std::string* err = nullptr) {
  args.insert(args.begin(), "aunet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, e;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, e);
  if (err) *err = e.str();
  return code;
}

Outcome determinism() {
  Checker c;
  TempDir dir("aunet-accept-det");
  std::string err;
  const int gen = cli({"gen-phantom", "--out", (dir / "data").string(), "--cases", "7", "--seed",
                       "21", "--dims", "32,32,16"},
                      &err);
  c.expect(gen == kExitOk, "gen-phantom: " + err);
  for (const char* run : {"run1", "run2"}) {
    const nlohmann::json doc{
        {"data", {{"root", (dir / "data").string()}, {"slice_start", 4}, {"slice_count", 8}, {"image_size", 32}}},
        {"model", {{"depth", 2}, {"base_filters", 4}, {"seed", 3}}},
        {"train", {{"batch_size", 4}, {"max_epochs", 4}, {"learning_rate", 1e-3}, {"seed", 9}}},
        {"output_dir", (dir / run).string()}};
    const fs::path cfg = dir / (std::string(run) + ".json");
    std::ofstream(cfg) << doc.dump(2);
    const int code = cli({"train", "--config", cfg.string()}, &err);
    c.expect(code == kExitOk, std::string(run) + ": " + err);
  }
  for (const char* f : {"history.csv", "best.weights", "final.weights"}) {
    const std::string a = read_bytes(dir / "run1" / f);
    c.expect(!a.empty() && a == read_bytes(dir / "run2" / f), std::string(f) + " differs");
  }
  return c.outcome("two train runs, history.csv and weights byte-identical");
}

}  // namespace

int main(int argc, char** argv) {
  using Criterion = Outcome (*)();
  const std::vector<Criterion> criteria{gradient_suite,        overfit,           ablation,
                                        metric_oracle_equivalence, structural_invariants,
                                        gradcam_properties,    callback_traces,   persistence,
                                        determinism};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  bool all_pass = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all_pass &= o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " (" << fmt(secs, "%.1f")
              << " s) " << o.detail << std::endl;
  }
  return all_pass ? 0 : 1;
}
