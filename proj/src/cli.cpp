#include "aunet/cli.hpp"

#include "aunet/phantom.hpp"
#include "aunet/run_config.hpp"
#include "aunet/weights_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace aunet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Invalid input detected before any output exists; maps to exit 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

std::array<Index, 3> parse_dims(const std::string& text) {
  std::array<Index, 3> dims{};
  std::istringstream in(text);
  std::string part;
  std::size_t n = 0;
  while (std::getline(in, part, ',')) {
    if (n == 3) throw UsageError("--dims expects X,Y,Z");
    try {
      std::size_t used = 0;
      dims[n] = std::stoll(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError("--dims: '" + part + "' is not an integer");
    }
    ++n;
  }
  if (n != 3) throw UsageError("--dims expects X,Y,Z");
  return dims;
}

void require_data_root(const RunConfig& config) {
  if (!fs::is_directory(config.data.root)) {
    throw UsageError("data root does not exist: " + config.data.root.string());
  }
}

/// Cases of the configured split, indexed by id.
struct LoadedData {
  DatasetSplit split;
  std::map<std::string, CaseRecord> records;
};

LoadedData discover(const RunConfig& config) {
  require_data_root(config);
  LoadedData d;
  std::vector<std::string> ids;
  for (auto& r : discover_cases(config.data.root)) {
    ids.push_back(r.id);
    d.records.emplace(r.id, std::move(r));
  }
  if (ids.empty()) throw UsageError("no cases found under " + config.data.root.string());
  d.split = split_dataset(ids, config.data.exclusions, config.data.split, config.data.split_seed);
  return d;
}

std::shared_ptr<const std::vector<SliceSample>> load_samples(const RunConfig& config,
                                                             const LoadedData& data,
                                                             const std::vector<std::string>& ids,
                                                             const std::string& split_name) {
  if (ids.empty()) throw UsageError("the " + split_name + " split is empty");
  auto samples = std::make_shared<std::vector<SliceSample>>();
  const PipelineOptions opts = config.pipeline();
  for (const auto& id : ids) {
    try {
      auto s = preprocess_case(load_case(data.records.at(id)), opts);
      samples->insert(samples->end(), std::make_move_iterator(s.begin()),
                      std::make_move_iterator(s.end()));
    } catch (const std::exception& e) {
      throw UsageError("case " + id + ": " + e.what());
    }
  }
  return samples;
}

const std::vector<std::string>& split_ids(const DatasetSplit& split, const std::string& name) {
  if (name == "train") return split.train;
  if (name == "val") return split.validation;
  if (name == "test") return split.test;
  throw UsageError("--split must be train, val or test, got '" + name + "'");
}

AttentionUNet<float> load_compatible_weights(const fs::path& path, const ModelConfig& config) {
  if (!fs::is_regular_file(path)) throw UsageError("weights file not found: " + path.string());
  try {
    return load_weights<float>(path, config);
  } catch (const WeightsError& e) {
    throw UsageError(e.what());
  }
}

int cmd_gen_phantom(const fs::path& out_dir, int cases, std::uint64_t seed,
                    const std::string& dims_text, std::ostream& out) {
  const auto dims = parse_dims(dims_text);
  std::vector<PhantomCase> phantoms;
  try {
    phantoms = generate_phantom(seed, cases, dims);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw UsageError("cannot create output directory " + out_dir.string());
  }
  const fs::path probe = out_dir / ".aunet-write-probe";
  if (!std::ofstream(probe)) throw UsageError("output directory is not writable: " + out_dir.string());
  fs::remove(probe);
  for (const auto& c : phantoms) {
    write_phantom_case(out_dir, c);
    out << c.volumes.id << ' ' << (out_dir / c.volumes.id).string() << '\n';
  }
  return kExitOk;
}

int cmd_train(const fs::path& config_path, std::ostream& out, std::ostream& err) {
  const RunConfig config = load_run_config(config_path);
  const LoadedData data = discover(config);
  auto train_samples = load_samples(config, data, data.split.train, "train");
  auto val_samples = load_samples(config, data, data.split.validation, "validation");

  BatchGenerator train_batches(train_samples, config.train.batch_size, true, config.train.seed);
  BatchGenerator val_batches(val_samples, config.train.batch_size, false, config.train.seed);
  AttentionUNet<float> model = build_model<float>(config.model);

  fs::create_directories(config.output_dir);
  write_text(config.output_dir / "config.resolved.json", to_json(config).dump(2) + "\n");
  const fs::path best_path = config.output_dir / "best.weights";
  const fs::path history_path = config.output_dir / "history.csv";

  History history;
  TrainHooks hooks;
  hooks.on_epoch = [&](const HistoryRow& row) {
    history.push_back(row);
    write_history_csv(history, history_path);
    out << "epoch " << row.epoch << " train_loss " << format_real(row.train_loss) << " val_loss "
        << format_real(row.val_loss) << " train_dice " << format_real(row.train_dice)
        << " val_dice " << format_real(row.val_dice) << " lr " << row.lr << std::endl;
  };
  hooks.on_improvement = [&](const AttentionUNet<float>& m, int) { save_weights(m, best_path); };
  try {
    const TrainResult result = train(model, train_batches, val_batches, config.train, hooks);
    write_history_csv(result.history, history_path);
    if (!fs::exists(best_path)) save_weights(model, best_path);
    save_weights(model, config.output_dir / "final.weights");
    if (result.stopped_early) {
      out << "stopped early; best epoch " << result.best_epoch << " val_loss "
          << format_real(result.best_val_loss) << '\n';
    }
  } catch (const DivergedTraining& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

json report_json(const MetricsReport& r) {
  return json{{"dice", r.dice},
              {"mean_iou", r.mean_iou},
              {"categorical_accuracy", r.categorical_accuracy},
              {"sensitivity", r.sensitivity},
              {"specificity", r.specificity},
              {"per_class_dice", r.per_class_dice}};
}

int cmd_evaluate(const fs::path& config_path, const fs::path& weights_path,
                 const std::string& split_name, std::ostream& out) {
  const RunConfig config = load_run_config(config_path);
  const LoadedData data = discover(config);
  const auto& ids = split_ids(data.split, split_name);
  const AttentionUNet<float> model = load_compatible_weights(weights_path, config.model);
  auto samples = load_samples(config, data, ids, split_name);
  BatchGenerator batches(samples, config.train.batch_size, false, config.train.seed);
  const MetricsReport r = evaluate(model, batches, config.train.dice_epsilon);

  out << "split " << split_name << " (" << ids.size() << " cases, " << samples->size()
      << " slices)\n";
  out << "dice " << format_real(r.dice) << "\nmean_iou " << format_real(r.mean_iou)
      << "\ncategorical_accuracy " << format_real(r.categorical_accuracy) << "\nsensitivity "
      << format_real(r.sensitivity) << "\nspecificity " << format_real(r.specificity)
      << "\nper_class_dice";
  for (double d : r.per_class_dice) out << ' ' << format_real(d);
  out << '\n' << report_json(r).dump() << '\n';
  return kExitOk;
}

int cmd_explain(const fs::path& config_path, const fs::path& weights_path, const std::string& case_id,
                Index z, const std::optional<int>& target_class, const fs::path& out_dir,
                std::ostream& out) {
  RunConfig config = load_run_config(config_path);
  if (target_class) config.gradcam.target_classes = {*target_class};
  try {
    config.gradcam.validate(config.model.num_classes);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  require_data_root(config);
  const auto records = discover_cases(config.data.root);
  const auto it = std::find_if(records.begin(), records.end(),
                               [&](const CaseRecord& r) { return r.id == case_id; });
  if (it == records.end()) throw UsageError("case not found: " + case_id);
  const AttentionUNet<float> model = load_compatible_weights(weights_path, config.model);

  SliceSample sample;
  try {
    sample = preprocess_slice(load_case(*it), z, config.pipeline());
  } catch (const RangeError& e) {
    throw UsageError(e.what());
  }
  const Index size = config.data.image_size;
  const TensorF input = sample.image.reshaped({1, sample.image.dim(0), size, size});
  const GradCamResult cam = gradcam(model, input, config.gradcam);
  Heatmap heat = resize_heatmap(normalize_heatmap(cam.heatmap), size, size);
  heat = gaussian_smooth(heat, config.gradcam.sigma);
  const Image original = Eigen::Map<const Image>(sample.image.data(), size, size);
  const RgbImage blended = overlay(original, heat, config.gradcam.alpha);

  fs::create_directories(out_dir);
  render_triptych(original, heat, blended, out_dir);
  write_heatmap_csv(heat, out_dir / "heatmap.csv");
  const json meta{{"layer", cam.layer},
                  {"classes", config.gradcam.target_classes},
                  {"masked", config.gradcam.masked},
                  {"sigma", config.gradcam.sigma},
                  {"alpha", config.gradcam.alpha},
                  {"case", case_id},
                  {"slice", z},
                  {"background_modality", to_string(config.data.modalities.front())},
                  {"feature_map_size", {cam.heatmap.values.rows(), cam.heatmap.values.cols()}},
                  {"output_size", {size, size}}};
  write_text(out_dir / "metadata.json", meta.dump(2) + "\n");
  out << "wrote explanation of " << case_id << " slice " << z << " to " << out_dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attention U-Net brain tumour segmentation", "aunet"};
  app.require_subcommand(1);

  fs::path out_dir;
  int cases = 1;
  std::uint64_t seed = 1;
  std::string dims = "64,64,32";
  auto* gen = app.add_subcommand("gen-phantom", "write synthetic NIfTI cases");
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--cases", cases, "number of cases")->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--dims", dims, "volume size X,Y,Z (X,Y >= 32)");

  fs::path config_path;
  auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
  train_cmd->add_option("--config", config_path, "run config JSON")->required();

  fs::path weights_path;
  std::string split_name = "test";
  auto* eval_cmd = app.add_subcommand("evaluate", "report metrics on a split");
  eval_cmd->add_option("--config", config_path, "run config JSON")->required();
  eval_cmd->add_option("--weights", weights_path, "weights file")->required();
  eval_cmd->add_option("--split", split_name, "train, val or test");

  std::string case_id;
  Index z = 0;
  std::optional<int> target_class;
  auto* explain_cmd = app.add_subcommand("explain", "Grad-CAM explanation of one slice");
  explain_cmd->add_option("--config", config_path, "run config JSON")->required();
  explain_cmd->add_option("--weights", weights_path, "weights file")->required();
  explain_cmd->add_option("--case", case_id, "case id")->required();
  explain_cmd->add_option("--slice", z, "absolute axial slice index")->required();
  explain_cmd->add_option("--class", target_class, "single target class (default: gradcam.classes)");
  explain_cmd->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_phantom(out_dir, cases, seed, dims, out);
    if (*train_cmd) return cmd_train(config_path, out, err);
    if (*eval_cmd) return cmd_evaluate(config_path, weights_path, split_name, out);
    if (*explain_cmd) {
      return cmd_explain(config_path, weights_path, case_id, z, target_class, out_dir, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int run_cli(int argc, const char* const* argv) { return run_cli(argc, argv, std::cout, std::cerr); }

}  // namespace aunet
