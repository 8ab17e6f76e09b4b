#include "aunet/run_config.hpp"

#include <fstream>
#include <set>

namespace aunet {

using nlohmann::json;

PipelineOptions RunConfig::pipeline() const {
  PipelineOptions p;
  p.window = data.window;
  p.image_size = data.image_size;
  p.modalities = data.modalities;
  p.remap = data.remap;
  p.num_classes = model.num_classes;
  return p;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (data.root.empty()) fail("data.root is required");
  if (data.modalities.empty()) fail("data.modalities must not be empty");
  if (std::set<Modality>(data.modalities.begin(), data.modalities.end()).size() !=
      data.modalities.size()) {
    fail("data.modalities has duplicates");
  }
  if (data.window.start < 0 || data.window.count < 1) fail("data.slice_start/slice_count invalid");
  if (data.image_size < 1) fail("data.image_size must be positive");
  const SplitRatios& r = data.split;
  if (r.train < 0 || r.validation < 0 || r.test < 0 ||
      std::abs(r.train + r.validation + r.test - 1.0) > 1e-9) {
    fail("data.split_ratios must be non-negative and sum to 1");
  }
  if (model.num_classes != 4) fail("model.num_classes must be 4 (labels 0..3)");
  if (static_cast<int>(data.modalities.size()) != model.in_channels) {
    fail("model.in_channels must equal the number of modalities");
  }
  try {
    model.validate();
    train.validate();
    gradcam.validate(model.num_classes);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (data.image_size % (Index(1) << model.depth) != 0) {
    fail("data.image_size must be divisible by 2^model.depth");
  }
  if (output_dir.empty()) fail("output_dir is required");
}

namespace {

void check_keys(const json& obj, const std::string& section, std::set<std::string> allowed) {
  if (!obj.is_object()) throw ConfigError(section + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + (section.empty() ? key : section + "." + key) + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& section) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(section + "." + key + " has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.empty() || p.is_absolute()) return p;
  return std::filesystem::absolute(base / p).lexically_normal();
}

}  // namespace

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig c;
  check_keys(doc, "", {"data", "model", "train", "gradcam", "output_dir"});

  if (doc.contains("data")) {
    const json& d = doc["data"];
    const std::string s = "data";
    check_keys(d, s,
               {"root", "modalities", "slice_start", "slice_count", "image_size", "split_ratios",
                "exclusions", "split_seed", "label_remap"});
    std::string root;
    read(d, "root", root, s);
    c.data.root = root;
    if (d.contains("modalities")) {
      std::vector<std::string> names;
      read(d, "modalities", names, s);
      c.data.modalities.clear();
      for (const auto& n : names) {
        try {
          c.data.modalities.push_back(parse_modality(n));
        } catch (const std::exception& e) {
          throw ConfigError(std::string("data.modalities: ") + e.what());
        }
      }
    }
    read(d, "slice_start", c.data.window.start, s);
    read(d, "slice_count", c.data.window.count, s);
    read(d, "image_size", c.data.image_size, s);
    if (d.contains("split_ratios")) {
      const json& r = d["split_ratios"];
      check_keys(r, "data.split_ratios", {"train", "validation", "test"});
      read(r, "train", c.data.split.train, "data.split_ratios");
      read(r, "validation", c.data.split.validation, "data.split_ratios");
      read(r, "test", c.data.split.test, "data.split_ratios");
    }
    read(d, "exclusions", c.data.exclusions, s);
    read(d, "split_seed", c.data.split_seed, s);
    if (d.contains("label_remap")) {
      const json& r = d["label_remap"];
      check_keys(r, "data.label_remap", {"from", "to"});
      read(r, "from", c.data.remap.from, "data.label_remap");
      read(r, "to", c.data.remap.to, "data.label_remap");
    }
  }

  if (doc.contains("model")) {
    const json& m = doc["model"];
    const std::string s = "model";
    check_keys(m, s, {"num_classes", "depth", "base_filters", "attention", "seed"});
    read(m, "num_classes", c.model.num_classes, s);
    read(m, "depth", c.model.depth, s);
    read(m, "base_filters", c.model.base_filters, s);
    read(m, "attention", c.model.attention, s);
    read(m, "seed", c.model.seed, s);
  }
  c.model.in_channels = static_cast<int>(c.data.modalities.size());

  if (doc.contains("train")) {
    const json& t = doc["train"];
    const std::string s = "train";
    check_keys(t, s,
               {"learning_rate", "batch_size", "max_epochs", "loss", "dice_epsilon", "min_delta",
                "early_stopping", "plateau", "seed", "record_wall_time"});
    read(t, "learning_rate", c.train.learning_rate, s);
    read(t, "batch_size", c.train.batch_size, s);
    read(t, "max_epochs", c.train.max_epochs, s);
    if (t.contains("loss")) {
      std::string loss;
      read(t, "loss", loss, s);
      try {
        c.train.loss = parse_loss_kind(loss);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("train.loss: ") + e.what());
      }
    }
    read(t, "dice_epsilon", c.train.dice_epsilon, s);
    read(t, "min_delta", c.train.min_delta, s);
    if (t.contains("early_stopping")) {
      const json& e = t["early_stopping"];
      check_keys(e, "train.early_stopping", {"enabled", "patience"});
      read(e, "enabled", c.train.early_stopping.enabled, "train.early_stopping");
      read(e, "patience", c.train.early_stopping.patience, "train.early_stopping");
    }
    if (t.contains("plateau")) {
      const json& p = t["plateau"];
      const std::string ps = "train.plateau";
      check_keys(p, ps, {"enabled", "factor", "patience", "min_lr"});
      read(p, "enabled", c.train.plateau.enabled, ps);
      read(p, "factor", c.train.plateau.factor, ps);
      read(p, "patience", c.train.plateau.patience, ps);
      read(p, "min_lr", c.train.plateau.min_lr, ps);
    }
    read(t, "seed", c.train.seed, s);
    read(t, "record_wall_time", c.train.record_wall_time, s);
  }

  if (doc.contains("gradcam")) {
    const json& g = doc["gradcam"];
    const std::string s = "gradcam";
    check_keys(g, s, {"classes", "masked", "sigma", "alpha"});
    read(g, "classes", c.gradcam.target_classes, s);
    read(g, "masked", c.gradcam.masked, s);
    read(g, "sigma", c.gradcam.sigma, s);
    read(g, "alpha", c.gradcam.alpha, s);
  }
  c.gradcam.output_size = c.data.image_size;

  if (doc.contains("output_dir")) {
    std::string out;
    read(doc, "output_dir", out, "");
    c.output_dir = out;
  }
  c.data.root = resolve(c.data.root, base_dir);
  c.output_dir = resolve(c.output_dir, base_dir);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(doc, std::filesystem::absolute(path).parent_path());
}

json to_json(const RunConfig& c) {
  json modalities = json::array();
  for (Modality m : c.data.modalities) modalities.push_back(to_string(m));
  return json{
      {"data",
       {{"root", std::filesystem::absolute(c.data.root).string()},
        {"modalities", modalities},
        {"slice_start", c.data.window.start},
        {"slice_count", c.data.window.count},
        {"image_size", c.data.image_size},
        {"split_ratios",
         {{"train", c.data.split.train},
          {"validation", c.data.split.validation},
          {"test", c.data.split.test}}},
        {"exclusions", c.data.exclusions},
        {"split_seed", c.data.split_seed},
        {"label_remap", {{"from", c.data.remap.from}, {"to", c.data.remap.to}}}}},
      {"model",
       {{"num_classes", c.model.num_classes},
        {"depth", c.model.depth},
        {"base_filters", c.model.base_filters},
        {"attention", c.model.attention},
        {"seed", c.model.seed}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"batch_size", c.train.batch_size},
        {"max_epochs", c.train.max_epochs},
        {"loss", to_string(c.train.loss)},
        {"dice_epsilon", c.train.dice_epsilon},
        {"min_delta", c.train.min_delta},
        {"early_stopping",
         {{"enabled", c.train.early_stopping.enabled},
          {"patience", c.train.early_stopping.patience}}},
        {"plateau",
         {{"enabled", c.train.plateau.enabled},
          {"factor", c.train.plateau.factor},
          {"patience", c.train.plateau.patience},
          {"min_lr", c.train.plateau.min_lr}}},
        {"seed", c.train.seed},
        {"record_wall_time", c.train.record_wall_time}}},
      {"gradcam",
       {{"classes", c.gradcam.target_classes},
        {"masked", c.gradcam.masked},
        {"sigma", c.gradcam.sigma},
        {"alpha", c.gradcam.alpha}}},
      {"output_dir", std::filesystem::absolute(c.output_dir).string()},
  };
}

}  // namespace aunet
