#include "aunet/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <vector>

namespace aunet {
namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <typename U>
  void le(U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      buf_.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
    }
  }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : data_(std::move(data)) {}

  const char* take(std::size_t n, const char* what) {
    if (pos_ + n > data_.size()) {
      throw WeightsError(WeightsErrorKind::Truncated,
                         std::string("weights file truncated while reading ") + what);
    }
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename U>
  U le(const char* what) {
    const auto* p = reinterpret_cast<const unsigned char*>(take(sizeof(U), what));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return static_cast<U>(v);
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::vector<char> data_;
  std::size_t pos_ = 0;
};

}  // namespace

template <typename Scalar>
void save_weights(const AttentionUNet<Scalar>& model, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kWeightsMagic, sizeof(kWeightsMagic));
  w.le<std::uint32_t>(kWeightsVersion);
  const ModelConfig& c = model.config;
  w.le<std::uint32_t>(static_cast<std::uint32_t>(c.in_channels));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(c.num_classes));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(c.depth));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(c.base_filters));
  w.le<std::uint32_t>(c.attention ? 1u : 0u);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(model.params.size()));
  for (const auto& e : model.params) {
    w.le<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.le<std::uint8_t>(static_cast<std::uint8_t>(e.value.rank()));
    for (Index d : e.value.shape()) w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (Index i = 0; i < e.value.size(); ++i) w.f32(static_cast<float>(e.value[i]));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WeightsError(WeightsErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw WeightsError(WeightsErrorKind::Io, "failed writing " + path.string());
}

template <typename Scalar>
AttentionUNet<Scalar> load_weights(const std::filesystem::path& path,
                                   const std::optional<ModelConfig>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightsError(WeightsErrorKind::Io, "cannot open " + path.string());
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

  if (std::memcmp(r.take(8, "magic"), kWeightsMagic, 8) != 0) {
    throw WeightsError(WeightsErrorKind::MagicMismatch,
                       path.string() + " is not a weights file (magic mismatch)");
  }
  const auto version = r.le<std::uint32_t>("version");
  if (version != kWeightsVersion) {
    throw WeightsError(WeightsErrorKind::VersionMismatch,
                       "unsupported weights format version " + std::to_string(version));
  }
  ModelConfig config;
  config.in_channels = static_cast<int>(r.le<std::uint32_t>("in_channels"));
  config.num_classes = static_cast<int>(r.le<std::uint32_t>("num_classes"));
  config.depth = static_cast<int>(r.le<std::uint32_t>("depth"));
  config.base_filters = static_cast<int>(r.le<std::uint32_t>("base_filters"));
  config.attention = r.le<std::uint32_t>("attention flag") != 0;
  config.seed = 0;
  if (expected && !expected->same_topology(config)) {
    throw WeightsError(WeightsErrorKind::ConfigMismatch,
                       "weights in " + path.string() + " were saved for a different model "
                       "configuration");
  }
  AttentionUNet<Scalar> model{config, parameter_layout<Scalar>(config)};
  std::set<std::string> seen;
  const auto count = r.le<std::uint32_t>("parameter count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.le<std::uint16_t>("parameter name length");
    const std::string name(r.take(len, "parameter name"), len);
    Tensor<Scalar>* target = model.params.find(name);
    if (!target) {
      throw WeightsError(WeightsErrorKind::UnknownParameter, "unknown parameter '" + name + "'");
    }
    if (!seen.insert(name).second) {
      throw WeightsError(WeightsErrorKind::DuplicateParameter,
                         "parameter '" + name + "' appears twice");
    }
    const auto rank = r.le<std::uint8_t>("rank");
    Shape shape;
    for (std::uint8_t d = 0; d < rank; ++d) shape.push_back(r.le<std::uint32_t>("extent"));
    if (shape != target->shape()) {
      throw WeightsError(WeightsErrorKind::ShapeMismatch,
                         "parameter '" + name + "' stored as " + shape_string(shape) +
                             " but the model expects " + shape_string(target->shape()));
    }
    for (Index k = 0; k < target->size(); ++k) {
      (*target)[k] = static_cast<Scalar>(std::bit_cast<float>(r.le<std::uint32_t>("values")));
    }
  }
  for (const auto& e : model.params) {
    if (!seen.count(e.name)) {
      throw WeightsError(WeightsErrorKind::MissingParameter,
                         "weights file is missing parameter '" + e.name + "'");
    }
  }
  if (!r.done()) {
    throw WeightsError(WeightsErrorKind::Truncated, "unexpected trailing bytes in " + path.string());
  }
  return model;
}

template void save_weights(const AttentionUNet<float>&, const std::filesystem::path&);
template void save_weights(const AttentionUNet<double>&, const std::filesystem::path&);
template AttentionUNet<float> load_weights<float>(const std::filesystem::path&,
                                                  const std::optional<ModelConfig>&);
template AttentionUNet<double> load_weights<double>(const std::filesystem::path&,
                                                    const std::optional<ModelConfig>&);

}  // namespace aunet
