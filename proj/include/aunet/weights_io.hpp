#ifndef AUNET_WEIGHTS_IO_HPP
#define AUNET_WEIGHTS_IO_HPP

#include "aunet/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace aunet {

// Weights file layout, all integers little-endian:
//   "AUNETWT1"                          8 bytes
//   format version                      u32
//   in_channels, num_classes, depth,
//   base_filters, attention flag        u32 each
//   parameter count                     u32
//   per parameter:
//     name length u16, UTF-8 name, rank u8, extents u32 * rank, float32 * size

inline constexpr char kWeightsMagic[8] = {'A', 'U', 'N', 'E', 'T', 'W', 'T', '1'};
inline constexpr std::uint32_t kWeightsVersion = 1;

enum class WeightsErrorKind {
  Io,
  MagicMismatch,
  VersionMismatch,
  Truncated,
  UnknownParameter,
  DuplicateParameter,
  MissingParameter,
  ShapeMismatch,
  ConfigMismatch,
};

class WeightsError : public std::runtime_error {
 public:
  WeightsError(WeightsErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  WeightsErrorKind kind() const { return kind_; }

 private:
  WeightsErrorKind kind_;
};

/// Parameters are stored as float32 regardless of Scalar.
template <typename Scalar>
void save_weights(const AttentionUNet<Scalar>& model, const std::filesystem::path& path);

/// Reads a weights file. The returned config carries the stored topology (seed 0).
/// When `expected` is given its topology must match the file's.
template <typename Scalar = float>
AttentionUNet<Scalar> load_weights(const std::filesystem::path& path,
                                   const std::optional<ModelConfig>& expected = std::nullopt);

}  // namespace aunet

#endif  // AUNET_WEIGHTS_IO_HPP
