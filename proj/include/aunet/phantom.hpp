#ifndef AUNET_PHANTOM_HPP
#define AUNET_PHANTOM_HPP

#include "aunet/dataset.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace aunet {

/// Axis-aligned ellipsoid in voxel coordinates.
struct Ellipsoid {
  std::array<double, 3> center{};
  std::array<double, 3> radii{};

  bool contains(double x, double y, double z) const;
};

/// Nested lesion: necrotic core inside the enhancing shell inside the edema.
struct Lesion {
  Ellipsoid edema;
  Ellipsoid enhancing;
  Ellipsoid necrotic;
};

struct PhantomCase {
  CaseVolumes volumes;
  Lesion lesion;
};

// Tissue intensities on a 0..1000 scale; noise sigma is 5% of that range.
inline constexpr float kPhantomRange = 1000.0f;
inline constexpr float kPhantomNoiseSigma = 0.05f * kPhantomRange;

/// Synthetic FLAIR/T1CE/segmentation cases. Each lesion is centred on a voxel of a slice
/// inside `window` (default: the middle half of the volume), so every case shows all four
/// classes on at least one window slice. FLAIR is bright over the whole lesion, T1CE bright
/// on the enhancing shell and dark in the necrotic core. Raw labels are 0,1,2,4.
std::vector<PhantomCase> generate_phantom(std::uint64_t seed, int n_cases,
                                          std::array<Index, 3> dims,
                                          std::optional<SliceWindow> window = std::nullopt);

SliceWindow default_phantom_window(Index depth);

/// Writes <dir>/<case id>/{flair,t1ce,seg}.nii.
void write_phantom_case(const std::filesystem::path& dir, const PhantomCase& c);

}  // namespace aunet

#endif  // AUNET_PHANTOM_HPP
