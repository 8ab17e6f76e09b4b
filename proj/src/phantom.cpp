#include "aunet/phantom.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace aunet {

bool Ellipsoid::contains(double x, double y, double z) const {
  const double dx = (x - center[0]) / radii[0];
  const double dy = (y - center[1]) / radii[1];
  const double dz = (z - center[2]) / radii[2];
  return dx * dx + dy * dy + dz * dz <= 1.0;
}

SliceWindow default_phantom_window(Index depth) {
  return {depth / 4, std::max<Index>(1, depth / 2)};
}

namespace {

Ellipsoid scaled(const Ellipsoid& e, double factor) {
  Ellipsoid out = e;
  for (double& r : out.radii) r *= factor;
  return out;
}

}  // namespace

std::vector<PhantomCase> generate_phantom(std::uint64_t seed, int n_cases,
                                          std::array<Index, 3> dims,
                                          std::optional<SliceWindow> window) {
  const Index nx = dims[0], ny = dims[1], nz = dims[2];
  if (nx < 32 || ny < 32 || nz < 1) {
    throw ContractError("phantom dims must have X,Y >= 32 and Z >= 1");
  }
  if (n_cases < 1) throw ContractError("phantom needs at least one case");
  const SliceWindow w = window.value_or(default_phantom_window(nz));
  window_indices(nz, w);

  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  std::normal_distribution<float> noise(0.0f, kPhantomNoiseSigma);

  std::vector<PhantomCase> cases;
  for (int k = 0; k < n_cases; ++k) {
    PhantomCase pc;
    char id[32];
    std::snprintf(id, sizeof id, "phantom_%03d", k);
    pc.volumes.id = id;

    const double extent = static_cast<double>(std::min(nx, ny));
    Ellipsoid edema;
    edema.center = {std::round(uniform(0.38, 0.62) * static_cast<double>(nx)),
                    std::round(uniform(0.38, 0.62) * static_cast<double>(ny)),
                    static_cast<double>(w.start + w.count / 2 +
                                        static_cast<Index>(std::floor(uniform(-0.2, 0.2) *
                                                                      static_cast<double>(w.count))))};
    edema.center[2] = std::clamp<double>(edema.center[2], static_cast<double>(w.start),
                                         static_cast<double>(w.start + w.count - 1));
    edema.radii = {uniform(0.14, 0.22) * extent, uniform(0.14, 0.22) * extent,
                   std::max(2.0, uniform(0.3, 0.5) * static_cast<double>(w.count))};
    pc.lesion.edema = edema;
    pc.lesion.enhancing = scaled(edema, uniform(0.55, 0.7));
    pc.lesion.necrotic = scaled(pc.lesion.enhancing, uniform(0.4, 0.55));

    const double brain_rx = 0.44 * static_cast<double>(nx);
    const double brain_ry = 0.46 * static_cast<double>(ny);
    const double tilt = uniform(-40.0, 40.0);

    Volume flair, t1ce, seg;
    flair.dims = t1ce.dims = seg.dims = {nx, ny, nz};
    flair.voxels.resize(nx * ny * nz);
    t1ce.voxels.resize(nx * ny * nz);
    seg.voxels.resize(nx * ny * nz);
    seg.datatype = NiftiDatatype::UInt8;

    for (Index z = 0; z < nz; ++z) {
      for (Index y = 0; y < ny; ++y) {
        for (Index x = 0; x < nx; ++x) {
          const double fx = static_cast<double>(x), fy = static_cast<double>(y),
                       fz = static_cast<double>(z);
          const double bx = (fx - 0.5 * static_cast<double>(nx - 1)) / brain_rx;
          const double by = (fy - 0.5 * static_cast<double>(ny - 1)) / brain_ry;
          const bool brain = bx * bx + by * by <= 1.0;
          float label = 0, vf = 0, vt = 0;
          if (brain) {
            // Mild smooth tissue variation.
            const float shade = static_cast<float>(tilt * (bx + 0.5 * by));
            vf = 300.0f + shade;
            vt = 350.0f + shade;
          }
          if (pc.lesion.necrotic.contains(fx, fy, fz)) {
            label = 1;
            vf = 600.0f;
            vt = 150.0f;
          } else if (pc.lesion.enhancing.contains(fx, fy, fz)) {
            label = 4;
            vf = 750.0f;
            vt = 900.0f;
          } else if (pc.lesion.edema.contains(fx, fy, fz)) {
            label = 2;
            vf = 750.0f;
            vt = 300.0f;
          }
          const Index i = x + nx * (y + ny * z);
          flair.voxels[i] = vf + noise(rng);
          t1ce.voxels[i] = vt + noise(rng);
          seg.voxels[i] = label;
        }
      }
    }
    pc.volumes.flair = std::move(flair);
    pc.volumes.t1ce = std::move(t1ce);
    pc.volumes.seg = std::move(seg);
    cases.push_back(std::move(pc));
  }
  return cases;
}

void write_phantom_case(const std::filesystem::path& dir, const PhantomCase& c) {
  const std::filesystem::path case_dir = dir / c.volumes.id;
  std::filesystem::create_directories(case_dir);
  write_nifti(case_dir / "flair.nii", c.volumes.flair, NiftiDatatype::Float32);
  write_nifti(case_dir / "t1ce.nii", c.volumes.t1ce, NiftiDatatype::Float32);
  write_nifti(case_dir / "seg.nii", c.volumes.seg, NiftiDatatype::UInt8);
}

}  // namespace aunet
