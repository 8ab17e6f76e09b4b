#ifndef AUNET_NIFTI_HPP
#define AUNET_NIFTI_HPP

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace aunet {

enum class NiftiDatatype : std::int16_t {
  UInt8 = 2,
  Int16 = 4,
  Float32 = 16,
  Float64 = 64,
};

/// A 3D scalar volume, x fastest: voxel (x,y,z) lives at x + X*(y + Y*z).
struct Volume {
  std::array<Eigen::Index, 3> dims{0, 0, 0};
  Eigen::ArrayXf voxels;
  NiftiDatatype datatype = NiftiDatatype::Float32;

  Eigen::Index voxel_count() const { return dims[0] * dims[1] * dims[2]; }
  float at(Eigen::Index x, Eigen::Index y, Eigen::Index z) const {
    return voxels[x + dims[0] * (y + dims[1] * z)];
  }
  float& at(Eigen::Index x, Eigen::Index y, Eigen::Index z) {
    return voxels[x + dims[0] * (y + dims[1] * z)];
  }
};

/// Header field responsible for a parse failure.
enum class NiftiField {
  File,
  SizeofHdr,
  Magic,
  Dim,
  Datatype,
  VoxOffset,
  Payload,
};

class NiftiError : public std::runtime_error {
 public:
  NiftiError(NiftiField field, const std::string& message)
      : std::runtime_error(message), field_(field) {}
  NiftiField field() const { return field_; }

 private:
  NiftiField field_;
};

/// Reads an uncompressed single-file NIfTI-1 volume (magic "n+1"). Byte order is
/// detected from sizeof_hdr. scl_slope/scl_inter are applied when the slope is nonzero.
Volume read_nifti(const std::filesystem::path& path);

/// Writes a single-file NIfTI-1 volume with a 352-byte prefix (header plus empty
/// extension block), unit pixdim and identity scaling. Integer datatypes round.
void write_nifti(const std::filesystem::path& path, const Volume& volume,
                 NiftiDatatype datatype = NiftiDatatype::Float32, bool big_endian = false);

}  // namespace aunet

#endif  // AUNET_NIFTI_HPP
