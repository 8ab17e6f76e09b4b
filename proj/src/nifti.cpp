#include "aunet/nifti.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace aunet {
namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDataOffset = 352;

template <typename U>
U load(const unsigned char* p, bool swap) {
  U v;
  std::memcpy(&v, p, sizeof(U));
  if (swap) {
    unsigned char b[sizeof(U)];
    std::memcpy(b, &v, sizeof(U));
    for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(b[i], b[sizeof(U) - 1 - i]);
    std::memcpy(&v, b, sizeof(U));
  }
  return v;
}

template <typename U>
void store(unsigned char* p, U v, bool swap) {
  unsigned char b[sizeof(U)];
  std::memcpy(b, &v, sizeof(U));
  if (swap) {
    for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(b[i], b[sizeof(U) - 1 - i]);
  }
  std::memcpy(p, b, sizeof(U));
}

int bytes_per_voxel(NiftiDatatype type) {
  switch (type) {
    case NiftiDatatype::UInt8: return 1;
    case NiftiDatatype::Int16: return 2;
    case NiftiDatatype::Float32: return 4;
    case NiftiDatatype::Float64: return 8;
  }
  return 0;
}

bool host_big_endian() { return std::endian::native == std::endian::big; }

}  // namespace

Volume read_nifti(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NiftiError(NiftiField::File, "cannot open NIfTI file " + path.string());
  const std::vector<unsigned char> bytes(std::istreambuf_iterator<char>(in), {});
  if (bytes.size() < kHeaderSize) {
    throw NiftiError(NiftiField::SizeofHdr,
                     path.string() + ": file shorter than the 348-byte NIfTI-1 header");
  }
  const unsigned char* h = bytes.data();
  bool swap = false;
  if (load<std::int32_t>(h, false) != 348) {
    if (load<std::int32_t>(h, true) != 348) {
      throw NiftiError(NiftiField::SizeofHdr,
                       path.string() + ": sizeof_hdr is " +
                           std::to_string(load<std::int32_t>(h, false)) + ", expected 348");
    }
    swap = true;
  }
  if (std::memcmp(h + 344, "ni1\0", 4) == 0) {
    throw NiftiError(NiftiField::Magic, path.string() +
                                            ": magic 'ni1' (separate header/image pair) is not "
                                            "supported, expected single-file 'n+1'");
  }
  if (std::memcmp(h + 344, "n+1\0", 4) != 0) {
    throw NiftiError(NiftiField::Magic, path.string() + ": bad magic, expected 'n+1'");
  }
  const auto ndim = load<std::int16_t>(h + 40, swap);
  if (ndim != 3) {
    throw NiftiError(NiftiField::Dim,
                     path.string() + ": dim[0] is " + std::to_string(ndim) + ", expected 3");
  }
  Volume v;
  for (int i = 0; i < 3; ++i) {
    const auto d = load<std::int16_t>(h + 42 + 2 * i, swap);
    if (d < 1) {
      throw NiftiError(NiftiField::Dim, path.string() + ": dim[" + std::to_string(i + 1) +
                                            "] is " + std::to_string(d));
    }
    v.dims[static_cast<std::size_t>(i)] = d;
  }
  const auto datatype = load<std::int16_t>(h + 70, swap);
  switch (datatype) {
    case 2: case 4: case 16: case 64: break;
    default:
      throw NiftiError(NiftiField::Datatype,
                       path.string() + ": unsupported datatype " + std::to_string(datatype));
  }
  v.datatype = static_cast<NiftiDatatype>(datatype);
  const float vox_offset = load<float>(h + 108, swap);
  if (!(vox_offset >= static_cast<float>(kHeaderSize)) || vox_offset != std::floor(vox_offset)) {
    throw NiftiError(NiftiField::VoxOffset,
                     path.string() + ": invalid vox_offset " + std::to_string(vox_offset));
  }
  const float slope = load<float>(h + 112, swap);
  const float inter = load<float>(h + 116, swap);

  const std::size_t offset = static_cast<std::size_t>(vox_offset);
  const std::size_t width = static_cast<std::size_t>(bytes_per_voxel(v.datatype));
  const std::size_t count = static_cast<std::size_t>(v.voxel_count());
  if (bytes.size() < offset || bytes.size() - offset < count * width) {
    throw NiftiError(NiftiField::Payload,
                     path.string() + ": voxel payload truncated (need " +
                         std::to_string(count * width) + " bytes at offset " +
                         std::to_string(offset) + ", file has " + std::to_string(bytes.size()) +
                         ")");
  }
  v.voxels.resize(static_cast<Eigen::Index>(count));
  const unsigned char* p = bytes.data() + offset;
  for (std::size_t i = 0; i < count; ++i, p += width) {
    double value = 0;
    switch (v.datatype) {
      case NiftiDatatype::UInt8: value = *p; break;
      case NiftiDatatype::Int16: value = load<std::int16_t>(p, swap); break;
      case NiftiDatatype::Float32: value = load<float>(p, swap); break;
      case NiftiDatatype::Float64: value = load<double>(p, swap); break;
    }
    if (slope != 0.0f && std::isfinite(slope)) value = value * slope + inter;
    v.voxels[static_cast<Eigen::Index>(i)] = static_cast<float>(value);
  }
  if (!v.voxels.allFinite()) {
    throw NiftiError(NiftiField::Payload, path.string() + ": non-finite voxel values");
  }
  return v;
}

void write_nifti(const std::filesystem::path& path, const Volume& volume, NiftiDatatype datatype,
                 bool big_endian) {
  const bool swap = big_endian != host_big_endian();
  const std::size_t width = static_cast<std::size_t>(bytes_per_voxel(datatype));
  const std::size_t count = static_cast<std::size_t>(volume.voxel_count());
  if (static_cast<std::size_t>(volume.voxels.size()) != count) {
    throw NiftiError(NiftiField::Dim, "volume dims do not match its voxel count");
  }
  std::vector<unsigned char> out(kDataOffset + count * width, 0);
  unsigned char* h = out.data();
  store<std::int32_t>(h, 348, swap);
  store<std::int16_t>(h + 40, 3, swap);
  for (int i = 0; i < 3; ++i) {
    store<std::int16_t>(h + 42 + 2 * i,
                        static_cast<std::int16_t>(volume.dims[static_cast<std::size_t>(i)]), swap);
  }
  for (int i = 3; i < 7; ++i) store<std::int16_t>(h + 42 + 2 * i, 1, swap);
  store<std::int16_t>(h + 70, static_cast<std::int16_t>(datatype), swap);
  store<std::int16_t>(h + 72, static_cast<std::int16_t>(8 * width), swap);
  for (int i = 0; i < 8; ++i) store<float>(h + 76 + 4 * i, 1.0f, swap);
  store<float>(h + 108, static_cast<float>(kDataOffset), swap);
  store<float>(h + 112, 1.0f, swap);
  store<float>(h + 116, 0.0f, swap);
  std::memcpy(h + 344, "n+1\0", 4);

  unsigned char* p = out.data() + kDataOffset;
  for (std::size_t i = 0; i < count; ++i, p += width) {
    const float value = volume.voxels[static_cast<Eigen::Index>(i)];
    switch (datatype) {
      case NiftiDatatype::UInt8:
        *p = static_cast<unsigned char>(std::lround(std::clamp(value, 0.0f, 255.0f)));
        break;
      case NiftiDatatype::Int16:
        store<std::int16_t>(p, static_cast<std::int16_t>(std::lround(std::clamp(value, -32768.0f, 32767.0f))), swap);
        break;
      case NiftiDatatype::Float32: store<float>(p, value, swap); break;
      case NiftiDatatype::Float64: store<double>(p, static_cast<double>(value), swap); break;
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw NiftiError(NiftiField::File, "cannot open " + path.string() + " for writing");
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw NiftiError(NiftiField::File, "failed writing " + path.string());
}

}  // namespace aunet
