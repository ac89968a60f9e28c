#include <zlib.h>

#include <bit>
#include <cstring>

#include "voxelglass/image_io.hpp"
#include "voxelglass/ingest.hpp"

namespace vg::ingest {

namespace {

constexpr char kMagic[4] = {'V', 'X', 'G', '1'};
constexpr std::size_t kHeaderSize = 4 + 3 * 4 + 3 * 4 + 2 + 8;

template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

template <class T>
T get_le(std::span<const std::uint8_t> in, std::size_t at) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(T{in[at + i]} << (8 * i));
  return v;
}

std::uint32_t payload_crc(std::span<const std::uint8_t> payload) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for >4 GiB payloads.
  std::size_t off = 0;
  while (off < payload.size()) {
    const std::size_t n = std::min<std::size_t>(payload.size() - off, 1u << 30);
    crc = crc32(crc, payload.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> encode_volume_cache(const VolumeDataset& v) {
  const std::uint64_t payload_len = std::uint64_t{v.voxels.size()} * 2;
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + payload_len + 4);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, v.dims.nx);
  put_le<std::uint32_t>(out, v.dims.ny);
  put_le<std::uint32_t>(out, v.dims.nz);
  for (float s : v.spacing) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(s));
  put_le<std::uint16_t>(out, v.bits_stored);
  put_le<std::uint64_t>(out, payload_len);
  const std::size_t payload_at = out.size();
  for (std::uint16_t s : v.voxels) put_le<std::uint16_t>(out, s);
  put_le<std::uint32_t>(out, payload_crc(std::span(out).subspan(payload_at)));
  return out;
}

VolumeDataset decode_volume_cache(std::span<const std::uint8_t> in) {
  if (in.size() < 4 || std::memcmp(in.data(), kMagic, 4) != 0) {
    throw DicomError(DicomErrc::BadMagic, "not a VXG1 volume cache");
  }
  if (in.size() < kHeaderSize) throw DicomError(DicomErrc::TruncatedCache, "cache header truncated");
  VolumeDataset v;
  v.dims = {get_le<std::uint32_t>(in, 4), get_le<std::uint32_t>(in, 8), get_le<std::uint32_t>(in, 12)};
  for (int i = 0; i < 3; ++i) v.spacing[i] = std::bit_cast<float>(get_le<std::uint32_t>(in, 16 + 4 * i));
  v.bits_stored = get_le<std::uint16_t>(in, 28);
  const std::uint64_t payload_len = get_le<std::uint64_t>(in, 30);
  if (payload_len != std::uint64_t{v.dims.count()} * 2) {
    throw DicomError(DicomErrc::TruncatedCache, "payload length disagrees with dims");
  }
  if (in.size() != kHeaderSize + payload_len + 4) {
    throw DicomError(DicomErrc::TruncatedCache, "cache size disagrees with payload length");
  }
  const auto payload = in.subspan(kHeaderSize, payload_len);
  const std::uint32_t stored = get_le<std::uint32_t>(in, kHeaderSize + payload_len);
  if (stored != payload_crc(payload)) throw DicomError(DicomErrc::ChecksumMismatch, "payload CRC-32 mismatch");
  v.voxels.resize(v.dims.count());
  for (std::size_t i = 0; i < v.voxels.size(); ++i) {
    v.voxels[i] = static_cast<std::uint16_t>(payload[2 * i] | (payload[2 * i + 1] << 8));
  }
  v.recompute_range();
  return v;
}

void save_volume_cache(const VolumeDataset& v, const std::filesystem::path& path) {
  try {
    write_file(path, encode_volume_cache(v));
  } catch (const ImageError& e) {
    throw DicomError(DicomErrc::IoFailure, e.what());
  }
}

VolumeDataset load_volume_cache(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const ImageError& e) {
    throw DicomError(DicomErrc::IoFailure, e.what());
  }
  return decode_volume_cache(bytes);
}

}  // namespace vg::ingest
