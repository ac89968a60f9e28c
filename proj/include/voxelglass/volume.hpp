#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace vg {

struct Dims {
  std::uint32_t nx = 0;
  std::uint32_t ny = 0;
  std::uint32_t nz = 0;

  std::size_t count() const noexcept {
    return std::size_t{nx} * std::size_t{ny} * std::size_t{nz};
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

// Scalar voxel grid, x fastest. Intensities are stored values with
// `bits_stored` significant bits (12 for the CT/MR data this engine targets).
struct VolumeDataset {
  Dims dims;
  std::array<float, 3> spacing{1.0f, 1.0f, 1.0f};  // mm per voxel
  std::uint16_t bits_stored = 12;
  std::vector<std::uint16_t> voxels;
  std::pair<std::uint16_t, std::uint16_t> value_range{0, 0};

  std::size_t index(std::uint32_t x, std::uint32_t y, std::uint32_t z) const noexcept {
    return x + std::size_t{dims.nx} * (y + std::size_t{dims.ny} * z);
  }
  std::uint16_t at(std::uint32_t x, std::uint32_t y, std::uint32_t z) const noexcept {
    return voxels[index(x, y, z)];
  }
  std::uint16_t max_value() const noexcept {
    return static_cast<std::uint16_t>((1u << bits_stored) - 1u);
  }
  // Physical edge lengths in meters.
  std::array<double, 3> extent_m() const noexcept {
    return {dims.nx * double{spacing[0]} * 1e-3, dims.ny * double{spacing[1]} * 1e-3,
            dims.nz * double{spacing[2]} * 1e-3};
  }

  void recompute_range() noexcept;

  friend bool operator==(const VolumeDataset&, const VolumeDataset&) = default;
};

inline void VolumeDataset::recompute_range() noexcept {
  if (voxels.empty()) {
    value_range = {0, 0};
    return;
  }
  std::uint16_t lo = voxels.front();
  std::uint16_t hi = voxels.front();
  for (std::uint16_t v : voxels) {
    lo = v < lo ? v : lo;
    hi = v > hi ? v : hi;
  }
  value_range = {lo, hi};
}

}  // namespace vg
