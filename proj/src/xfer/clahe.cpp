#include <algorithm>
#include <cmath>

#include "voxelglass/parallel.hpp"
#include "voxelglass/xfer.hpp"

namespace vg::xfer {

void ClaheParams::validate() const {
  if (blocks[0] < 1 || blocks[1] < 1 || blocks[2] < 1) {
    throw XferError(XferErrc::InvalidParams, "CLAHE block counts must be >= 1");
  }
  if (bins != 256 && bins != 4096) throw XferError(XferErrc::InvalidParams, "CLAHE bins must be 256 or 4096");
  if (!(clip_limit >= 1.0)) throw XferError(XferErrc::InvalidParams, "CLAHE clip limit must be >= 1");
}

namespace {

// Block extents along one axis plus the per-voxel interpolation stencil
// between neighbouring block centres.
struct AxisPlan {
  std::vector<std::uint32_t> start;  // blocks + 1 boundaries
  std::vector<std::uint32_t> lo, hi;  // per voxel: neighbouring block indices
  std::vector<double> t;             // per voxel: weight of `hi`

  AxisPlan(std::uint32_t n, std::uint32_t blocks) : start(blocks + 1), lo(n), hi(n), t(n) {
    for (std::uint32_t i = 0; i <= blocks; ++i) {
      start[i] = static_cast<std::uint32_t>(std::uint64_t{i} * n / blocks);
    }
    std::vector<double> centre(blocks);
    for (std::uint32_t i = 0; i < blocks; ++i) centre[i] = 0.5 * (start[i] + start[i + 1] - 1.0);
    for (std::uint32_t x = 0; x < n; ++x) {
      if (x <= centre.front()) {
        lo[x] = hi[x] = 0;
        t[x] = 0.0;
      } else if (x >= centre.back()) {
        lo[x] = hi[x] = blocks - 1;
        t[x] = 0.0;
      } else {
        std::uint32_t i = 0;
        while (centre[i + 1] <= x) ++i;
        lo[x] = i;
        hi[x] = i + 1;
        t[x] = (x - centre[i]) / (centre[i + 1] - centre[i]);
      }
    }
  }
};

// Clips at `limit` and spreads the excess uniformly, repeating until no bin
// exceeds the limit. The fixed point of that iteration is min(h + r, limit)
// for the r that preserves the total, found here by bisection.
void clip_histogram(std::vector<double>& h, double limit) {
  double total = 0.0;
  for (double c : h) total += c;
  auto filled = [&](double r) {
    double s = 0.0;
    for (double c : h) s += std::min(c + r, limit);
    return s;
  };
  double lo = 0.0, hi = limit;
  if (filled(0.0) >= total) return;  // nothing above the limit
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (filled(mid) < total ? lo : hi) = mid;
  }
  for (double& c : h) c = std::min(c + hi, limit);
}

inline double lerp(double a, double b, double t) { return a + t * (b - a); }

}  // namespace

VolumeDataset clahe3d(const VolumeDataset& v, const ClaheParams& p) {
  p.validate();
  const auto [nx, ny, nz] = std::array{v.dims.nx, v.dims.ny, v.dims.nz};
  if (nx < p.blocks[0] || ny < p.blocks[1] || nz < p.blocks[2]) {
    throw XferError(XferErrc::BlockLargerThanVolume, "more CLAHE blocks than voxels along an axis");
  }
  const AxisPlan ax(nx, p.blocks[0]), ay(ny, p.blocks[1]), az(nz, p.blocks[2]);
  const std::uint32_t bins = p.bins;
  const int bits = v.bits_stored;
  const double max_value = v.max_value();
  auto bin_of = [&](std::uint16_t s) {
    return static_cast<std::uint32_t>((std::uint64_t{s} * bins) >> bits);
  };

  const std::size_t nblocks = std::size_t{p.blocks[0]} * p.blocks[1] * p.blocks[2];
  std::vector<std::vector<double>> mapping(nblocks, std::vector<double>(bins, 0.0));
  parallel_for(0, nblocks, [&](std::size_t b) {
    const std::uint32_t bx = b % p.blocks[0];
    const std::uint32_t by = (b / p.blocks[0]) % p.blocks[1];
    const std::uint32_t bz = b / (std::size_t{p.blocks[0]} * p.blocks[1]);
    std::vector<double> hist(bins, 0.0);
    for (std::uint32_t z = az.start[bz]; z < az.start[bz + 1]; ++z)
      for (std::uint32_t y = ay.start[by]; y < ay.start[by + 1]; ++y)
        for (std::uint32_t x = ax.start[bx]; x < ax.start[bx + 1]; ++x) hist[bin_of(v.at(x, y, z))] += 1.0;
    double count = 0.0;
    for (double c : hist) count += c;
    if (std::isfinite(p.clip_limit)) clip_histogram(hist, p.clip_limit * count / bins);
    double total = 0.0;
    for (double c : hist) total += c;
    double cum = 0.0;
    auto& m = mapping[b];
    for (std::uint32_t i = 0; i < bins; ++i) {
      cum += hist[i];
      m[i] = cum / total * max_value;
    }
  });

  VolumeDataset out = v;
  auto map_at = [&](std::uint32_t bx, std::uint32_t by, std::uint32_t bz, std::uint32_t bin) {
    return mapping[bx + std::size_t{p.blocks[0]} * (by + std::size_t{p.blocks[1]} * bz)][bin];
  };
  parallel_for(0, nz, [&](std::size_t zi) {
    const auto z = static_cast<std::uint32_t>(zi);
    for (std::uint32_t y = 0; y < ny; ++y) {
      for (std::uint32_t x = 0; x < nx; ++x) {
        const std::uint32_t bin = bin_of(v.at(x, y, z));
        auto along_x = [&](std::uint32_t by, std::uint32_t bz) {
          return lerp(map_at(ax.lo[x], by, bz, bin), map_at(ax.hi[x], by, bz, bin), ax.t[x]);
        };
        auto along_y = [&](std::uint32_t bz) {
          return lerp(along_x(ay.lo[y], bz), along_x(ay.hi[y], bz), ay.t[y]);
        };
        const double value = lerp(along_y(az.lo[z]), along_y(az.hi[z]), az.t[z]);
        out.voxels[v.index(x, y, z)] = static_cast<std::uint16_t>(std::clamp(std::round(value), 0.0, max_value));
      }
    }
  });
  out.recompute_range();
  return out;
}

}  // namespace vg::xfer
