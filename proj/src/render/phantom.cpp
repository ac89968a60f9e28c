#include <cmath>

#include "voxelglass/render.hpp"

namespace vg::render {

VolumeDataset make_sphere_phantom(std::uint32_t n, double radius, std::uint16_t value) {
  VolumeDataset v;
  v.dims = {n, n, n};
  const float mm = float(320.0 / n);
  v.spacing = {mm, mm, mm};
  v.voxels.resize(v.dims.count());
  constexpr int ss = 4;
  const double r2 = radius * radius;
  for (std::uint32_t z = 0; z < n; ++z)
    for (std::uint32_t y = 0; y < n; ++y)
      for (std::uint32_t x = 0; x < n; ++x) {
        int inside = 0;
        for (int k = 0; k < ss; ++k)
          for (int j = 0; j < ss; ++j)
            for (int i = 0; i < ss; ++i) {
              const double px = (x + (i + 0.5) / ss) / n - 0.5;
              const double py = (y + (j + 0.5) / ss) / n - 0.5;
              const double pz = (z + (k + 0.5) / ss) / n - 0.5;
              inside += px * px + py * py + pz * pz <= r2;
            }
        v.voxels[v.index(x, y, z)] = std::uint16_t(std::lround(double(value) * inside / (ss * ss * ss)));
      }
  v.recompute_range();
  return v;
}

VolumeDataset make_ellipsoid_phantom(Dims dims) {
  VolumeDataset v;
  v.dims = dims;
  v.spacing = {float(360.0 / dims.nx), float(360.0 / dims.ny), float(360.0 / dims.nz)};
  v.voxels.resize(dims.count());
  struct Ellipsoid {
    double cx, cy, cz, rx, ry, rz;
    std::uint16_t value;
  };
  // Later entries overwrite earlier ones.
  const Ellipsoid parts[] = {
      {0.0, 0.0, 0.0, 0.44, 0.46, 0.42, 900},      // skin / outer tissue
      {0.0, 0.0, 0.0, 0.40, 0.42, 0.38, 2600},     // bone shell
      {0.0, 0.0, 0.0, 0.37, 0.39, 0.35, 1300},     // soft tissue
      {-0.12, 0.05, 0.02, 0.10, 0.16, 0.12, 700},  // low-density lobes
      {0.12, 0.05, 0.02, 0.10, 0.16, 0.12, 700},
      {0.0, -0.15, -0.05, 0.06, 0.05, 0.06, 3400}, // bright core
  };
  for (std::uint32_t z = 0; z < dims.nz; ++z) {
    const double pz = (z + 0.5) / dims.nz - 0.5;
    for (std::uint32_t y = 0; y < dims.ny; ++y) {
      const double py = (y + 0.5) / dims.ny - 0.5;
      for (std::uint32_t x = 0; x < dims.nx; ++x) {
        const double px = (x + 0.5) / dims.nx - 0.5;
        std::uint16_t val = 0;
        for (const auto& e : parts) {
          const double a = (px - e.cx) / e.rx, b = (py - e.cy) / e.ry, c = (pz - e.cz) / e.rz;
          if (a * a + b * b + c * c <= 1.0) val = e.value;
        }
        v.voxels[v.index(x, y, z)] = val;
      }
    }
  }
  v.recompute_range();
  return v;
}

}  // namespace vg::render
