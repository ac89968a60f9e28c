#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "voxelglass/render.hpp"

namespace vg::render::detail {

using xfer::Rgba;

// Classification table indexed by raw intensity, opacity corrected for one
// step length and premultiplied.
struct Lut {
  std::vector<Rgba> entries;

  Rgba at(float v) const {
    const int last = int(entries.size()) - 1;
    if (!(v > 0.0f)) return entries[0];
    if (v >= float(last)) return entries[last];
    const int i = int(v);
    const float t = v - float(i);
    const Rgba& a = entries[i];
    const Rgba& b = entries[i + 1];
    return {a.r + t * (b.r - a.r), a.g + t * (b.g - a.g), a.b + t * (b.b - a.b), a.a + t * (b.a - a.a)};
  }
};

Lut build_lut(const xfer::TransferFunction& tf, std::uint16_t max_value, double step);

// Volume copy in 8^3-cell bricks stored with a one-voxel apron (9^3), so the
// eight trilinear neighbours of any cell sit in one brick. Keeps oblique
// slice planes and rays cache friendly.
struct Bricks {
  static constexpr int kCells = 8, kSide = 9, kSize = kSide * kSide * kSide;
  int nx = 1, ny = 1, nz = 1;
  int bx = 1, by = 1;
  std::vector<std::uint16_t> data;
};

Bricks make_bricks(const VolumeDataset& v);
// Cached per volume instance.
std::shared_ptr<const Bricks> bricks_for(const std::shared_ptr<const VolumeDataset>& v);

struct Sampler {
  std::shared_ptr<const Bricks> bricks;
  const std::uint16_t* data = nullptr;
  int nx = 1, ny = 1, nz = 1;
  int bx = 1, by = 1;
  // Object-space cut: keep where dot(cut_n, p) + cut_d >= 0.
  bool cut = false;
  float cut_n[3] = {0, 0, 0};
  float cut_d = 0;

  bool culled(float x, float y, float z) const {
    return cut && cut_n[0] * x + cut_n[1] * y + cut_n[2] * z + cut_d < 0.0f;
  }

  // Trilinear intensity, p in [0,1]^3 with voxel centres at (i + 0.5) / n.
  float intensity(float x, float y, float z) const {
    int i, j, k;
    float tx, ty, tz;
    axis(x, nx, i, tx);
    axis(y, ny, j, ty);
    axis(z, nz, k, tz);
    const std::size_t brick = std::size_t((i >> 3) + bx * ((j >> 3) + by * (k >> 3)));
    const std::uint16_t* c = data + brick * Bricks::kSize + ((i & 7) + Bricks::kSide * ((j & 7) + Bricks::kSide * (k & 7)));
    constexpr int dy = Bricks::kSide, dz = Bricks::kSide * Bricks::kSide;
    const float c00 = c[0] + tx * (float(c[1]) - float(c[0]));
    const float c10 = c[dy] + tx * (float(c[dy + 1]) - float(c[dy]));
    const float c01 = c[dz] + tx * (float(c[dz + 1]) - float(c[dz]));
    const float c11 = c[dy + dz] + tx * (float(c[dy + dz + 1]) - float(c[dy + dz]));
    const float c0 = c00 + ty * (c10 - c00);
    const float c1 = c01 + ty * (c11 - c01);
    return c0 + tz * (c1 - c0);
  }

 private:
  // Lower neighbour index and weight; the upper neighbour may be the apron.
  static void axis(float p, int n, int& i0, float& t) {
    float u = p * float(n) - 0.5f;
    u = std::clamp(u, 0.0f, float(n - 1));
    i0 = std::min(int(u), std::max(n - 2, 0));
    t = u - float(i0);
  }
};

Sampler make_sampler(const Scene& scene, const Mat4& obj_to_world);

struct PixelRay {
  float o[3];  // near-plane point, object space
  float d[3];  // unit direction, object space
  float tmax;  // distance to the far plane
};

struct ViewSetup {
  int width = 0, height = 0;
  Mat4 obj_to_world;
  Mat4 obj_to_clip;
  Vec3 eye_world;      // camera origin
  Vec3 forward_world;  // unit, camera -z
  bool perspective = true;
  double near_m = 0.1, far_m = 20.0;
  std::vector<PixelRay> rays;
};

ViewSetup setup_view(const Scene& scene, const View& view);

// Unit object-space direction of the ray aimed at the cube centre.
Vec3 central_direction(const ViewSetup& vs);

}  // namespace vg::render::detail
