#include <thread>

#include "detail.hpp"
#include "voxelglass/parallel.hpp"

namespace vg::render {

namespace {

// Ray/unit-cube slab test clipped to [0, tmax].
bool clip_ray(const detail::PixelRay& r, float& t0, float& t1) {
  t0 = 0.0f;
  t1 = r.tmax;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(r.d[i]) < 1e-12f) {
      if (r.o[i] < 0.0f || r.o[i] > 1.0f) return false;
      continue;
    }
    const float inv = 1.0f / r.d[i];
    float a = -r.o[i] * inv;
    float b = (1.0f - r.o[i]) * inv;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  return t0 < t1;
}

std::size_t band_count(int height) {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  return std::min<std::size_t>(height, hw == 1 ? 1 : hw * 4);
}

}  // namespace

Framebuffer render_raycast(const Scene& scene, const View& view) {
  scene.validate();
  const auto vs = detail::setup_view(scene, view);
  const float step = float(scene.settings.step_size);
  const auto lut = detail::build_lut(scene.tf, scene.volume->max_value(), scene.settings.step_size);
  const auto sampler = detail::make_sampler(scene, vs.obj_to_world);
  const float stop = float(scene.settings.early_termination_alpha);
  Framebuffer fb(vs.width, vs.height, scene.settings.background);

  const std::size_t bands = band_count(vs.height);
  parallel_for(0, bands, [&](std::size_t band) {
    const int y0 = int(band * vs.height / bands), y1 = int((band + 1) * vs.height / bands);
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < vs.width; ++x) {
        const auto& r = vs.rays[std::size_t(y) * vs.width + x];
        float t0, t1;
        if (!clip_ray(r, t0, t1)) continue;
        xfer::Rgba acc;
        for (float t = t0 + 0.5f * step; t < t1; t += step) {
          const float px = r.o[0] + t * r.d[0], py = r.o[1] + t * r.d[1], pz = r.o[2] + t * r.d[2];
          if (sampler.culled(px, py, pz)) continue;
          const xfer::Rgba s = lut.at(sampler.intensity(px, py, pz));
          if (s.a <= 0.0f) continue;
          blend_under(acc, s);
          if (acc.a >= stop) break;
        }
        fb.at(x, y) = acc;
      }
    }
  });
  return fb;
}

}  // namespace vg::render
