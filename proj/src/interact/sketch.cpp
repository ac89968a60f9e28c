#include <cmath>

#include "voxelglass/interact.hpp"

namespace vg::interact {

void PlaneCanvas::validate() const {
  if (std::abs(normal.norm() - 1.0) > 1e-6) throw InteractError(InteractErrc::InvalidParams, "canvas normal must be unit");
  if (!(width > 0.0) || !(height > 0.0)) throw InteractError(InteractErrc::InvalidParams, "canvas extent must be > 0");
  if ((up - up.dot(normal) * normal).norm() < 1e-9) {
    throw InteractError(InteractErrc::InvalidParams, "canvas up must not be parallel to the normal");
  }
}

Vec3 PlaneCanvas::v_axis() const { return (up - up.dot(normal) * normal).normalized(); }
Vec3 PlaneCanvas::u_axis() const { return v_axis().cross(normal); }

void PressureMap::validate() const {
  if (!(width_min >= 0.0 && width_min <= width_max)) {
    throw InteractError(InteractErrc::InvalidParams, "need 0 <= width_min <= width_max");
  }
  if (!(depth_max > 0.0)) throw InteractError(InteractErrc::InvalidParams, "depth_max must be > 0");
  if (!(touch_radius >= 0.0)) throw InteractError(InteractErrc::InvalidParams, "touch_radius must be >= 0");
}

PressureSample virtual_pressure(const Vec3& tip, const PlaneCanvas& canvas) {
  const double d = canvas.normal.dot(tip - canvas.point);
  return {d, tip - d * canvas.normal};
}

double pressure_to_width(double d, const PressureMap& pm) {
  const double penetration = std::max(0.0, -d);
  if (penetration <= 0.0 && std::abs(d) > pm.touch_radius) return 0.0;
  return pm.width_min + (pm.width_max - pm.width_min) * std::min(penetration / pm.depth_max, 1.0);
}

SketchResult sketch_step(const PlaneCanvas& canvas, const Vec3& tip, const PressureMap& pm,
                         std::optional<SketchStroke>& active, const xfer::Rgba& color) {
  SketchResult r;
  auto finish = [&] {
    if (active) {
      r.event = StrokeEvent::Ended;
      r.finished = std::move(*active);
      active.reset();
    }
  };
  const auto [d, p_v] = virtual_pressure(tip, canvas);
  if (!in_contact(d, pm)) {
    finish();
    return r;
  }
  const Vec3 rel = p_v - canvas.point;
  double u = rel.dot(canvas.u_axis());
  double v = rel.dot(canvas.v_axis());
  const double hw = canvas.width / 2, hh = canvas.height / 2, eps = 1e-9;
  if (std::abs(u) > hw + eps || std::abs(v) > hh + eps) {
    finish();
    return r;
  }
  u = std::clamp(u, -hw, hw);
  v = std::clamp(v, -hh, hh);
  if (!active) {
    active = SketchStroke{{}, color};
    r.event = StrokeEvent::Started;
  } else {
    r.event = StrokeEvent::Extended;
  }
  active->points.push_back({u, v, pressure_to_width(d, pm)});
  return r;
}

Image8 rasterize_strokes(const PlaneCanvas& canvas, const std::vector<SketchStroke>& strokes, double ppm) {
  if (!(ppm > 0.0)) throw InteractError(InteractErrc::InvalidParams, "pixels per meter must be > 0");
  const int w = std::max(1, int(std::lround(canvas.width * ppm)));
  const int h = std::max(1, int(std::lround(canvas.height * ppm)));
  Image8 img(w, h, 4);
  auto stamp = [&](double u, double v, double radius, const xfer::Rgba& c) {
    const double cx = (u + canvas.width / 2) * ppm, cy = (canvas.height / 2 - v) * ppm;
    const double rp = std::max(radius * ppm, 0.5);
    for (int y = std::max(0, int(cy - rp - 1)); y <= std::min(h - 1, int(cy + rp + 1)); ++y)
      for (int x = std::max(0, int(cx - rp - 1)); x <= std::min(w - 1, int(cx + rp + 1)); ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        if (dx * dx + dy * dy > rp * rp) continue;
        std::uint8_t* p = img.px(x, y);
        p[0] = std::uint8_t(std::lround(std::clamp(c.r, 0.0f, 1.0f) * 255));
        p[1] = std::uint8_t(std::lround(std::clamp(c.g, 0.0f, 1.0f) * 255));
        p[2] = std::uint8_t(std::lround(std::clamp(c.b, 0.0f, 1.0f) * 255));
        p[3] = std::uint8_t(std::lround(std::clamp(c.a, 0.0f, 1.0f) * 255));
      }
  };
  for (const auto& s : strokes) {
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const auto& a = s.points[i];
      if (i + 1 == s.points.size()) {
        stamp(a.u, a.v, a.width / 2, s.color);
        break;
      }
      const auto& b = s.points[i + 1];
      const double len = std::hypot(b.u - a.u, b.v - a.v) * ppm;
      const int n = std::max(1, int(std::ceil(len * 2)));
      for (int k = 0; k < n; ++k) {
        const double t = double(k) / n;
        stamp(a.u + t * (b.u - a.u), a.v + t * (b.v - a.v), (a.width + t * (b.width - a.width)) / 2, s.color);
      }
    }
  }
  return img;
}

}  // namespace vg::interact
