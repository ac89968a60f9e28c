#include <array>
#include <thread>

#include "detail.hpp"
#include "voxelglass/parallel.hpp"

namespace vg::render {

namespace {

using Poly2 = std::vector<std::array<double, 2>>;

const std::array<Vec3, 8> kCorners = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0),
                                      Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(0, 1, 1), Vec3(1, 1, 1)};
const std::array<std::array<int, 2>, 12> kEdges = {{{0, 1}, {2, 3}, {4, 5}, {6, 7}, {0, 2}, {1, 3},
                                                   {4, 6}, {5, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}}};

// Plane dot(n, p) = c against the unit cube.
std::vector<Vec3> slice_plane(const Vec3& n, double c) {
  std::vector<Vec3> pts;
  auto add = [&](const Vec3& p) {
    for (const auto& q : pts) {
      if ((q - p).squaredNorm() < 1e-24) return;
    }
    pts.push_back(p);
  };
  for (const auto& e : kEdges) {
    const Vec3& a = kCorners[e[0]];
    const Vec3& b = kCorners[e[1]];
    const double da = n.dot(a) - c, db = n.dot(b) - c;
    if (da == 0.0) add(a);
    if (db == 0.0) add(b);
    if ((da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0)) add(a + (da / (da - db)) * (b - a));
  }
  if (pts.size() < 3) return {};
  Vec3 centre = Vec3::Zero();
  for (const auto& p : pts) centre += p;
  centre /= double(pts.size());
  const Vec3 u = n.unitOrthogonal();
  const Vec3 w = n.normalized().cross(u);
  std::sort(pts.begin(), pts.end(), [&](const Vec3& p, const Vec3& q) {
    return std::atan2(w.dot(p - centre), u.dot(p - centre)) < std::atan2(w.dot(q - centre), u.dot(q - centre));
  });
  return pts;
}

// Object-space polygon -> pixel coordinates, clipped to the near and far planes.
Poly2 project(const std::vector<Vec3>& poly, const Mat4& obj_to_clip, int width, int height) {
  std::vector<Eigen::Vector4d> clip;
  clip.reserve(poly.size());
  for (const auto& p : poly) clip.push_back(obj_to_clip * p.homogeneous());
  for (double side : {1.0, -1.0}) {
    // Keep w + z >= 0 (near), then w - z >= 0 (far).
    std::vector<Eigen::Vector4d> out;
    for (std::size_t i = 0; i < clip.size(); ++i) {
      const auto& a = clip[i];
      const auto& b = clip[(i + 1) % clip.size()];
      const double da = a.w() + side * a.z(), db = b.w() + side * b.z();
      if (da >= 0) out.push_back(a);
      if ((da >= 0) != (db >= 0)) out.push_back(a + (da / (da - db)) * (b - a));
    }
    clip = std::move(out);
    if (clip.size() < 3) return {};
  }
  Poly2 screen;
  screen.reserve(clip.size());
  for (const auto& c : clip) {
    screen.push_back({(c.x() / c.w() + 1.0) * 0.5 * width, (1.0 - c.y() / c.w()) * 0.5 * height});
  }
  return screen;
}

struct Slice {
  double c;
  Poly2 screen;
  int ymin, ymax;  // inclusive pixel rows
};

struct SliceSet {
  Vec3 normal;                // object space
  std::vector<double> depth;  // dot(normal, p) per slice, back to front
  double step;                // object-space distance between samples along the view
};

Framebuffer render_slices(const Scene& scene, const detail::ViewSetup& vs, const SliceSet& set) {
  const auto lut = detail::build_lut(scene.tf, scene.volume->max_value(), set.step);
  const auto sampler = detail::make_sampler(scene, vs.obj_to_world);
  Framebuffer fb(vs.width, vs.height, scene.settings.background);

  const std::size_t npx = vs.rays.size();
  const float n[3] = {float(set.normal.x()), float(set.normal.y()), float(set.normal.z())};
  std::vector<float> plane_a(npx), plane_b(npx);
  for (std::size_t i = 0; i < npx; ++i) {
    const auto& r = vs.rays[i];
    plane_a[i] = n[0] * r.o[0] + n[1] * r.o[1] + n[2] * r.o[2];
    const float nd = n[0] * r.d[0] + n[1] * r.d[1] + n[2] * r.d[2];
    plane_b[i] = nd != 0.0f ? 1.0f / nd : 0.0f;
  }

  std::vector<Slice> slices;
  slices.reserve(set.depth.size());
  for (double c : set.depth) {
    const auto poly = slice_plane(set.normal, c);
    if (poly.empty()) continue;
    Poly2 screen = project(poly, vs.obj_to_clip, vs.width, vs.height);
    if (screen.empty()) continue;
    double lo = screen[0][1], hi = screen[0][1];
    for (const auto& p : screen) {
      lo = std::min(lo, p[1]);
      hi = std::max(hi, p[1]);
    }
    const int ymin = std::max(0, int(std::ceil(lo - 0.5)));
    const int ymax = std::min(vs.height - 1, int(std::ceil(hi - 0.5)) - 1);
    if (ymin > ymax) continue;
    slices.push_back({c, std::move(screen), ymin, ymax});
  }

  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t bands = std::min<std::size_t>(vs.height, hw == 1 ? 1 : hw * 4);
  parallel_for(0, bands, [&](std::size_t band) {
    const int y0 = int(band * vs.height / bands), y1 = int((band + 1) * vs.height / bands) - 1;
    for (const Slice& s : slices) {
      const float c = float(s.c);
      const int ya = std::max(y0, s.ymin), yb = std::min(y1, s.ymax);
      for (int y = ya; y <= yb; ++y) {
        const double yc = y + 0.5;
        double xl = INFINITY, xr = -INFINITY;
        for (std::size_t i = 0; i < s.screen.size(); ++i) {
          const auto& a = s.screen[i];
          const auto& b = s.screen[(i + 1) % s.screen.size()];
          if ((a[1] <= yc && b[1] > yc) || (b[1] <= yc && a[1] > yc)) {
            const double x = a[0] + (yc - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            xl = std::min(xl, x);
            xr = std::max(xr, x);
          }
        }
        if (!(xl < xr)) continue;
        const int xa = std::max(0, int(std::ceil(xl - 0.5)));
        const int xb = std::min(vs.width, int(std::ceil(xr - 0.5)));
        for (int x = xa; x < xb; ++x) {
          const std::size_t i = std::size_t(y) * vs.width + x;
          const auto& r = vs.rays[i];
          const float t = (c - plane_a[i]) * plane_b[i];
          const float px = r.o[0] + t * r.d[0], py = r.o[1] + t * r.d[1], pz = r.o[2] + t * r.d[2];
          if (sampler.culled(px, py, pz)) continue;
          const xfer::Rgba smp = lut.at(sampler.intensity(px, py, pz));
          if (smp.a <= 0.0f) continue;
          blend_over(fb.pixels[i], smp);
        }
      }
    }
  });
  return fb;
}

double oblique_step(double spacing, const Vec3& normal, const Vec3& dir) {
  return spacing / std::max(std::abs(normal.dot(dir)), 1e-3);
}

}  // namespace

std::vector<Vec3> slice_cube(const Vec3& point, const Vec3& normal) {
  const Vec3 n = normal.normalized();
  return slice_plane(n, n.dot(point));
}

Framebuffer render_texture_based(const Scene& scene, const View& view) {
  scene.validate();
  const auto vs = detail::setup_view(scene, view);
  const Vec3 dir = detail::central_direction(vs);
  int k = 2;
  if (std::abs(dir.y()) > std::abs(dir.z()) + 1e-12) k = 1;
  if (std::abs(dir.x()) > std::abs(dir(k)) + 1e-12) k = 0;

  // Eye coordinate along the slicing axis; at infinity for parallel views.
  double eye_k;
  if (vs.perspective) {
    eye_k = (vs.obj_to_world.inverse() * vs.eye_world.homogeneous())(k);
  } else {
    eye_k = dir(k) > 0 ? -INFINITY : INFINITY;
  }
  const int count = scene.settings.slice_count;
  SliceSet set;
  set.normal = Vec3::Unit(k);
  // Slices beyond the eye, farthest first, then those before it.
  for (int i = count - 1; i >= 0; --i) {
    const double c = (i + 0.5) / count;
    if (c > eye_k) set.depth.push_back(c);
  }
  for (int i = 0; i < count; ++i) {
    const double c = (i + 0.5) / count;
    if (c <= eye_k) set.depth.push_back(c);
  }
  set.step = oblique_step(1.0 / count, set.normal, dir);
  return render_slices(scene, vs, set);
}

Framebuffer render_view_aligned(const Scene& scene, const View& view) {
  scene.validate();
  const auto vs = detail::setup_view(scene, view);
  // View depth of object point p: dot(g, p) + d0.
  const Vec3 g = vs.obj_to_world.topLeftCorner<3, 3>().transpose() * vs.forward_world;
  const double d0 = vs.forward_world.dot(vs.obj_to_world.topRightCorner<3, 1>() - vs.eye_world);
  double dmin = INFINITY, dmax = -INFINITY;
  for (const auto& c : kCorners) {
    const double d = g.dot(c) + d0;
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
  }
  const int count = scene.settings.slice_count;
  const double gn = g.norm();
  SliceSet set;
  set.normal = g / gn;
  for (int i = count - 1; i >= 0; --i) {
    const double z = dmin + (i + 0.5) * (dmax - dmin) / count;
    if (z <= vs.near_m || z >= vs.far_m) continue;
    set.depth.push_back((z - d0) / gn);
  }
  set.step = oblique_step((dmax - dmin) / count / gn, set.normal, detail::central_direction(vs));
  return render_slices(scene, vs, set);
}

Framebuffer render_view(const Scene& scene, const View& view) {
  switch (scene.settings.method) {
    case Method::TextureBased: return render_texture_based(scene, view);
    case Method::ViewAligned: return render_view_aligned(scene, view);
    case Method::Raycast: return render_raycast(scene, view);
  }
  return render_raycast(scene, view);
}

}  // namespace vg::render
