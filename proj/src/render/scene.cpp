#include <cmath>
#include <mutex>

#include "detail.hpp"

namespace vg::render {

void Scene::validate() const {
  if (!volume || volume->dims.count() == 0 || volume->voxels.size() != volume->dims.count()) {
    throw RenderError(RenderErrc::InvalidSettings, "scene needs a non-empty volume");
  }
  settings.validate();
  cut.validate();
  model.validate();
  tf.window.validate();
  tf.opacity.validate();
}

std::shared_ptr<const VolumeDataset> prepare_volume(std::shared_ptr<const VolumeDataset> raw,
                                                    const xfer::TransferFunction& tf) {
  if (!tf.clahe) return raw;
  return std::make_shared<const VolumeDataset>(xfer::clahe3d(*raw, *tf.clahe));
}

Mat4 object_to_world(const Scene& scene) {
  const auto ext = scene.volume->extent_m();
  Mat4 e = Mat4::Identity();
  for (int i = 0; i < 3; ++i) {
    e(i, i) = ext[i];
    e(i, 3) = -0.5 * ext[i];
  }
  Mat4 m = scene.model.matrix() * e;
  if (scene.marker_to_world) m = scene.marker_to_world->matrix() * m;
  return m;
}

Image8 Framebuffer::to_image() const {
  Image8 img(width, height, 3);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const auto& p = pixels[i];
    const float rgb[3] = {p.r, p.g, p.b};
    for (int c = 0; c < 3; ++c) {
      const float v = (rgb[c] + (1.0f - p.a) * background[c]) * 255.0f;
      img.pixels[i * 3 + c] = std::uint8_t(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return img;
}

xfer::Rgba composite_front_to_back(std::span<const xfer::Rgba> samples) {
  xfer::Rgba acc;
  for (const auto& s : samples) blend_under(acc, premultiply(s));
  return acc;
}

xfer::Rgba composite_back_to_front(std::span<const xfer::Rgba> samples) {
  xfer::Rgba acc;
  for (auto it = samples.rbegin(); it != samples.rend(); ++it) blend_over(acc, premultiply(*it));
  return acc;
}

double correct_opacity(double alpha, double step, double reference) {
  if (alpha >= 1.0) return 1.0;
  return 1.0 - std::pow(1.0 - alpha, step / reference);
}

double psnr(const Image8& a, const Image8& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw RenderError(RenderErrc::ResolutionMismatch, "psnr needs equally sized images");
  }
  double se = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = double(a.pixels[i]) - double(b.pixels[i]);
    se += d * d;
  }
  if (se == 0.0) return INFINITY;
  const double mse = se / double(a.pixels.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace detail {

Lut build_lut(const xfer::TransferFunction& tf, std::uint16_t max_value, double step) {
  Lut lut;
  lut.entries.resize(std::size_t(max_value) + 1);
  for (std::size_t k = 0; k < lut.entries.size(); ++k) {
    xfer::Rgba c = xfer::classify(double(k) / max_value, tf);
    c.a = float(correct_opacity(c.a, step));
    lut.entries[k] = premultiply(c);
  }
  return lut;
}

Bricks make_bricks(const VolumeDataset& v) {
  Bricks b;
  b.nx = int(v.dims.nx);
  b.ny = int(v.dims.ny);
  b.nz = int(v.dims.nz);
  b.bx = (b.nx + Bricks::kCells - 1) / Bricks::kCells;
  b.by = (b.ny + Bricks::kCells - 1) / Bricks::kCells;
  const int bz = (b.nz + Bricks::kCells - 1) / Bricks::kCells;
  b.data.resize(std::size_t(b.bx) * b.by * bz * Bricks::kSize);
  std::size_t out = 0;
  for (int zb = 0; zb < bz; ++zb)
    for (int yb = 0; yb < b.by; ++yb)
      for (int xb = 0; xb < b.bx; ++xb)
        for (int k = 0; k < Bricks::kSide; ++k) {
          const auto z = std::uint32_t(std::min(zb * Bricks::kCells + k, b.nz - 1));
          for (int j = 0; j < Bricks::kSide; ++j) {
            const auto y = std::uint32_t(std::min(yb * Bricks::kCells + j, b.ny - 1));
            for (int i = 0; i < Bricks::kSide; ++i) {
              const auto x = std::uint32_t(std::min(xb * Bricks::kCells + i, b.nx - 1));
              b.data[out++] = v.at(x, y, z);
            }
          }
        }
  return b;
}

std::shared_ptr<const Bricks> bricks_for(const std::shared_ptr<const VolumeDataset>& v) {
  struct Entry {
    std::weak_ptr<const VolumeDataset> owner;
    std::shared_ptr<const Bricks> bricks;
  };
  static std::mutex mu;
  static std::vector<Entry> cache;
  std::lock_guard lock(mu);
  std::erase_if(cache, [](const Entry& e) { return e.owner.expired(); });
  for (const auto& e : cache) {
    if (!e.owner.owner_before(v) && !v.owner_before(e.owner) && e.owner.lock().get() == v.get()) return e.bricks;
  }
  auto b = std::make_shared<const Bricks>(make_bricks(*v));
  if (cache.size() >= 4) cache.erase(cache.begin());
  cache.push_back({v, b});
  return b;
}

Sampler make_sampler(const Scene& scene, const Mat4& obj_to_world) {
  Sampler s;
  s.bricks = bricks_for(scene.volume);
  s.data = s.bricks->data.data();
  s.nx = s.bricks->nx;
  s.ny = s.bricks->ny;
  s.nz = s.bricks->nz;
  s.bx = s.bricks->bx;
  s.by = s.bricks->by;
  if (scene.cut.enabled) {
    // dot(n, M p + t - q) >= 0  ->  dot(M^T n, p) + dot(n, t - q) >= 0
    const Vec3 n = obj_to_world.topLeftCorner<3, 3>().transpose() * scene.cut.normal;
    const double d = scene.cut.normal.dot(obj_to_world.topRightCorner<3, 1>() - scene.cut.point);
    s.cut = true;
    for (int i = 0; i < 3; ++i) s.cut_n[i] = float(n(i));
    s.cut_d = float(d);
  }
  return s;
}

ViewSetup setup_view(const Scene& scene, const View& view) {
  ViewSetup vs;
  vs.width = view.width > 0 ? view.width : scene.settings.width;
  vs.height = view.height > 0 ? view.height : scene.settings.height;
  vs.obj_to_world = object_to_world(scene);
  vs.obj_to_clip = view.proj * view.view * vs.obj_to_world;
  const Mat4 cam_to_world = view.view.inverse();
  vs.eye_world = cam_to_world.topRightCorner<3, 1>();
  vs.forward_world = -cam_to_world.block<3, 1>(0, 2).normalized();
  vs.perspective = std::abs(view.proj(3, 3)) < 1e-12;
  // Recover near/far from the depth row.
  const double a = view.proj(2, 2), b = view.proj(2, 3);
  if (vs.perspective) {
    vs.near_m = b / (a - 1.0);
    vs.far_m = b / (a + 1.0);
  } else {
    vs.near_m = (b + 1.0) / a;
    vs.far_m = (b - 1.0) / a;
  }

  const Mat4 inv = vs.obj_to_clip.inverse();
  vs.rays.resize(std::size_t(vs.width) * vs.height);
  for (int y = 0; y < vs.height; ++y) {
    const double ny = 1.0 - 2.0 * (y + 0.5) / vs.height;
    for (int x = 0; x < vs.width; ++x) {
      const double nx = 2.0 * (x + 0.5) / vs.width - 1.0;
      const Eigen::Vector4d pn = inv * Eigen::Vector4d(nx, ny, -1.0, 1.0);
      const Eigen::Vector4d pf = inv * Eigen::Vector4d(nx, ny, 1.0, 1.0);
      const Vec3 o = pn.head<3>() / pn.w();
      Vec3 d = pf.head<3>() / pf.w() - o;
      const double len = d.norm();
      d /= len;
      PixelRay& r = vs.rays[std::size_t(y) * vs.width + x];
      for (int i = 0; i < 3; ++i) {
        r.o[i] = float(o(i));
        r.d[i] = float(d(i));
      }
      r.tmax = float(len);
    }
  }
  return vs;
}

Vec3 central_direction(const ViewSetup& vs) {
  const Mat4 world_to_obj = vs.obj_to_world.inverse();
  if (vs.perspective) {
    const Vec3 eye = (world_to_obj * vs.eye_world.homogeneous()).head<3>();
    const Vec3 d = Vec3(0.5, 0.5, 0.5) - eye;
    if (d.norm() > 1e-9) return d.normalized();
  }
  return (world_to_obj.topLeftCorner<3, 3>() * vs.forward_world).normalized();
}

}  // namespace detail

xfer::Rgba sample_volume(const Scene& scene, const Vec3& p) {
  if ((p.array() < 0.0).any() || (p.array() > 1.0).any()) return {};
  const auto s = detail::make_sampler(scene, object_to_world(scene));
  if (s.culled(float(p.x()), float(p.y()), float(p.z()))) return {};
  const float v = s.intensity(float(p.x()), float(p.y()), float(p.z()));
  return xfer::classify(double(v) / scene.volume->max_value(), scene.tf);
}

}  // namespace vg::render
