#include <cmath>

#include "voxelglass/render.hpp"

namespace vg::render {

const char* to_string(RenderErrc e) {
  switch (e) {
    case RenderErrc::InvalidSettings: return "InvalidSettings";
    case RenderErrc::MissingView: return "MissingView";
    case RenderErrc::ResolutionMismatch: return "ResolutionMismatch";
  }
  return "Unknown";
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::TextureBased: return "texture-based";
    case Method::ViewAligned: return "view-aligned";
    case Method::Raycast: return "raycast";
  }
  return "view-aligned";
}

std::optional<Method> parse_method(std::string_view name) {
  for (Method m : {Method::TextureBased, Method::ViewAligned, Method::Raycast}) {
    if (name == to_string(m)) return m;
  }
  if (name == "texture" || name == "TextureBased") return Method::TextureBased;
  if (name == "viewaligned" || name == "ViewAligned") return Method::ViewAligned;
  if (name == "Raycast" || name == "raycasting") return Method::Raycast;
  return std::nullopt;
}

RenderSettings RenderSettings::defaults(Method m) {
  RenderSettings s;
  s.method = m;
  s.slice_count = m == Method::TextureBased ? 512 : 360;
  return s;
}

void RenderSettings::validate() const {
  if (slice_count < 2) throw RenderError(RenderErrc::InvalidSettings, "slice_count must be >= 2");
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw RenderError(RenderErrc::InvalidSettings, "step_size must be positive");
  }
  if (width < 16 || height < 16) throw RenderError(RenderErrc::InvalidSettings, "resolution must be at least 16x16");
  if (!(early_termination_alpha > 0.0 && early_termination_alpha <= 1.0)) {
    throw RenderError(RenderErrc::InvalidSettings, "early_termination_alpha must be in (0,1]");
  }
  for (float c : background) {
    if (!(c >= 0.0f && c <= 1.0f)) throw RenderError(RenderErrc::InvalidSettings, "background outside [0,1]");
  }
}

void CutPlane::validate() const {
  if (std::abs(normal.norm() - 1.0) > 1e-6) throw RenderError(RenderErrc::InvalidSettings, "cut normal must be unit");
  if (!point.allFinite()) throw RenderError(RenderErrc::InvalidSettings, "cut point must be finite");
}

void RigParams::validate() const {
  if (!(baseline >= 0.0)) throw RenderError(RenderErrc::InvalidSettings, "baseline must be >= 0");
  if (!(vfov_deg > 0.0 && vfov_deg < 180.0) || !(pv_vfov_deg > 0.0 && pv_vfov_deg < 180.0)) {
    throw RenderError(RenderErrc::InvalidSettings, "field of view must be in (0,180)");
  }
  if (!(near_m > 0.0 && near_m < far_m)) throw RenderError(RenderErrc::InvalidSettings, "need 0 < near < far");
}

Mat4 perspective(double vfov_deg, double aspect, double n, double f) {
  const double t = 1.0 / std::tan(vfov_deg * M_PI / 360.0);
  Mat4 p = Mat4::Zero();
  p(0, 0) = t / aspect;
  p(1, 1) = t;
  p(2, 2) = -(f + n) / (f - n);
  p(2, 3) = -2.0 * f * n / (f - n);
  p(3, 2) = -1.0;
  return p;
}

Mat4 orthographic(double hw, double hh, double n, double f) {
  Mat4 p = Mat4::Identity();
  p(0, 0) = 1.0 / hw;
  p(1, 1) = 1.0 / hh;
  p(2, 2) = -2.0 / (f - n);
  p(2, 3) = -(f + n) / (f - n);
  return p;
}

Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 f = (target - eye).normalized();
  const Vec3 s = f.cross(up).normalized();
  const Vec3 u = s.cross(f);
  Mat4 v = Mat4::Identity();
  v.block<1, 3>(0, 0) = s.transpose();
  v.block<1, 3>(1, 0) = u.transpose();
  v.block<1, 3>(2, 0) = -f.transpose();
  v(0, 3) = -s.dot(eye);
  v(1, 3) = -u.dot(eye);
  v(2, 3) = f.dot(eye);
  return v;
}

ViewRig make_stereo_rig(const spaces::Pose& head, const RigParams& p, int width, int height, bool with_pv) {
  p.validate();
  const double aspect = double(width) / height;
  auto eye_view = [&](const Vec3& offset, double fov) {
    const spaces::Pose eye_to_world = spaces::compose(head, spaces::Pose{spaces::Mat3::Identity(), offset});
    return View{spaces::invert(eye_to_world).matrix(), perspective(fov, aspect, p.near_m, p.far_m), width, height};
  };
  ViewRig rig;
  rig.left = eye_view(Vec3(-p.baseline / 2, 0, 0), p.vfov_deg);
  rig.right = eye_view(Vec3(p.baseline / 2, 0, 0), p.vfov_deg);
  if (with_pv) rig.pv = eye_view(p.pv_offset, p.pv_vfov_deg);
  return rig;
}

}  // namespace vg::render
