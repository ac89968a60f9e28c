#pragma once

// Software volume renderer: texture-based slicing, view-aligned slicing and
// raycasting into float framebuffers, stereo rigs and spectator compositing.
//
// Object space is the unit cube [0,1]^3 (equal to texture space). It maps to
// world through [marker2world] * model(T*R*S) * extent * translate(-0.5), so
// the volume centre sits at the model origin and one model unit is a meter.

#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "voxelglass/error.hpp"
#include "voxelglass/image_io.hpp"
#include "voxelglass/spaces.hpp"
#include "voxelglass/volume.hpp"
#include "voxelglass/xfer.hpp"

namespace vg::render {

using spaces::Mat4;
using spaces::Vec3;

enum class RenderErrc { InvalidSettings, MissingView, ResolutionMismatch };
const char* to_string(RenderErrc e);
using RenderError = CodedError<RenderErrc>;

enum class Method { TextureBased, ViewAligned, Raycast };
std::string_view to_string(Method m);  // "texture-based", "view-aligned", "raycast"
std::optional<Method> parse_method(std::string_view name);

inline constexpr double kReferenceStep = 1.0 / 512.0;

struct RenderSettings {
  Method method = Method::ViewAligned;
  int width = 256, height = 256;
  int slice_count = 360;
  double step_size = kReferenceStep;  // object-space units
  double early_termination_alpha = 0.98;
  xfer::Rgb background{0.0f, 0.0f, 0.0f};

  // texture-based 512 slices, view-aligned 360, raycast step 1/512
  static RenderSettings defaults(Method m);
  void validate() const;
};

// World-space half-space clip; samples with dot(normal, x - point) < 0 vanish.
struct CutPlane {
  bool enabled = false;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  void validate() const;
};

struct View {
  Mat4 view = Mat4::Identity();  // world -> eye, camera looks down -z
  Mat4 proj = Mat4::Identity();
  int width = 0, height = 0;     // 0 takes the resolution from RenderSettings
};

struct ViewRig {
  View left, right;
  std::optional<View> pv;
};

struct RigParams {
  double baseline = 0.064;  // meters between eyes
  double vfov_deg = 90.0;
  double near_m = 0.1;
  double far_m = 20.0;
  // Photo/video camera: offset from the head and its own field of view.
  Vec3 pv_offset{0.0, 0.0, 0.0};
  double pv_vfov_deg = 90.0;
  void validate() const;
};

Mat4 perspective(double vfov_deg, double aspect, double near_m, double far_m);
Mat4 orthographic(double half_width, double half_height, double near_m, double far_m);
Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up);
// Eyes at head * (-b/2, 0, 0) and head * (b/2, 0, 0); PV at head * pv_offset.
ViewRig make_stereo_rig(const spaces::Pose& head_to_world, const RigParams& p, int width, int height,
                        bool with_pv = true);

struct Scene {
  std::shared_ptr<const VolumeDataset> volume;
  xfer::TransferFunction tf;
  spaces::ModelTransform model;
  std::optional<spaces::Pose> marker_to_world;
  CutPlane cut;
  ViewRig rig;
  RenderSettings settings;

  void validate() const;
};

// Applies the transfer function's CLAHE stage, if any, ahead of rendering.
std::shared_ptr<const VolumeDataset> prepare_volume(std::shared_ptr<const VolumeDataset> raw,
                                                    const xfer::TransferFunction& tf);

// Object (unit cube) -> world.
Mat4 object_to_world(const Scene& scene);

// Hologram layer with premultiplied colour; display = rgb + (1 - a) * background.
struct Framebuffer {
  int width = 0, height = 0;
  std::vector<xfer::Rgba> pixels;
  xfer::Rgb background{0.0f, 0.0f, 0.0f};

  Framebuffer() = default;
  Framebuffer(int w, int h, xfer::Rgb bg) : width(w), height(h), pixels(std::size_t(w) * h), background(bg) {}
  xfer::Rgba& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
  const xfer::Rgba& at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
  Image8 to_image() const;  // 8-bit RGB over the background
};

// ---- compositing -----------------------------------------------------------

inline xfer::Rgba premultiply(const xfer::Rgba& s) { return {s.r * s.a, s.g * s.a, s.b * s.a, s.a}; }

// Front-to-back: `s` (premultiplied) lies behind everything in `acc`.
inline void blend_under(xfer::Rgba& acc, const xfer::Rgba& s) {
  const float t = 1.0f - acc.a;
  acc.r += t * s.r;
  acc.g += t * s.g;
  acc.b += t * s.b;
  acc.a += t * s.a;
}

// Back-to-front OVER: `s` (premultiplied) lies in front of `acc`.
inline void blend_over(xfer::Rgba& acc, const xfer::Rgba& s) {
  const float t = 1.0f - s.a;
  acc.r = s.r + t * acc.r;
  acc.g = s.g + t * acc.g;
  acc.b = s.b + t * acc.b;
  acc.a = s.a + t * acc.a;
}

// Samples are straight-alpha, ordered front (index 0) to back.
xfer::Rgba composite_front_to_back(std::span<const xfer::Rgba> samples);
xfer::Rgba composite_back_to_front(std::span<const xfer::Rgba> samples);

// 1 - (1 - a)^(step / reference)
double correct_opacity(double alpha, double step, double reference = kReferenceStep);

// ---- sampling and proxy geometry --------------------------------------------

// Trilinear intensity at object-space p, classified (straight alpha, no
// opacity correction). Zero outside the cube or on the culled side of the cut.
xfer::Rgba sample_volume(const Scene& scene, const Vec3& p_object);

// Plane/unit-cube intersection, counter-clockwise about `normal`; empty when
// the plane misses the cube or only touches it in fewer than 3 points.
std::vector<Vec3> slice_cube(const Vec3& point, const Vec3& normal);

// ---- renderers ---------------------------------------------------------------

Framebuffer render_view(const Scene& scene, const View& view);  // dispatches on settings.method
Framebuffer render_texture_based(const Scene& scene, const View& view);
Framebuffer render_view_aligned(const Scene& scene, const View& view);
Framebuffer render_raycast(const Scene& scene, const View& view);

struct StereoFrame {
  Framebuffer left, right;
};
StereoFrame render_stereo(const Scene& scene);

// PV view blended over the captured RGB frame: out = hologram + (1 - a) * bg,
// computed on 8-bit background values so an empty hologram reproduces the
// background exactly. Only the PV view is rendered.
Image8 composite_spectator(const Scene& scene, const Image8& background);
Image8 render_spectator_only(const Scene& scene, const Image8& background);

// Regular recording cycle: both eyes plus the spectator composite.
struct ThreeViewFrame {
  StereoFrame stereo;
  Image8 spectator;
};
ThreeViewFrame render_three_views(const Scene& scene, const Image8& background);

// ---- phantoms ----------------------------------------------------------------

// Solid sphere of `radius` (fraction of the cube edge) centred in an n^3
// grid (0.32 m edge), edge voxels set by 4^3 supersampled coverage.
VolumeDataset make_sphere_phantom(std::uint32_t n = 32, double radius = 0.35, std::uint16_t value = 3000);
// Nested ellipsoids resembling a head-sized CT: skin, soft tissue, bone and
// a bright core. Spacing chosen so the volume is about 0.36 m on each side.
VolumeDataset make_ellipsoid_phantom(Dims dims = {256, 256, 144});

// PSNR in dB between two equally sized 8-bit images (inf when identical).
double psnr(const Image8& a, const Image8& b);

}  // namespace vg::render
