#pragma once

// Rigid poses, the named coordinate-space graph, marker pose recovery from
// corner observations and assembly of the render matrix chain.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>

#include "voxelglass/error.hpp"

namespace vg::spaces {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Quat = Eigen::Quaterniond;

enum class SpacesErrc { UnknownSpace, DisconnectedSpace, CycleDetected, DegenerateCorners, BehindCamera, InvalidParams };
const char* to_string(SpacesErrc e);
using SpacesError = CodedError<SpacesErrc>;

struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  static Pose translate(double x, double y, double z) { return {Mat3::Identity(), Vec3(x, y, z)}; }
  static Pose from_quat(const Quat& q, const Vec3& t) { return {q.normalized().toRotationMatrix(), t}; }

  Mat4 matrix() const;
  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Quat quat() const { return Quat(rotation).normalized(); }
  // Orthonormal with det +1 within `tol`.
  bool valid(double tol = 1e-6) const;
};

// Matrix-product semantics: compose(a, b).apply(p) == a.apply(b.apply(p)).
Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& a);
// Nearest rotation in the Frobenius sense (polar decomposition).
Mat3 nearest_rotation(const Mat3& m);
double rotation_angle(const Mat3& a, const Mat3& b);  // radians
// Translation lerp + rotation slerp; weight 1 returns `fresh`.
Pose blend(const Pose& old, const Pose& fresh, double weight);

// ---- space graph -----------------------------------------------------------

enum class SpaceId { World, Sensor, Marker, HandLeft, HandRight, ViewLeft, ViewRight, ViewPV };
std::string_view to_string(SpaceId id);

struct SpaceEdge {
  SpaceId parent = SpaceId::World;
  Pose child_to_parent;
  double timestamp = 0.0;
};

// Tree of spaces rooted at World. Each registered space stores its pose
// relative to a parent.
class SpaceGraph {
 public:
  // Throws CycleDetected when `parent` is (transitively) a child of `child`.
  void set_edge(SpaceId child, SpaceId parent, const Pose& child_to_parent, double timestamp = 0.0);
  void remove(SpaceId id);
  bool contains(SpaceId id) const { return id == SpaceId::World || edges_.count(id) != 0; }
  const SpaceEdge* edge(SpaceId id) const;
  // Pose mapping coordinates in `from` to coordinates in `to`.
  Pose resolve(SpaceId from, SpaceId to) const;

 private:
  Pose to_world(SpaceId id) const;
  std::map<SpaceId, SpaceEdge> edges_;
};

// Re-anchors the world-fixed marker: the new detection (marker->sensor) is
// chained through the current Sensor pose and blended into the stored
// Marker->World edge with exponential weight `weight`.
void update_marker_anchor(SpaceGraph& g, const Pose& marker_to_sensor, double timestamp, double weight = 0.3);

// One writer, many readers; readers get an immutable snapshot.
class SharedSpaceGraph {
 public:
  std::shared_ptr<const SpaceGraph> snapshot() const {
    std::lock_guard lock(mu_);
    return current_;
  }
  template <class Fn>
  void update(Fn&& fn) {
    std::lock_guard lock(mu_);
    auto next = std::make_shared<SpaceGraph>(*current_);
    fn(*next);
    current_ = std::move(next);
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const SpaceGraph> current_ = std::make_shared<SpaceGraph>();
};

// ---- marker pose -----------------------------------------------------------

struct PinholeCamera {
  double fx = 450.0, fy = 450.0;
  double cx = 320.0, cy = 240.0;
  int width = 640, height = 480;

  void validate() const;
  Mat3 K() const;
  Vec2 project(const Vec3& p_cam) const { return {fx * p_cam.x() / p_cam.z() + cx, fy * p_cam.y() / p_cam.z() + cy}; }
};

// Corners in canonical order: (-s/2, s/2), (s/2, s/2), (s/2, -s/2), (-s/2, -s/2), z = 0.
struct MarkerObservation {
  double marker_size = 0.15;
  std::array<Vec2, 4> corners;
};

std::array<Vec3, 4> marker_corners(double marker_size);
// Synthetic observation of a marker at `marker_to_sensor`.
MarkerObservation project_marker(const PinholeCamera& cam, const Pose& marker_to_sensor, double marker_size);
// Planar homography (normalized DLT) decomposed through K^-1 into a
// marker->sensor pose, then polished by up to `refine_iterations` steps of
// reprojection-error minimization (0 returns the closed form).
inline constexpr int kDefaultRefineIterations = 20;
Pose estimate_marker_pose(const PinholeCamera& cam, const MarkerObservation& obs,
                          int refine_iterations = kDefaultRefineIterations);
// RMS pixel distance between observed corners and the projection under `pose`.
double reprojection_rms(const PinholeCamera& cam, const MarkerObservation& obs, const Pose& pose);

// ---- model and render chain ------------------------------------------------

struct ModelTransform {
  Vec3 scale = Vec3::Ones();
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Mat4 matrix() const;  // T * R * S
  void validate() const;
};

// proj * view * [marker2world *] model
Mat4 build_render_matrix(const Mat4& proj, const Mat4& view, const std::optional<Pose>& marker_to_world,
                         const ModelTransform& model);

ModelTransform apply_hand_delta(const ModelTransform& model, const Vec3& delta_world, double sensitivity);

}  // namespace vg::spaces
