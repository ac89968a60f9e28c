#include <Eigen/SVD>
#include <cmath>

#include "voxelglass/spaces.hpp"

namespace vg::spaces {

const char* to_string(SpacesErrc e) {
  switch (e) {
    case SpacesErrc::UnknownSpace: return "UnknownSpace";
    case SpacesErrc::DisconnectedSpace: return "DisconnectedSpace";
    case SpacesErrc::CycleDetected: return "CycleDetected";
    case SpacesErrc::DegenerateCorners: return "DegenerateCorners";
    case SpacesErrc::BehindCamera: return "BehindCamera";
    case SpacesErrc::InvalidParams: return "InvalidParams";
  }
  return "Unknown";
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

bool Pose::valid(double tol) const {
  return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(rotation.determinant() - 1.0) <= tol && translation.allFinite();
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Pose invert(const Pose& a) {
  const Mat3 rt = a.rotation.transpose();
  return {rt, -(rt * a.translation)};
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

double rotation_angle(const Mat3& a, const Mat3& b) {
  return Eigen::AngleAxisd(nearest_rotation(a.transpose() * b)).angle();
}

Pose blend(const Pose& old, const Pose& fresh, double weight) {
  const Quat q = old.quat().slerp(weight, fresh.quat());
  return {q.toRotationMatrix(), old.translation + weight * (fresh.translation - old.translation)};
}

Mat4 ModelTransform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation * scale.asDiagonal();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

void ModelTransform::validate() const {
  if (!(scale.minCoeff() > 0.0) || !scale.allFinite() || !translation.allFinite()) {
    throw SpacesError(SpacesErrc::InvalidParams, "model scale must be positive and finite");
  }
  if (!Pose{rotation, Vec3::Zero()}.valid(1e-6)) {
    throw SpacesError(SpacesErrc::InvalidParams, "model rotation is not orthonormal");
  }
}

Mat4 build_render_matrix(const Mat4& proj, const Mat4& view, const std::optional<Pose>& marker_to_world,
                         const ModelTransform& model) {
  if (marker_to_world) return proj * view * marker_to_world->matrix() * model.matrix();
  return proj * view * model.matrix();
}

ModelTransform apply_hand_delta(const ModelTransform& model, const Vec3& delta_world, double sensitivity) {
  ModelTransform out = model;
  out.translation += sensitivity * delta_world;
  return out;
}

}  // namespace vg::spaces
