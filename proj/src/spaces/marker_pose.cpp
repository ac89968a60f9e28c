#include <Eigen/SVD>
#include <cmath>

#include "voxelglass/spaces.hpp"

namespace vg::spaces {

namespace {

// Similarity taking the points to zero mean and mean distance sqrt(2).
Mat3 normalizer(const std::array<Vec2, 4>& pts) {
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= 4.0;
  double dist = 0.0;
  for (const auto& p : pts) dist += (p - mean).norm();
  dist /= 4.0;
  const double s = std::sqrt(2.0) / dist;
  Mat3 t;
  t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return t;
}

Vec2 apply_h(const Mat3& h, const Vec2& p) {
  const Vec3 v = h * Vec3(p.x(), p.y(), 1.0);
  return v.head<2>() / v.z();
}

void check_corners(const PinholeCamera& cam, const MarkerObservation& obs) {
  if (!(obs.marker_size > 0.0) || !std::isfinite(obs.marker_size)) {
    throw SpacesError(SpacesErrc::InvalidParams, "marker size must be positive");
  }
  const double scale = std::max(cam.width, cam.height);
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const Vec2& a = obs.corners[i];
    const Vec2& b = obs.corners[(i + 1) % 4];
    const Vec2& c = obs.corners[(i + 2) % 4];
    if (!a.allFinite()) throw SpacesError(SpacesErrc::DegenerateCorners, "corner is not finite");
    const double cross = (b - a).x() * (c - b).y() - (b - a).y() * (c - b).x();
    // Relative to the image scale so tiny-but-valid quads still pass.
    if (std::abs(cross) < 1e-9 * scale * scale) {
      throw SpacesError(SpacesErrc::DegenerateCorners, "corners are collinear or coincident");
    }
    const int s = cross > 0 ? 1 : -1;
    if (sign != 0 && s != sign) throw SpacesError(SpacesErrc::DegenerateCorners, "corner quad is not convex");
    sign = s;
  }
}

// Levenberg-Marquardt on corner reprojection error, rotation perturbed on
// the left.
Pose refine(const PinholeCamera& cam, const std::array<Vec3, 4>& pts, const std::array<Vec2, 4>& uv, Pose pose,
            int iterations) {
  using M86 = Eigen::Matrix<double, 8, 6>;
  using V8 = Eigen::Matrix<double, 8, 1>;
  using V6 = Eigen::Matrix<double, 6, 1>;
  auto residual = [&](const Pose& p, M86* jac) {
    V8 r;
    for (int i = 0; i < 4; ++i) {
      const Vec3 rx = p.rotation * pts[i];
      const Vec3 pc = rx + p.translation;
      const double iz = 1.0 / pc.z();
      r.segment<2>(2 * i) = cam.project(pc) - uv[i];
      if (jac) {
        Eigen::Matrix<double, 2, 3> dproj;
        dproj << cam.fx * iz, 0, -cam.fx * pc.x() * iz * iz, 0, cam.fy * iz, -cam.fy * pc.y() * iz * iz;
        Mat3 skew;
        skew << 0, -rx.z(), rx.y(), rx.z(), 0, -rx.x(), -rx.y(), rx.x(), 0;
        jac->block<2, 3>(2 * i, 0) = -dproj * skew;
        jac->block<2, 3>(2 * i, 3) = dproj;
      }
    }
    return r;
  };
  double mu = 1e-3;
  M86 j;
  V8 res = residual(pose, &j);
  for (int it = 0; it < iterations; ++it) {
    const Eigen::Matrix<double, 6, 6> h = j.transpose() * j;
    const V6 g = j.transpose() * res;
    Eigen::Matrix<double, 6, 6> damped = h;
    damped.diagonal() *= 1.0 + mu;
    const V6 step = damped.ldlt().solve(-g);
    if (!step.allFinite()) break;
    Pose next = pose;
    const Vec3 w = step.head<3>();
    if (w.norm() > 0) next.rotation = Eigen::AngleAxisd(w.norm(), w / w.norm()).toRotationMatrix() * pose.rotation;
    next.translation += step.tail<3>();
    bool in_front = true;
    for (const auto& c : pts) in_front = in_front && next.apply(c).z() > 0.0;
    M86 next_j;
    const V8 next_res = in_front ? residual(next, &next_j) : V8::Constant(HUGE_VAL);
    if (next_res.squaredNorm() < res.squaredNorm()) {
      const double gain = res.squaredNorm() - next_res.squaredNorm();
      pose = next;
      res = next_res;
      j = next_j;
      mu = std::max(mu / 3.0, 1e-12);
      if (gain < 1e-20) break;
    } else {
      mu *= 4.0;
      if (mu > 1e10) break;
    }
  }
  pose.rotation = nearest_rotation(pose.rotation);
  return pose;
}

}  // namespace

void PinholeCamera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || width <= 0 || height <= 0) {
    throw SpacesError(SpacesErrc::InvalidParams, "camera intrinsics must be positive");
  }
}

Mat3 PinholeCamera::K() const {
  Mat3 k;
  k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return k;
}

std::array<Vec3, 4> marker_corners(double s) {
  const double h = s / 2.0;
  return {Vec3(-h, h, 0), Vec3(h, h, 0), Vec3(h, -h, 0), Vec3(-h, -h, 0)};
}

MarkerObservation project_marker(const PinholeCamera& cam, const Pose& marker_to_sensor, double marker_size) {
  MarkerObservation obs;
  obs.marker_size = marker_size;
  const auto pts = marker_corners(marker_size);
  for (int i = 0; i < 4; ++i) {
    const Vec3 pc = marker_to_sensor.apply(pts[i]);
    if (pc.z() <= 0.0) throw SpacesError(SpacesErrc::BehindCamera, "marker corner behind the camera");
    obs.corners[i] = cam.project(pc);
  }
  return obs;
}

Pose estimate_marker_pose(const PinholeCamera& cam, const MarkerObservation& obs, int refine_iterations) {
  cam.validate();
  check_corners(cam, obs);

  const auto obj3 = marker_corners(obs.marker_size);
  std::array<Vec2, 4> obj;
  for (int i = 0; i < 4; ++i) obj[i] = obj3[i].head<2>();
  const Mat3 tx = normalizer(obj);
  const Mat3 tu = normalizer(obs.corners);

  Eigen::Matrix<double, 8, 9> a;
  for (int i = 0; i < 4; ++i) {
    const Vec2 x = apply_h(tx, obj[i]);
    const Vec2 u = apply_h(tu, obs.corners[i]);
    a.row(2 * i) << -x.x(), -x.y(), -1, 0, 0, 0, u.x() * x.x(), u.x() * x.y(), u.x();
    a.row(2 * i + 1) << 0, 0, 0, -x.x(), -x.y(), -1, u.y() * x.x(), u.y() * x.y(), u.y();
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(a, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Mat3 hm = tu.inverse() * hn * tx;

  const Mat3 m = cam.K().inverse() * hm;
  double lambda = 1.0 / m.col(0).norm();
  if (m(2, 2) * lambda < 0.0) lambda = -lambda;
  const Vec3 r1 = lambda * m.col(0);
  const Vec3 r2 = lambda * m.col(1);
  Mat3 r;
  r.col(0) = r1;
  r.col(1) = r2;
  r.col(2) = r1.cross(r2);
  Pose pose{nearest_rotation(r), lambda * m.col(2)};

  if (!(pose.translation.z() > 0.0)) throw SpacesError(SpacesErrc::BehindCamera, "marker lies behind the camera");
  for (const auto& c : obj3) {
    if (pose.apply(c).z() <= 0.0) throw SpacesError(SpacesErrc::BehindCamera, "marker corner behind the camera");
  }
  if (refine_iterations > 0) pose = refine(cam, obj3, obs.corners, pose, refine_iterations);
  return pose;
}

double reprojection_rms(const PinholeCamera& cam, const MarkerObservation& obs, const Pose& pose) {
  const auto pts = marker_corners(obs.marker_size);
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) sum += (cam.project(pose.apply(pts[i])) - obs.corners[i]).squaredNorm();
  return std::sqrt(sum / 4.0);
}

}  // namespace vg::spaces
