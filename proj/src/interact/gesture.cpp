#include "voxelglass/interact.hpp"

namespace vg::interact {

const char* to_string(InteractErrc e) {
  switch (e) {
    case InteractErrc::InvalidParams: return "InvalidParams";
    case InteractErrc::ParseError: return "ParseError";
    case InteractErrc::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

std::string_view to_string(GestureMode m) {
  switch (m) {
    case GestureMode::Idle: return "Idle";
    case GestureMode::OneHandTranslate: return "OneHandTranslate";
    case GestureMode::TwoHandManipulate: return "TwoHandManipulate";
    case GestureMode::CutPlaneControl: return "CutPlaneControl";
  }
  return "Idle";
}

Vec3 palm_normal(const spaces::Pose& palm) { return palm.rotation * Vec3(0, -1, 0); }

GestureUpdate update_gesture(const GestureState& state, const spaces::ModelTransform& model,
                             const render::CutPlane& cut, const HandFrame& frame, double sensitivity) {
  GestureUpdate out{state, model, cut};
  if (state.last_timestamp && frame.timestamp <= *state.last_timestamp) return out;
  GestureState& s = out.state;
  s.last_timestamp = frame.timestamp;

  const bool lg = frame.left.present && frame.left.grabbing;
  const bool rg = frame.right.present && frame.right.grabbing;
  const Vec3 lp = frame.left.palm.translation;
  const Vec3 rp = frame.right.palm.translation;

  GestureMode want = GestureMode::Idle;
  if (s.cut_mode && (lg || rg)) {
    want = GestureMode::CutPlaneControl;
  } else if (lg && rg) {
    want = GestureMode::TwoHandManipulate;
  } else if (lg || rg) {
    want = GestureMode::OneHandTranslate;
  }

  if (want == GestureMode::Idle) {
    s.mode = GestureMode::Idle;
    s.anchor.reset();
    return out;
  }
  const bool hand_switched = s.anchor && want != GestureMode::TwoHandManipulate && s.anchor->use_right != rg;
  if (want != s.mode || !s.anchor || hand_switched) {
    s.mode = want;
    s.anchor = GestureAnchor{model, lp, rp, rg};
    if (want != GestureMode::CutPlaneControl) return out;
  }
  const GestureAnchor& a = *s.anchor;

  switch (want) {
    case GestureMode::CutPlaneControl: {
      const spaces::Pose& palm = rg ? frame.right.palm : frame.left.palm;
      out.cut.enabled = true;
      out.cut.point = palm.translation;
      out.cut.normal = palm_normal(palm).normalized();
      break;
    }
    case GestureMode::OneHandTranslate: {
      const Vec3 delta = a.use_right ? rp - a.right : lp - a.left;
      out.model = spaces::apply_hand_delta(a.model, delta, sensitivity);
      break;
    }
    case GestureMode::TwoHandManipulate: {
      const Vec3 from = a.right - a.left;
      const Vec3 to = rp - lp;
      spaces::Quat q = spaces::Quat::Identity();
      if (from.norm() > 1e-12 && to.norm() > 1e-12) q = spaces::Quat::FromTwoVectors(from, to);
      double factor = 1.0;
      if (from.norm() >= kMinAnchorDistance) factor = std::max(to.norm(), kMinAnchorDistance) / from.norm();
      out.model = spaces::apply_hand_delta(a.model, 0.5 * ((lp + rp) - (a.left + a.right)), sensitivity);
      out.model.rotation = spaces::nearest_rotation(q.toRotationMatrix() * a.model.rotation);
      out.model.scale = factor * a.model.scale;
      break;
    }
    case GestureMode::Idle: break;
  }
  return out;
}

}  // namespace vg::interact
