#pragma once

// Hand-driven manipulation (translate, two-hand rotate/scale, palm-driven
// cutting plane) and pressure-sensitive sketching on a virtual plane.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "voxelglass/error.hpp"
#include "voxelglass/image_io.hpp"
#include "voxelglass/render.hpp"
#include "voxelglass/spaces.hpp"
#include "voxelglass/xfer.hpp"

namespace vg::interact {

using spaces::Vec3;

enum class InteractErrc { InvalidParams, ParseError, IoFailure };
const char* to_string(InteractErrc e);
using InteractError = CodedError<InteractErrc>;

struct HandState {
  bool present = false;
  spaces::Pose palm;
  Vec3 index_tip = Vec3::Zero();
  bool grabbing = false;
};

struct HandFrame {
  double timestamp = 0.0;
  HandState left, right;
};

enum class GestureMode { Idle, OneHandTranslate, TwoHandManipulate, CutPlaneControl };
std::string_view to_string(GestureMode m);

struct GestureAnchor {
  spaces::ModelTransform model;  // model at gesture start
  Vec3 left = Vec3::Zero();      // grabbing hand positions at gesture start
  Vec3 right = Vec3::Zero();
  bool use_right = true;         // which hand drives one-hand translation
};

struct GestureState {
  GestureMode mode = GestureMode::Idle;
  std::optional<GestureAnchor> anchor;  // set iff mode is not Idle
  bool cut_mode = false;                // grabs steer the cutting plane instead of the model
  std::optional<double> last_timestamp;
};

inline constexpr double kMinAnchorDistance = 0.01;

struct GestureUpdate {
  GestureState state;
  spaces::ModelTransform model;
  render::CutPlane cut;
};

// Palm normal is the palm's -Y axis.
Vec3 palm_normal(const spaces::Pose& palm);

// Frames with timestamps not after the previous one are ignored.
GestureUpdate update_gesture(const GestureState& state, const spaces::ModelTransform& model,
                             const render::CutPlane& cut, const HandFrame& frame, double sensitivity);

// ---- sketching -------------------------------------------------------------

struct PlaneCanvas {
  Vec3 point = Vec3::Zero();   // canvas centre
  Vec3 normal = Vec3::UnitZ(); // toward the user
  Vec3 up = Vec3::UnitY();     // in-plane up direction (projected onto the plane)
  double width = 0.4, height = 0.3;

  void validate() const;
  Vec3 u_axis() const;  // canvas right
  Vec3 v_axis() const;  // canvas up
};

struct StrokePoint {
  double u = 0, v = 0;  // meters from the canvas centre
  double width = 0;     // meters
};

struct SketchStroke {
  std::vector<StrokePoint> points;
  xfer::Rgba color{1, 0, 0, 1};
};

struct PressureMap {
  double width_min = 0.001, width_max = 0.008;
  double depth_max = 0.03;
  double touch_radius = 0.01;
  void validate() const;
};

struct PressureSample {
  double d;    // signed distance of the tip to the plane
  Vec3 p_v;    // tip projected onto the plane
};

// d = n . (P_r - point), P_v = P_r - d n
PressureSample virtual_pressure(const Vec3& tip, const PlaneCanvas& canvas);
double pressure_to_width(double d, const PressureMap& pm);
inline bool in_contact(double d, const PressureMap& pm) { return d <= pm.touch_radius; }

enum class StrokeEvent { None, Started, Extended, Ended };

struct SketchResult {
  StrokeEvent event = StrokeEvent::None;
  std::optional<SketchStroke> finished;  // set when the active stroke ended
};

// Advances `active` by one tip sample. A new stroke takes `color`.
SketchResult sketch_step(const PlaneCanvas& canvas, const Vec3& tip, const PressureMap& pm,
                         std::optional<SketchStroke>& active, const xfer::Rgba& color = {1, 0, 0, 1});

// RGBA mask covering the canvas (row 0 = top edge), strokes drawn as round
// brushes of their local width.
Image8 rasterize_strokes(const PlaneCanvas& canvas, const std::vector<SketchStroke>& strokes, double px_per_meter);

// ---- hand stream replay ----------------------------------------------------
// One frame per line, whitespace separated, '#' starts a comment:
//   t  lx ly lz lgrab  rx ry rz rgrab  lqw lqx lqy lqz  rqw rqx rqy rqz
// Positions are index-tip positions in world meters (the palm is placed at
// the same point). grab is 1/0, or -1 when the hand is not tracked. The
// quaternions are palm orientations; they may be omitted (identity).

std::vector<HandFrame> parse_hand_stream(std::string_view text);
std::vector<HandFrame> load_hand_stream(const std::filesystem::path& path);
std::string format_hand_frame(const HandFrame& f);

}  // namespace vg::interact
