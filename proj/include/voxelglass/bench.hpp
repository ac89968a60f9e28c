#pragma once

// Scripted-path frame-rate benchmark: rotation and approach paths driven in
// wall-clock time, fps averaged over 500 ms windows, CSV and SVG output.

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "voxelglass/error.hpp"
#include "voxelglass/render.hpp"

namespace vg::bench {

using spaces::Vec3;

enum class BenchErrc { InvalidPath, IoFailure };
const char* to_string(BenchErrc e);
using BenchError = CodedError<BenchErrc>;

enum class PathKind { RotateY, RotateX, ApproachZ };
std::string_view to_string(PathKind k);

struct ScriptedPath {
  PathKind kind = PathKind::RotateY;
  double distance_start = 2.0;  // meters from the head to the model origin
  double distance_end = 2.0;
  double duration = 10.0;       // seconds; rotations turn 360 degrees over it
  double window = 0.5;          // fps averaging window

  ScriptedPath() = default;
  // Throws InvalidPath unless duration > 0, window > 0 and distances >= 0.
  ScriptedPath(PathKind kind, double d_start, double d_end, double duration = 10.0, double window = 0.5);

  static ScriptedPath rotate_y(double d, double duration = 10.0) { return {PathKind::RotateY, d, d, duration}; }
  static ScriptedPath rotate_x(double d, double duration = 10.0) { return {PathKind::RotateX, d, d, duration}; }
  static ScriptedPath approach(double d_start = 2.0, double d_end = 0.0, double duration = 10.0) {
    return {PathKind::ApproachZ, d_start, d_end, duration};
  }

  void validate() const;
  std::string name() const;  // e.g. "rotate-y-2m", "approach-z"
  std::size_t window_count() const;
  double distance_at(double t) const;
  // Model placed `distance_at(t)` in front of the head (-z), rotated about
  // its own axis by 360 deg * t / duration for rotation paths.
  spaces::ModelTransform model_at(double t, const spaces::ModelTransform& base) const;
};

// Rotations about y and x at 1 m and 2 m, then the 2 m -> 0 m approach.
std::vector<ScriptedPath> default_paths(double duration = 10.0);

struct FpsSample {
  double window_start = 0;
  double fps = 0;
  int frames = 0;
};

struct BenchReport {
  std::string method;
  std::string path;
  render::RenderSettings settings;
  std::vector<FpsSample> samples;
  double mean_fps = 0, min_fps = 0, max_fps = 0;
  std::size_t frames = 0;

  // Mean fps over quarter `q` (0..3) of the windows.
  double quarter_mean(int q) const;
  // 1 - last quarter / first quarter.
  double relative_drop() const;
};

// Time source; the simulated clock only moves when something sleeps on it.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() = 0;
  virtual void sleep(double seconds) = 0;
};

class SteadyClock final : public Clock {
 public:
  double now() override;
  void sleep(double seconds) override;
};

class SimulatedClock final : public Clock {
 public:
  double now() override { return t_; }
  void sleep(double seconds) override { t_ += seconds; }

 private:
  double t_ = 0;
};

using FrameFn = std::function<void(const render::Scene&)>;

struct RunOptions {
  FrameFn render;                 // default: render_stereo
  std::shared_ptr<Clock> clock;   // default: SteadyClock
};

// Renders frames back to back while the model follows `path`; a frame counts
// in the window in which it completes (windows are closed on the right),
// frames ending after the path are dropped.
BenchReport run_path(const render::Scene& scene, const ScriptedPath& path, const RunOptions& opts = {});

// Stub renderer that spends `delay` seconds on `clock` per frame.
FrameFn fixed_delay_renderer(std::shared_ptr<Clock> clock, double delay);

// Scene used by the method comparison: default transfer function and method
// settings, stereo rig at the origin, `width` x `height` per eye.
render::Scene bench_scene(std::shared_ptr<const VolumeDataset> volume, render::Method method, int width = 256,
                          int height = 256);

// paths x {texture-based, view-aligned, raycast}, path-major.
std::vector<BenchReport> compare_methods(std::shared_ptr<const VolumeDataset> volume,
                                         const std::vector<ScriptedPath>& paths, const RunOptions& opts = {},
                                         int width = 256, int height = 256);
// Same, restricted to `methods` (kept in the given order within each path).
std::vector<BenchReport> compare_methods(std::shared_ptr<const VolumeDataset> volume,
                                         const std::vector<ScriptedPath>& paths,
                                         const std::vector<render::Method>& methods, const RunOptions& opts = {},
                                         int width = 256, int height = 256);

// `method,path,window_start,fps`, one row per window.
std::string to_csv(const std::vector<BenchReport>& reports);
// `method,path,frames,mean_fps,min_fps,max_fps`, one row per report.
std::string to_summary_csv(const std::vector<BenchReport>& reports);
// One panel per path, a polyline per method.
std::string to_svg(const std::vector<BenchReport>& reports);

void emit_csv(const std::vector<BenchReport>& reports, const std::filesystem::path& file);
void emit_summary_csv(const std::vector<BenchReport>& reports, const std::filesystem::path& file);
void emit_plot(const std::vector<BenchReport>& reports, const std::filesystem::path& file);

}  // namespace vg::bench
