#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <thread>

#include "voxelglass/bench.hpp"

namespace vg::bench {

const char* to_string(BenchErrc e) {
  switch (e) {
    case BenchErrc::InvalidPath: return "InvalidPath";
    case BenchErrc::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

std::string_view to_string(PathKind k) {
  switch (k) {
    case PathKind::RotateY: return "rotate-y";
    case PathKind::RotateX: return "rotate-x";
    case PathKind::ApproachZ: return "approach-z";
  }
  return "rotate-y";
}

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Trims "2.000" to "2" and "0.500" to "0.5".
std::string short_number(double v) {
  std::string s = fmt("%.3f", v);
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s;
}

}  // namespace

ScriptedPath::ScriptedPath(PathKind k, double d_start, double d_end, double dur, double win)
    : kind(k), distance_start(d_start), distance_end(d_end), duration(dur), window(win) {
  validate();
}

void ScriptedPath::validate() const {
  if (!(duration > 0)) throw BenchError(BenchErrc::InvalidPath, "path duration must be positive");
  if (!(window > 0)) throw BenchError(BenchErrc::InvalidPath, "fps window must be positive");
  if (!(distance_start >= 0) || !(distance_end >= 0)) {
    throw BenchError(BenchErrc::InvalidPath, "path distances must be non-negative");
  }
}

std::string ScriptedPath::name() const {
  if (kind == PathKind::ApproachZ) {
    return std::string(to_string(kind)) + "-" + short_number(distance_start) + "m-" + short_number(distance_end) + "m";
  }
  return std::string(to_string(kind)) + "-" + short_number(distance_start) + "m";
}

std::size_t ScriptedPath::window_count() const {
  return std::size_t(std::ceil(duration / window - 1e-9));
}

double ScriptedPath::distance_at(double t) const {
  const double u = std::clamp(t / duration, 0.0, 1.0);
  return distance_start + (distance_end - distance_start) * u;
}

spaces::ModelTransform ScriptedPath::model_at(double t, const spaces::ModelTransform& base) const {
  spaces::ModelTransform m = base;
  m.translation = Vec3(0.0, 0.0, -distance_at(t));
  if (kind != PathKind::ApproachZ) {
    const double angle = 2.0 * kPi * std::clamp(t / duration, 0.0, 1.0);
    const Vec3 axis = kind == PathKind::RotateY ? Vec3::UnitY() : Vec3::UnitX();
    m.rotation = base.rotation * Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  }
  return m;
}

std::vector<ScriptedPath> default_paths(double duration) {
  return {ScriptedPath::rotate_y(1.0, duration), ScriptedPath::rotate_x(1.0, duration),
          ScriptedPath::rotate_y(2.0, duration), ScriptedPath::rotate_x(2.0, duration),
          ScriptedPath::approach(2.0, 0.0, duration)};
}

double BenchReport::quarter_mean(int q) const {
  if (samples.empty()) return 0;
  const std::size_t n = samples.size();
  const std::size_t lo = n * std::size_t(q) / 4, hi = std::max(lo + 1, n * std::size_t(q + 1) / 4);
  double sum = 0;
  for (std::size_t i = lo; i < hi && i < n; ++i) sum += samples[i].fps;
  return sum / double(std::min(hi, n) - lo);
}

double BenchReport::relative_drop() const {
  const double first = quarter_mean(0);
  return first > 0 ? 1.0 - quarter_mean(3) / first : 0.0;
}

double SteadyClock::now() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

void SteadyClock::sleep(double seconds) {
  std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

FrameFn fixed_delay_renderer(std::shared_ptr<Clock> clock, double delay) {
  return [clock = std::move(clock), delay](const render::Scene&) { clock->sleep(delay); };
}

BenchReport run_path(const render::Scene& scene, const ScriptedPath& path, const RunOptions& opts) {
  path.validate();
  scene.validate();
  const FrameFn render = opts.render ? opts.render : [](const render::Scene& s) { (void)render::render_stereo(s); };
  const std::shared_ptr<Clock> clock = opts.clock ? opts.clock : std::make_shared<SteadyClock>();

  BenchReport rep;
  rep.method = std::string(render::to_string(scene.settings.method));
  rep.path = path.name();
  rep.settings = scene.settings;
  const std::size_t windows = path.window_count();
  std::vector<int> counts(windows, 0);

  render::Scene s = scene;
  const double t0 = clock->now();
  for (;;) {
    const double t = clock->now() - t0;
    if (t >= path.duration) break;
    s.model = path.model_at(t, scene.model);
    render(s);
    const double done = clock->now() - t0;
    if (done > path.duration) break;
    // Window i holds completions in (i * window, (i + 1) * window].
    const double slot = std::ceil(done / path.window) - 1.0;
    ++counts[std::min(windows - 1, std::size_t(std::max(0.0, slot)))];
  }

  for (std::size_t i = 0; i < windows; ++i) {
    const double start = double(i) * path.window;
    const double len = std::min(path.window, path.duration - start);
    rep.samples.push_back({start, counts[i] / len, counts[i]});
    rep.frames += std::size_t(counts[i]);
  }
  rep.min_fps = rep.max_fps = rep.samples.front().fps;
  double sum = 0;
  for (const auto& smp : rep.samples) {
    sum += smp.fps;
    rep.min_fps = std::min(rep.min_fps, smp.fps);
    rep.max_fps = std::max(rep.max_fps, smp.fps);
  }
  rep.mean_fps = sum / double(rep.samples.size());
  return rep;
}

render::Scene bench_scene(std::shared_ptr<const VolumeDataset> volume, render::Method method, int width, int height) {
  render::Scene s;
  s.volume = std::move(volume);
  s.settings = render::RenderSettings::defaults(method);
  s.settings.width = width;
  s.settings.height = height;
  s.rig = render::make_stereo_rig(spaces::Pose::identity(), render::RigParams{}, width, height, false);
  return s;
}

std::vector<BenchReport> compare_methods(std::shared_ptr<const VolumeDataset> volume,
                                         const std::vector<ScriptedPath>& paths,
                                         const std::vector<render::Method>& methods, const RunOptions& opts, int width,
                                         int height) {
  std::vector<BenchReport> out;
  for (const auto& p : paths) {
    for (auto m : methods) out.push_back(run_path(bench_scene(volume, m, width, height), p, opts));
  }
  return out;
}

std::vector<BenchReport> compare_methods(std::shared_ptr<const VolumeDataset> volume,
                                         const std::vector<ScriptedPath>& paths, const RunOptions& opts, int width,
                                         int height) {
  return compare_methods(std::move(volume), paths,
                         {render::Method::TextureBased, render::Method::ViewAligned, render::Method::Raycast}, opts,
                         width, height);
}

std::string to_csv(const std::vector<BenchReport>& reports) {
  std::string out = "method,path,window_start,fps\n";
  for (const auto& r : reports) {
    for (const auto& s : r.samples) {
      out += r.method + "," + r.path + "," + fmt("%.3f", s.window_start) + "," + fmt("%.3f", s.fps) + "\n";
    }
  }
  return out;
}

std::string to_summary_csv(const std::vector<BenchReport>& reports) {
  std::string out = "method,path,frames,mean_fps,min_fps,max_fps\n";
  for (const auto& r : reports) {
    out += r.method + "," + r.path + "," + std::to_string(r.frames) + "," + fmt("%.3f", r.mean_fps) + "," +
           fmt("%.3f", r.min_fps) + "," + fmt("%.3f", r.max_fps) + "\n";
  }
  return out;
}

std::string to_svg(const std::vector<BenchReport>& reports) {
  constexpr double kPanelW = 300, kPanelH = 220, kLeft = 50, kTop = 30, kPlotW = 230, kPlotH = 150;
  std::vector<std::string> paths;
  for (const auto& r : reports) {
    if (std::find(paths.begin(), paths.end(), r.path) == paths.end()) paths.push_back(r.path);
  }
  double y_max = 0, x_max = 0;
  for (const auto& r : reports) {
    y_max = std::max(y_max, r.max_fps);
    if (!r.samples.empty()) x_max = std::max(x_max, r.samples.back().window_start);
  }
  // Round the fps axis up to a multiple of 10.
  y_max = std::max(10.0, std::ceil(y_max / 10.0) * 10.0);
  if (x_max <= 0) x_max = 1;
  const std::size_t panels = std::max<std::size_t>(1, paths.size());
  const std::map<std::string, std::string> colors = {
      {"texture-based", "#1f77b4"}, {"view-aligned", "#d62728"}, {"raycast", "#2ca02c"}};

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", kPanelW * double(panels)) +
                    "\" height=\"" + fmt("%.0f", kPanelH + 30) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < panels; ++p) {
    const double ox = kPanelW * double(p) + kLeft, oy = kTop;
    const std::string title = p < paths.size() ? paths[p] : "";
    svg += "<g>\n<text x=\"" + fmt("%.1f", ox + kPlotW / 2) + "\" y=\"" + fmt("%.1f", oy - 10) +
           "\" text-anchor=\"middle\">" + title + "</text>\n";
    svg += "<rect x=\"" + fmt("%.1f", ox) + "\" y=\"" + fmt("%.1f", oy) + "\" width=\"" + fmt("%.1f", kPlotW) +
           "\" height=\"" + fmt("%.1f", kPlotH) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double y = oy + kPlotH - kPlotH * k / 4.0;
      svg += "<text x=\"" + fmt("%.1f", ox - 5) + "\" y=\"" + fmt("%.1f", y + 4) + "\" text-anchor=\"end\">" +
             fmt("%.0f", y_max * k / 4.0) + "</text>\n";
    }
    svg += "<text x=\"" + fmt("%.1f", ox + kPlotW / 2) + "\" y=\"" + fmt("%.1f", oy + kPlotH + 28) +
           "\" text-anchor=\"middle\">time (s)</text>\n";
    svg += "<text x=\"" + fmt("%.1f", ox - 35) + "\" y=\"" + fmt("%.1f", oy + kPlotH / 2) +
           "\" transform=\"rotate(-90 " + fmt("%.1f", ox - 35) + " " + fmt("%.1f", oy + kPlotH / 2) +
           ")\" text-anchor=\"middle\">fps</text>\n";
    for (const auto& r : reports) {
      if (r.path != title || r.samples.empty()) continue;
      const auto c = colors.find(r.method);
      svg += "<polyline fill=\"none\" stroke=\"" + (c == colors.end() ? std::string("#000000") : c->second) +
             "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < r.samples.size(); ++i) {
        const double x = ox + kPlotW * r.samples[i].window_start / x_max;
        const double y = oy + kPlotH - kPlotH * std::min(1.0, r.samples[i].fps / y_max);
        svg += (i ? " " : "") + fmt("%.1f", x) + "," + fmt("%.1f", y);
      }
      svg += "\"><title>" + r.method + "</title></polyline>\n";
    }
    svg += "</g>\n";
  }
  // Legend.
  double lx = kLeft;
  for (const char* m : {"texture-based", "view-aligned", "raycast"}) {
    svg += "<line x1=\"" + fmt("%.1f", lx) + "\" y1=\"" + fmt("%.1f", kPanelH + 15) + "\" x2=\"" +
           fmt("%.1f", lx + 20) + "\" y2=\"" + fmt("%.1f", kPanelH + 15) + "\" stroke=\"" + colors.at(m) +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + fmt("%.1f", lx + 25) + "\" y=\"" + fmt("%.1f", kPanelH + 19) + "\">" + m + "</text>\n";
    lx += 130;
  }
  svg += "</svg>\n";
  return svg;
}

namespace {

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::FILE* f = std::fopen(file.c_str(), "wb");
  if (!f) throw BenchError(BenchErrc::IoFailure, "cannot open " + file.string() + " for writing");
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  if (std::fclose(f) != 0 || !ok) throw BenchError(BenchErrc::IoFailure, "write failed for " + file.string());
}

}  // namespace

void emit_csv(const std::vector<BenchReport>& reports, const std::filesystem::path& file) {
  write_text(file, to_csv(reports));
}

void emit_summary_csv(const std::vector<BenchReport>& reports, const std::filesystem::path& file) {
  write_text(file, to_summary_csv(reports));
}

void emit_plot(const std::vector<BenchReport>& reports, const std::filesystem::path& file) {
  write_text(file, to_svg(reports));
}

}  // namespace vg::bench
