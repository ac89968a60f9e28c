#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "test_support_fs.hpp"
#include "voxelglass/bench.hpp"

using namespace vg;
using namespace vg::bench;

namespace {

std::shared_ptr<const VolumeDataset> small_volume() {
  static auto v = std::make_shared<const VolumeDataset>(render::make_sphere_phantom(16));
  return v;
}

std::size_t count_lines(const std::string& s) { return std::size_t(std::count(s.begin(), s.end(), '\n')); }

std::size_t count_of(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("paths reject non-positive durations") {
  CHECK_THROWS_AS(ScriptedPath(PathKind::RotateY, 2, 2, 0.0), BenchError);
  CHECK_THROWS_AS(ScriptedPath(PathKind::RotateY, 2, 2, -1.0), BenchError);
  CHECK_THROWS_AS(ScriptedPath(PathKind::ApproachZ, 2, 0, 10.0, 0.0), BenchError);
  CHECK_THROWS_AS(ScriptedPath(PathKind::ApproachZ, -1, 0), BenchError);
  try {
    ScriptedPath(PathKind::RotateX, 1, 1, 0.0);
  } catch (const BenchError& e) {
    CHECK(e.code() == "InvalidPath");
  }
  CHECK(ScriptedPath::rotate_y(2.0).window_count() == 20);
  CHECK(ScriptedPath(PathKind::RotateY, 1, 1, 1.2).window_count() == 3);
}

TEST_CASE("path kinematics") {
  spaces::ModelTransform base;
  base.scale = Vec3(2, 2, 2);
  const auto ry = ScriptedPath::rotate_y(2.0);
  const auto quarter = ry.model_at(2.5, base);
  CHECK(quarter.translation.isApprox(Vec3(0, 0, -2)));
  CHECK(quarter.scale == base.scale);
  CHECK((quarter.rotation * Vec3::UnitX() - Vec3(0, 0, -1)).norm() < 1e-12);
  CHECK((ry.model_at(10.0, base).rotation - spaces::Mat3::Identity()).norm() < 1e-12);
  const auto rx = ScriptedPath::rotate_x(1.0).model_at(5.0, base);
  CHECK((rx.rotation * Vec3::UnitY() - Vec3(0, -1, 0)).norm() < 1e-12);

  const auto ap = ScriptedPath::approach(2.0, 0.0);
  CHECK(ap.model_at(0.0, base).translation.z() == doctest::Approx(-2.0));
  CHECK(ap.model_at(5.0, base).translation.z() == doctest::Approx(-1.0));
  CHECK(ap.model_at(10.0, base).translation.z() == doctest::Approx(0.0));
  CHECK(ap.model_at(5.0, base).rotation == base.rotation);
  CHECK(ap.name() == "approach-z-2m-0m");
  CHECK(ry.name() == "rotate-y-2m");
  CHECK(ScriptedPath::rotate_x(1.5).name() == "rotate-x-1.5m");
}

TEST_CASE("stub renderer on the simulated clock gives exact fps") {
  auto clock = std::make_shared<SimulatedClock>();
  const double delay = 1.0 / 64.0;
  RunOptions opts{fixed_delay_renderer(clock, delay), clock};
  const auto scene = bench_scene(small_volume(), render::Method::Raycast, 32, 32);
  const BenchReport r = run_path(scene, ScriptedPath::rotate_y(2.0), opts);
  REQUIRE(r.samples.size() == 20);
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    CHECK(r.samples[i].window_start == doctest::Approx(0.5 * double(i)));
    CHECK(r.samples[i].fps == 64.0);
    CHECK(r.samples[i].frames == 32);
  }
  CHECK(r.frames == 640);
  CHECK(r.mean_fps == 64.0);
  CHECK(r.min_fps == 64.0);
  CHECK(r.max_fps == 64.0);
  CHECK(r.method == "raycast");
  CHECK(r.path == "rotate-y-2m");

  // Reproducible under a fresh clock, and for a delay that does not divide the window.
  auto clock2 = std::make_shared<SimulatedClock>();
  const BenchReport again = run_path(scene, ScriptedPath::rotate_y(2.0), {fixed_delay_renderer(clock2, delay), clock2});
  CHECK(to_csv({again}) == to_csv({r}));
  auto clock3 = std::make_shared<SimulatedClock>();
  const BenchReport odd = run_path(scene, ScriptedPath::approach(), {fixed_delay_renderer(clock3, 0.3), clock3});
  int total = 0;
  for (const auto& s : odd.samples) total += s.frames;
  CHECK(total == 33);  // completions at 0.3 k <= 10
  CHECK(odd.frames == 33);
}

TEST_CASE("the path advances with the frame clock") {
  auto clock = std::make_shared<SimulatedClock>();
  std::vector<spaces::ModelTransform> seen;
  RunOptions opts;
  opts.clock = clock;
  opts.render = [&](const render::Scene& s) {
    seen.push_back(s.model);
    clock->sleep(0.125);
  };
  run_path(bench_scene(small_volume(), render::Method::Raycast, 32, 32), ScriptedPath::rotate_y(1.0, 2.0), opts);
  REQUIRE(seen.size() == 16);
  for (std::size_t i = 0; i < seen.size(); ++i) {
    // Frame i starts at i / 8 seconds: 360 deg * (i / 8) / 2 s.
    const double angle = 2.0 * 3.14159265358979323846 * double(i) / 16.0;
    const Vec3 x = seen[i].rotation * Vec3::UnitX();
    CHECK(x.x() == doctest::Approx(std::cos(angle)).epsilon(1e-9));
    CHECK(x.z() == doctest::Approx(-std::sin(angle)).epsilon(1e-9));
    CHECK(seen[i].translation.z() == -1.0);
  }
}

TEST_CASE("stub renderer on the wall clock is close to 1/delay") {
  RunOptions opts;
  auto clock = std::make_shared<SteadyClock>();
  opts.clock = clock;
  opts.render = fixed_delay_renderer(clock, 0.01);
  const auto r = run_path(bench_scene(small_volume(), render::Method::Raycast, 32, 32),
                          ScriptedPath(PathKind::RotateX, 1, 1, 1.0), opts);
  REQUIRE(r.samples.size() == 2);
  CHECK(r.mean_fps <= 100.0 + 2.0);
  CHECK(r.mean_fps > 60.0);
}

TEST_CASE("real renderer run covers the path") {
  const auto r = run_path(bench_scene(small_volume(), render::Method::ViewAligned, 48, 48),
                          ScriptedPath(PathKind::ApproachZ, 2.0, 0.0, 1.0));
  CHECK(r.samples.size() == 2);
  CHECK(r.frames > 0);
  CHECK(r.mean_fps > 0);
  CHECK(r.settings.slice_count == 360);
}

TEST_CASE("comparison matrix and its CSV / SVG output") {
  auto clock = std::make_shared<SimulatedClock>();
  RunOptions opts;
  opts.clock = clock;
  // Per-method delays stand in for the renderers.
  opts.render = [&](const render::Scene& s) {
    const double d = s.settings.method == render::Method::TextureBased ? 1.0 / 16
                   : s.settings.method == render::Method::ViewAligned ? 1.0 / 32
                                                                       : 1.0 / 64;
    clock->sleep(d);
  };
  const auto reports = compare_methods(small_volume(), default_paths(), opts, 32, 32);
  REQUIRE(reports.size() == 15);
  CHECK(count_lines(to_summary_csv(reports)) == 16);
  CHECK(to_summary_csv(reports).rfind("method,path,frames,mean_fps,min_fps,max_fps\n", 0) == 0);
  const std::string csv = to_csv(reports);
  CHECK(csv.rfind("method,path,window_start,fps\n", 0) == 0);
  CHECK(count_lines(csv) == 1 + 15 * 20);
  CHECK(csv.find("view-aligned,rotate-x-1m,0.000,32.000\n") != std::string::npos);
  CHECK(csv.find("raycast,approach-z-2m-0m,9.500,64.000\n") != std::string::npos);

  // Single report: header + one row per window.
  CHECK(count_lines(to_csv({reports[0]})) == 21);

  const std::string svg = to_svg(reports);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(count_of(svg, "<polyline") == 15);
  CHECK(count_of(svg, "<g>") == 5);
  CHECK(count_of(svg, "<g>") == count_of(svg, "</g>"));

  const std::string empty = to_svg({});
  CHECK(empty.rfind("<svg", 0) == 0);
  CHECK(empty.find("</svg>") != std::string::npos);
  CHECK(count_of(empty, "<polyline") == 0);
  CHECK(count_of(empty, "<rect") == 2);  // background + one empty axes frame

  const auto dir = testing::temp_dir("bench");
  emit_csv(reports, dir / "a.csv");
  emit_csv(reports, dir / "b.csv");
  emit_plot(reports, dir / "a.svg");
  emit_plot(reports, dir / "b.svg");
  emit_summary_csv(reports, dir / "s.csv");
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.svg") == slurp(dir / "b.svg"));
  CHECK(slurp(dir / "a.csv") == csv);
  CHECK(slurp(dir / "s.csv") == to_summary_csv(reports));
  try {
    emit_csv(reports, dir / "missing" / "x.csv");
    FAIL("write into a missing directory succeeded");
  } catch (const BenchError& e) {
    CHECK(e.errc() == BenchErrc::IoFailure);
  }
  std::filesystem::remove_all(dir);
}
