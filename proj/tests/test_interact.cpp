#include <doctest.h>

#include <random>

#include "pose_oracles.hpp"
#include "test_support_fs.hpp"
#include "voxelglass/interact.hpp"

using namespace vg;
using namespace vg::interact;

namespace {

HandFrame frame(double t, std::optional<Vec3> left, std::optional<Vec3> right) {
  HandFrame f;
  f.timestamp = t;
  if (left) {
    f.left.present = f.left.grabbing = true;
    f.left.palm.translation = f.left.index_tip = *left;
  }
  if (right) {
    f.right.present = f.right.grabbing = true;
    f.right.palm.translation = f.right.index_tip = *right;
  }
  return f;
}

struct Run {
  GestureState state;
  spaces::ModelTransform model;
  render::CutPlane cut;
  void feed(const HandFrame& f, double sensitivity = 1.0) {
    auto u = update_gesture(state, model, cut, f, sensitivity);
    state = u.state;
    model = u.model;
    cut = u.cut;
  }
};

}  // namespace

TEST_CASE("virtual pressure") {
  PlaneCanvas c;
  const auto s = virtual_pressure({1, 2, -0.3}, c);
  CHECK(s.d == doctest::Approx(-0.3));
  CHECK(s.p_v.isApprox(Vec3(1, 2, 0)));
  const auto on = virtual_pressure({0.1, 0.1, 0}, c);
  CHECK(on.d == 0.0);
  CHECK(on.p_v == Vec3(0.1, 0.1, 0));
  CHECK(virtual_pressure({0, 0, 0.2}, c).d == doctest::Approx(2 * virtual_pressure({0, 0, 0.1}, c).d));

  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0, 1);
  double worst_plane = 0, worst_dist = 0;
  for (int i = 0; i < 10000; ++i) {
    PlaneCanvas r;
    r.normal = Vec3(n(rng), n(rng), n(rng)).normalized();
    r.point = Vec3(n(rng), n(rng), n(rng));
    const Vec3 tip(n(rng), n(rng), n(rng));
    const auto ps = virtual_pressure(tip, r);
    worst_plane = std::max(worst_plane, std::abs(r.normal.dot(ps.p_v - r.point)));
    worst_dist = std::max(worst_dist, std::abs((tip - ps.p_v).norm() - std::abs(ps.d)));
    CHECK((tip - ps.p_v).cross(r.normal).norm() < 1e-9);
  }
  CHECK(worst_plane < 1e-9);
  CHECK(worst_dist < 1e-9);
}

TEST_CASE("pressure to width") {
  PressureMap pm;
  CHECK(pressure_to_width(0.05, pm) == 0.0);
  CHECK(pressure_to_width(-pm.depth_max, pm) == pm.width_max);
  CHECK(pressure_to_width(-2 * pm.depth_max, pm) == pm.width_max);
  CHECK(pressure_to_width(0.0, pm) == pm.width_min);
  CHECK(pressure_to_width(0.005, pm) == pm.width_min);  // hovering within the touch radius
  CHECK(pressure_to_width(-pm.depth_max / 2, pm) == doctest::Approx((pm.width_min + pm.width_max) / 2));
  PressureMap bad;
  bad.width_min = 0.01;
  bad.width_max = 0.001;
  CHECK_THROWS_AS(bad.validate(), InteractError);
}

TEST_CASE("sketching") {
  PlaneCanvas c;
  PressureMap pm;
  std::optional<SketchStroke> active;

  SUBCASE("constant penetration sweep") {
    for (int i = 0; i <= 10; ++i) {
      const auto r = sketch_step(c, {-0.1 + 0.02 * i, 0.05, -0.01}, pm, active);
      CHECK(r.event == (i == 0 ? StrokeEvent::Started : StrokeEvent::Extended));
    }
    REQUIRE(active);
    for (const auto& p : active->points) CHECK(p.width == doctest::Approx(active->points[0].width));
    CHECK(active->points.back().u == doctest::Approx(0.1));
    CHECK(active->points.back().v == doctest::Approx(0.05));
    const auto end = sketch_step(c, {0.1, 0.05, 0.02}, pm, active);
    CHECK(end.event == StrokeEvent::Ended);
    CHECK_FALSE(active);
    CHECK(end.finished->points.size() == 11);
  }

  SUBCASE("penetration ramp") {
    const int n = 31;
    for (int i = 0; i < n; ++i) {
      const double depth = pm.depth_max * i / (n - 1);
      (void)sketch_step(c, {-0.15 + 0.01 * i, 0, -depth}, pm, active);
    }
    REQUIRE(active->points.size() == n);
    for (int i = 0; i < n; ++i) {
      const double expect = pm.width_min + (pm.width_max - pm.width_min) * i / (n - 1);
      CHECK(active->points[i].width == doctest::Approx(expect).epsilon(1e-9));
      CHECK(active->points[i].width >= 0);
      CHECK(active->points[i].width <= pm.width_max);
    }
  }

  SUBCASE("leaving the extent ends the stroke") {
    (void)sketch_step(c, {0.19, 0, -0.01}, pm, active);
    const auto r = sketch_step(c, {0.25, 0, -0.01}, pm, active);
    CHECK(r.event == StrokeEvent::Ended);
    CHECK(sketch_step(c, {0.25, 0, -0.01}, pm, active).event == StrokeEvent::None);
  }

  SUBCASE("tilted canvas") {
    PlaneCanvas t;
    t.normal = Vec3(0, 1, 1).normalized();
    t.point = Vec3(0.3, 1.2, -0.5);
    t.up = Vec3(0, 1, 0);
    t.validate();
    CHECK(t.u_axis().isApprox(Vec3(1, 0, 0)));
    const Vec3 tip = t.point + 0.05 * t.u_axis() + 0.02 * t.v_axis() - 0.015 * t.normal;
    (void)sketch_step(t, tip, pm, active);
    CHECK(active->points[0].u == doctest::Approx(0.05));
    CHECK(active->points[0].v == doctest::Approx(0.02));
    CHECK(active->points[0].width == doctest::Approx(pressure_to_width(-0.015, pm)));
  }

  SUBCASE("stroke mask export") {
    SketchStroke s;
    s.points = {{-0.1, 0, 0.01}, {0.1, 0, 0.01}};
    const auto img = rasterize_strokes(c, {s}, 1000);
    CHECK(img.width == 400);
    CHECK(img.height == 300);
    CHECK(img.channels == 4);
    CHECK(img.px(200, 150)[0] == 255);
    CHECK(img.px(200, 150)[3] == 255);
    CHECK(img.px(200, 140)[3] == 0);  // 10 px away, brush radius 5 px
    CHECK(img.px(50, 150)[3] == 0);
    const auto dir = vg::testing::temp_dir("interact");
    write_png(dir / "strokes.png", img);
    CHECK(decode_png(read_file(dir / "strokes.png")) == img);
  }
}

TEST_CASE("gestures") {
  SUBCASE("one hand translate with sensitivity") {
    Run r;
    r.feed(frame(0, std::nullopt, Vec3(0, 1, -0.3)), 0.5);
    CHECK(r.state.mode == GestureMode::OneHandTranslate);
    r.feed(frame(1, std::nullopt, Vec3(0.1, 1, -0.3)), 0.5);
    CHECK(r.model.translation.isApprox(Vec3(0.05, 0, 0)));
    r.feed(frame(2, std::nullopt, std::nullopt), 0.5);
    CHECK(r.state.mode == GestureMode::Idle);
    CHECK_FALSE(r.state.anchor);
    CHECK(r.model.translation.isApprox(Vec3(0.05, 0, 0)));
  }

  SUBCASE("two hands: common translation keeps scale and rotation") {
    Run r;
    r.feed(frame(0, Vec3(-0.1, 1, -0.4), Vec3(0.1, 1, -0.4)));
    CHECK(r.state.mode == GestureMode::TwoHandManipulate);
    r.feed(frame(1, Vec3(-0.1, 1.2, -0.3), Vec3(0.1, 1.2, -0.3)));
    CHECK(r.model.scale.isApprox(Vec3::Ones()));
    CHECK(r.model.rotation.isApprox(spaces::Mat3::Identity()));
    CHECK(r.model.translation.isApprox(Vec3(0, 0.2, 0.1)));
  }

  SUBCASE("two hands: distance ratio scales, relative turn rotates") {
    Run r;
    r.model.scale = Vec3(0.5, 0.5, 0.5);
    r.feed(frame(0, Vec3(-0.1, 1, -0.4), Vec3(0.1, 1, -0.4)));
    r.feed(frame(1, Vec3(-0.2, 1, -0.4), Vec3(0.2, 1, -0.4)));
    CHECK(r.model.scale.isApprox(Vec3(1, 1, 1)));
    // Quarter turn of the inter-hand axis about y.
    r.feed(frame(2, Vec3(0, 1, -0.2), Vec3(0, 1, -0.6)));
    const spaces::Mat3 expect = Eigen::AngleAxisd(M_PI / 2, Vec3::UnitY()).toRotationMatrix();
    CHECK(spaces::rotation_angle(r.model.rotation, expect) < 1e-9);
  }

  SUBCASE("anchor floor freezes scale") {
    Run r;
    r.feed(frame(0, Vec3(0, 1, -0.4), Vec3(0.005, 1, -0.4)));
    r.feed(frame(1, Vec3(-0.2, 1, -0.4), Vec3(0.2, 1, -0.4)));
    CHECK(r.model.scale.isApprox(Vec3::Ones()));
    Run c;
    c.feed(frame(0, Vec3(-0.1, 1, -0.4), Vec3(0.1, 1, -0.4)));
    c.feed(frame(1, Vec3(0, 1, -0.4), Vec3(0, 1, -0.4)));  // hands meet
    CHECK(c.model.scale.minCoeff() > 0);
  }

  SUBCASE("rigid motion of both trajectories leaves updates unchanged") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> n(0, 0.1);
    for (int trial = 0; trial < 200; ++trial) {
      const spaces::Pose g = vg::testing::random_pose(rng, 1.0);
      Run a, b;
      Vec3 l(-0.1, 1, -0.4), rr(0.1, 1, -0.4);
      for (int k = 0; k < 5; ++k) {
        a.feed(frame(k, l, rr), 1.0);
        b.feed(frame(k, g.apply(l), g.apply(rr)), 1.0);
        l += Vec3(n(rng), n(rng), n(rng));
        rr += Vec3(n(rng), n(rng), n(rng));
      }
      CHECK(a.model.scale.isApprox(b.model.scale, 1e-9));
      CHECK(spaces::rotation_angle(a.model.rotation, spaces::Mat3::Identity()) ==
            doctest::Approx(spaces::rotation_angle(b.model.rotation, spaces::Mat3::Identity())).epsilon(1e-7));
    }
  }

  SUBCASE("cut-plane mode follows the palm") {
    Run r;
    r.state.cut_mode = true;
    HandFrame f = frame(0, std::nullopt, Vec3(0.1, 1.1, -0.4));
    f.right.palm.rotation = Eigen::AngleAxisd(M_PI / 2, Vec3::UnitX()).toRotationMatrix();
    r.feed(f);
    CHECK(r.state.mode == GestureMode::CutPlaneControl);
    CHECK(r.cut.enabled);
    CHECK(r.cut.point.isApprox(Vec3(0.1, 1.1, -0.4)));
    CHECK(r.cut.normal.isApprox(Vec3(0, 0, -1)));
    CHECK(r.model.translation == Vec3::Zero());
    r.feed(frame(1, std::nullopt, std::nullopt));
    CHECK(r.state.mode == GestureMode::Idle);
    CHECK(r.cut.enabled);  // the plane stays where it was left
  }

  SUBCASE("stale frames and missing hands") {
    Run r;
    r.feed(frame(1, std::nullopt, Vec3(0, 0, 0)));
    r.feed(frame(0.5, std::nullopt, Vec3(1, 0, 0)));
    CHECK(r.model.translation == Vec3::Zero());
    HandFrame lost = frame(2, std::nullopt, Vec3(1, 0, 0));
    lost.right.present = false;
    r.feed(lost);
    CHECK(r.state.mode == GestureMode::Idle);
  }
}

TEST_CASE("hand stream") {
  const std::string text =
      "# t lx ly lz lgrab rx ry rz rgrab ...\n"
      "0.0  -0.1 1 -0.4 1   0.1 1 -0.4 1\n"
      "0.1  -0.2 1 -0.4 1   0.2 1 -0.4 0   1 0 0 0   0.7071067811865476 0.7071067811865476 0 0\n"
      "0.2  0 0 0 -1   0.2 1 -0.4 1\n";
  const auto frames = parse_hand_stream(text);
  REQUIRE(frames.size() == 3);
  CHECK(frames[0].left.grabbing);
  CHECK(frames[1].right.present);
  CHECK_FALSE(frames[1].right.grabbing);
  CHECK(palm_normal(frames[1].right.palm).isApprox(Vec3(0, 0, -1)));
  CHECK_FALSE(frames[2].left.present);
  CHECK(frames[2].right.index_tip.isApprox(Vec3(0.2, 1, -0.4)));

  const auto again = parse_hand_stream(format_hand_frame(frames[1]));
  REQUIRE(again.size() == 1);
  CHECK(again[0].right.palm.rotation.isApprox(frames[1].right.palm.rotation, 1e-12));
  CHECK(again[0].left.index_tip == frames[1].left.index_tip);

  CHECK_THROWS_AS(parse_hand_stream("0 1 2 3\n"), InteractError);
  CHECK_THROWS_AS(parse_hand_stream("0 0 0 0 1 0 0 0 1\n0 0 0 0 1 0 0 0 1\n"), InteractError);
  CHECK_THROWS_AS(parse_hand_stream("0 x 0 0 1 0 0 0 1\n"), InteractError);
}
