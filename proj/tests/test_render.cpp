#include <doctest.h>

#include <random>

#include "render_support.hpp"
#include "test_support_fs.hpp"
#include "voxelglass/render.hpp"

using namespace vg;
using namespace vg::render;
using vg::testing::constant_volume;
using vg::testing::make_scene;
using vg::testing::ortho_view;

namespace {

int max_diff(const Image8& a, const Image8& b) {
  REQUIRE(a.pixels.size() == b.pixels.size());
  int d = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) d = std::max(d, std::abs(int(a.pixels[i]) - int(b.pixels[i])));
  return d;
}

Image8 solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Image8 img(w, h, 3);
  for (int i = 0; i < w * h; ++i) {
    img.pixels[i * 3] = r;
    img.pixels[i * 3 + 1] = g;
    img.pixels[i * 3 + 2] = b;
  }
  return img;
}

bool all_background(const Framebuffer& fb) {
  for (const auto& p : fb.pixels) {
    if (p.r != 0 || p.g != 0 || p.b != 0 || p.a != 0) return false;
  }
  return true;
}

const Method kMethods[] = {Method::TextureBased, Method::ViewAligned, Method::Raycast};

}  // namespace

TEST_CASE("slice_cube") {
  const auto square = slice_cube({0, 0, 0.5}, {0, 0, 1});
  REQUIRE(square.size() == 4);
  for (const auto& p : square) {
    CHECK(p.z() == doctest::Approx(0.5));
    CHECK((std::abs(p.x()) < 1e-12 || std::abs(p.x() - 1) < 1e-12));
    CHECK((std::abs(p.y()) < 1e-12 || std::abs(p.y() - 1) < 1e-12));
  }

  const auto hex = slice_cube({0.5, 0.5, 0.5}, Vec3(1, 1, 1).normalized());
  REQUIRE(hex.size() == 6);
  const double side = (hex[1] - hex[0]).norm();
  for (int i = 0; i < 6; ++i) {
    CHECK((hex[(i + 1) % 6] - hex[i]).norm() == doctest::Approx(side));
    CHECK((hex[i] - Vec3(0.5, 0.5, 0.5)).norm() == doctest::Approx(side));
  }

  CHECK(slice_cube({0, 0, 2}, {0, 0, 1}).empty());
  CHECK(slice_cube({0, 0, 1}, {0, 0, 1}).size() == 4);  // touching the top face
  CHECK(slice_cube({1, 1, 1}, Vec3(1, 1, 1).normalized()).empty());  // a single corner

  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 2000; ++trial) {
    const Vec3 normal = Vec3(n(rng), n(rng), n(rng)).normalized();
    const Vec3 point(u(rng), u(rng), u(rng));
    const auto poly = slice_cube(point, normal);
    REQUIRE(poly.size() >= 3);
    REQUIRE(poly.size() <= 6);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec3& a = poly[i];
      CHECK(normal.dot(a - point) == doctest::Approx(0.0).epsilon(1e-12));
      int on_face = 0;
      for (int k = 0; k < 3; ++k) on_face += std::abs(a(k)) < 1e-9 || std::abs(a(k) - 1) < 1e-9;
      CHECK(on_face >= 2);  // on a cube edge
      const Vec3& b = poly[(i + 1) % poly.size()];
      const Vec3& c = poly[(i + 2) % poly.size()];
      CHECK((b - a).cross(c - b).dot(normal) > 0);  // convex, counter-clockwise
    }
  }
}

TEST_CASE("sample_volume") {
  auto vol = constant_volume({8, 8, 8}, 1000);
  auto scene = make_scene(vol, Method::Raycast, ortho_view(0.1, 32, 32));
  const auto outside = sample_volume(scene, {1.2, 0.5, 0.5});
  CHECK(outside == xfer::Rgba{});
  // Grayscale ramp and identity window/opacity: every channel is v / 4095.
  const float x = 1000.0f / 4095.0f;
  const auto centre = sample_volume(scene, {0.5, 0.5, 0.5});
  CHECK(centre.r == doctest::Approx(x).epsilon(1e-6));
  CHECK(centre.g == doctest::Approx(x).epsilon(1e-6));
  CHECK(centre.a == doctest::Approx(x).epsilon(1e-6));

  auto far_cut = scene;
  far_cut.cut = {true, Vec3(-1e6, 0, 0), Vec3::UnitX()};
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 100; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    CHECK(sample_volume(scene, p) == sample_volume(far_cut, p));
  }
  // Object x = 0.3 is world x < 0 for a volume centred on the origin.
  auto half = scene;
  half.cut = {true, Vec3::Zero(), Vec3::UnitX()};
  CHECK(sample_volume(half, {0.3, 0.5, 0.5}) == xfer::Rgba{});
  CHECK(sample_volume(half, {0.7, 0.5, 0.5}).a > 0);
}

TEST_CASE("compositing algebra") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(0, 1);
  double worst = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::array<xfer::Rgba, 10> ray;
    for (auto& s : ray) s = {u(rng), u(rng), u(rng), u(rng)};
    const auto f = composite_front_to_back(ray);
    const auto b = composite_back_to_front(ray);
    // Independent double-precision transmittance sum.
    double t = 1, r = 0, a = 0;
    for (const auto& s : ray) {
      r += t * s.a * s.r;
      a += t * s.a;
      t *= 1 - s.a;
    }
    worst = std::max({worst, double(std::abs(f.r - b.r)), double(std::abs(f.g - b.g)), double(std::abs(f.b - b.b)),
                      double(std::abs(f.a - b.a)), std::abs(f.r - r), std::abs(f.a - a)});
  }
  CHECK(worst <= 1e-6);

  // (x over y) over z == x over (y over z)
  for (int trial = 0; trial < 1000; ++trial) {
    const xfer::Rgba x = premultiply({u(rng), u(rng), u(rng), u(rng)});
    const xfer::Rgba y = premultiply({u(rng), u(rng), u(rng), u(rng)});
    const xfer::Rgba z = premultiply({u(rng), u(rng), u(rng), u(rng)});
    xfer::Rgba left = z, yz = z, xy = y;
    blend_over(xy, x);
    blend_over(left, xy);
    blend_over(yz, y);
    blend_over(yz, x);
    CHECK(std::abs(left.r - yz.r) < 1e-6);
    CHECK(std::abs(left.a - yz.a) < 1e-6);
  }

  const std::array<xfer::Rgba, 7> same = {xfer::Rgba{1, 1, 1, 0.2f}, {1, 1, 1, 0.2f}, {1, 1, 1, 0.2f}, {1, 1, 1, 0.2f},
                                          {1, 1, 1, 0.2f},           {1, 1, 1, 0.2f}, {1, 1, 1, 0.2f}};
  CHECK(composite_front_to_back(same).a == doctest::Approx(1 - std::pow(0.8, 7)).epsilon(1e-6));
  CHECK(correct_opacity(0.3, kReferenceStep) == doctest::Approx(0.3));
  CHECK(correct_opacity(0.3, 2 * kReferenceStep) == doctest::Approx(1 - 0.49));
}

TEST_CASE("raycast closed forms") {
  // Cube 0.08 m wide seen orthographically head on; the central rays cross
  // exactly one cube length.
  auto vol = constant_volume({8, 8, 8}, 2048);
  auto scene = make_scene(vol, Method::Raycast, ortho_view(0.05, 40, 40));
  scene.settings.early_termination_alpha = 1.0;
  scene.settings.step_size = 1.0 / 64;
  const double a = 2048.0 / 4095.0;
  const auto fb = render_raycast(scene, scene.rig.left);
  // 64 samples, each corrected from the 1/512 reference: 1 - (1 - a)^(8 * 64)
  CHECK(fb.at(20, 20).a == doctest::Approx(1 - std::pow(1 - a, 512)).epsilon(1e-5));
  CHECK(fb.at(0, 0).a == 0.0f);  // misses the cube

  xfer::OpacityCurve faint;
  faint.points = {{0, 0.001}, {1, 0.001}};
  scene.tf.opacity = faint;
  scene.settings.background = {0.2f, 0.4f, 0.6f};
  const auto light = render_raycast(scene, scene.rig.left);
  CHECK(light.at(20, 20).a == doctest::Approx(1 - std::pow(0.999, 512)).epsilon(1e-4));
  const auto img = light.to_image();
  CHECK(img.px(0, 0)[0] == 51);
  CHECK(img.px(0, 0)[1] == 102);
  CHECK(img.px(0, 0)[2] == 153);

  // Early termination stops at the threshold instead of saturating.
  scene.tf.opacity = {};
  scene.settings.early_termination_alpha = 0.5;
  const auto early = render_raycast(scene, scene.rig.left);
  CHECK(early.at(20, 20).a >= 0.5f);
  CHECK(early.at(20, 20).a < 0.5f + a);
}

TEST_CASE("transparent transfer function renders background") {
  auto vol = constant_volume({8, 8, 8}, 3000);
  xfer::OpacityCurve none;
  none.points = {{0, 0}, {1, 0}};
  for (Method m : kMethods) {
    auto scene = make_scene(vol, m, vg::testing::perspective_view(0.3, 60, 48, 48));
    scene.tf.opacity = none;
    CHECK(all_background(render_view(scene, scene.rig.left)));
  }
}

TEST_CASE("opaque slab footprint") {
  // Cube edge 0.08 m; view spans 0.1 m over 50 px -> columns 5..44 covered.
  auto vol = constant_volume({8, 8, 8}, 4095);
  xfer::OpacityCurve opaque;
  opaque.points = {{0, 1}, {1, 1}};
  for (Method m : {Method::TextureBased, Method::ViewAligned}) {
    auto scene = make_scene(vol, m, ortho_view(0.05, 50, 50));
    scene.tf.opacity = opaque;
    scene.settings.slice_count = 2;
    const auto img = render_view(scene, scene.rig.left).to_image();
    for (int y = 0; y < 50; ++y)
      for (int x = 0; x < 50; ++x) {
        const bool inside = x >= 5 && x < 45 && y >= 5 && y < 45;
        CHECK(img.px(x, y)[0] == (inside ? 255 : 0));
      }
  }
}

TEST_CASE("axis-aligned slicing methods coincide") {
  auto sphere = std::make_shared<const VolumeDataset>(make_sphere_phantom(32));
  for (const auto& view : {ortho_view(0.25, 96, 96), vg::testing::perspective_view(0.7, 40, 96, 96)}) {
    auto tex = make_scene(sphere, Method::TextureBased, view);
    tex.tf.opacity = vg::testing::faint_opacity();
    tex.settings.slice_count = 128;
    auto va = tex;
    va.settings.method = Method::ViewAligned;
    CHECK(max_diff(render_view(tex, view).to_image(), render_view(va, view).to_image()) <= 1);
  }
}

TEST_CASE("method agreement on the sphere phantom") {
  auto ref_scene = vg::testing::sphere_scene(Method::Raycast);
  ref_scene.settings.early_termination_alpha = 1.0;
  const Image8 ref = render_view(ref_scene, ref_scene.rig.left).to_image();

  auto va = vg::testing::sphere_scene(Method::ViewAligned);
  va.settings.slice_count = 256;
  const double p_va = psnr(ref, render_view(va, va.rig.left).to_image());
  auto tex = vg::testing::sphere_scene(Method::TextureBased);
  tex.settings.slice_count = 256;
  const double p_tex = psnr(ref, render_view(tex, tex.rig.left).to_image());
  MESSAGE("PSNR view-aligned " << p_va << " dB, texture-based " << p_tex << " dB");
  CHECK(p_va >= 28.0);
  CHECK(p_tex >= 25.0);

  // Denser sampling converges: step 1/256 vs 1/512, 256 vs 512 slices.
  auto coarse = ref_scene;
  coarse.settings.step_size = 1.0 / 256;
  CHECK(max_diff(ref, render_view(coarse, coarse.rig.left).to_image()) <= 2);
  auto va512 = va;
  va512.settings.slice_count = 512;
  CHECK(max_diff(render_view(va, va.rig.left).to_image(), render_view(va512, va.rig.left).to_image()) <= 2);
}

TEST_CASE("cut plane") {
  for (Method m : kMethods) {
    auto scene = vg::testing::sphere_scene(m, 64);
    const auto base = render_view(scene, scene.rig.left).to_image();
    auto keep = scene;
    keep.cut = {true, Vec3(0, 0, -5), Vec3::UnitZ()};
    CHECK(render_view(keep, keep.rig.left).to_image() == base);
    auto cull = scene;
    cull.cut = {true, Vec3(0, 0, 5), Vec3::UnitZ()};
    CHECK(all_background(render_view(cull, cull.rig.left)));
    // Keeping +x only: the left half of the image goes dark.
    auto half = scene;
    half.model.rotation.setIdentity();
    half.cut = {true, Vec3::Zero(), Vec3::UnitX()};
    const auto fb = render_view(half, half.rig.left);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 30; ++x) CHECK(fb.at(x, y).a == 0.0f);
    float right = 0;
    for (int y = 0; y < 64; ++y) right += fb.at(40, y).a;
    CHECK(right > 0);
  }
}

TEST_CASE("model-transform covariance") {
  const auto r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  for (Method m : kMethods) {
    auto scene = vg::testing::sphere_scene(m, 64);
    scene.rig.left = ortho_view(0.3, 64, 64);
    auto turned = scene;
    turned.model.rotation = r * scene.model.rotation;
    Mat4 rot = Mat4::Identity();
    rot.topLeftCorner<3, 3>() = r.transpose();
    turned.rig.left.view = scene.rig.left.view * rot;
    CHECK(max_diff(render_view(scene, scene.rig.left).to_image(),
                   render_view(turned, turned.rig.left).to_image()) <= 1);
  }
}

TEST_CASE("stereo rig") {
  auto vol = std::make_shared<const VolumeDataset>(make_sphere_phantom(32));
  RigParams zero;
  zero.baseline = 0;
  auto scene = make_scene(vol, Method::ViewAligned, vg::testing::perspective_view(1, 90, 64, 64));
  scene.model.translation = Vec3(0, 0, -0.6);
  scene.rig = make_stereo_rig(spaces::Pose::identity(), zero, 64, 64);
  auto mono = render_stereo(scene);
  CHECK(mono.left.to_image() == mono.right.to_image());

  scene.rig = make_stereo_rig(spaces::Pose::identity(), RigParams{}, 64, 64);
  auto st = render_stereo(scene);
  CHECK_FALSE(st.left.to_image() == st.right.to_image());
  CHECK(st.left.to_image() == render_view(scene, scene.rig.left).to_image());
  CHECK(st.right.to_image() == render_view(scene, scene.rig.right).to_image());
  // Right eye sits at +32 mm.
  const Mat4 cam = scene.rig.right.view.inverse();
  CHECK(cam(0, 3) == doctest::Approx(0.032));

  CHECK_THROWS_AS(make_stereo_rig(spaces::Pose::identity(), RigParams{0.064, 90, 0.5, 0.1}, 64, 64), RenderError);
}

TEST_CASE("stereo costs about twice a single view") {
  auto vol = std::make_shared<const VolumeDataset>(make_ellipsoid_phantom({64, 64, 36}));
  for (Method m : kMethods) {
    auto scene = make_scene(vol, m, vg::testing::perspective_view(1, 90, 128, 128));
    scene.model.translation = Vec3(0, 0, -0.5);
    scene.rig = make_stereo_rig(spaces::Pose::identity(), RigParams{}, 128, 128);
    const double one = vg::testing::min_seconds(5, [&] { (void)render_view(scene, scene.rig.left); });
    const double two = vg::testing::min_seconds(5, [&] { (void)render_stereo(scene); });
    MESSAGE(to_string(m) << ": stereo/mono = " << two / one);
    CHECK(two / one == doctest::Approx(2.0).epsilon(0.25));
  }
}

TEST_CASE("spectator compositing") {
  const int w = 48, h = 40;
  auto vol = constant_volume({8, 8, 8}, 2048);
  auto scene = make_scene(vol, Method::TextureBased, ortho_view(0.03, w, h));
  std::mt19937_64 rng(10);
  Image8 bg(w, h, 3);
  for (auto& b : bg.pixels) b = std::uint8_t(rng());

  xfer::OpacityCurve none;
  none.points = {{0, 0}, {1, 0}};
  auto clear = scene;
  clear.tf.opacity = none;
  CHECK(composite_spectator(clear, bg) == bg);
  CHECK(render_spectator_only(clear, bg) == bg);

  xfer::OpacityCurve opaque;
  opaque.points = {{0, 1}, {1, 1}};
  auto solid_scene = scene;
  solid_scene.tf.opacity = opaque;
  const auto out = composite_spectator(solid_scene, bg);
  for (int i = 0; i < w * h * 3; ++i) CHECK(out.pixels[i] == 128);  // round(2048/4095 * 255)

  // Two slices whose combined opacity is exactly one half.
  auto halfway = scene;
  halfway.settings.slice_count = 2;
  xfer::OpacityCurve half;
  const double a = 1 - std::pow(0.5, 1.0 / 512);
  half.points = {{0, a}, {1, a}};
  halfway.tf.opacity = half;
  const auto gray = solid(w, h, 100, 100, 100);
  const auto mid = composite_spectator(halfway, gray);
  const double expect = 0.5 * 255.0 * 2048 / 4095 + 0.5 * 100;
  for (int i = 0; i < w * h * 3; ++i) CHECK(std::abs(mid.pixels[i] - expect) <= 1.0);

  CHECK(render_spectator_only(solid_scene, bg) == composite_spectator(solid_scene, bg));
  CHECK(render_three_views(solid_scene, bg).spectator == out);

  try {
    (void)composite_spectator(scene, Image8(w + 1, h, 3));
    FAIL("expected ResolutionMismatch");
  } catch (const RenderError& e) {
    CHECK(e.errc() == RenderErrc::ResolutionMismatch);
  }
  auto no_pv = scene;
  no_pv.rig.pv.reset();
  CHECK_THROWS_AS(composite_spectator(no_pv, bg), RenderError);
}

TEST_CASE("settings validation") {
  RenderSettings s;
  CHECK_NOTHROW(s.validate());
  s.slice_count = 1;
  CHECK_THROWS_AS(s.validate(), RenderError);
  s = {};
  s.step_size = 0;
  CHECK_THROWS_AS(s.validate(), RenderError);
  s = {};
  s.width = 8;
  CHECK_THROWS_AS(s.validate(), RenderError);
  CutPlane c;
  c.normal = Vec3(0, 0, 2);
  CHECK_THROWS_AS(c.validate(), RenderError);
  CHECK(parse_method("view-aligned") == Method::ViewAligned);
  CHECK(parse_method("bogus") == std::nullopt);
  CHECK(RenderSettings::defaults(Method::TextureBased).slice_count == 512);
  CHECK(RenderSettings::defaults(Method::ViewAligned).slice_count == 360);
  CHECK(RenderSettings::defaults(Method::Raycast).step_size == doctest::Approx(1.0 / 512));
}

TEST_CASE("frame output") {
  auto scene = vg::testing::sphere_scene(Method::Raycast, 32);
  const auto img = render_view(scene, scene.rig.left).to_image();
  const auto dir = vg::testing::temp_dir("render");
  write_png(dir / "f.png", img);
  write_ppm(dir / "f.ppm", img);
  CHECK(decode_png(read_file(dir / "f.png")) == img);
  const auto ppm = read_file(dir / "f.ppm");
  CHECK(ppm.size() == std::string("P6\n32 32\n255\n").size() + 32 * 32 * 3);
}
