#include <doctest.h>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>

#include "config.hpp"
#include "test_support.hpp"
#include "voxelglass/ingest.hpp"
#include "voxelglass/render.hpp"
#include "voxelglass/syncd.hpp"

using namespace vg;
using namespace vg::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

template <class F>
std::string code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "none";
}

// Child process with captured stdout/stderr.
class Proc {
 public:
  explicit Proc(std::vector<std::string> args, std::vector<std::string> env = {}) {
    int out[2], err[2];
    REQUIRE(::pipe(out) == 0);
    REQUIRE(::pipe(err) == 0);
    pid_ = ::fork();
    REQUIRE(pid_ >= 0);
    if (pid_ == 0) {
      ::dup2(out[1], 1);
      ::dup2(err[1], 2);
      ::close(out[0]);
      ::close(err[0]);
      for (const auto& e : env) ::putenv(const_cast<char*>(e.c_str()));
      std::vector<char*> argv;
      args.insert(args.begin(), VG_CLI_PATH);
      for (auto& a : args) argv.push_back(a.data());
      argv.push_back(nullptr);
      ::execv(argv[0], argv.data());
      ::_exit(127);
    }
    ::close(out[1]);
    ::close(err[1]);
    out_ = out[0];
    err_ = err[0];
  }
  ~Proc() {
    if (pid_ > 0 && !exited_) {
      ::kill(pid_, SIGKILL);
      wait();
    }
    if (out_ >= 0) ::close(out_);
    if (err_ >= 0) ::close(err_);
  }

  // Reads stdout until a line matching `re` appears; returns it.
  std::optional<std::string> read_line_matching(const std::regex& re, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      for (auto nl = out_buf_.find('\n'); nl != std::string::npos; nl = out_buf_.find('\n')) {
        std::string line = out_buf_.substr(0, nl);
        out_buf_.erase(0, nl + 1);
        out_seen_ += line + "\n";
        if (std::regex_search(line, re)) return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd p{out_, POLLIN, 0};
      if (::poll(&p, 1, int(left.count())) <= 0) continue;
      char buf[4096];
      const ssize_t n = ::read(out_, buf, sizeof buf);
      if (n <= 0) return std::nullopt;
      out_buf_.append(buf, std::size_t(n));
    }
  }

  void signal(int sig) { ::kill(pid_, sig); }

  // Drains both pipes and returns the exit status.
  int wait() {
    drain(out_, out_buf_);
    drain(err_, err_buf_);
    int status = 0;
    ::waitpid(pid_, &status, 0);
    exited_ = true;
    return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  }

  std::string out() const { return out_seen_ + out_buf_; }
  const std::string& err() const { return err_buf_; }

 private:
  static void drain(int fd, std::string& into) {
    char buf[4096];
    for (;;) {
      const ssize_t n = ::read(fd, buf, sizeof buf);
      if (n <= 0) return;
      into.append(buf, std::size_t(n));
    }
  }

  pid_t pid_ = -1;
  int out_ = -1, err_ = -1;
  bool exited_ = false;
  std::string out_buf_, out_seen_, err_buf_;
};

struct Run {
  int rc;
  std::string out, err;
};

Run run(std::vector<std::string> args, std::vector<std::string> env = {}) {
  Proc p(std::move(args), std::move(env));
  const int rc = p.wait();
  return {rc, p.out(), p.err()};
}

std::size_t line_count(const std::string& s) { return std::size_t(std::count(s.begin(), s.end(), '\n')); }

// Right hand grabs at the origin and drags 10 cm along +x over 20 frames.
std::string drag_stream() {
  std::string s = "# t lx ly lz lgrab rx ry rz rgrab\n";
  for (int i = 0; i < 20; ++i) {
    char line[160];
    std::snprintf(line, sizeof line, "%.3f 0 0 0 -1 %.4f 0 0 1\n", i * 0.033, i * 0.1 / 19.0);
    s += line;
  }
  s += "0.700 0 0 0 -1 0.1 0 0 0\n";
  return s;
}

}  // namespace

TEST_CASE("shipped config equals the built-in defaults") {
  const EngineConfig shipped = load_config(fs::path(VG_ASSET_DIR) / "voxelglass.toml");
  CHECK(shipped == EngineConfig{});
  CHECK(parse_config(dump_config(EngineConfig{})) == EngineConfig{});
  CHECK(config_keys().size() == 55);
}

TEST_CASE("dump then load reproduces every field") {
  const auto dir = testing::temp_dir("cli_cfg");
  spit(dir / "table.csv", slurp(fs::path(VG_ASSET_DIR) / "colormaps" / "fire.csv"));
  EngineConfig c;
  c.volume.phantom = "sphere";
  c.volume.phantom_dims = {33, 2, 7};
  c.assets.dir = VG_ASSET_DIR;
  c.transfer.scheme = "tablefile";
  c.transfer.table = (dir / "table.csv").string();
  c.transfer.base = 0.1 + 0.2;
  c.transfer.brightness = -1.0 / 3.0;
  c.transfer.contrast = 1e-7 * 3;
  c.transfer.clahe = true;
  c.transfer.clahe_blocks = {2, 3, 5};
  c.transfer.clahe_clip = std::numeric_limits<double>::infinity();
  c.transfer.clahe_bins = 4096;
  c.transfer.opacity = {{0.0, 0.0}, {0.25, 0.125}, {std::nextafter(0.5, 1.0), 0.75}, {1.0, 1.0}};
  c.render.method = "raycast";
  c.render.width = 97;
  c.render.height = 31;
  c.render.slices = 123;
  c.render.step = 1.0 / 300.0;
  c.render.early_termination = 0.95;
  c.render.background = {0.1, 0.7, 1.0};
  c.render.distance = 1.7;
  c.rig.baseline = 0.061;
  c.rig.pv_offset = {0.01, -0.02, 0.003};
  c.rig.pv_vfov_deg = 64.69;
  c.camera.fx = 1234.5678;
  c.camera.width = 1280;
  c.marker.size = 0.0915;
  c.marker.cadence = 3;
  c.marker.anchor_weight = 0.0;
  c.interact.sensitivity = 2.5;
  c.server.bind = "127.0.0.1";
  c.server.tcp_port = 0;
  c.server.ws_port = 0;
  c.server.frames = false;
  c.server.frame_method = "texture-based";
  c.bench.duration = 0.75;
  c.bench.window = 0.25;
  c.bench.methods = {"raycast", "texture-based"};
  validate(c);

  const std::string text = dump_config(c);
  const EngineConfig back = parse_config(text);
  CHECK(back == c);
  CHECK(dump_config(back) == text);
  CHECK(line_count(text) == 1 + 10 * 2 + 55);  // title, blank + header per section, keys
  CHECK(text.find("clahe_clip = inf\n") != std::string::npos);

  // Strings with quotes and backslashes survive.
  EngineConfig q;
  q.server.bind = "a \"quoted\" \\ name";
  CHECK(parse_config(dump_config(q)).server.bind == q.server.bind);
  fs::remove_all(dir);
}

TEST_CASE("config syntax and validation errors") {
  CHECK(code_of([] { parse_config("[render]\nwidth = 64\nwidht = 3\n"); }) == "UnknownKey");
  try {
    parse_config("[render]\nwidth = 64\nwidht = 3\n", "c.toml");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("c.toml:3") != std::string::npos);
  }
  CHECK(code_of([] { parse_config("[renderer]\n"); }) == "UnknownKey");
  CHECK(code_of([] { parse_config("width = 3\n"); }) == "ParseError");
  CHECK(code_of([] { parse_config("[render]\nwidth = 3\nwidth = 4\n"); }) == "ParseError");
  CHECK(code_of([] { parse_config("[render]\nmethod = raycast\n"); }) == "ParseError");
  CHECK(code_of([] { parse_config("[render]\nmethod = \"raycast\n"); }) == "ParseError");
  CHECK(code_of([] { parse_config("[render]\nwidth\n"); }) == "ParseError");
  CHECK(code_of([] { parse_config("[render]\nwidth = 64 65\n"); }) == "ParseError");
  CHECK(code_of([] { parse_config("[render]\nwidth = nan\n"); }) == "ParseError");
  CHECK(code_of([] { parse_config("[render]\nwidth = 64.5\n"); }) == "InvalidValue");
  CHECK(code_of([] { parse_config("[render]\nwidth = \"64\"\n"); }) == "InvalidValue");
  CHECK(code_of([] { parse_config("[render]\nstep = inf\n"); }) == "InvalidValue");
  CHECK(code_of([] { parse_config("[render]\nbackground = [0, 0]\n"); }) == "InvalidValue");
  CHECK(code_of([] { parse_config("[render]\nbackground = [0, 0, 2]\n"); }) == "InvalidValue");
  CHECK(code_of([] { parse_config("[render]\nmethod = \"splatting\"\n"); }) == "InvalidValue");
  CHECK(code_of([] { parse_config("[server]\ntcp_port = 70000\n"); }) == "InvalidValue");
  CHECK(code_of([] { parse_config("[server]\ntcp_port = 9000\nws_port = 9000\n"); }) == "InvalidValue");
  CHECK(code_of([] { parse_config("[marker]\ncadence = 0\n"); }) == "InvalidValue");
  CHECK(code_of([] { parse_config("[bench]\nmethods = [\"raycast\", \"raycast\"]\n"); }) == "InvalidValue");
  CHECK(code_of([] { parse_config("[bench]\nmethods = []\n"); }) == "InvalidValue");
  CHECK(code_of([] { parse_config("[volume]\npath = \"/nonexistent/v.vxg\"\n"); }) == "MissingFile");
  CHECK(code_of([] { parse_config("[transfer]\nscheme = \"tablefile\"\ntable = \"/nonexistent.csv\"\n"); }) ==
        "MissingFile");
  CHECK(code_of([] { load_config("/nonexistent/config.toml"); }) == "MissingFile");
  // Module range checks surface with the module's own code.
  CHECK(code_of([] { parse_config("[transfer]\ncontrast = 0\n"); }) != "none");
  CHECK(code_of([] { parse_config("[rig]\nnear = 30\n"); }) != "none");
  CHECK(code_of([] { parse_config("[camera]\nfx = -1\n"); }) != "none");
  // Comments, blank lines, trailing commas and TOML-style spacing are accepted.
  const auto c = parse_config("# top\n\n[render]  # section comment\n  width=64 # px\nbackground = [0, 0.5, 1,]\n");
  CHECK(c.render.width == 64);
  CHECK(c.render.background[1] == 0.5);
}

TEST_CASE("overrides and environment") {
  EngineConfig c;
  apply_override(c, "render.width=128");
  apply_override(c, "transfer.scheme=fire");
  apply_override(c, "transfer.opacity = [[0, 0], [1, 0.5]]");
  apply_override(c, "bench.methods=[\"raycast\"]");
  CHECK(c.render.width == 128);
  CHECK(c.transfer.scheme == "fire");
  CHECK(c.transfer.opacity.back().second == 0.5);
  CHECK(bench_methods(c) == std::vector<render::Method>{render::Method::Raycast});
  CHECK(code_of([&] { apply_override(c, "render.colour=1"); }) == "UnknownKey");
  CHECK(code_of([&] { apply_override(c, "width=1"); }) == "UnknownKey");
  CHECK(code_of([&] { apply_override(c, "render.width"); }) == "ParseError");
  CHECK(code_of([&] { apply_override(c, "render.width=wide"); }) == "InvalidValue");

  ::setenv("VOXELGLASS_BIND", "127.0.0.7", 1);
  ::setenv("VOXELGLASS_ASSETS", VG_ASSET_DIR, 1);
  EngineConfig e;
  apply_environment(e);
  CHECK(e.server.bind == "127.0.0.7");
  CHECK(e.assets.dir == VG_ASSET_DIR);
  ::unsetenv("VOXELGLASS_BIND");
  ::unsetenv("VOXELGLASS_ASSETS");
}

TEST_CASE("config converts into module settings") {
  EngineConfig c;
  c.render.slices = 200;
  c.render.background = {0.25, 0.5, 1.0};
  auto s = render_settings(c, render::Method::TextureBased, 64, 32);
  CHECK(s.slice_count == 200);
  CHECK(s.width == 64);
  CHECK(s.height == 32);
  CHECK(s.background[1] == 0.5f);
  c.render.slices = 0;
  CHECK(render_settings(c, render::Method::TextureBased, 64, 32).slice_count == 512);
  CHECK(render_settings(c, render::Method::ViewAligned, 64, 32).slice_count == 360);
  CHECK(render_settings(c, render::Method::Raycast, 64, 32).step_size == render::kReferenceStep);

  c.server.tcp_port = 9100;
  c.server.ws_port = 9101;
  c.marker.anchor_weight = 0.5;
  c.camera.fx = 600;
  const auto vol = std::make_shared<const VolumeDataset>(render::make_sphere_phantom(8));
  const auto sc = server_config(c, vol);
  CHECK(sc.tcp_port == 9100);
  CHECK(sc.ws_port == 9101);
  CHECK(sc.marker.anchor_weight == 0.5);
  CHECK(sc.marker.camera.fx == 600);
  REQUIRE(sc.frames.has_value());
  CHECK(sc.frames->volume == vol);
  c.server.frames = false;
  CHECK_FALSE(server_config(c, vol).frames.has_value());

  c.transfer.clahe = true;
  c.transfer.scheme = "fire";
  const auto tf = transfer_function(c);
  CHECK(tf.clahe.has_value());
  CHECK(tf.scheme.kind == xfer::SchemeKind::Fire);

  c.volume.phantom = "sphere";
  c.volume.phantom_dims = {12, 1, 1};
  CHECK(load_volume(c)->dims == Dims{12, 12, 12});
}

TEST_CASE("help, usage errors and module errors") {
  const Run help = run({"--help"});
  CHECK(help.rc == 0);
  for (const char* sub : {"ingest", "anonymize", "render", "bench", "serve", "colormap-check", "replay", "dump-config"}) {
    CHECK_MESSAGE(help.out.find(sub) != std::string::npos, sub);
  }

  const Run unknown = run({"render", "--out", "x.png", "--frobnicate"});
  CHECK(unknown.rc == 2);
  CHECK(unknown.err.rfind("error: UsageError:", 0) == 0);
  CHECK(unknown.err.find("Usage:") != std::string::npos);
  CHECK(run({}).rc == 2);
  CHECK(run({"teleport"}).rc == 2);
  CHECK(run({"render", "--out", "x.png", "--method", "splatting"}).rc == 2);

  const Run missing = run({"render", "--volume", "/nonexistent/v.vxg", "--out", "x.png"});
  CHECK(missing.rc == 1);
  CHECK(missing.err.rfind("error: MissingFile: ", 0) == 0);
  CHECK(line_count(missing.err) == 1);

  const Run bad_cfg = run({"--set", "render.widht=3", "dump-config"});
  CHECK(bad_cfg.rc == 1);
  CHECK(bad_cfg.err.rfind("error: UnknownKey: ", 0) == 0);
}

TEST_CASE("render writes an image") {
  const auto dir = testing::temp_dir("cli_render");
  ingest::save_volume_cache(render::make_sphere_phantom(32), dir / "v.vxg");
  const Run r = run({"render", "--volume", (dir / "v.vxg").string(), "--method", "view-aligned", "--out",
                     (dir / "f.png").string()});
  CHECK(r.rc == 0);
  REQUIRE(fs::exists(dir / "f.png"));
  const Image8 img = decode_png(read_file(dir / "f.png"));
  CHECK(img.width == 256);
  CHECK(img.height == 256);
  // The sphere sits on the optical axis.
  const auto* centre = img.px(128, 128);
  CHECK(int(centre[0]) + centre[1] + centre[2] > 0);
  CHECK(int(img.px(0, 0)[0]) == 0);

  const Run ppm = run({"render", "--volume", (dir / "v.vxg").string(), "--method", "raycast", "--width", "40",
                       "--height", "30", "--eye", "right", "--scheme", "fire", "--out", (dir / "f.ppm").string()});
  CHECK(ppm.rc == 0);
  CHECK(slurp(dir / "f.ppm").rfind("P6\n40 30\n255\n", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("dump-config output loads back to the same config") {
  const auto dir = testing::temp_dir("cli_dump");
  const Run r = run({"--set", "render.width=64", "--set", "server.bind=\"10.0.0.1\"", "dump-config", "--out",
                     (dir / "c.toml").string()});
  REQUIRE(r.rc == 0);
  EngineConfig expect;
  expect.render.width = 64;
  expect.server.bind = "10.0.0.1";
  CHECK(load_config(dir / "c.toml") == expect);

  // Loading the dump through --config and dumping again is byte-identical.
  const Run again = run({"--config", (dir / "c.toml").string(), "dump-config"});
  CHECK(again.rc == 0);
  CHECK(again.out == slurp(dir / "c.toml"));
  const Run via_env = run({"dump-config"}, {"VOXELGLASS_CONFIG=" + (dir / "c.toml").string(), "VOXELGLASS_BIND=1.2.3.4"});
  CHECK(via_env.rc == 0);
  CHECK(via_env.out.find("width = 64\n") != std::string::npos);
  CHECK(via_env.out.find("bind = \"1.2.3.4\"\n") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("ingest and anonymize round trip through the CLI") {
  const auto dir = testing::temp_dir("cli_ingest");
  fs::create_directories(dir / "series");
  const auto stack = testing::make_stack(8, 6, 5);
  for (std::size_t k = 0; k < stack.size(); ++k) {
    const auto ds = testing::make_slice_dataset(8, 6, stack[k].meta.position[2], stack[k].samples);
    write_file(dir / "series" / ("s" + std::to_string(4 - k) + ".dcm"), ingest::serialize_dicom(ds));
  }
  const Run in = run({"ingest", (dir / "series").string(), "-o", (dir / "v.vxg").string()});
  REQUIRE(in.rc == 0);
  const auto v = ingest::load_volume_cache(dir / "v.vxg");
  CHECK(v.dims == Dims{6, 8, 5});
  CHECK(v == ingest::ingest_directory(dir / "series"));

  const Run an = run({"anonymize", (dir / "series").string(), (dir / "anon").string()});
  REQUIRE(an.rc == 0);
  for (int k = 0; k < 5; ++k) {
    const auto ds = ingest::parse_dicom_file(read_file(dir / "anon" / ("s" + std::to_string(k) + ".dcm")));
    const auto* name = ds.find(ingest::Tag{0x0010, 0x0010});
    REQUIRE(name != nullptr);
    CHECK(std::string(name->value.begin(), name->value.end()).find("DOE") == std::string::npos);
  }
  // The anonymized series still assembles to the same voxels.
  CHECK(ingest::ingest_directory(dir / "anon").voxels == v.voxels);

  spit(dir / "p.policy", "(0010,0010) replace ANON\n");
  REQUIRE(run({"anonymize", (dir / "series" / "s0.dcm").string(), (dir / "one.dcm").string(), "--policy",
               (dir / "p.policy").string()})
              .rc == 0);
  const auto one = ingest::parse_dicom_file(read_file(dir / "one.dcm"));
  REQUIRE(one.find(ingest::Tag{0x0010, 0x0010}) != nullptr);
  const auto& val = one.find(ingest::Tag{0x0010, 0x0010})->value;
  CHECK(std::string(val.begin(), val.end()).rfind("ANON", 0) == 0);

  const Run bad = run({"ingest", (dir / "nothing").string(), "-o", (dir / "x.vxg").string()});
  CHECK(bad.rc == 1);
  CHECK(bad.err.rfind("error: ", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("colormap-check reports lightness monotonicity") {
  const Run fire = run({"colormap-check", (fs::path(VG_ASSET_DIR) / "colormaps" / "fire.csv").string()});
  CHECK(fire.rc == 0);
  CHECK(fire.out.find("monotone=true\n") != std::string::npos);
  const Run cet = run({"colormap-check", "cet-l08"});
  CHECK(cet.out.find("monotone=true\n") != std::string::npos);
  const Run hsv = run({"colormap-check", "hsv"});
  CHECK(hsv.rc == 0);
  CHECK(hsv.out.find("monotone=false\n") != std::string::npos);
  CHECK(run({"colormap-check", "no-such-map"}).rc == 2);
}

TEST_CASE("bench writes csv, summary and plot") {
  const auto dir = testing::temp_dir("cli_bench");
  const Run r = run({"--set", "volume.phantom=\"sphere\"", "--set", "volume.phantom_dims=[16, 16, 16]", "bench",
                     "--methods", "raycast,view-aligned", "--duration", "0.5", "--width", "16", "--height", "16",
                     "--out", (dir / "report").string()});
  REQUIRE(r.rc == 0);
  const std::string csv = slurp(dir / "report" / "bench.csv");
  CHECK(csv.rfind("method,path,window_start,fps\n", 0) == 0);
  CHECK(line_count(csv) == 1 + 5 * 2);
  CHECK(line_count(slurp(dir / "report" / "summary.csv")) == 1 + 5 * 2);
  CHECK(slurp(dir / "report" / "bench.svg").find("</svg>") != std::string::npos);
  CHECK(r.out == slurp(dir / "report" / "summary.csv"));
  CHECK(run({"bench", "--methods", "raycast,splat", "--out", (dir / "x").string()}).rc == 1);
  fs::remove_all(dir);
}

TEST_CASE("replay offline drives the session from a hand stream") {
  const auto dir = testing::temp_dir("cli_replay");
  spit(dir / "drag.txt", drag_stream());
  const Run r = run({"replay", (dir / "drag.txt").string(), "--offline", "--marker", "0,0,0.6", "--out",
                     (dir / "state.json").string()});
  REQUIRE(r.rc == 0);
  const auto summary = nlohmann::json::parse(r.out);
  CHECK(summary["frames"] == 21);
  CHECK(summary["pose_updates"].get<int>() >= 18);
  CHECK(summary["marker_updates"] == 5);  // frames 0, 5, 10, 15, 20
  CHECK(summary["nacks"] == 0);
  const auto state = nlohmann::json::parse(slurp(dir / "state.json"));
  // A one-hand drag translates the model by the hand displacement.
  CHECK(state["model"]["t"][0].get<double>() == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(state["marker"]["present"] == true);
  CHECK(state["marker"]["pose"]["t"][2].get<double>() == doctest::Approx(0.6).epsilon(1e-6));
  fs::remove_all(dir);
}

TEST_CASE("serve answers HELLO with WELCOME and accepts a replay") {
  const auto dir = testing::temp_dir("cli_serve");
  spit(dir / "c.toml",
       "[server]\nbind = \"127.0.0.1\"\ntcp_port = 0\nws_port = 0\n\n[volume]\nphantom = \"sphere\"\n"
       "phantom_dims = [16, 16, 16]\n");
  Proc srv({"serve", "--config", (dir / "c.toml").string()});
  const std::regex listening(R"(listening tcp=(\d+) ws=(\d+))");
  const auto line = srv.read_line_matching(listening, std::chrono::seconds(20));
  REQUIRE(line.has_value());
  std::smatch m;
  REQUIRE(std::regex_search(*line, m, listening));
  const auto tcp = static_cast<std::uint16_t>(std::stoi(m[1]));
  const auto ws = static_cast<std::uint16_t>(std::stoi(m[2]));
  CHECK(tcp != 0);
  CHECK(ws != 0);
  CHECK(line->find("bind=127.0.0.1") != std::string::npos);

  syncd::Client a(syncd::Client::Transport::Tcp, "127.0.0.1", tcp);
  a.send({"HELLO", 0, {{"name", "tcp"}, {"role", "viewer"}}});
  const auto welcome = a.wait_for("WELCOME", std::chrono::seconds(5));
  REQUIRE(welcome.has_value());
  CHECK(welcome->payload.contains("state"));
  syncd::Client b(syncd::Client::Transport::WebSocket, "127.0.0.1", ws);
  CHECK(b.hello("ws", syncd::Role::Viewer) != welcome->payload["id"].get<syncd::ClientId>());

  spit(dir / "drag.txt", drag_stream());
  const Run rep = run({"replay", (dir / "drag.txt").string(), "--port", std::to_string(ws), "--transport", "ws"});
  REQUIRE(rep.rc == 0);
  const auto summary = nlohmann::json::parse(rep.out);
  CHECK(summary["nacks"] == 0);
  a.send({"GET_STATE", 0, {}});
  std::optional<syncd::Message> st;
  for (;;) {
    st = a.wait_for("STATE", std::chrono::seconds(5));
    REQUIRE(st.has_value());
    if (st->payload["seq"] == summary["seq"]) break;
  }
  CHECK(st->payload["model"]["t"][0].get<double>() == doctest::Approx(0.1).epsilon(1e-9));

  srv.signal(SIGTERM);
  CHECK(srv.wait() == 0);
  CHECK(srv.out().find("stopped") != std::string::npos);

  // Nothing listens once the server is gone.
  CHECK(run({"replay", (dir / "drag.txt").string(), "--port", std::to_string(tcp)}).rc == 1);
  fs::remove_all(dir);
}
