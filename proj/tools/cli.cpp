#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <thread>

#include "config.hpp"
#include "voxelglass/bench.hpp"
#include "voxelglass/ingest.hpp"
#include "voxelglass/interact.hpp"
#include "voxelglass/render.hpp"
#include "voxelglass/syncd.hpp"
#include "voxelglass/xfer.hpp"

namespace vg::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config;
  std::vector<std::string> sets;
};

// defaults < config file < environment < --set < subcommand flags
EngineConfig resolve(const Globals& g) {
  EngineConfig cfg;
  std::string path = g.config;
  if (path.empty()) {
    if (const char* e = std::getenv("VOXELGLASS_CONFIG"); e && *e) path = e;
  }
  if (!path.empty()) cfg = load_config(path);
  apply_environment(cfg);
  for (const auto& s : g.sets) apply_override(cfg, s);
  return cfg;
}

std::vector<std::string> method_names() {
  return {"texture-based", "view-aligned", "raycast"};
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

spaces::Vec3 parse_vec3(const std::string& s, const std::string& what) {
  const auto parts = split_list(s);
  if (parts.size() != 3) throw UsageError(what + " expects x,y,z");
  spaces::Vec3 v;
  for (int i = 0; i < 3; ++i) {
    char* end = nullptr;
    v[i] = std::strtod(parts[i].c_str(), &end);
    if (end == parts[i].c_str() || *end) throw UsageError(what + " expects x,y,z");
  }
  return v;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// ---- ingest / anonymize ------------------------------------------------------

int cmd_ingest(const std::string& dir, const std::string& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const VolumeDataset v = ingest::ingest_directory(dir);
  ingest::save_volume_cache(v, out);
  std::printf("ingested %ux%ux%u spacing %g,%g,%g mm range %u..%u in %.0f ms -> %s\n", v.dims.nx, v.dims.ny,
              v.dims.nz, v.spacing[0], v.spacing[1], v.spacing[2], v.value_range.first, v.value_range.second,
              ms_since(t0), out.c_str());
  return 0;
}

void anonymize_file(const fs::path& in, const fs::path& out, const ingest::AnonymizationPolicy& policy) {
  const auto ds = ingest::parse_dicom_file(read_file(in));
  write_file(out, ingest::serialize_dicom(ingest::anonymize(ds, policy)));
}

int cmd_anonymize(const EngineConfig& cfg, const std::string& in, const std::string& out, std::string policy_path) {
  if (policy_path.empty()) policy_path = (asset_dir(cfg) / "anonymize_default.policy").string();
  const auto policy = ingest::load_policy(policy_path);
  std::size_t n = 0;
  if (fs::is_directory(in)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(in)) {
      if (e.is_regular_file() && e.path().extension() == ".dcm") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const fs::path dst = fs::path(out) / fs::relative(f, in);
      fs::create_directories(dst.parent_path());
      anonymize_file(f, dst, policy);
      ++n;
    }
  } else {
    anonymize_file(in, out, policy);
    n = 1;
  }
  std::printf("anonymized %zu file(s) with %zu policy entries -> %s\n", n, policy.size(), out.c_str());
  return 0;
}

// ---- render --------------------------------------------------------------------

int cmd_render(const EngineConfig& cfg, const std::string& eye, const std::string& out) {
  const auto t0 = std::chrono::steady_clock::now();
  render::Scene scene;
  scene.tf = transfer_function(cfg);
  scene.volume = render::prepare_volume(load_volume(cfg), scene.tf);
  scene.model.translation = spaces::Vec3(0.0, 0.0, -cfg.render.distance);
  const auto method = render_method(cfg);
  scene.settings = render_settings(cfg, method, cfg.render.width, cfg.render.height);
  scene.rig = render::make_stereo_rig(spaces::Pose::identity(), rig_params(cfg), cfg.render.width,
                                      cfg.render.height, true);
  const double load_ms = ms_since(t0);
  const render::View& view = eye == "left" ? scene.rig.left : eye == "right" ? scene.rig.right : *scene.rig.pv;
  const auto t1 = std::chrono::steady_clock::now();
  const Image8 img = render::render_view(scene, view).to_image();
  const double frame_ms = ms_since(t1);
  if (fs::path(out).extension() == ".ppm") write_ppm(out, img);
  else write_png(out, img);
  std::printf("rendered %s %s eye %dx%d in %.1f ms (setup %.0f ms) -> %s\n", std::string(render::to_string(method)).c_str(),
              eye.c_str(), img.width, img.height, frame_ms, load_ms, out.c_str());
  return 0;
}

// ---- bench -----------------------------------------------------------------------

int cmd_bench(const EngineConfig& cfg, const std::string& out_dir) {
  const auto methods = bench_methods(cfg);
  auto paths = bench::default_paths(cfg.bench.duration);
  for (auto& p : paths) {
    p.window = cfg.bench.window;
    p.validate();
  }
  const auto volume = load_volume(cfg);
  fs::create_directories(out_dir);
  std::fprintf(stderr, "bench: %zu paths x %zu methods, %.1f s each, %dx%d per eye\n", paths.size(), methods.size(),
               cfg.bench.duration, cfg.bench.width, cfg.bench.height);
  const auto reports =
      bench::compare_methods(volume, paths, methods, bench::RunOptions{}, cfg.bench.width, cfg.bench.height);
  const fs::path dir(out_dir);
  bench::emit_csv(reports, dir / "bench.csv");
  bench::emit_summary_csv(reports, dir / "summary.csv");
  bench::emit_plot(reports, dir / "bench.svg");
  std::fputs(bench::to_summary_csv(reports).c_str(), stdout);
  return 0;
}

// ---- serve -------------------------------------------------------------------------

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

int cmd_serve(const EngineConfig& cfg) {
  const auto volume = cfg.server.frames ? load_volume(cfg) : nullptr;
  syncd::Server server(server_config(cfg, volume));
  server.start();
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::printf("listening tcp=%u ws=%u bind=%s frames=%s\n", unsigned(server.tcp_port()), unsigned(server.ws_port()),
              cfg.server.bind.c_str(), volume ? "on" : "off");
  std::fflush(stdout);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  std::printf("stopped\n");
  return 0;
}

// ---- colormap-check -------------------------------------------------------------------

int cmd_colormap_check(const EngineConfig& cfg, const std::string& what) {
  xfer::ColorScheme scheme;
  if (fs::is_regular_file(what)) {
    scheme = xfer::ColorScheme::from_file(what);
  } else if (const auto kind = xfer::parse_scheme_kind(what); kind && *kind != xfer::SchemeKind::TableFile) {
    scheme = xfer::ColorScheme::builtin(*kind, asset_dir(cfg));
  } else {
    throw UsageError("colormap-check expects a colormap CSV or one of grayscale, hsv, fire, cet-l08");
  }
  const auto r = xfer::validate_lightness(scheme);
  std::printf("scheme=%s\n", scheme.source.empty() ? std::string(xfer::to_string(scheme.kind)).c_str()
                                                   : scheme.source.c_str());
  std::printf("entries=%zu\n", r.lightness.size());
  std::printf("monotone=%s\n", r.monotone ? "true" : "false");
  std::printf("lightness_first=%.4f\nlightness_last=%.4f\n", r.lightness.front(), r.lightness.back());
  std::printf("max_step_deviation=%.4f\n", r.max_step_deviation);
  return 0;
}

// ---- replay -----------------------------------------------------------------------------

struct ReplayOptions {
  std::string stream;
  std::string host = "127.0.0.1";
  int port = -1;
  std::string transport = "tcp";
  bool offline = false;
  std::string marker;  // x,y,z of a simulated marker in the sensor frame
  bool realtime = false;
  std::string name = "replay";
  std::string out;
};

syncd::ModelState model_state(const spaces::ModelTransform& m) {
  syncd::ModelState s;
  s.t = m.translation;
  s.r = spaces::Quat(m.rotation).normalized();
  s.s = m.scale;
  return s;
}

json vec_json(const spaces::Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

struct ReplayCounts {
  std::size_t frames = 0, poses = 0, cuts = 0, markers = 0;
};

// Turns the hand stream into SET_POSE / SET_CUT_PLANE (and simulated
// SET_MARKER) messages for `send`, starting from `start`.
ReplayCounts drive(const EngineConfig& cfg, const ReplayOptions& o, const std::vector<interact::HandFrame>& frames,
                   const syncd::SessionState& start, const std::function<void(syncd::Message)>& send) {
  ReplayCounts n;
  interact::GestureState gs;
  spaces::ModelTransform model = start.model.transform();
  render::CutPlane cut = start.cut;
  std::optional<spaces::Pose> marker_to_sensor;
  if (!o.marker.empty()) marker_to_sensor = spaces::Pose{spaces::Mat3::Identity(), parse_vec3(o.marker, "--marker")};
  const auto cam = pinhole(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (o.realtime && i > 0) {
      const auto due = t0 + std::chrono::duration<double>(f.timestamp - frames.front().timestamp);
      std::this_thread::sleep_until(due);
    }
    const auto upd = interact::update_gesture(gs, model, cut, f, cfg.interact.sensitivity);
    ++n.frames;
    if (upd.model.matrix() != model.matrix()) {
      const auto ms = model_state(upd.model);
      send({"SET_POSE", 0, {{"t", vec_json(ms.t)}, {"r_quat", {ms.r.w(), ms.r.x(), ms.r.y(), ms.r.z()}}, {"s", vec_json(ms.s)}}});
      ++n.poses;
    }
    if (upd.cut.enabled != cut.enabled || upd.cut.point != cut.point || upd.cut.normal != cut.normal) {
      send({"SET_CUT_PLANE", 0,
            {{"enabled", upd.cut.enabled}, {"point", vec_json(upd.cut.point)}, {"normal", vec_json(upd.cut.normal)}}});
      ++n.cuts;
    }
    gs = upd.state;
    model = upd.model;
    cut = upd.cut;
    if (marker_to_sensor && i % std::size_t(cfg.marker.cadence) == 0) {
      const auto obs = spaces::project_marker(cam, *marker_to_sensor, cfg.marker.size);
      json corners = json::array();
      for (const auto& c : obs.corners) corners.push_back({c.x(), c.y()});
      send({"SET_MARKER", 0, {{"observation", {{"marker_size", obs.marker_size}, {"corners", corners}}}}});
      ++n.markers;
    }
  }
  return n;
}

int cmd_replay(const EngineConfig& cfg, const ReplayOptions& o) {
  const auto frames = interact::load_hand_stream(o.stream);
  syncd::SessionState final_state;
  ReplayCounts counts;
  std::size_t nacks = 0;
  if (o.offline) {
    syncd::SessionState s;
    syncd::MarkerConfig marker{pinhole(cfg), cfg.marker.anchor_weight};
    const syncd::ClientId id = syncd::allocate_client_id(s);
    std::uint64_t seq = 0;
    syncd::handle_message(s, id, {"HELLO", ++seq, {{"name", o.name}, {"role", "controller"}}}, marker);
    counts = drive(cfg, o, frames, s, [&](syncd::Message m) {
      m.seq = ++seq;
      if (syncd::handle_message(s, id, m, marker).rejected) ++nacks;
    });
    final_state = s;
  } else {
    const bool ws = o.transport == "ws";
    const int port = o.port >= 0 ? o.port : ws ? cfg.server.ws_port : cfg.server.tcp_port;
    syncd::Client client(ws ? syncd::Client::Transport::WebSocket : syncd::Client::Transport::Tcp, o.host,
                         static_cast<std::uint16_t>(port));
    client.hello(o.name, syncd::Role::Controller);
    syncd::SessionState start;
    for (const auto& m : client.history()) {
      if (m.type == "WELCOME") syncd::apply_state_payload(start, m.payload.at("state"));
    }
    counts = drive(cfg, o, frames, start, [&](syncd::Message m) { client.send(std::move(m)); });
    // Every broadcast for our mutations is queued ahead of the PONG.
    client.send({"PING", 0, {{"token", "replay-done"}}});
    if (!client.wait_for("PONG", std::chrono::seconds(10))) {
      throw syncd::SyncError(syncd::SyncErrc::IoFailure, "server did not answer after replay");
    }
    final_state = start;
    for (const auto& m : client.history()) {
      if (m.type == "STATE") syncd::apply_state_payload(final_state, m.payload);
      if (m.type == "NACK") ++nacks;
    }
    client.close();
  }
  const json summary = {{"frames", counts.frames}, {"pose_updates", counts.poses}, {"cut_updates", counts.cuts},
                        {"marker_updates", counts.markers}, {"nacks", nacks}, {"seq", final_state.seq}};
  std::printf("%s\n", summary.dump().c_str());
  if (!o.out.empty()) {
    const std::string text = syncd::state_payload(final_state).dump(2) + "\n";
    write_file(o.out, std::vector<std::uint8_t>(text.begin(), text.end()));
  }
  return 0;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Headless holographic volume viewer: DICOM ingest, rendering, benchmarks and the multi-user session server.",
               "voxelglass"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Engine config file (default: $VOXELGLASS_CONFIG)");
  app.add_option("--set", g.sets, "Override a config key, e.g. --set render.width=128")->type_name("KEY=VALUE");

  // ingest
  std::string ingest_dir, ingest_out;
  auto* ingest = app.add_subcommand("ingest", "Assemble a DICOM directory into a volume cache");
  ingest->add_option("dir", ingest_dir, "Directory of .dcm files")->required();
  ingest->add_option("-o,--out", ingest_out, "Output .vxg file")->required();

  // anonymize
  std::string anon_in, anon_out, anon_policy;
  auto* anon = app.add_subcommand("anonymize", "Strip identifying tags from a DICOM file or directory");
  anon->add_option("in", anon_in, "Input .dcm file or directory")->required();
  anon->add_option("out", anon_out, "Output file or directory")->required();
  anon->add_option("--policy", anon_policy, "Policy file (default: <assets>/anonymize_default.policy)");

  // render
  std::string r_volume, r_method, r_out, r_eye = "left", r_scheme;
  std::optional<int> r_width, r_height;
  std::optional<double> r_distance;
  auto* rend = app.add_subcommand("render", "Render one frame to PNG or PPM");
  rend->add_option("--volume", r_volume, "Volume cache (.vxg) or DICOM directory; phantom when omitted");
  rend->add_option("--method", r_method, "Rendering method")->check(CLI::IsMember(method_names()));
  rend->add_option("--out", r_out, "Output image (.png or .ppm)")->required();
  rend->add_option("--width", r_width, "Width in pixels");
  rend->add_option("--height", r_height, "Height in pixels");
  rend->add_option("--eye", r_eye, "View to render")->check(CLI::IsMember({"left", "right", "pv"}));
  rend->add_option("--distance", r_distance, "Model distance in front of the head, meters");
  rend->add_option("--scheme", r_scheme, "Color scheme")
      ->check(CLI::IsMember({"grayscale", "hsv", "fire", "cet-l08"}));

  // bench
  std::string b_volume, b_methods, b_out = "report";
  std::optional<double> b_duration;
  std::optional<int> b_width, b_height;
  auto* bench = app.add_subcommand("bench", "Run the scripted-path frame-rate benchmark");
  bench->add_option("--volume", b_volume, "Volume cache (.vxg) or DICOM directory; phantom when omitted");
  bench->add_option("--methods", b_methods, "all, or a comma list of methods");
  bench->add_option("--out", b_out, "Report directory (bench.csv, summary.csv, bench.svg)");
  bench->add_option("--duration", b_duration, "Seconds per path");
  bench->add_option("--width", b_width, "Width per eye");
  bench->add_option("--height", b_height, "Height per eye");

  // serve
  std::string s_volume, s_bind;
  std::optional<int> s_tcp, s_ws;
  bool s_no_frames = false;
  auto* serve = app.add_subcommand("serve", "Run the session server until SIGINT/SIGTERM");
  serve->add_option("--volume", s_volume, "Volume for frame streaming; phantom when omitted");
  serve->add_option("--bind", s_bind, "Listen address (default: $VOXELGLASS_BIND or config)");
  serve->add_option("--tcp-port", s_tcp, "Raw TCP port, 0 = any")->check(CLI::Range(0, 65535));
  serve->add_option("--ws-port", s_ws, "WebSocket port, 0 = any")->check(CLI::Range(0, 65535));
  serve->add_flag("--no-frames", s_no_frames, "Disable server-side frame streaming");

  // colormap-check
  std::string cm_what;
  auto* cmap = app.add_subcommand("colormap-check", "Report CIE L* monotonicity of a colormap");
  cmap->add_option("colormap", cm_what, "Colormap CSV or built-in scheme name")->required();

  // replay
  ReplayOptions ro;
  auto* replay = app.add_subcommand("replay", "Replay a recorded hand stream into a live session");
  replay->add_option("stream", ro.stream, "Hand stream file")->required()->check(CLI::ExistingFile);
  replay->add_option("--host", ro.host, "Server host");
  replay->add_option("--port", ro.port, "Server port (default: config server port)")->check(CLI::Range(0, 65535));
  replay->add_option("--transport", ro.transport, "tcp or ws")->check(CLI::IsMember({"tcp", "ws"}));
  replay->add_flag("--offline", ro.offline, "Apply to an in-process session instead of a server");
  replay->add_option("--marker", ro.marker, "Simulated marker position in the sensor frame, x,y,z meters");
  replay->add_flag("--realtime", ro.realtime, "Pace frames by their timestamps");
  replay->add_option("--name", ro.name, "Client name");
  replay->add_option("--out", ro.out, "Write the final STATE payload as JSON");

  // dump-config
  std::string dump_out;
  auto* dump = app.add_subcommand("dump-config", "Print the effective configuration");
  dump->add_option("--out", dump_out, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: UsageError: " << one_line(e.what()) << "\n\n" << app.help();
    return 2;
  }

  try {
    EngineConfig cfg = resolve(g);
    int rc = 0;
    if (ingest->parsed()) {
      rc = cmd_ingest(ingest_dir, ingest_out);
    } else if (anon->parsed()) {
      validate(cfg);
      rc = cmd_anonymize(cfg, anon_in, anon_out, anon_policy);
    } else if (rend->parsed()) {
      if (!r_volume.empty()) cfg.volume.path = r_volume;
      if (!r_method.empty()) cfg.render.method = r_method;
      if (!r_scheme.empty()) cfg.transfer.scheme = r_scheme;
      if (r_width) cfg.render.width = *r_width;
      if (r_height) cfg.render.height = *r_height;
      if (r_distance) cfg.render.distance = *r_distance;
      validate(cfg);
      rc = cmd_render(cfg, r_eye, r_out);
    } else if (bench->parsed()) {
      if (!b_volume.empty()) cfg.volume.path = b_volume;
      if (!b_methods.empty()) cfg.bench.methods = b_methods == "all" ? method_names() : split_list(b_methods);
      if (b_duration) cfg.bench.duration = *b_duration;
      if (b_width) cfg.bench.width = *b_width;
      if (b_height) cfg.bench.height = *b_height;
      validate(cfg);
      rc = cmd_bench(cfg, b_out);
    } else if (serve->parsed()) {
      if (!s_volume.empty()) cfg.volume.path = s_volume;
      if (!s_bind.empty()) cfg.server.bind = s_bind;
      if (s_tcp) cfg.server.tcp_port = *s_tcp;
      if (s_ws) cfg.server.ws_port = *s_ws;
      if (s_no_frames) cfg.server.frames = false;
      validate(cfg);
      rc = cmd_serve(cfg);
    } else if (cmap->parsed()) {
      rc = cmd_colormap_check(cfg, cm_what);
    } else if (replay->parsed()) {
      if (!ro.marker.empty()) parse_vec3(ro.marker, "--marker");
      validate(cfg);
      rc = cmd_replay(cfg, ro);
    } else if (dump->parsed()) {
      validate(cfg);
      const std::string text = dump_config(cfg);
      if (dump_out.empty()) std::fputs(text.c_str(), stdout);
      else write_file(dump_out, std::vector<std::uint8_t>(text.begin(), text.end()));
    }
    return rc;
  } catch (const UsageError& e) {
    std::cerr << "error: UsageError: " << one_line(e.what()) << "\n\n" << app.help();
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.code() << ": " << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << one_line(e.what()) << "\n";
    return 1;
  }
}

}  // namespace vg::cli
