#pragma once

// Engine configuration: one text file, `[section]` headers and
// `key = value` lines (TOML subset: quoted strings, numbers incl. inf,
// true/false, single-line arrays). `#` starts a comment.

#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "voxelglass/error.hpp"
#include "voxelglass/interact.hpp"
#include "voxelglass/render.hpp"
#include "voxelglass/syncd.hpp"
#include "voxelglass/xfer.hpp"

namespace vg::cli {

enum class ConfigErrc { ParseError, UnknownKey, InvalidValue, MissingFile };
const char* to_string(ConfigErrc e);
using ConfigError = CodedError<ConfigErrc>;

struct EngineConfig {
  struct Volume {
    std::string path;                  // .vxg cache or DICOM directory; empty = phantom
    std::string phantom = "ellipsoid"; // ellipsoid | sphere
    std::array<std::uint32_t, 3> phantom_dims{256, 256, 144};
    friend bool operator==(const Volume&, const Volume&) = default;
  } volume;

  struct Assets {
    std::string dir;  // empty = built-in asset directory
    friend bool operator==(const Assets&, const Assets&) = default;
  } assets;

  struct Transfer {
    std::string scheme = "grayscale";
    std::string table;  // colormap CSV for scheme = tablefile
    double base = 0.0, brightness = 0.0, contrast = 1.0;
    bool clahe = false;
    std::array<std::uint32_t, 3> clahe_blocks{4, 4, 4};
    double clahe_clip = 2.0;
    std::uint32_t clahe_bins = 256;
    std::vector<std::pair<double, double>> opacity{{0.0, 0.0}, {1.0, 1.0}};
    friend bool operator==(const Transfer&, const Transfer&) = default;
  } transfer;

  struct Render {
    std::string method = "view-aligned";
    int width = 256, height = 256;
    int slices = 0;        // 0 = method default
    double step = 0.0;     // 0 = method default
    double early_termination = 0.98;
    std::array<double, 3> background{0.0, 0.0, 0.0};
    double distance = 0.8;  // model origin in front of the head, meters
    friend bool operator==(const Render&, const Render&) = default;
  } render;

  struct Rig {
    double baseline = 0.064, vfov_deg = 90.0, near_m = 0.1, far_m = 20.0;
    std::array<double, 3> pv_offset{0.0, 0.0, 0.0};
    double pv_vfov_deg = 90.0;
    friend bool operator==(const Rig&, const Rig&) = default;
  } rig;

  struct Camera {
    double fx = 450.0, fy = 450.0, cx = 320.0, cy = 240.0;
    int width = 640, height = 480;
    friend bool operator==(const Camera&, const Camera&) = default;
  } camera;

  struct Marker {
    double size = 0.15;
    int cadence = 5;  // simulated tracking: one observation every n-th frame
    double anchor_weight = 0.3;
    friend bool operator==(const Marker&, const Marker&) = default;
  } marker;

  struct Interact {
    double sensitivity = 1.0;
    double width_min = 0.001, width_max = 0.008, depth_max = 0.03, touch_radius = 0.01;
    friend bool operator==(const Interact&, const Interact&) = default;
  } interact;

  struct Server {
    std::string bind = "0.0.0.0";
    int tcp_port = syncd::kDefaultTcpPort;
    int ws_port = syncd::kDefaultWsPort;
    double heartbeat_timeout = 10.0;
    double tick = 0.05;
    int render_threads = 1;
    bool frames = true;
    std::string frame_method = "view-aligned";
    friend bool operator==(const Server&, const Server&) = default;
  } server;

  struct Bench {
    double duration = 10.0, window = 0.5;
    int width = 256, height = 256;
    std::vector<std::string> methods{"texture-based", "view-aligned", "raycast"};
    friend bool operator==(const Bench&, const Bench&) = default;
  } bench;

  friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

// Parses and validates. `origin` names the source in error messages.
EngineConfig parse_config(std::string_view text, std::string_view origin = "<config>");
EngineConfig load_config(const std::filesystem::path& path);
std::string dump_config(const EngineConfig& cfg);

// `section.key=value` override, value in config syntax (bare words are
// taken as strings).
void apply_override(EngineConfig& cfg, std::string_view assignment);
// VOXELGLASS_ASSETS and VOXELGLASS_BIND.
void apply_environment(EngineConfig& cfg);

// Range and reference checks; module errors pass through unchanged.
void validate(const EngineConfig& cfg);

// Keys as `section.key`, in dump order.
std::vector<std::string> config_keys();

// ---- conversion to module types ---------------------------------------------

std::filesystem::path asset_dir(const EngineConfig& cfg);
render::Method render_method(const EngineConfig& cfg);
xfer::TransferFunction transfer_function(const EngineConfig& cfg);
render::RenderSettings render_settings(const EngineConfig& cfg, render::Method method, int width, int height);
render::RigParams rig_params(const EngineConfig& cfg);
spaces::PinholeCamera pinhole(const EngineConfig& cfg);
interact::PressureMap pressure_map(const EngineConfig& cfg);
std::vector<render::Method> bench_methods(const EngineConfig& cfg);
syncd::ServerConfig server_config(const EngineConfig& cfg, std::shared_ptr<const VolumeDataset> volume);

std::shared_ptr<const VolumeDataset> load_volume(const EngineConfig& cfg);

}  // namespace vg::cli
