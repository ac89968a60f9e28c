#pragma once

// Intensity-to-display mapping: 12->8 bit truncation, windowing, 3D CLAHE,
// opacity curves and colour schemes.

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "voxelglass/error.hpp"
#include "voxelglass/volume.hpp"

namespace vg::xfer {

enum class XferErrc { OutOfRange, BlockLargerThanVolume, InvalidParams, BadColormap, IoFailure };
const char* to_string(XferErrc e);
using XferError = CodedError<XferErrc>;

// 12-bit stored value to 8 bits by dropping the low nibble.
std::uint8_t truncate_12_to_8(std::uint16_t v);

struct WindowParams {
  double base = 0.0;        // [0,1): normalized intensities below map to 0
  double brightness = 0.0;  // [-1,1] additive
  double contrast = 1.0;    // > 0 multiplicative

  void validate() const;
  friend bool operator==(const WindowParams&, const WindowParams&) = default;
};

// clamp((v - base) * contrast + brightness, 0, 1)
double apply_window(double v_norm, const WindowParams& w);

struct ClaheParams {
  std::array<std::uint32_t, 3> blocks{1, 1, 1};
  // Multiple of the uniform bin height (block voxels / bins); infinity disables clipping.
  double clip_limit = std::numeric_limits<double>::infinity();
  std::uint32_t bins = 256;

  void validate() const;
  friend bool operator==(const ClaheParams&, const ClaheParams&) = default;
};

// Contrast-limited adaptive histogram equalization over sub-blocks of the
// volume, with trilinear interpolation between block-centre mappings.
VolumeDataset clahe3d(const VolumeDataset& v, const ClaheParams& p);

using Rgb = std::array<float, 3>;

struct Rgba {
  float r = 0, g = 0, b = 0, a = 0;
  friend bool operator==(const Rgba&, const Rgba&) = default;
};

enum class SchemeKind { Grayscale, HSV, Fire, CETL08, TableFile };
std::string_view to_string(SchemeKind k);
std::optional<SchemeKind> parse_scheme_kind(std::string_view name);

struct ColorScheme {
  SchemeKind kind = SchemeKind::Grayscale;
  std::array<Rgb, 256> table{};
  std::string source;  // asset path for table-backed schemes

  static ColorScheme grayscale();
  // Hue sweep 240 deg -> 0 deg at S = V = 1.
  static ColorScheme hsv();
  static ColorScheme from_file(const std::filesystem::path& csv, SchemeKind kind = SchemeKind::TableFile);
  // Grayscale/HSV are generated; Fire/CET-L08 load from `<assets>/colormaps/`.
  static ColorScheme builtin(SchemeKind kind, const std::filesystem::path& asset_dir = default_asset_dir());

  static std::filesystem::path default_asset_dir();

  // Linear interpolation between adjacent entries at x * 255.
  Rgb lookup(double x) const;
};

// 256 lines of `r,g,b` floats in [0,1].
std::array<Rgb, 256> parse_colormap_csv(std::string_view text);

struct OpacityCurve {
  std::vector<std::pair<double, double>> points{{0.0, 0.0}, {1.0, 1.0}};

  void validate() const;
  double at(double x) const;  // piecewise linear, constant beyond the ends
  friend bool operator==(const OpacityCurve&, const OpacityCurve&) = default;
};

struct TransferFunction {
  WindowParams window;
  std::optional<ClaheParams> clahe;  // applied to the volume ahead of rendering
  ColorScheme scheme = ColorScheme::grayscale();
  OpacityCurve opacity;
};

Rgba classify(double v_norm, const TransferFunction& tf);

struct LightnessReport {
  bool monotone = false;
  double max_step_deviation = 0.0;  // max |dL*_i - mean dL*|
  std::vector<double> lightness;    // CIE L* per entry
};

// sRGB (D65) -> CIE L*.
double cie_lightness(const Rgb& srgb);
LightnessReport validate_lightness(const ColorScheme& scheme);

}  // namespace vg::xfer
