#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "voxelglass/xfer.hpp"

#ifndef VG_DEFAULT_ASSET_DIR
#define VG_DEFAULT_ASSET_DIR "assets"
#endif

namespace vg::xfer {

std::string_view to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::Grayscale: return "Grayscale";
    case SchemeKind::HSV: return "HSV";
    case SchemeKind::Fire: return "Fire";
    case SchemeKind::CETL08: return "CET-L08";
    case SchemeKind::TableFile: return "TableFile";
  }
  return "Grayscale";
}

std::optional<SchemeKind> parse_scheme_kind(std::string_view name) {
  std::string n(name);
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  if (n == "grayscale" || n == "gray") return SchemeKind::Grayscale;
  if (n == "hsv") return SchemeKind::HSV;
  if (n == "fire") return SchemeKind::Fire;
  if (n == "cet-l08" || n == "cetl08" || n == "cet_l08") return SchemeKind::CETL08;
  if (n == "tablefile") return SchemeKind::TableFile;
  return std::nullopt;
}

ColorScheme ColorScheme::grayscale() {
  ColorScheme s;
  s.kind = SchemeKind::Grayscale;
  for (int i = 0; i < 256; ++i) {
    const float g = static_cast<float>(i / 255.0);
    s.table[i] = {g, g, g};
  }
  return s;
}

ColorScheme ColorScheme::hsv() {
  ColorScheme s;
  s.kind = SchemeKind::HSV;
  for (int i = 0; i < 256; ++i) {
    const double hue = 240.0 * (1.0 - i / 255.0);  // degrees
    const double h6 = hue / 60.0;
    const int sector = std::min(5, static_cast<int>(std::floor(h6)));
    const double f = h6 - sector;
    const double q = 1.0 - f;
    double r = 0, g = 0, b = 0;
    switch (sector) {
      case 0: r = 1; g = f; b = 0; break;
      case 1: r = q; g = 1; b = 0; break;
      case 2: r = 0; g = 1; b = f; break;
      case 3: r = 0; g = q; b = 1; break;
      case 4: r = f; g = 0; b = 1; break;
      default: r = 1; g = 0; b = q; break;
    }
    s.table[i] = {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
  }
  return s;
}

std::array<Rgb, 256> parse_colormap_csv(std::string_view text) {
  std::array<Rgb, 256> table{};
  std::size_t count = 0;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    if (count == 256) throw XferError(XferErrc::BadColormap, "colormap has more than 256 entries");
    Rgb rgb{};
    for (int c = 0; c < 3; ++c) {
      const std::size_t comma = c < 2 ? line.find(',') : line.size();
      if (comma == std::string_view::npos) {
        throw XferError(XferErrc::BadColormap, "line " + std::to_string(lineno) + ": expected r,g,b");
      }
      std::string_view field = line.substr(0, comma);
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      float v = 0;
      auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc{} || p != field.data() + field.size() || !(v >= 0.0f && v <= 1.0f)) {
        throw XferError(XferErrc::BadColormap, "line " + std::to_string(lineno) + ": bad component");
      }
      rgb[c] = v;
      line = comma < line.size() ? line.substr(comma + 1) : std::string_view{};
    }
    table[count++] = rgb;
  }
  if (count != 256) {
    throw XferError(XferErrc::BadColormap, "colormap has " + std::to_string(count) + " entries, need 256");
  }
  return table;
}

ColorScheme ColorScheme::from_file(const std::filesystem::path& csv, SchemeKind kind) {
  std::ifstream in(csv);
  if (!in) throw XferError(XferErrc::IoFailure, "cannot open colormap " + csv.string());
  std::stringstream buf;
  buf << in.rdbuf();
  ColorScheme s;
  s.kind = kind;
  s.table = parse_colormap_csv(buf.str());
  s.source = csv.string();
  return s;
}

std::filesystem::path ColorScheme::default_asset_dir() {
  if (const char* env = std::getenv("VOXELGLASS_ASSETS"); env && *env) return env;
  return VG_DEFAULT_ASSET_DIR;
}

ColorScheme ColorScheme::builtin(SchemeKind kind, const std::filesystem::path& asset_dir) {
  switch (kind) {
    case SchemeKind::Grayscale: return grayscale();
    case SchemeKind::HSV: return hsv();
    case SchemeKind::Fire: return from_file(asset_dir / "colormaps" / "fire.csv", SchemeKind::Fire);
    case SchemeKind::CETL08: return from_file(asset_dir / "colormaps" / "cet_l08.csv", SchemeKind::CETL08);
    case SchemeKind::TableFile: break;
  }
  throw XferError(XferErrc::InvalidParams, "TableFile schemes need an explicit path");
}

Rgb ColorScheme::lookup(double x) const {
  const double pos = std::clamp(x, 0.0, 1.0) * 255.0;
  const int i = std::min(254, static_cast<int>(pos));
  const float t = static_cast<float>(pos - i);
  const Rgb& a = table[i];
  const Rgb& b = table[i + 1];
  return {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
}

double cie_lightness(const Rgb& srgb) {
  auto linear = [](double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); };
  // Relative luminance, D65 white (Yn = 1).
  const double y = 0.2126729 * linear(srgb[0]) + 0.7151522 * linear(srgb[1]) + 0.0721750 * linear(srgb[2]);
  constexpr double eps = 216.0 / 24389.0;
  constexpr double kappa = 24389.0 / 27.0;
  return y > eps ? 116.0 * std::cbrt(y) - 16.0 : kappa * y;
}

LightnessReport validate_lightness(const ColorScheme& scheme) {
  LightnessReport rep;
  rep.lightness.resize(scheme.table.size());
  std::transform(scheme.table.begin(), scheme.table.end(), rep.lightness.begin(), cie_lightness);
  std::vector<double> steps(rep.lightness.size() - 1);
  for (std::size_t i = 0; i + 1 < rep.lightness.size(); ++i) steps[i] = rep.lightness[i + 1] - rep.lightness[i];
  // Tolerates the rounding of 6-digit CSV assets.
  rep.monotone = std::all_of(steps.begin(), steps.end(), [](double d) { return d >= -1e-6; });
  const double mean = std::accumulate(steps.begin(), steps.end(), 0.0) / static_cast<double>(steps.size());
  for (double d : steps) rep.max_step_deviation = std::max(rep.max_step_deviation, std::abs(d - mean));
  return rep;
}

}  // namespace vg::xfer
