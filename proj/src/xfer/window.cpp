#include <algorithm>
#include <cmath>

#include "voxelglass/xfer.hpp"

namespace vg::xfer {

const char* to_string(XferErrc e) {
  switch (e) {
    case XferErrc::OutOfRange: return "OutOfRange";
    case XferErrc::BlockLargerThanVolume: return "BlockLargerThanVolume";
    case XferErrc::InvalidParams: return "InvalidParams";
    case XferErrc::BadColormap: return "BadColormap";
    case XferErrc::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

std::uint8_t truncate_12_to_8(std::uint16_t v) {
  if (v >= 4096) throw XferError(XferErrc::OutOfRange, "value " + std::to_string(v) + " exceeds 12 bits");
  return static_cast<std::uint8_t>(v >> 4);
}

void WindowParams::validate() const {
  if (!(base >= 0.0 && base < 1.0) || !(brightness >= -1.0 && brightness <= 1.0) || !(contrast > 0.0) ||
      !std::isfinite(contrast)) {
    throw XferError(XferErrc::InvalidParams, "window parameters out of range");
  }
}

double apply_window(double v_norm, const WindowParams& w) {
  return std::clamp((v_norm - w.base) * w.contrast + w.brightness, 0.0, 1.0);
}

void OpacityCurve::validate() const {
  if (points.empty()) throw XferError(XferErrc::InvalidParams, "opacity curve has no points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto [x, a] = points[i];
    if (!(a >= 0.0 && a <= 1.0) || !std::isfinite(x)) {
      throw XferError(XferErrc::InvalidParams, "opacity alpha outside [0,1]");
    }
    if (i > 0 && !(x > points[i - 1].first)) {
      throw XferError(XferErrc::InvalidParams, "opacity intensities must increase strictly");
    }
  }
}

double OpacityCurve::at(double x) const {
  if (points.empty()) return 0.0;
  if (x <= points.front().first) return points.front().second;
  if (x >= points.back().first) return points.back().second;
  auto hi = std::upper_bound(points.begin(), points.end(), x,
                             [](double v, const std::pair<double, double>& p) { return v < p.first; });
  auto lo = hi - 1;
  const double t = (x - lo->first) / (hi->first - lo->first);
  return lo->second + t * (hi->second - lo->second);
}

Rgba classify(double v_norm, const TransferFunction& tf) {
  const double w = apply_window(v_norm, tf.window);
  const Rgb c = tf.scheme.lookup(w);
  return {c[0], c[1], c[2], static_cast<float>(tf.opacity.at(w))};
}

}  // namespace vg::xfer
