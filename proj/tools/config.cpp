#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "voxelglass/ingest.hpp"

namespace vg::cli {

const char* to_string(ConfigErrc e) {
  switch (e) {
    case ConfigErrc::ParseError: return "ParseError";
    case ConfigErrc::UnknownKey: return "UnknownKey";
    case ConfigErrc::InvalidValue: return "InvalidValue";
    case ConfigErrc::MissingFile: return "MissingFile";
  }
  return "Unknown";
}

namespace {

struct Value {
  enum class Kind { String, Bool, Number, Array } kind = Kind::String;
  std::string str;
  bool flag = false;
  double num = 0.0;
  std::vector<Value> items;
};

class ValueParser {
 public:
  explicit ValueParser(std::string_view s) : s_(s) {}

  // Whole input: one value, then only whitespace or a comment.
  Value parse_all() {
    Value v = value(0);
    skip_ws();
    if (i_ < s_.size() && s_[i_] != '#') fail("unexpected '" + std::string(s_.substr(i_)) + "' after value");
    return v;
  }

 private:
  [[noreturn]] static void fail(const std::string& msg) { throw ConfigError(ConfigErrc::ParseError, msg); }

  void skip_ws() {
    while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t' || s_[i_] == '\r')) ++i_;
  }

  Value value(int depth) {
    if (depth > 8) fail("arrays nested too deeply");
    skip_ws();
    if (i_ >= s_.size() || s_[i_] == '#') fail("missing value");
    const char c = s_[i_];
    if (c == '"') return string();
    if (c == '[') return array(depth);
    return scalar();
  }

  Value string() {
    Value v;
    ++i_;
    while (i_ < s_.size() && s_[i_] != '"') {
      char c = s_[i_++];
      if (c == '\\') {
        if (i_ >= s_.size()) break;
        switch (s_[i_++]) {
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          default: fail("unknown escape in string");
        }
      }
      v.str.push_back(c);
    }
    if (i_ >= s_.size()) fail("unterminated string");
    ++i_;
    return v;
  }

  Value array(int depth) {
    Value v;
    v.kind = Value::Kind::Array;
    ++i_;
    skip_ws();
    if (i_ < s_.size() && s_[i_] == ']') {
      ++i_;
      return v;
    }
    for (;;) {
      v.items.push_back(value(depth + 1));
      skip_ws();
      if (i_ >= s_.size()) fail("unterminated array");
      if (s_[i_] == ',') {
        ++i_;
        skip_ws();
        if (i_ < s_.size() && s_[i_] == ']') {  // trailing comma
          ++i_;
          return v;
        }
        continue;
      }
      if (s_[i_] == ']') {
        ++i_;
        return v;
      }
      fail("expected ',' or ']' in array");
    }
  }

  Value scalar() {
    const std::size_t start = i_;
    while (i_ < s_.size() && s_[i_] != ',' && s_[i_] != ']' && s_[i_] != '#' && s_[i_] != ' ' && s_[i_] != '\t' &&
           s_[i_] != '\r')
      ++i_;
    std::string_view tok = s_.substr(start, i_ - start);
    Value v;
    if (tok == "true" || tok == "false") {
      v.kind = Value::Kind::Bool;
      v.flag = tok == "true";
      return v;
    }
    std::string_view num = tok;
    if (!num.empty() && num.front() == '+') num.remove_prefix(1);
    double d = 0;
    const auto [end, ec] = std::from_chars(num.data(), num.data() + num.size(), d);
    if (num.empty() || ec != std::errc() || end != num.data() + num.size() || std::isnan(d)) {
      fail("cannot parse value '" + std::string(tok) + "' (strings need quotes)");
    }
    v.kind = Value::Kind::Number;
    v.num = d;
    return v;
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '\t') {
      out += "\\t";
      continue;
    }
    out.push_back(c);
  }
  return out + "\"";
}

[[noreturn]] void invalid(const std::string& where, const std::string& msg) {
  throw ConfigError(ConfigErrc::InvalidValue, where + ": " + msg);
}

double as_number(const Value& v, const std::string& where, bool allow_inf) {
  if (v.kind != Value::Kind::Number) invalid(where, "expected a number");
  if (!allow_inf && !std::isfinite(v.num)) invalid(where, "must be finite");
  return v.num;
}

template <class T>
T as_integer(const Value& v, const std::string& where) {
  const double d = as_number(v, where, false);
  if (d != std::floor(d) || d < double(std::numeric_limits<T>::min()) || d > double(std::numeric_limits<T>::max())) {
    invalid(where, "expected an integer in range");
  }
  return static_cast<T>(d);
}

const std::vector<Value>& as_array(const Value& v, const std::string& where, std::size_t n = 0) {
  if (v.kind != Value::Kind::Array) invalid(where, "expected an array");
  if (n && v.items.size() != n) invalid(where, "expected " + std::to_string(n) + " elements");
  return v.items;
}

struct Field {
  std::string section, key;
  std::function<void(EngineConfig&, const Value&, const std::string&)> set;
  std::function<std::string(EngineConfig&)> get;
};

template <class Acc>
Field dbl(std::string sec, std::string key, Acc acc, bool allow_inf = false) {
  return {std::move(sec), std::move(key),
          [acc, allow_inf](EngineConfig& c, const Value& v, const std::string& w) { acc(c) = as_number(v, w, allow_inf); },
          [acc](EngineConfig& c) { return format_double(acc(c)); }};
}

template <class Acc>
Field integer(std::string sec, std::string key, Acc acc) {
  using T = std::remove_reference_t<decltype(acc(std::declval<EngineConfig&>()))>;
  return {std::move(sec), std::move(key),
          [acc](EngineConfig& c, const Value& v, const std::string& w) { acc(c) = as_integer<T>(v, w); },
          [acc](EngineConfig& c) { return std::to_string(acc(c)); }};
}

template <class Acc>
Field str(std::string sec, std::string key, Acc acc) {
  return {std::move(sec), std::move(key),
          [acc](EngineConfig& c, const Value& v, const std::string& w) {
            if (v.kind != Value::Kind::String) invalid(w, "expected a quoted string");
            acc(c) = v.str;
          },
          [acc](EngineConfig& c) { return quote(acc(c)); }};
}

template <class Acc>
Field boolean(std::string sec, std::string key, Acc acc) {
  return {std::move(sec), std::move(key),
          [acc](EngineConfig& c, const Value& v, const std::string& w) {
            if (v.kind != Value::Kind::Bool) invalid(w, "expected true or false");
            acc(c) = v.flag;
          },
          [acc](EngineConfig& c) { return std::string(acc(c) ? "true" : "false"); }};
}

template <class Acc>
Field triple(std::string sec, std::string key, Acc acc) {
  using T = typename std::remove_reference_t<decltype(acc(std::declval<EngineConfig&>()))>::value_type;
  return {std::move(sec), std::move(key),
          [acc](EngineConfig& c, const Value& v, const std::string& w) {
            const auto& items = as_array(v, w, 3);
            std::array<T, 3> out{};
            for (int i = 0; i < 3; ++i) {
              if constexpr (std::is_integral_v<T>) out[i] = as_integer<T>(items[i], w);
              else out[i] = as_number(items[i], w, false);
            }
            acc(c) = out;
          },
          [acc](EngineConfig& c) {
            const auto& a = acc(c);
            std::string s = "[";
            for (int i = 0; i < 3; ++i) {
              if constexpr (std::is_integral_v<T>) s += std::to_string(a[i]);
              else s += format_double(a[i]);
              s += i < 2 ? ", " : "]";
            }
            return s;
          }};
}

Field opacity_field() {
  return {"transfer", "opacity",
          [](EngineConfig& c, const Value& v, const std::string& w) {
            std::vector<std::pair<double, double>> pts;
            for (const auto& p : as_array(v, w)) {
              const auto& xy = as_array(p, w, 2);
              pts.emplace_back(as_number(xy[0], w, false), as_number(xy[1], w, false));
            }
            c.transfer.opacity = std::move(pts);
          },
          [](EngineConfig& c) {
            std::string s = "[";
            for (std::size_t i = 0; i < c.transfer.opacity.size(); ++i) {
              if (i) s += ", ";
              s += "[" + format_double(c.transfer.opacity[i].first) + ", " +
                   format_double(c.transfer.opacity[i].second) + "]";
            }
            return s + "]";
          }};
}

Field methods_field() {
  return {"bench", "methods",
          [](EngineConfig& c, const Value& v, const std::string& w) {
            std::vector<std::string> out;
            for (const auto& m : as_array(v, w)) {
              if (m.kind != Value::Kind::String) invalid(w, "expected strings");
              out.push_back(m.str);
            }
            c.bench.methods = std::move(out);
          },
          [](EngineConfig& c) {
            std::string s = "[";
            for (std::size_t i = 0; i < c.bench.methods.size(); ++i) s += (i ? ", " : "") + quote(c.bench.methods[i]);
            return s + "]";
          }};
}

#define VG_FIELD(expr) [](EngineConfig& c) -> auto& { return c.expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      str("volume", "path", VG_FIELD(volume.path)),
      str("volume", "phantom", VG_FIELD(volume.phantom)),
      triple("volume", "phantom_dims", VG_FIELD(volume.phantom_dims)),
      str("assets", "dir", VG_FIELD(assets.dir)),
      str("transfer", "scheme", VG_FIELD(transfer.scheme)),
      str("transfer", "table", VG_FIELD(transfer.table)),
      dbl("transfer", "base", VG_FIELD(transfer.base)),
      dbl("transfer", "brightness", VG_FIELD(transfer.brightness)),
      dbl("transfer", "contrast", VG_FIELD(transfer.contrast)),
      boolean("transfer", "clahe", VG_FIELD(transfer.clahe)),
      triple("transfer", "clahe_blocks", VG_FIELD(transfer.clahe_blocks)),
      dbl("transfer", "clahe_clip", VG_FIELD(transfer.clahe_clip), true),
      integer("transfer", "clahe_bins", VG_FIELD(transfer.clahe_bins)),
      opacity_field(),
      str("render", "method", VG_FIELD(render.method)),
      integer("render", "width", VG_FIELD(render.width)),
      integer("render", "height", VG_FIELD(render.height)),
      integer("render", "slices", VG_FIELD(render.slices)),
      dbl("render", "step", VG_FIELD(render.step)),
      dbl("render", "early_termination", VG_FIELD(render.early_termination)),
      triple("render", "background", VG_FIELD(render.background)),
      dbl("render", "distance", VG_FIELD(render.distance)),
      dbl("rig", "baseline", VG_FIELD(rig.baseline)),
      dbl("rig", "vfov_deg", VG_FIELD(rig.vfov_deg)),
      dbl("rig", "near", VG_FIELD(rig.near_m)),
      dbl("rig", "far", VG_FIELD(rig.far_m)),
      triple("rig", "pv_offset", VG_FIELD(rig.pv_offset)),
      dbl("rig", "pv_vfov_deg", VG_FIELD(rig.pv_vfov_deg)),
      dbl("camera", "fx", VG_FIELD(camera.fx)),
      dbl("camera", "fy", VG_FIELD(camera.fy)),
      dbl("camera", "cx", VG_FIELD(camera.cx)),
      dbl("camera", "cy", VG_FIELD(camera.cy)),
      integer("camera", "width", VG_FIELD(camera.width)),
      integer("camera", "height", VG_FIELD(camera.height)),
      dbl("marker", "size", VG_FIELD(marker.size)),
      integer("marker", "cadence", VG_FIELD(marker.cadence)),
      dbl("marker", "anchor_weight", VG_FIELD(marker.anchor_weight)),
      dbl("interact", "sensitivity", VG_FIELD(interact.sensitivity)),
      dbl("interact", "width_min", VG_FIELD(interact.width_min)),
      dbl("interact", "width_max", VG_FIELD(interact.width_max)),
      dbl("interact", "depth_max", VG_FIELD(interact.depth_max)),
      dbl("interact", "touch_radius", VG_FIELD(interact.touch_radius)),
      str("server", "bind", VG_FIELD(server.bind)),
      integer("server", "tcp_port", VG_FIELD(server.tcp_port)),
      integer("server", "ws_port", VG_FIELD(server.ws_port)),
      dbl("server", "heartbeat_timeout", VG_FIELD(server.heartbeat_timeout)),
      dbl("server", "tick", VG_FIELD(server.tick)),
      integer("server", "render_threads", VG_FIELD(server.render_threads)),
      boolean("server", "frames", VG_FIELD(server.frames)),
      str("server", "frame_method", VG_FIELD(server.frame_method)),
      dbl("bench", "duration", VG_FIELD(bench.duration)),
      dbl("bench", "window", VG_FIELD(bench.window)),
      integer("bench", "width", VG_FIELD(bench.width)),
      integer("bench", "height", VG_FIELD(bench.height)),
      methods_field(),
  };
  return f;
}

#undef VG_FIELD

const Field* find_field(std::string_view section, std::string_view key) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

bool known_section(std::string_view section) {
  for (const auto& f : fields()) {
    if (f.section == section) return true;
  }
  return false;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool bare_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

void check(bool ok, const std::string& key, const std::string& msg) {
  if (!ok) invalid(key, msg);
}

bool in_range(double v, double lo, double hi) { return v >= lo && v <= hi; }

}  // namespace

EngineConfig parse_config(std::string_view text, std::string_view origin) {
  EngineConfig cfg;
  std::string section;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    try {
      if (line.front() == '[') {
        const auto close = line.find(']');
        if (close == std::string_view::npos) throw ConfigError(ConfigErrc::ParseError, "unterminated section header");
        const std::string_view rest = trim(line.substr(close + 1));
        if (!rest.empty() && rest.front() != '#') throw ConfigError(ConfigErrc::ParseError, "text after section header");
        section = std::string(trim(line.substr(1, close - 1)));
        if (!known_section(section)) throw ConfigError(ConfigErrc::UnknownKey, "unknown section [" + section + "]");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError(ConfigErrc::ParseError, "expected key = value");
      const std::string key(trim(line.substr(0, eq)));
      if (!bare_key(key)) throw ConfigError(ConfigErrc::ParseError, "bad key '" + key + "'");
      if (section.empty()) throw ConfigError(ConfigErrc::ParseError, "key '" + key + "' outside a section");
      const Field* f = find_field(section, key);
      if (!f) throw ConfigError(ConfigErrc::UnknownKey, "unknown key " + section + "." + key);
      if (!seen.insert(section + "." + key).second) {
        throw ConfigError(ConfigErrc::ParseError, "duplicate key " + section + "." + key);
      }
      const Value v = ValueParser(line.substr(eq + 1)).parse_all();
      f->set(cfg, v, section + "." + key);
    } catch (const ConfigError& e) {
      throw ConfigError(e.errc(), where + ": " + e.what());
    }
  }
  validate(cfg);
  return cfg;
}

EngineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(ConfigErrc::MissingFile, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string dump_config(const EngineConfig& cfg) {
  EngineConfig c = cfg;
  std::string out = "# voxelglass engine configuration\n";
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      section = f.section;
      out += "\n[" + section + "]\n";
    }
    out += f.key + " = " + f.get(c) + "\n";
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.section + "." + f.key);
  return keys;
}

void apply_override(EngineConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(ConfigErrc::ParseError, "override '" + std::string(assignment) + "' needs section.key=value");
  }
  const std::string_view name = trim(assignment.substr(0, eq));
  const std::string_view text = trim(assignment.substr(eq + 1));
  const auto dot = name.find('.');
  const Field* f = dot == std::string_view::npos ? nullptr : find_field(name.substr(0, dot), name.substr(dot + 1));
  if (!f) throw ConfigError(ConfigErrc::UnknownKey, "unknown key " + std::string(name));
  Value v;
  try {
    v = ValueParser(text).parse_all();
  } catch (const ConfigError&) {
    v = Value{};
    v.str = std::string(text);
  }
  f->set(cfg, v, std::string(name));
}

void apply_environment(EngineConfig& cfg) {
  if (const char* a = std::getenv("VOXELGLASS_ASSETS"); a && *a) cfg.assets.dir = a;
  if (const char* b = std::getenv("VOXELGLASS_BIND"); b && *b) cfg.server.bind = b;
}

void validate(const EngineConfig& c) {
  namespace fs = std::filesystem;
  if (!c.volume.path.empty() && !fs::exists(c.volume.path)) {
    throw ConfigError(ConfigErrc::MissingFile, "volume.path: " + c.volume.path + " does not exist");
  }
  check(c.volume.phantom == "ellipsoid" || c.volume.phantom == "sphere", "volume.phantom",
        "expected ellipsoid or sphere");
  for (auto d : c.volume.phantom_dims) check(d >= 2 && d <= 2048, "volume.phantom_dims", "each in [2, 2048]");
  if (!c.assets.dir.empty() && !fs::is_directory(c.assets.dir)) {
    throw ConfigError(ConfigErrc::MissingFile, "assets.dir: " + c.assets.dir + " is not a directory");
  }

  const auto kind = xfer::parse_scheme_kind(c.transfer.scheme);
  check(kind.has_value(), "transfer.scheme", "unknown scheme '" + c.transfer.scheme + "'");
  if (*kind == xfer::SchemeKind::TableFile) {
    check(!c.transfer.table.empty(), "transfer.table", "required for scheme tablefile");
    if (!fs::exists(c.transfer.table)) {
      throw ConfigError(ConfigErrc::MissingFile, "transfer.table: " + c.transfer.table + " does not exist");
    }
  }
  xfer::WindowParams{c.transfer.base, c.transfer.brightness, c.transfer.contrast}.validate();
  xfer::OpacityCurve{c.transfer.opacity}.validate();
  xfer::ClaheParams{c.transfer.clahe_blocks, c.transfer.clahe_clip, c.transfer.clahe_bins}.validate();

  const auto method = render::parse_method(c.render.method);
  check(method.has_value(), "render.method", "unknown method '" + c.render.method + "'");
  check(c.render.slices >= 0, "render.slices", "must be >= 0");
  check(c.render.step >= 0, "render.step", "must be >= 0");
  check(c.render.distance >= 0, "render.distance", "must be >= 0");
  for (double b : c.render.background) check(in_range(b, 0, 1), "render.background", "each in [0, 1]");
  render_settings(c, *method, c.render.width, c.render.height).validate();
  rig_params(c).validate();
  pinhole(c).validate();

  check(c.marker.size > 0, "marker.size", "must be positive");
  check(c.marker.cadence >= 1, "marker.cadence", "must be >= 1");
  check(in_range(c.marker.anchor_weight, 0, 1), "marker.anchor_weight", "must be in [0, 1]");
  check(c.interact.sensitivity > 0, "interact.sensitivity", "must be positive");
  pressure_map(c).validate();

  check(in_range(c.server.tcp_port, 0, 65535), "server.tcp_port", "must be in [0, 65535]");
  check(in_range(c.server.ws_port, 0, 65535), "server.ws_port", "must be in [0, 65535]");
  check(c.server.tcp_port == 0 || c.server.tcp_port != c.server.ws_port, "server.ws_port",
        "must differ from server.tcp_port");
  check(c.server.heartbeat_timeout > 0, "server.heartbeat_timeout", "must be positive");
  check(c.server.tick > 0 && c.server.tick <= c.server.heartbeat_timeout, "server.tick",
        "must be positive and at most the heartbeat timeout");
  check(in_range(c.server.render_threads, 1, 64), "server.render_threads", "must be in [1, 64]");
  check(render::parse_method(c.server.frame_method).has_value(), "server.frame_method",
        "unknown method '" + c.server.frame_method + "'");

  check(c.bench.duration > 0, "bench.duration", "must be positive");
  check(c.bench.window > 0 && c.bench.window <= c.bench.duration, "bench.window",
        "must be positive and at most the duration");
  check(in_range(c.bench.width, 16, 4096) && in_range(c.bench.height, 16, 4096), "bench.width",
        "width and height in [16, 4096]");
  bench_methods(c);
}

std::filesystem::path asset_dir(const EngineConfig& cfg) {
  return cfg.assets.dir.empty() ? xfer::ColorScheme::default_asset_dir() : std::filesystem::path(cfg.assets.dir);
}

render::Method render_method(const EngineConfig& cfg) {
  const auto m = render::parse_method(cfg.render.method);
  if (!m) invalid("render.method", "unknown method '" + cfg.render.method + "'");
  return *m;
}

xfer::TransferFunction transfer_function(const EngineConfig& cfg) {
  xfer::TransferFunction tf;
  tf.window = {cfg.transfer.base, cfg.transfer.brightness, cfg.transfer.contrast};
  if (cfg.transfer.clahe) tf.clahe = xfer::ClaheParams{cfg.transfer.clahe_blocks, cfg.transfer.clahe_clip, cfg.transfer.clahe_bins};
  const auto kind = xfer::parse_scheme_kind(cfg.transfer.scheme);
  if (!kind) invalid("transfer.scheme", "unknown scheme '" + cfg.transfer.scheme + "'");
  tf.scheme = *kind == xfer::SchemeKind::TableFile ? xfer::ColorScheme::from_file(cfg.transfer.table)
                                                   : xfer::ColorScheme::builtin(*kind, asset_dir(cfg));
  tf.opacity.points = cfg.transfer.opacity;
  return tf;
}

render::RenderSettings render_settings(const EngineConfig& cfg, render::Method method, int width, int height) {
  auto s = render::RenderSettings::defaults(method);
  s.width = width;
  s.height = height;
  if (cfg.render.slices > 0) s.slice_count = cfg.render.slices;
  if (cfg.render.step > 0) s.step_size = cfg.render.step;
  s.early_termination_alpha = cfg.render.early_termination;
  for (int i = 0; i < 3; ++i) s.background[i] = float(cfg.render.background[i]);
  return s;
}

render::RigParams rig_params(const EngineConfig& cfg) {
  render::RigParams p;
  p.baseline = cfg.rig.baseline;
  p.vfov_deg = cfg.rig.vfov_deg;
  p.near_m = cfg.rig.near_m;
  p.far_m = cfg.rig.far_m;
  p.pv_offset = spaces::Vec3(cfg.rig.pv_offset[0], cfg.rig.pv_offset[1], cfg.rig.pv_offset[2]);
  p.pv_vfov_deg = cfg.rig.pv_vfov_deg;
  return p;
}

spaces::PinholeCamera pinhole(const EngineConfig& cfg) {
  return {cfg.camera.fx, cfg.camera.fy, cfg.camera.cx, cfg.camera.cy, cfg.camera.width, cfg.camera.height};
}

interact::PressureMap pressure_map(const EngineConfig& cfg) {
  return {cfg.interact.width_min, cfg.interact.width_max, cfg.interact.depth_max, cfg.interact.touch_radius};
}

std::vector<render::Method> bench_methods(const EngineConfig& cfg) {
  check(!cfg.bench.methods.empty(), "bench.methods", "needs at least one method");
  std::vector<render::Method> out;
  for (const auto& name : cfg.bench.methods) {
    const auto m = render::parse_method(name);
    check(m.has_value(), "bench.methods", "unknown method '" + name + "'");
    check(std::find(out.begin(), out.end(), *m) == out.end(), "bench.methods", "duplicate method '" + name + "'");
    out.push_back(*m);
  }
  return out;
}

syncd::ServerConfig server_config(const EngineConfig& cfg, std::shared_ptr<const VolumeDataset> volume) {
  syncd::ServerConfig s;
  s.bind_address = cfg.server.bind;
  s.tcp_port = static_cast<std::uint16_t>(cfg.server.tcp_port);
  s.ws_port = static_cast<std::uint16_t>(cfg.server.ws_port);
  s.heartbeat_timeout_s = cfg.server.heartbeat_timeout;
  s.tick_s = cfg.server.tick;
  s.render_threads = cfg.server.render_threads;
  s.marker.camera = pinhole(cfg);
  s.marker.anchor_weight = cfg.marker.anchor_weight;
  if (cfg.server.frames && volume) {
    auto src = syncd::FrameSource::desk_view(std::move(volume));
    src.method = *render::parse_method(cfg.server.frame_method);
    for (int i = 0; i < 3; ++i) src.background[i] = float(cfg.render.background[i]);
    src.asset_dir = asset_dir(cfg);
    s.frames = std::move(src);
  }
  return s;
}

std::shared_ptr<const VolumeDataset> load_volume(const EngineConfig& cfg) {
  namespace fs = std::filesystem;
  if (cfg.volume.path.empty()) {
    const auto& d = cfg.volume.phantom_dims;
    if (cfg.volume.phantom == "sphere") return std::make_shared<const VolumeDataset>(render::make_sphere_phantom(d[0]));
    return std::make_shared<const VolumeDataset>(render::make_ellipsoid_phantom({d[0], d[1], d[2]}));
  }
  if (!fs::exists(cfg.volume.path)) {
    throw ConfigError(ConfigErrc::MissingFile, "volume.path: " + cfg.volume.path + " does not exist");
  }
  if (fs::is_directory(cfg.volume.path)) {
    return std::make_shared<const VolumeDataset>(ingest::ingest_directory(cfg.volume.path));
  }
  return std::make_shared<const VolumeDataset>(ingest::load_volume_cache(cfg.volume.path));
}

}  // namespace vg::cli
