#include <cmath>

#include "voxelglass/syncd.hpp"

namespace vg::syncd {

std::string_view to_string(Role r) { return r == Role::Controller ? "controller" : "viewer"; }

std::optional<Role> parse_role(std::string_view s) {
  if (s == "viewer" || s == "Viewer") return Role::Viewer;
  if (s == "controller" || s == "Controller") return Role::Controller;
  return std::nullopt;
}

spaces::ModelTransform ModelState::transform() const {
  spaces::ModelTransform m;
  m.translation = t;
  m.rotation = r.normalized().toRotationMatrix();
  m.scale = s;
  return m;
}

namespace {

[[noreturn]] void schema(const std::string& what) { throw SyncError(SyncErrc::SchemaViolation, what); }

const json* field(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double number(const json& v, const std::string& what) {
  if (!v.is_number()) schema(what + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema(what + " must be finite");
  return d;
}

std::vector<double> numbers(const json& v, std::size_t n, const std::string& what) {
  if (!v.is_array() || v.size() != n) schema(what + " must be an array of " + std::to_string(n) + " numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(number(e, what));
  return out;
}

Vec3 vec3(const json& v, const std::string& what) {
  const auto a = numbers(v, 3, what);
  return {a[0], a[1], a[2]};
}

Quat quat(const json& v, const std::string& what) {
  const auto a = numbers(v, 4, what);
  const Quat q(a[0], a[1], a[2], a[3]);
  if (!(q.norm() > 1e-9)) schema(what + " must be a non-zero quaternion");
  return q.normalized();
}

const json& object(const json& v, const std::string& what) {
  if (!v.is_object()) schema(what + " must be an object");
  return v;
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json to_json(const Quat& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }

json pose_json(const PoseState& p) { return {{"t", to_json(p.t)}, {"r_quat", to_json(p.r)}}; }

PoseState parse_pose(const json& v, const std::string& what) {
  object(v, what);
  const json* t = field(v, "t");
  const json* r = field(v, "r_quat");
  if (!t || !r) schema(what + " needs 't' and 'r_quat'");
  return {vec3(*t, what + ".t"), quat(*r, what + ".r_quat")};
}

ModelState parse_model(const json& v, const ModelState& current) {
  object(v, "model");
  ModelState m = current;
  bool any = false;
  if (const json* t = field(v, "t")) m.t = vec3(*t, "t"), any = true;
  if (const json* r = field(v, "r_quat")) m.r = quat(*r, "r_quat"), any = true;
  if (const json* s = field(v, "s")) {
    m.s = vec3(*s, "s");
    if ((m.s.array() <= 0.0).any()) schema("s must be positive");
    any = true;
  }
  if (!any) schema("pose needs at least one of t, r_quat, s");
  return m;
}

render::CutPlane parse_cut(const json& v, const render::CutPlane& current) {
  object(v, "cut");
  render::CutPlane c = current;
  bool any = false;
  if (const json* e = field(v, "enabled")) {
    if (!e->is_boolean()) schema("enabled must be a boolean");
    c.enabled = e->get<bool>();
    any = true;
  }
  if (const json* p = field(v, "point")) c.point = vec3(*p, "point"), any = true;
  if (const json* n = field(v, "normal")) {
    const Vec3 nv = vec3(*n, "normal");
    if (!(nv.norm() > 1e-9)) schema("normal must be non-zero");
    c.normal = nv.normalized();
    any = true;
  }
  if (!any) schema("cut plane needs at least one of enabled, point, normal");
  return c;
}

xfer::WindowParams parse_window(const json& v, xfer::WindowParams w) {
  object(v, "window");
  if (const json* b = field(v, "base")) w.base = number(*b, "window.base");
  if (const json* b = field(v, "brightness")) w.brightness = number(*b, "window.brightness");
  if (const json* c = field(v, "contrast")) w.contrast = number(*c, "window.contrast");
  try {
    w.validate();
  } catch (const Error& e) {
    schema(std::string("window: ") + e.what());
  }
  return w;
}

xfer::SchemeKind parse_scheme(const json& v) {
  const json* name = &v;
  if (v.is_object()) {
    name = field(v, "kind");
    if (!name) schema("scheme needs 'kind'");
  }
  if (!name->is_string()) schema("scheme kind must be a string");
  const auto k = xfer::parse_scheme_kind(name->get<std::string>());
  if (!k || *k == xfer::SchemeKind::TableFile) schema("unknown scheme '" + name->get<std::string>() + "'");
  return *k;
}

xfer::OpacityCurve parse_opacity(const json& v) {
  const json* pts = &v;
  if (v.is_object()) {
    pts = field(v, "points");
    if (!pts) schema("opacity needs 'points'");
  }
  if (!pts->is_array()) schema("opacity points must be an array");
  xfer::OpacityCurve c;
  c.points.clear();
  for (const auto& p : *pts) {
    const auto xy = numbers(p, 2, "opacity point");
    c.points.emplace_back(xy[0], xy[1]);
  }
  try {
    c.validate();
  } catch (const Error& e) {
    schema(std::string("opacity: ") + e.what());
  }
  return c;
}

std::optional<xfer::ClaheParams> parse_clahe(const json& v) {
  if (v.is_null()) return std::nullopt;
  object(v, "clahe");
  xfer::ClaheParams p;
  if (const json* b = field(v, "blocks")) {
    const auto a = numbers(*b, 3, "clahe.blocks");
    for (int i = 0; i < 3; ++i) {
      if (a[i] < 1 || a[i] > 4096 || a[i] != std::floor(a[i])) schema("clahe.blocks must be positive integers");
      p.blocks[i] = std::uint32_t(a[i]);
    }
  }
  if (const json* c = field(v, "clip_limit"); c && !c->is_null()) p.clip_limit = number(*c, "clahe.clip_limit");
  if (const json* n = field(v, "bins")) {
    const double b = number(*n, "clahe.bins");
    if (b < 2 || b > 65536 || b != std::floor(b)) schema("clahe.bins must be an integer in [2, 65536]");
    p.bins = std::uint32_t(b);
  }
  try {
    p.validate();
  } catch (const Error& e) {
    schema(std::string("clahe: ") + e.what());
  }
  return p;
}

json clahe_json(const std::optional<xfer::ClaheParams>& c) {
  if (!c) return nullptr;
  json clip = std::isfinite(c->clip_limit) ? json(c->clip_limit) : json(nullptr);
  return {{"blocks", {c->blocks[0], c->blocks[1], c->blocks[2]}}, {"clip_limit", clip}, {"bins", c->bins}};
}

interact::SketchStroke parse_stroke(const json& v) {
  object(v, "stroke");
  const json* pts = field(v, "points");
  if (!pts || !pts->is_array() || pts->empty()) schema("stroke needs a non-empty 'points' array");
  if (pts->size() > 100000) schema("stroke has too many points");
  interact::SketchStroke s;
  for (const auto& p : *pts) {
    const auto a = numbers(p, 3, "stroke point [u, v, width]");
    if (a[2] < 0) schema("stroke width must be non-negative");
    s.points.push_back({a[0], a[1], a[2]});
  }
  if (const json* c = field(v, "color")) {
    const auto a = numbers(*c, 4, "color");
    for (double x : a) {
      if (x < 0 || x > 1) schema("color components must lie in [0, 1]");
    }
    s.color = {float(a[0]), float(a[1]), float(a[2]), float(a[3])};
  }
  return s;
}

json stroke_json(const interact::SketchStroke& s) {
  json pts = json::array();
  for (const auto& p : s.points) pts.push_back({p.u, p.v, p.width});
  return {{"points", std::move(pts)}, {"color", {s.color.r, s.color.g, s.color.b, s.color.a}}};
}

std::optional<PoseState> parse_marker(const json& v, const std::optional<PoseState>& current,
                                       const MarkerConfig& cfg) {
  object(v, "marker");
  if (const json* present = field(v, "present")) {
    if (!present->is_boolean()) schema("present must be a boolean");
    if (!present->get<bool>()) return std::nullopt;
  }
  if (const json* pose = field(v, "pose"); pose && !pose->is_null()) return parse_pose(*pose, "pose");
  const json* obs = field(v, "observation");
  if (!obs) schema("marker needs 'pose', 'observation' or present=false");
  object(*obs, "observation");
  spaces::MarkerObservation o;
  if (const json* s = field(*obs, "marker_size")) {
    o.marker_size = number(*s, "marker_size");
    if (o.marker_size <= 0) schema("marker_size must be positive");
  }
  const json* corners = field(*obs, "corners");
  if (!corners || !corners->is_array() || corners->size() != 4) schema("observation needs 4 corners");
  for (int i = 0; i < 4; ++i) {
    const auto a = numbers((*corners)[i], 2, "corner");
    o.corners[i] = spaces::Vec2(a[0], a[1]);
  }
  spaces::Pose sensor_to_world;
  if (const json* s2w = field(*obs, "sensor_to_world")) sensor_to_world = parse_pose(*s2w, "sensor_to_world").pose();
  spaces::Pose marker_to_sensor;
  try {
    marker_to_sensor = spaces::estimate_marker_pose(cfg.camera, o);
  } catch (const Error& e) {
    schema(e.code() + ": " + e.what());
  }
  const spaces::Pose fresh = spaces::compose(sensor_to_world, marker_to_sensor);
  if (current) return PoseState::from(spaces::blend(current->pose(), fresh, cfg.anchor_weight));
  return PoseState::from(fresh);
}

Message make(std::string type, const SessionState& s, json payload) {
  return {std::move(type), s.seq, std::move(payload)};
}

Message state_message(const SessionState& s) { return make("STATE", s, state_payload(s)); }

HandleResult nack(const SessionState& s, SyncErrc code, const std::string& reason, const Message& ref) {
  HandleResult r;
  r.rejected = code;
  r.out.push_back({Outbound::To::Sender,
                   make("NACK", s,
                        {{"reason", std::string(to_string(code)) + ": " + reason},
                         {"code", to_string(code)},
                         {"ref_type", ref.type},
                         {"ref_seq", ref.seq}})});
  return r;
}

bool is_mutation(std::string_view t) {
  return t == "SET_POSE" || t == "SET_CUT_PLANE" || t == "SET_TRANSFER" || t == "ANNOTATE_STROKE" ||
         t == "SET_MARKER" || t == "RESET";
}

void reset_scene(SessionState& s) {
  SessionState fresh;
  s.model = fresh.model;
  s.cut = fresh.cut;
  s.window = fresh.window;
  s.clahe = fresh.clahe;
  s.scheme = fresh.scheme;
  s.opacity = fresh.opacity;
  s.marker_to_world = fresh.marker_to_world;
  s.strokes.clear();
}

// Applies a mutation to `s` in place; all parsing happens before the first write.
void apply_mutation(SessionState& s, const Message& m, const MarkerConfig& marker) {
  const json& p = m.payload;
  if (m.type == "SET_POSE") {
    s.model = parse_model(p, s.model);
  } else if (m.type == "SET_CUT_PLANE") {
    s.cut = parse_cut(p, s.cut);
  } else if (m.type == "SET_TRANSFER") {
    auto window = s.window;
    auto scheme = s.scheme;
    auto opacity = s.opacity;
    auto clahe = s.clahe;
    bool any = false;
    if (const json* w = field(p, "window")) window = parse_window(*w, window), any = true;
    if (const json* k = field(p, "scheme")) scheme = parse_scheme(*k), any = true;
    if (const json* o = field(p, "opacity")) opacity = parse_opacity(*o), any = true;
    if (const json* c = field(p, "clahe")) clahe = parse_clahe(*c), any = true;
    if (!any) schema("transfer needs at least one of window, scheme, opacity, clahe");
    s.window = window;
    s.scheme = scheme;
    s.opacity = std::move(opacity);
    s.clahe = clahe;
  } else if (m.type == "ANNOTATE_STROKE") {
    s.strokes.push_back(parse_stroke(p));
  } else if (m.type == "SET_MARKER") {
    s.marker_to_world = parse_marker(p, s.marker_to_world, marker);
  } else if (m.type == "RESET") {
    reset_scene(s);
  }
  ++s.seq;
}

}  // namespace

json state_payload(const SessionState& s) {
  json strokes = json::array();
  for (const auto& st : s.strokes) strokes.push_back(stroke_json(st));
  json opacity = json::array();
  for (const auto& [x, a] : s.opacity.points) opacity.push_back({x, a});
  return {
      {"seq", s.seq},
      {"model", {{"t", to_json(s.model.t)}, {"r_quat", to_json(s.model.r)}, {"s", to_json(s.model.s)}}},
      {"cut", {{"enabled", s.cut.enabled}, {"point", to_json(s.cut.point)}, {"normal", to_json(s.cut.normal)}}},
      {"window", {{"base", s.window.base}, {"brightness", s.window.brightness}, {"contrast", s.window.contrast}}},
      {"clahe", clahe_json(s.clahe)},
      {"scheme", {{"kind", xfer::to_string(s.scheme)}}},
      {"opacity", {{"points", std::move(opacity)}}},
      {"marker",
       {{"present", s.marker_to_world.has_value()},
        {"pose", s.marker_to_world ? pose_json(*s.marker_to_world) : json(nullptr)}}},
      {"strokes", std::move(strokes)},
  };
}

void apply_state_payload(SessionState& s, const json& p) {
  object(p, "state");
  SessionState next = s;
  if (const json* seq = field(p, "seq")) {
    if (!seq->is_number_unsigned() && !(seq->is_number_integer() && seq->get<std::int64_t>() >= 0)) {
      schema("seq must be a non-negative integer");
    }
    next.seq = seq->get<std::uint64_t>();
  }
  if (const json* m = field(p, "model")) next.model = parse_model(*m, next.model);
  if (const json* c = field(p, "cut")) next.cut = parse_cut(*c, next.cut);
  if (const json* w = field(p, "window")) next.window = parse_window(*w, next.window);
  if (const json* c = field(p, "clahe")) next.clahe = parse_clahe(*c);
  if (const json* k = field(p, "scheme")) next.scheme = parse_scheme(*k);
  if (const json* o = field(p, "opacity")) next.opacity = parse_opacity(*o);
  if (const json* mk = field(p, "marker")) {
    const json* present = field(*mk, "present");
    const json* pose = field(*mk, "pose");
    if (present && present->is_boolean() && present->get<bool>() && pose) {
      next.marker_to_world = parse_pose(*pose, "marker.pose");
    } else {
      next.marker_to_world.reset();
    }
  }
  if (const json* st = field(p, "strokes")) {
    if (!st->is_array()) schema("strokes must be an array");
    next.strokes.clear();
    for (const auto& e : *st) next.strokes.push_back(parse_stroke(e));
  }
  s = std::move(next);
}

json client_list_payload(const SessionState& s) {
  json list = json::array();
  for (const auto& [id, c] : s.clients) {
    list.push_back({{"id", id}, {"name", c.name}, {"role", to_string(c.role)}});
  }
  return {{"clients", std::move(list)}};
}

ClientId allocate_client_id(SessionState& s) { return s.next_id++; }

HandleResult handle_message(SessionState& s, ClientId client, const Message& msg, const MarkerConfig& marker) {
  const auto it = s.clients.find(client);
  if (msg.type == "HELLO") {
    if (it != s.clients.end()) return nack(s, SyncErrc::SchemaViolation, "client already registered", msg);
    if (!msg.payload.is_object()) return nack(s, SyncErrc::SchemaViolation, "payload must be an object", msg);
    ClientInfo info;
    info.id = client;
    info.last_seq = msg.seq;
    if (const json* n = field(msg.payload, "name")) {
      if (!n->is_string()) return nack(s, SyncErrc::SchemaViolation, "name must be a string", msg);
      info.name = n->get<std::string>();
      if (info.name.size() > 256) return nack(s, SyncErrc::SchemaViolation, "name longer than 256 bytes", msg);
    }
    if (const json* r = field(msg.payload, "role")) {
      const auto role = r->is_string() ? parse_role(r->get<std::string>()) : std::nullopt;
      if (!role) return nack(s, SyncErrc::SchemaViolation, "role must be 'viewer' or 'controller'", msg);
      info.role = *role;
    }
    if (client >= s.next_id) s.next_id = client + 1;
    s.clients.emplace(client, std::move(info));
    HandleResult r;
    r.out.push_back({Outbound::To::Sender, make("WELCOME", s, {{"id", client}, {"state", state_payload(s)}})});
    r.out.push_back({Outbound::To::All, make("CLIENT_LIST", s, client_list_payload(s))});
    return r;
  }
  if (it == s.clients.end()) return nack(s, SyncErrc::NotRegistered, "HELLO required first", msg);
  ClientInfo& info = it->second;
  if (msg.seq <= info.last_seq) {
    return nack(s, SyncErrc::StaleSeq,
                "seq " + std::to_string(msg.seq) + " not after " + std::to_string(info.last_seq), msg);
  }
  info.last_seq = msg.seq;
  if (!is_client_type(msg.type)) return nack(s, SyncErrc::UnknownType, "'" + msg.type + "'", msg);
  if (!msg.payload.is_object()) return nack(s, SyncErrc::SchemaViolation, "payload must be an object", msg);

  HandleResult r;
  if (is_mutation(msg.type)) {
    if (info.role != Role::Controller) return nack(s, SyncErrc::Unauthorized, "viewers cannot mutate", msg);
    SessionState next = s;
    try {
      apply_mutation(next, msg, marker);
    } catch (const SyncError& e) {
      return nack(s, e.errc(), e.what(), msg);
    }
    s = std::move(next);
    r.mutated = true;
    r.out.push_back({Outbound::To::All, state_message(s)});
    return r;
  }

  if (msg.type == "GET_STATE") {
    r.out.push_back({Outbound::To::Sender, state_message(s)});
  } else if (msg.type == "PING") {
    r.out.push_back({Outbound::To::Sender, make("PONG", s, msg.payload)});
  } else if (msg.type == "SUBSCRIBE_FRAMES") {
    const json& p = msg.payload;
    std::optional<FrameSubscription> sub;
    try {
      const double w = p.contains("w") ? number(p["w"], "w") : 256.0;
      const double h = p.contains("h") ? number(p["h"], "h") : 256.0;
      const double fps = p.contains("max_fps") ? number(p["max_fps"], "max_fps") : 10.0;
      if (w != 0 || h != 0) {
        if (w < 16 || h < 16 || w > 4096 || h > 4096 || w != std::floor(w) || h != std::floor(h)) {
          schema("w and h must be integers in [16, 4096] (0 unsubscribes)");
        }
        if (fps <= 0 || fps > 240) schema("max_fps must lie in (0, 240]");
        sub = FrameSubscription{int(w), int(h), fps};
      }
    } catch (const SyncError& e) {
      return nack(s, e.errc(), e.what(), msg);
    }
    info.frames = sub;
  }
  return r;
}

std::vector<Outbound> remove_client(SessionState& s, ClientId client) {
  if (s.clients.erase(client) == 0) return {};
  return {{Outbound::To::All, make("CLIENT_LIST", s, client_list_payload(s))}};
}

SessionState replay(const std::vector<LogEntry>& log, const MarkerConfig& marker) {
  SessionState s;
  for (const auto& e : log) handle_message(s, e.client, e.msg, marker);
  return s;
}

}  // namespace vg::syncd
