#pragma once

// Multi-user session server: one authoritative scene state, JSON messages over
// length-prefixed TCP frames or WebSocket text frames, and server-side frame
// streaming for thin clients.

#include <chrono>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "voxelglass/error.hpp"
#include "voxelglass/interact.hpp"
#include "voxelglass/render.hpp"
#include "voxelglass/spaces.hpp"
#include "voxelglass/xfer.hpp"

namespace vg::syncd {

using json = nlohmann::json;
using spaces::Quat;
using spaces::Vec3;

enum class SyncErrc {
  FrameTooLarge,
  MalformedPayload,
  SchemaViolation,
  UnknownType,
  Unauthorized,
  StaleSeq,
  NotRegistered,
  RenderBusy,
  BindFailure,
  IoFailure,
};
const char* to_string(SyncErrc e);
using SyncError = CodedError<SyncErrc>;

inline constexpr std::size_t kMaxFrameBytes = 16u << 20;
inline constexpr std::uint16_t kDefaultTcpPort = 7420;
inline constexpr std::uint16_t kDefaultWsPort = 7421;

// ---- wire format -------------------------------------------------------------

struct Message {
  std::string type;
  std::uint64_t seq = 0;
  json payload = json::object();

  friend bool operator==(const Message&, const Message&) = default;
};

// Types a client may send, and the full declared set.
bool is_client_type(std::string_view type);
bool is_known_type(std::string_view type);
const std::vector<std::string>& message_types();

// {"type", "seq", "payload"} as compact JSON.
std::string encode_body(const Message& m);
Message decode_body(std::string_view body);

// 4-byte big-endian length + body.
std::vector<std::uint8_t> encode(const Message& m);
// One complete frame; trailing bytes are an error.
Message decode(std::span<const std::uint8_t> frame);

// Incremental splitter for a TCP byte stream.
class FrameReader {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  // Next complete message, or nullopt when more bytes are needed. Throws on
  // an oversized length prefix or a malformed body.
  std::optional<Message> next();
  std::size_t buffered() const { return buf_.size() - pos_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

// ---- session state -------------------------------------------------------------

enum class Role { Viewer, Controller };
std::string_view to_string(Role r);
std::optional<Role> parse_role(std::string_view s);

using ClientId = std::uint32_t;

struct FrameSubscription {
  int width = 256, height = 256;
  double max_fps = 10.0;
};

struct ClientInfo {
  ClientId id = 0;
  Role role = Role::Viewer;
  std::string name;
  double last_seen = 0.0;         // server clock, seconds
  std::uint64_t last_seq = 0;     // latest non-stale seq received from this client
  std::optional<FrameSubscription> frames;
};

struct ModelState {
  Vec3 t = Vec3::Zero();
  Quat r = Quat::Identity();
  Vec3 s = Vec3::Ones();
  spaces::ModelTransform transform() const;
};

// Rigid pose kept in its wire form so snapshots round-trip exactly.
struct PoseState {
  Vec3 t = Vec3::Zero();
  Quat r = Quat::Identity();
  spaces::Pose pose() const { return spaces::Pose::from_quat(r, t); }
  static PoseState from(const spaces::Pose& p) { return {p.translation, p.quat()}; }
};

struct SessionState {
  std::uint64_t seq = 0;
  ModelState model;
  render::CutPlane cut;
  xfer::WindowParams window;
  std::optional<xfer::ClaheParams> clahe;
  xfer::SchemeKind scheme = xfer::SchemeKind::Grayscale;
  xfer::OpacityCurve opacity;
  std::optional<PoseState> marker_to_world;
  std::vector<interact::SketchStroke> strokes;
  std::map<ClientId, ClientInfo> clients;
  ClientId next_id = 1;
};

// Options consumed by SET_MARKER observations.
struct MarkerConfig {
  spaces::PinholeCamera camera;
  double anchor_weight = 0.3;  // blend of a fresh estimate into an existing anchor
};

// STATE payload (the scene fields; clients are reported by CLIENT_LIST).
json state_payload(const SessionState& s);
// Inverse of state_payload for the scene fields; throws SchemaViolation.
void apply_state_payload(SessionState& s, const json& payload);
json client_list_payload(const SessionState& s);

struct Outbound {
  enum class To { Sender, All } to = To::Sender;
  Message msg;
};

struct HandleResult {
  std::vector<Outbound> out;
  bool mutated = false;
  std::optional<SyncErrc> rejected;
};

ClientId allocate_client_id(SessionState& s);

// Applies one client message. Never throws for bad input: failures become a
// NACK to the sender and leave the scene untouched (a rejected message still
// consumes its client seq unless it was stale). HELLO registers `client`.
HandleResult handle_message(SessionState& s, ClientId client, const Message& msg,
                            const MarkerConfig& marker = {});

// Drops a client; returns the CLIENT_LIST broadcast (empty if unknown).
std::vector<Outbound> remove_client(SessionState& s, ClientId client);

struct LogEntry {
  ClientId client;
  Message msg;
};
SessionState replay(const std::vector<LogEntry>& log, const MarkerConfig& marker = {});

// ---- frame streaming ---------------------------------------------------------

// Read-only pieces of the scene that the session does not carry.
struct FrameSource {
  std::shared_ptr<const VolumeDataset> volume;
  render::Method method = render::Method::ViewAligned;
  // Viewpoint for thin clients; the projection follows each client's aspect.
  spaces::Pose camera_to_world = spaces::Pose::translate(0.0, 0.0, 0.8);
  double vfov_deg = 40.0;
  xfer::Rgb background{0.0f, 0.0f, 0.0f};
  std::filesystem::path asset_dir = xfer::ColorScheme::default_asset_dir();

  // Camera 0.8 m in front of the model origin looking down -z.
  static FrameSource desk_view(std::shared_ptr<const VolumeDataset> volume);
};

render::Scene make_scene(const SessionState& s, const FrameSource& src, int width, int height);
render::View frame_view(const FrameSource& src, int width, int height);

// Renders the state for a subscribed client and packs a FRAME message
// {seq, w, h, png_base64}. Throws SchemaViolation if the client is not subscribed.
Message stream_frame(const SessionState& s, const FrameSource& src, ClientId client);

// Tracks the single in-flight frame per client.
class FramePacer {
 public:
  // Throws RenderBusy while a frame for `client` is still in flight.
  void begin(ClientId client, std::uint64_t seq, double now);
  void finish(ClientId client);
  void forget(ClientId client);
  bool in_flight(ClientId client) const;
  // Subscribed, idle, past the fps interval and showing a stale seq.
  bool due(ClientId client, const FrameSubscription& sub, std::uint64_t seq, double now) const;

 private:
  struct Slot {
    bool busy = false;
    std::optional<std::uint64_t> seq;
    double started = -1e300;
  };
  std::map<ClientId, Slot> slots_;
};

// ---- server ------------------------------------------------------------------

struct ServerConfig {
  std::string bind_address = "0.0.0.0";  // VOXELGLASS_BIND overrides
  std::uint16_t tcp_port = kDefaultTcpPort;  // 0 picks a free port
  std::uint16_t ws_port = kDefaultWsPort;
  double heartbeat_timeout_s = 10.0;
  double tick_s = 0.05;  // heartbeat and frame scheduling period
  int render_threads = 1;
  MarkerConfig marker;
  std::optional<FrameSource> frames;  // no frame streaming when unset

  // Applies VOXELGLASS_BIND when set.
  void apply_environment();
};

class Server {
 public:
  explicit Server(ServerConfig cfg);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds both listeners (BindFailure) and runs the event loop on a
  // background thread.
  void start();
  // Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

  std::uint16_t tcp_port() const;
  std::uint16_t ws_port() const;
  SessionState snapshot() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ---- blocking clients (tests, CLI replay) ------------------------------------

class Client {
 public:
  enum class Transport { Tcp, WebSocket };

  Client(Transport t, const std::string& host, std::uint16_t port);
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  // Stamps the next client seq unless `keep_seq`.
  void send(Message m, bool keep_seq = false);
  std::optional<Message> receive(std::chrono::milliseconds timeout);
  // Receives until a message of `type` arrives; others are kept in history().
  std::optional<Message> wait_for(std::string_view type, std::chrono::milliseconds timeout);
  // HELLO then wait for WELCOME; returns the assigned id.
  ClientId hello(const std::string& name, Role role, std::chrono::milliseconds timeout = std::chrono::seconds(5));
  bool connected() const;
  void close();

  const std::vector<Message>& history() const { return history_; }
  std::uint64_t next_seq() const { return seq_ + 1; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::uint64_t seq_ = 0;
  std::vector<Message> history_;
};

}  // namespace vg::syncd
