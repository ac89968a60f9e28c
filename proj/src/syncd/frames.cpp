#include <mutex>

#include "voxelglass/syncd.hpp"

namespace vg::syncd {

namespace {

// CLAHE output for the last (volume, params) pair a frame asked for.
std::shared_ptr<const VolumeDataset> prepared(const std::shared_ptr<const VolumeDataset>& raw,
                                              const xfer::TransferFunction& tf) {
  if (!tf.clahe) return raw;
  static std::mutex mu;
  static std::weak_ptr<const VolumeDataset> last_raw;
  static xfer::ClaheParams last_params;
  static std::shared_ptr<const VolumeDataset> last_out;
  std::lock_guard lock(mu);
  if (last_out && last_raw.lock() == raw && last_params == *tf.clahe) return last_out;
  last_out = render::prepare_volume(raw, tf);
  last_raw = raw;
  last_params = *tf.clahe;
  return last_out;
}

xfer::ColorScheme scheme(xfer::SchemeKind kind, const std::filesystem::path& assets) {
  static std::mutex mu;
  static std::map<std::pair<xfer::SchemeKind, std::string>, xfer::ColorScheme> cache;
  std::lock_guard lock(mu);
  const auto key = std::make_pair(kind, assets.string());
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, xfer::ColorScheme::builtin(kind, assets)).first;
  return it->second;
}

}  // namespace

FrameSource FrameSource::desk_view(std::shared_ptr<const VolumeDataset> volume) {
  FrameSource f;
  f.volume = std::move(volume);
  return f;
}

render::View frame_view(const FrameSource& src, int width, int height) {
  render::View v;
  v.view = spaces::invert(src.camera_to_world).matrix();
  v.proj = render::perspective(src.vfov_deg, double(width) / height, 0.05, 20.0);
  v.width = width;
  v.height = height;
  return v;
}

render::Scene make_scene(const SessionState& s, const FrameSource& src, int width, int height) {
  render::Scene scene;
  scene.tf.window = s.window;
  scene.tf.clahe = s.clahe;
  scene.tf.scheme = scheme(s.scheme, src.asset_dir);
  scene.tf.opacity = s.opacity;
  scene.volume = prepared(src.volume, scene.tf);
  scene.model = s.model.transform();
  if (s.marker_to_world) scene.marker_to_world = s.marker_to_world->pose();
  scene.cut = s.cut;
  scene.settings = render::RenderSettings::defaults(src.method);
  scene.settings.width = width;
  scene.settings.height = height;
  scene.settings.background = src.background;
  const render::View v = frame_view(src, width, height);
  scene.rig.left = v;
  scene.rig.right = v;
  scene.rig.pv = v;
  return scene;
}

Message stream_frame(const SessionState& s, const FrameSource& src, ClientId client) {
  const auto it = s.clients.find(client);
  if (it == s.clients.end() || !it->second.frames) {
    throw SyncError(SyncErrc::SchemaViolation, "client " + std::to_string(client) + " is not subscribed to frames");
  }
  const FrameSubscription& sub = *it->second.frames;
  const render::Scene scene = make_scene(s, src, sub.width, sub.height);
  const Image8 img = render::render_view(scene, scene.rig.pv.value()).to_image();
  return {"FRAME", s.seq,
          {{"seq", s.seq}, {"w", img.width}, {"h", img.height}, {"png_base64", base64_encode(encode_png(img))}}};
}

void FramePacer::begin(ClientId client, std::uint64_t seq, double now) {
  Slot& slot = slots_[client];
  if (slot.busy) {
    throw SyncError(SyncErrc::RenderBusy, "frame for client " + std::to_string(client) + " still in flight");
  }
  slot.busy = true;
  slot.seq = seq;
  slot.started = now;
}

void FramePacer::finish(ClientId client) {
  if (const auto it = slots_.find(client); it != slots_.end()) it->second.busy = false;
}

void FramePacer::forget(ClientId client) {
  // A frame still rendering keeps the slot busy so a re-subscription cannot
  // start a second one.
  const auto it = slots_.find(client);
  if (it == slots_.end()) return;
  if (it->second.busy) it->second.seq.reset();
  else slots_.erase(it);
}

bool FramePacer::in_flight(ClientId client) const {
  const auto it = slots_.find(client);
  return it != slots_.end() && it->second.busy;
}

bool FramePacer::due(ClientId client, const FrameSubscription& sub, std::uint64_t seq, double now) const {
  const auto it = slots_.find(client);
  if (it == slots_.end()) return true;
  const Slot& slot = it->second;
  if (slot.busy) return false;
  if (slot.seq && *slot.seq == seq) return false;
  return now - slot.started >= 1.0 / sub.max_fps;
}

}  // namespace vg::syncd
