#include <algorithm>
#include <array>

#include "voxelglass/syncd.hpp"

namespace vg::syncd {

const char* to_string(SyncErrc e) {
  switch (e) {
    case SyncErrc::FrameTooLarge: return "FrameTooLarge";
    case SyncErrc::MalformedPayload: return "MalformedPayload";
    case SyncErrc::SchemaViolation: return "SchemaViolation";
    case SyncErrc::UnknownType: return "UnknownType";
    case SyncErrc::Unauthorized: return "Unauthorized";
    case SyncErrc::StaleSeq: return "StaleSeq";
    case SyncErrc::NotRegistered: return "NotRegistered";
    case SyncErrc::RenderBusy: return "RenderBusy";
    case SyncErrc::BindFailure: return "BindFailure";
    case SyncErrc::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

namespace {

constexpr std::array kClientTypes{"HELLO",          "GET_STATE", "SET_POSE",         "SET_CUT_PLANE",
                                  "SET_TRANSFER",   "ANNOTATE_STROKE", "SET_MARKER", "SUBSCRIBE_FRAMES",
                                  "RESET",          "PING"};
constexpr std::array kServerTypes{"WELCOME", "STATE", "FRAME", "NACK", "PONG", "CLIENT_LIST"};

constexpr int kMaxDepth = 64;

[[noreturn]] void malformed(const std::string& what) {
  throw SyncError(SyncErrc::MalformedPayload, what);
}

// Rejects absurd nesting before handing the body to the JSON parser.
void check_depth(std::string_view body) {
  int depth = 0;
  bool in_string = false, escape = false;
  for (char c : body) {
    if (in_string) {
      if (escape) escape = false;
      else if (c == '\\') escape = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '[' || c == '{') {
      if (++depth > kMaxDepth) malformed("nesting deeper than " + std::to_string(kMaxDepth));
    } else if (c == ']' || c == '}') {
      --depth;
    }
  }
}

}  // namespace

bool is_client_type(std::string_view type) {
  return std::find(kClientTypes.begin(), kClientTypes.end(), type) != kClientTypes.end();
}

bool is_known_type(std::string_view type) {
  return is_client_type(type) ||
         std::find(kServerTypes.begin(), kServerTypes.end(), type) != kServerTypes.end();
}

const std::vector<std::string>& message_types() {
  static const std::vector<std::string> all = [] {
    std::vector<std::string> v(kClientTypes.begin(), kClientTypes.end());
    v.insert(v.end(), kServerTypes.begin(), kServerTypes.end());
    return v;
  }();
  return all;
}

std::string encode_body(const Message& m) {
  // A null payload goes out as {} (decode reads it back the same way).
  if (!m.payload.is_object() && !m.payload.is_null()) {
    throw SyncError(SyncErrc::SchemaViolation, "payload must be a JSON object");
  }
  json j = {{"type", m.type}, {"seq", m.seq}, {"payload", m.payload.is_null() ? json::object() : m.payload}};
  std::string body = j.dump();
  if (body.size() > kMaxFrameBytes) {
    throw SyncError(SyncErrc::FrameTooLarge, "encoded body is " + std::to_string(body.size()) + " bytes");
  }
  return body;
}

Message decode_body(std::string_view body) {
  if (body.size() > kMaxFrameBytes) {
    throw SyncError(SyncErrc::FrameTooLarge, "body is " + std::to_string(body.size()) + " bytes");
  }
  check_depth(body);
  json j = json::parse(body.begin(), body.end(), nullptr, false);
  if (j.is_discarded()) malformed("body is not valid JSON");
  if (!j.is_object()) malformed("body must be a JSON object");

  Message m;
  const auto type = j.find("type");
  if (type == j.end() || !type->is_string()) malformed("missing string field 'type'");
  m.type = type->get<std::string>();

  if (const auto seq = j.find("seq"); seq != j.end()) {
    if (seq->is_number_unsigned()) m.seq = seq->get<std::uint64_t>();
    else if (seq->is_number_integer() && seq->get<std::int64_t>() >= 0) m.seq = seq->get<std::uint64_t>();
    else malformed("'seq' must be a non-negative integer");
  }
  if (const auto p = j.find("payload"); p != j.end() && !p->is_null()) {
    if (!p->is_object()) malformed("'payload' must be an object");
    m.payload = std::move(*p);
  }
  return m;
}

std::vector<std::uint8_t> encode(const Message& m) {
  const std::string body = encode_body(m);
  const auto n = static_cast<std::uint32_t>(body.size());
  std::vector<std::uint8_t> out;
  out.reserve(4 + body.size());
  out.push_back(std::uint8_t(n >> 24));
  out.push_back(std::uint8_t(n >> 16));
  out.push_back(std::uint8_t(n >> 8));
  out.push_back(std::uint8_t(n));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

namespace {

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | p[3];
}

}  // namespace

Message decode(std::span<const std::uint8_t> frame) {
  if (frame.size() < 4) malformed("frame shorter than its length prefix");
  const std::uint32_t n = read_be32(frame.data());
  if (n > kMaxFrameBytes) throw SyncError(SyncErrc::FrameTooLarge, "frame length " + std::to_string(n));
  if (frame.size() - 4 != n) {
    malformed("length prefix says " + std::to_string(n) + " bytes, frame carries " +
              std::to_string(frame.size() - 4));
  }
  return decode_body(std::string_view(reinterpret_cast<const char*>(frame.data() + 4), n));
}

void FrameReader::feed(std::span<const std::uint8_t> bytes) {
  if (pos_ > 0 && pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  } else if (pos_ > (1u << 16) && pos_ * 2 > buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> FrameReader::next() {
  if (buffered() < 4) return std::nullopt;
  const std::uint32_t n = read_be32(buf_.data() + pos_);
  if (n > kMaxFrameBytes) throw SyncError(SyncErrc::FrameTooLarge, "frame length " + std::to_string(n));
  if (buffered() < 4 + std::size_t(n)) return std::nullopt;
  const char* body = reinterpret_cast<const char*>(buf_.data() + pos_ + 4);
  pos_ += 4 + std::size_t(n);
  return decode_body(std::string_view(body, n));
}

}  // namespace vg::syncd
