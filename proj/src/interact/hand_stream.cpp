#include <charconv>
#include <cstdio>
#include <sstream>

#include "voxelglass/interact.hpp"

namespace vg::interact {

namespace {

std::vector<double> numbers(std::string_view line, int lineno) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    double v = 0;
    const auto res = std::from_chars(line.data() + i, line.data() + j, v);
    if (res.ec != std::errc() || res.ptr != line.data() + j) {
      throw InteractError(InteractErrc::ParseError,
                          "hand stream line " + std::to_string(lineno) + ": bad number '" +
                              std::string(line.substr(i, j - i)) + "'");
    }
    out.push_back(v);
    i = j;
  }
  return out;
}

HandState hand(const double* pos, double grab, const double* quat) {
  HandState h;
  h.present = grab >= 0.0;
  h.grabbing = grab > 0.5;
  h.index_tip = Vec3(pos[0], pos[1], pos[2]);
  h.palm.translation = h.index_tip;
  if (quat) h.palm.rotation = spaces::Quat(quat[0], quat[1], quat[2], quat[3]).normalized().toRotationMatrix();
  return h;
}

}  // namespace

std::vector<HandFrame> parse_hand_stream(std::string_view text) {
  std::vector<HandFrame> frames;
  int lineno = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto v = numbers(line, lineno);
    if (v.empty()) continue;
    if (v.size() != 9 && v.size() != 17) {
      throw InteractError(InteractErrc::ParseError, "hand stream line " + std::to_string(lineno) + ": expected 9 or 17 fields, got " +
                                                        std::to_string(v.size()));
    }
    HandFrame f;
    f.timestamp = v[0];
    const bool q = v.size() == 17;
    f.left = hand(&v[1], v[4], q ? &v[9] : nullptr);
    f.right = hand(&v[5], v[8], q ? &v[13] : nullptr);
    if (!frames.empty() && f.timestamp <= frames.back().timestamp) {
      throw InteractError(InteractErrc::ParseError,
                          "hand stream line " + std::to_string(lineno) + ": timestamps must increase");
    }
    frames.push_back(f);
  }
  return frames;
}

std::vector<HandFrame> load_hand_stream(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const Error& e) {
    throw InteractError(InteractErrc::IoFailure, e.what());
  }
  return parse_hand_stream(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string format_hand_frame(const HandFrame& f) {
  std::ostringstream os;
  os.precision(17);
  os << f.timestamp;
  for (const HandState* h : {&f.left, &f.right}) {
    os << ' ' << h->index_tip.x() << ' ' << h->index_tip.y() << ' ' << h->index_tip.z() << ' '
       << (h->present ? (h->grabbing ? 1 : 0) : -1);
  }
  for (const HandState* h : {&f.left, &f.right}) {
    const auto q = h->palm.quat();
    os << ' ' << q.w() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z();
  }
  return os.str();
}

}  // namespace vg::interact
