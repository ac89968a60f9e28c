#include <fstream>
#include <sstream>

#include "voxelglass/ingest.hpp"

namespace vg::ingest {

namespace {

std::uint32_t encoded_size(const DicomElement& el) {
  const std::string_view vr = el.vr_code();
  const bool long_form = vr == "OB" || vr == "OD" || vr == "OF" || vr == "OL" || vr == "OV" ||
                         vr == "OW" || vr == "SQ" || vr == "SV" || vr == "UC" || vr == "UN" ||
                         vr == "UR" || vr == "UT" || vr == "UV";
  return (long_form ? 12u : 8u) + static_cast<std::uint32_t>(el.value.size());
}

void refresh_group_length(std::map<Tag, DicomElement>& meta) {
  auto it = meta.find(Tag{0x0002, 0x0000});
  if (it == meta.end()) return;
  std::uint32_t total = 0;
  for (const auto& [tag, el] : meta) {
    if (tag.element != 0x0000) total += encoded_size(el);
  }
  it->second.value = {static_cast<std::uint8_t>(total & 0xFF), static_cast<std::uint8_t>((total >> 8) & 0xFF),
                      static_cast<std::uint8_t>((total >> 16) & 0xFF),
                      static_cast<std::uint8_t>((total >> 24) & 0xFF)};
}

}  // namespace

DicomDataset anonymize(const DicomDataset& ds, const AnonymizationPolicy& policy) {
  for (const PolicyEntry& entry : policy) {
    if (is_imaging_tag(entry.tag)) {
      throw DicomError(DicomErrc::PolicyTargetsImagingTag,
                       "policy would strip imaging tag " + format_tag(entry.tag));
    }
  }
  DicomDataset out = ds;
  bool meta_touched = false;
  for (const PolicyEntry& entry : policy) {
    auto& group = entry.tag.group == 0x0002 ? out.meta : out.elements;
    auto it = group.find(entry.tag);
    if (it == group.end()) continue;
    meta_touched |= entry.tag.group == 0x0002;
    if (entry.action == PolicyEntry::Action::Remove) {
      group.erase(it);
      continue;
    }
    DicomElement& el = it->second;
    el.undefined_length = false;
    el.value.assign(entry.placeholder.begin(), entry.placeholder.end());
    if (el.value.size() % 2 != 0) el.value.push_back(el.vr_code() == "UI" ? '\0' : ' ');
  }
  if (meta_touched) refresh_group_length(out.meta);
  return out;
}

AnonymizationPolicy parse_policy(std::string_view text) {
  AnonymizationPolicy policy;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string tag_text, action;
    if (!(fields >> tag_text)) continue;
    const auto tag = parse_tag(tag_text);
    if (!tag) {
      throw DicomError(DicomErrc::MalformedPolicy,
                       "line " + std::to_string(lineno) + ": bad tag '" + tag_text + "'");
    }
    PolicyEntry entry;
    entry.tag = *tag;
    if (!(fields >> action) || action == "remove") {
      entry.action = PolicyEntry::Action::Remove;
    } else if (action == "replace") {
      entry.action = PolicyEntry::Action::Replace;
      std::getline(fields >> std::ws, entry.placeholder);
      while (!entry.placeholder.empty() && entry.placeholder.back() == ' ') entry.placeholder.pop_back();
    } else {
      throw DicomError(DicomErrc::MalformedPolicy,
                       "line " + std::to_string(lineno) + ": unknown action '" + action + "'");
    }
    policy.push_back(std::move(entry));
  }
  return policy;
}

AnonymizationPolicy load_policy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DicomError(DicomErrc::IoFailure, "cannot open policy " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_policy(buf.str());
}

}  // namespace vg::ingest
