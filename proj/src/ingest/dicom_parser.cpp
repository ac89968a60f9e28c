#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstring>

#include "voxelglass/ingest.hpp"

namespace vg::ingest {

const char* to_string(DicomErrc e) {
  switch (e) {
    case DicomErrc::MissingMagic: return "MissingMagic";
    case DicomErrc::TruncatedElement: return "TruncatedElement";
    case DicomErrc::UnsupportedTransferSyntax: return "UnsupportedTransferSyntax";
    case DicomErrc::UnsupportedVR: return "UnsupportedVR";
    case DicomErrc::MalformedElement: return "MalformedElement";
    case DicomErrc::MissingImagingTag: return "MissingImagingTag";
    case DicomErrc::PolicyTargetsImagingTag: return "PolicyTargetsImagingTag";
    case DicomErrc::MalformedPolicy: return "MalformedPolicy";
    case DicomErrc::InconsistentDimensions: return "InconsistentDimensions";
    case DicomErrc::NonUniformSpacing: return "NonUniformSpacing";
    case DicomErrc::DuplicatePosition: return "DuplicatePosition";
    case DicomErrc::TooFewSlices: return "TooFewSlices";
    case DicomErrc::BadMagic: return "BadMagic";
    case DicomErrc::ChecksumMismatch: return "ChecksumMismatch";
    case DicomErrc::TruncatedCache: return "TruncatedCache";
    case DicomErrc::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

std::string format_tag(Tag t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "(%04X,%04X)", t.group, t.element);
  return buf;
}

std::optional<Tag> parse_tag(std::string_view text) {
  if (text.size() >= 2 && text.front() == '(' && text.back() == ')') {
    text = text.substr(1, text.size() - 2);
  }
  const auto comma = text.find(',');
  if (comma != 4 || text.size() != 9) return std::nullopt;
  Tag t;
  auto parse_hex = [](std::string_view s, std::uint16_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out, 16);
    return ec == std::errc{} && p == s.data() + s.size();
  };
  if (!parse_hex(text.substr(0, 4), t.group) || !parse_hex(text.substr(5, 4), t.element)) {
    return std::nullopt;
  }
  return t;
}

bool is_imaging_tag(Tag t) noexcept {
  return t == tags::Rows || t == tags::Columns || t == tags::BitsAllocated ||
         t == tags::BitsStored || t == tags::PixelSpacing || t == tags::ImagePositionPatient ||
         t == tags::ImageOrientationPatient || t == tags::PixelData ||
         t == tags::PixelRepresentation || t == tags::TransferSyntaxUID;
}

const DicomElement* DicomDataset::find(Tag t) const {
  if (t.group == 0x0002) {
    auto it = meta.find(t);
    return it == meta.end() ? nullptr : &it->second;
  }
  auto it = elements.find(t);
  return it == elements.end() ? nullptr : &it->second;
}

std::string DicomElement::as_string() const {
  std::string s(value.begin(), value.end());
  while (!s.empty() && (s.back() == ' ' || s.back() == '\0')) s.pop_back();
  std::size_t lead = 0;
  while (lead < s.size() && s[lead] == ' ') ++lead;
  return s.substr(lead);
}

std::vector<double> DicomElement::as_numbers() const {
  std::vector<double> out;
  const std::string s = as_string();
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find('\\', start);
    if (end == std::string::npos) end = s.size();
    std::string part = s.substr(start, end - start);
    part.erase(std::remove(part.begin(), part.end(), ' '), part.end());
    if (!part.empty()) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
      if (ec != std::errc{} || p != part.data() + part.size()) {
        throw DicomError(DicomErrc::MalformedElement,
                         "non-numeric value '" + part + "' in " + format_tag(tag));
      }
      out.push_back(v);
    }
    start = end + 1;
  }
  return out;
}

std::vector<std::uint16_t> DicomElement::as_u16() const {
  std::vector<std::uint16_t> out(value.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint16_t>(value[2 * i] | (value[2 * i + 1] << 8));
  }
  return out;
}

std::uint16_t DicomElement::as_us() const {
  if (value.size() < 2) {
    throw DicomError(DicomErrc::MalformedElement, "US value too short in " + format_tag(tag));
  }
  return static_cast<std::uint16_t>(value[0] | (value[1] << 8));
}

namespace {

enum class VrClass { Short, Long, Unknown };

VrClass classify_vr(char a, char b) {
  static constexpr std::string_view kShort[] = {"AE", "AS", "AT", "CS", "DA", "DS", "DT",
                                                "FL", "FD", "IS", "LO", "LT", "PN", "SH",
                                                "SL", "SS", "ST", "TM", "UI", "UL", "US"};
  static constexpr std::string_view kLong[] = {"OB", "OD", "OF", "OL", "OV", "OW", "SQ",
                                               "SV", "UC", "UN", "UR", "UT", "UV"};
  const char code[2] = {a, b};
  const std::string_view vr(code, 2);
  if (std::find(std::begin(kShort), std::end(kShort), vr) != std::end(kShort)) return VrClass::Short;
  if (std::find(std::begin(kLong), std::end(kLong), vr) != std::end(kLong)) return VrClass::Long;
  return VrClass::Unknown;
}

constexpr std::uint32_t kUndefinedLength = 0xFFFFFFFFu;

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ >= data_.size(); }

  void need(std::size_t n, Tag t) const {
    if (remaining() < n) {
      throw DicomError(DicomErrc::TruncatedElement,
                       "element " + format_tag(t) + " runs past end of data");
    }
  }
  std::uint16_t u16() {
    const std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    const std::uint32_t v = std::uint32_t{data_[pos_]} | (std::uint32_t{data_[pos_ + 1]} << 8) |
                            (std::uint32_t{data_[pos_ + 2]} << 16) |
                            (std::uint32_t{data_[pos_ + 3]} << 24);
    pos_ += 4;
    return v;
  }
  std::uint8_t u8() { return data_[pos_++]; }
  std::span<const std::uint8_t> take(std::size_t n) {
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  Tag peek_tag() const {
    return Tag{static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8)),
               static_cast<std::uint16_t>(data_[pos_ + 2] | (data_[pos_ + 3] << 8))};
  }
  std::span<const std::uint8_t> span_from(std::size_t start) const {
    return data_.subspan(start, pos_ - start);
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

Tag read_tag(Reader& r) {
  r.need(4, Tag{});
  const std::uint16_t g = r.u16();
  const std::uint16_t e = r.u16();
  return Tag{g, e};
}

void skip_element_stream(Reader& r, Tag stop, int depth);

// Walks an undefined-length sequence body up to and including its
// sequence delimitation item.
void skip_undefined_sequence(Reader& r, Tag owner, int depth) {
  if (depth > 64) throw DicomError(DicomErrc::MalformedElement, "sequence nesting too deep");
  for (;;) {
    r.need(8, owner);
    const Tag t = read_tag(r);
    const std::uint32_t len = r.u32();
    if (t == tags::SequenceDelimitation) return;
    if (t != tags::ItemTag) {
      throw DicomError(DicomErrc::MalformedElement,
                       "expected item in sequence " + format_tag(owner) + ", got " + format_tag(t));
    }
    if (len == kUndefinedLength) {
      skip_element_stream(r, tags::ItemDelimitation, depth + 1);
    } else {
      r.need(len, owner);
      r.take(len);
    }
  }
}

// Parses one explicit-VR element header + value. Returns the element with its
// raw value bytes.
DicomElement read_element(Reader& r, int depth) {
  const Tag tag = read_tag(r);
  r.need(2, tag);
  DicomElement el;
  el.tag = tag;
  el.vr = {static_cast<char>(r.u8()), static_cast<char>(r.u8())};
  const VrClass cls = classify_vr(el.vr[0], el.vr[1]);
  if (cls == VrClass::Unknown) {
    throw DicomError(DicomErrc::UnsupportedVR,
                     "unsupported VR '" + std::string(el.vr_code()) + "' at " + format_tag(tag));
  }
  std::uint32_t len = 0;
  if (cls == VrClass::Short) {
    r.need(2, tag);
    len = r.u16();
  } else {
    r.need(6, tag);
    r.u16();  // reserved
    len = r.u32();
  }
  if (len == kUndefinedLength) {
    if (tag == tags::PixelData) {
      throw DicomError(DicomErrc::UnsupportedTransferSyntax,
                       "encapsulated (compressed) PixelData is not supported");
    }
    if (el.vr_code() != "SQ" && el.vr_code() != "UN") {
      throw DicomError(DicomErrc::MalformedElement,
                       "undefined length on non-sequence element " + format_tag(tag));
    }
    el.undefined_length = true;
    const std::size_t start = r.pos();
    skip_undefined_sequence(r, tag, depth);
    auto body = r.span_from(start);
    el.value.assign(body.begin(), body.end());
    return el;
  }
  r.need(len, tag);
  auto body = r.take(len);
  el.value.assign(body.begin(), body.end());
  return el;
}

void skip_element_stream(Reader& r, Tag stop, int depth) {
  for (;;) {
    r.need(4, stop);
    if (r.peek_tag() == stop) {
      read_tag(r);
      r.need(4, stop);
      r.u32();
      return;
    }
    read_element(r, depth);
  }
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void write_element(std::vector<std::uint8_t>& out, const DicomElement& el) {
  put_u16(out, el.tag.group);
  put_u16(out, el.tag.element);
  out.push_back(static_cast<std::uint8_t>(el.vr[0]));
  out.push_back(static_cast<std::uint8_t>(el.vr[1]));
  if (classify_vr(el.vr[0], el.vr[1]) == VrClass::Long) {
    put_u16(out, 0);
    put_u32(out, el.undefined_length ? kUndefinedLength : static_cast<std::uint32_t>(el.value.size()));
  } else {
    put_u16(out, static_cast<std::uint16_t>(el.value.size()));
  }
  out.insert(out.end(), el.value.begin(), el.value.end());
}

void insert_ordered(std::map<Tag, DicomElement>& into, DicomElement el) {
  if (!into.empty() && !(into.rbegin()->first < el.tag)) {
    throw DicomError(DicomErrc::MalformedElement,
                     "tag " + format_tag(el.tag) + " is not in ascending order");
  }
  const Tag t = el.tag;
  into.emplace_hint(into.end(), t, std::move(el));
}

}  // namespace

DicomDataset parse_dicom_file(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 132 || std::memcmp(bytes.data() + 128, "DICM", 4) != 0) {
    throw DicomError(DicomErrc::MissingMagic, "missing 128-byte preamble and DICM magic");
  }
  DicomDataset ds;
  std::copy_n(bytes.begin(), 128, ds.preamble.begin());
  Reader r(bytes.subspan(132));

  while (!r.done()) {
    if (r.remaining() < 4) throw DicomError(DicomErrc::TruncatedElement, "trailing bytes after last element");
    const Tag next = r.peek_tag();
    DicomElement el = read_element(r, 0);
    if (next.group == 0x0002) {
      if (!ds.elements.empty()) {
        throw DicomError(DicomErrc::MalformedElement, "file meta element after dataset body");
      }
      insert_ordered(ds.meta, std::move(el));
    } else {
      if (ds.elements.empty()) {
        // First body element: the transfer syntax must be settled now.
        if (auto it = ds.meta.find(tags::TransferSyntaxUID); it != ds.meta.end()) {
          const std::string uid = it->second.as_string();
          if (uid != kExplicitVRLittleEndian) {
            throw DicomError(DicomErrc::UnsupportedTransferSyntax, "transfer syntax " + uid);
          }
        }
      }
      insert_ordered(ds.elements, std::move(el));
    }
  }
  if (auto it = ds.meta.find(tags::TransferSyntaxUID); it != ds.meta.end()) {
    const std::string uid = it->second.as_string();
    if (uid != kExplicitVRLittleEndian) {
      throw DicomError(DicomErrc::UnsupportedTransferSyntax, "transfer syntax " + uid);
    }
  }
  return ds;
}

std::vector<std::uint8_t> serialize_dicom(const DicomDataset& ds) {
  std::vector<std::uint8_t> out(ds.preamble.begin(), ds.preamble.end());
  out.insert(out.end(), {'D', 'I', 'C', 'M'});
  for (const auto& [tag, el] : ds.meta) write_element(out, el);
  for (const auto& [tag, el] : ds.elements) write_element(out, el);
  return out;
}

}  // namespace vg::ingest
