#pragma once

// DICOM ingestion: explicit-VR little-endian parsing, anonymization, slice
// extraction, volume assembly and the VXG1 volume cache.

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voxelglass/error.hpp"
#include "voxelglass/volume.hpp"

namespace vg::ingest {

enum class DicomErrc {
  MissingMagic,
  TruncatedElement,
  UnsupportedTransferSyntax,
  UnsupportedVR,
  MalformedElement,
  MissingImagingTag,
  PolicyTargetsImagingTag,
  MalformedPolicy,
  InconsistentDimensions,
  NonUniformSpacing,
  DuplicatePosition,
  TooFewSlices,
  BadMagic,
  ChecksumMismatch,
  TruncatedCache,
  IoFailure,
};
const char* to_string(DicomErrc e);
using DicomError = CodedError<DicomErrc>;

struct Tag {
  std::uint16_t group = 0;
  std::uint16_t element = 0;

  constexpr bool is_private() const noexcept { return (group & 1u) != 0; }
  friend constexpr auto operator<=>(const Tag&, const Tag&) = default;
};

std::string format_tag(Tag t);  // "(0010,0010)"
std::optional<Tag> parse_tag(std::string_view text);

namespace tags {
inline constexpr Tag TransferSyntaxUID{0x0002, 0x0010};
inline constexpr Tag ImagePositionPatient{0x0020, 0x0032};
inline constexpr Tag ImageOrientationPatient{0x0020, 0x0037};
inline constexpr Tag SeriesInstanceUID{0x0020, 0x000E};
inline constexpr Tag Rows{0x0028, 0x0010};
inline constexpr Tag Columns{0x0028, 0x0011};
inline constexpr Tag PixelSpacing{0x0028, 0x0030};
inline constexpr Tag BitsAllocated{0x0028, 0x0100};
inline constexpr Tag BitsStored{0x0028, 0x0101};
inline constexpr Tag PixelRepresentation{0x0028, 0x0103};
inline constexpr Tag RescaleIntercept{0x0028, 0x1052};
inline constexpr Tag RescaleSlope{0x0028, 0x1053};
inline constexpr Tag PixelData{0x7FE0, 0x0010};
inline constexpr Tag ItemTag{0xFFFE, 0xE000};
inline constexpr Tag ItemDelimitation{0xFFFE, 0xE00D};
inline constexpr Tag SequenceDelimitation{0xFFFE, 0xE0DD};
}  // namespace tags

inline constexpr std::string_view kExplicitVRLittleEndian = "1.2.840.10008.1.2.1";

// Tags a SliceMeta cannot be built without; anonymization refuses to touch them.
bool is_imaging_tag(Tag t) noexcept;

struct DicomElement {
  Tag tag;
  std::array<char, 2> vr{'U', 'N'};
  // Only SQ/UN values may be encoded with undefined length; `value` then holds
  // the raw item stream including the closing sequence delimitation item.
  bool undefined_length = false;
  std::vector<std::uint8_t> value;

  std::string_view vr_code() const noexcept { return {vr.data(), 2}; }
  // Text value with trailing space/NUL padding removed.
  std::string as_string() const;
  // Backslash-separated decimal/integer strings (DS, IS).
  std::vector<double> as_numbers() const;
  std::vector<std::uint16_t> as_u16() const;  // US, OW, pixel payload
  std::uint16_t as_us() const;

  friend bool operator==(const DicomElement&, const DicomElement&) = default;
};

enum class TransferSyntax { ExplicitVRLittleEndian };

struct DicomDataset {
  std::array<std::uint8_t, 128> preamble{};
  std::map<Tag, DicomElement> meta;      // group 0002 file meta information
  std::map<Tag, DicomElement> elements;  // main dataset, tag-ordered
  TransferSyntax transfer_syntax = TransferSyntax::ExplicitVRLittleEndian;

  const DicomElement* find(Tag t) const;
  friend bool operator==(const DicomDataset&, const DicomDataset&) = default;
};

DicomDataset parse_dicom_file(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_dicom(const DicomDataset& ds);

// ---- anonymization --------------------------------------------------------

struct PolicyEntry {
  Tag tag;
  enum class Action { Remove, Replace } action = Action::Remove;
  std::string placeholder;  // used by Replace
};
using AnonymizationPolicy = std::vector<PolicyEntry>;

DicomDataset anonymize(const DicomDataset& ds, const AnonymizationPolicy& policy);

// Policy text: one entry per line, `(gggg,eeee) remove` or
// `(gggg,eeee) replace <placeholder>`; `#` starts a comment.
AnonymizationPolicy parse_policy(std::string_view text);
AnonymizationPolicy load_policy(const std::filesystem::path& path);

// ---- slices and volumes ---------------------------------------------------

struct SliceMeta {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::array<double, 2> pixel_spacing{1.0, 1.0};  // (row spacing, column spacing) mm
  std::array<double, 3> position{0.0, 0.0, 0.0};  // ImagePositionPatient, mm
  std::uint16_t bits_stored = 12;
  // Row then column direction cosines, when the file carries them.
  std::optional<std::array<double, 6>> orientation;
};

struct Slice {
  SliceMeta meta;
  std::vector<std::uint16_t> samples;  // rows * cols, row-major
};

struct ExtractedSlice {
  Slice slice;
  std::string series_uid;                 // empty when absent
  std::optional<std::array<double, 2>> rescale;  // (slope, intercept), noted only
};

// Raw stored values are used; samples are masked to bits_stored.
ExtractedSlice extract_slice(const DicomDataset& ds);

VolumeDataset assemble_volume(std::span<const Slice> slices);

// Reads every *.dcm under `dir`, groups by SeriesInstanceUID and assembles
// the largest series.
VolumeDataset ingest_directory(const std::filesystem::path& dir);

void save_volume_cache(const VolumeDataset& v, const std::filesystem::path& path);
VolumeDataset load_volume_cache(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_volume_cache(const VolumeDataset& v);
VolumeDataset decode_volume_cache(std::span<const std::uint8_t> bytes);

}  // namespace vg::ingest
