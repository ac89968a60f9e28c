#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "voxelglass/image_io.hpp"
#include "voxelglass/ingest.hpp"

namespace vg::ingest {

namespace {

const DicomElement& require(const DicomDataset& ds, Tag t, const char* name) {
  const DicomElement* el = ds.find(t);
  if (el == nullptr) {
    throw DicomError(DicomErrc::MissingImagingTag, std::string("missing ") + name + " " + format_tag(t));
  }
  return *el;
}

std::array<double, 3> stack_normal(const SliceMeta& m) {
  if (!m.orientation) return {0.0, 0.0, 1.0};
  const auto& o = *m.orientation;
  std::array<double, 3> n{o[1] * o[5] - o[2] * o[4], o[2] * o[3] - o[0] * o[5],
                          o[0] * o[4] - o[1] * o[3]};
  const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
  if (len < 1e-9) return {0.0, 0.0, 1.0};
  for (double& c : n) c /= len;
  return n;
}

constexpr double kDuplicateGapMm = 1e-4;
constexpr double kSpacingTolerance = 0.10;

}  // namespace

ExtractedSlice extract_slice(const DicomDataset& ds) {
  ExtractedSlice out;
  SliceMeta& m = out.slice.meta;
  m.rows = require(ds, tags::Rows, "Rows").as_us();
  m.cols = require(ds, tags::Columns, "Columns").as_us();
  const std::uint16_t bits_allocated = require(ds, tags::BitsAllocated, "BitsAllocated").as_us();
  m.bits_stored = require(ds, tags::BitsStored, "BitsStored").as_us();

  const auto spacing = require(ds, tags::PixelSpacing, "PixelSpacing").as_numbers();
  const auto position = require(ds, tags::ImagePositionPatient, "ImagePositionPatient").as_numbers();
  if (spacing.size() != 2 || position.size() != 3) {
    throw DicomError(DicomErrc::MalformedElement, "PixelSpacing/ImagePositionPatient arity");
  }
  m.pixel_spacing = {spacing[0], spacing[1]};
  m.position = {position[0], position[1], position[2]};
  if (const DicomElement* o = ds.find(tags::ImageOrientationPatient)) {
    const auto v = o->as_numbers();
    if (v.size() != 6) throw DicomError(DicomErrc::MalformedElement, "ImageOrientationPatient arity");
    m.orientation = std::array<double, 6>{v[0], v[1], v[2], v[3], v[4], v[5]};
  }
  if (m.rows == 0 || m.cols == 0 || m.pixel_spacing[0] <= 0.0 || m.pixel_spacing[1] <= 0.0) {
    throw DicomError(DicomErrc::MalformedElement, "non-positive slice geometry");
  }
  if (m.bits_stored < 8 || m.bits_stored > 16 || m.bits_stored > bits_allocated) {
    throw DicomError(DicomErrc::MalformedElement, "BitsStored " + std::to_string(m.bits_stored));
  }
  if (const DicomElement* pr = ds.find(tags::PixelRepresentation); pr && pr->as_us() != 0) {
    throw DicomError(DicomErrc::MalformedElement, "signed PixelRepresentation is not supported");
  }

  const DicomElement& pixels = require(ds, tags::PixelData, "PixelData");
  const std::size_t count = std::size_t{m.rows} * m.cols;
  std::vector<std::uint16_t>& samples = out.slice.samples;
  if (bits_allocated == 16) {
    if (pixels.value.size() < count * 2) {
      throw DicomError(DicomErrc::TruncatedElement, "PixelData shorter than Rows*Columns");
    }
    samples = pixels.as_u16();
    samples.resize(count);
  } else if (bits_allocated == 8) {
    if (pixels.value.size() < count) {
      throw DicomError(DicomErrc::TruncatedElement, "PixelData shorter than Rows*Columns");
    }
    samples.assign(pixels.value.begin(), pixels.value.begin() + static_cast<std::ptrdiff_t>(count));
  } else {
    throw DicomError(DicomErrc::MalformedElement, "BitsAllocated " + std::to_string(bits_allocated));
  }
  const std::uint16_t mask = static_cast<std::uint16_t>((1u << m.bits_stored) - 1u);
  for (auto& s : samples) s &= mask;

  if (const DicomElement* uid = ds.find(tags::SeriesInstanceUID)) out.series_uid = uid->as_string();
  const DicomElement* slope = ds.find(tags::RescaleSlope);
  const DicomElement* intercept = ds.find(tags::RescaleIntercept);
  if (slope && intercept) {
    const auto s = slope->as_numbers();
    const auto i = intercept->as_numbers();
    if (!s.empty() && !i.empty()) out.rescale = std::array<double, 2>{s[0], i[0]};
  }
  return out;
}

VolumeDataset assemble_volume(std::span<const Slice> slices) {
  if (slices.size() < 2) {
    throw DicomError(DicomErrc::TooFewSlices, "need at least 2 slices, got " + std::to_string(slices.size()));
  }
  const SliceMeta& ref = slices.front().meta;
  for (const Slice& s : slices) {
    const SliceMeta& m = s.meta;
    if (m.rows != ref.rows || m.cols != ref.cols || m.bits_stored != ref.bits_stored ||
        std::abs(m.pixel_spacing[0] - ref.pixel_spacing[0]) > 1e-6 ||
        std::abs(m.pixel_spacing[1] - ref.pixel_spacing[1]) > 1e-6 ||
        s.samples.size() != std::size_t{m.rows} * m.cols) {
      throw DicomError(DicomErrc::InconsistentDimensions, "slices differ in size, spacing or depth");
    }
  }

  const auto n = stack_normal(ref);
  std::vector<double> dist(slices.size());
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const auto& p = slices[i].meta.position;
    dist[i] = n[0] * p[0] + n[1] * p[1] + n[2] * p[2];
  }
  std::vector<std::size_t> order(slices.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

  std::vector<double> gaps(order.size() - 1);
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    gaps[i] = dist[order[i + 1]] - dist[order[i]];
    if (gaps[i] < kDuplicateGapMm) {
      throw DicomError(DicomErrc::DuplicatePosition, "two slices share position " +
                                                         std::to_string(dist[order[i]]) + " mm");
    }
  }
  std::vector<double> sorted_gaps = gaps;
  std::sort(sorted_gaps.begin(), sorted_gaps.end());
  const std::size_t mid = sorted_gaps.size() / 2;
  const double median = sorted_gaps.size() % 2 == 1 ? sorted_gaps[mid]
                                                     : 0.5 * (sorted_gaps[mid - 1] + sorted_gaps[mid]);
  for (double g : gaps) {
    if (std::abs(g - median) > kSpacingTolerance * median) {
      throw DicomError(DicomErrc::NonUniformSpacing,
                       "slice gap " + std::to_string(g) + " mm vs median " + std::to_string(median) + " mm");
    }
  }

  VolumeDataset v;
  v.dims = {ref.cols, ref.rows, static_cast<std::uint32_t>(slices.size())};
  v.spacing = {static_cast<float>(ref.pixel_spacing[1]), static_cast<float>(ref.pixel_spacing[0]),
               static_cast<float>(median)};
  v.bits_stored = ref.bits_stored;
  const std::size_t plane = std::size_t{ref.rows} * ref.cols;
  v.voxels.resize(plane * slices.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& src = slices[order[k]].samples;
    std::copy(src.begin(), src.end(), v.voxels.begin() + static_cast<std::ptrdiff_t>(k * plane));
  }
  v.recompute_range();
  return v;
}

VolumeDataset ingest_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DicomError(DicomErrc::IoFailure, dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".dcm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DicomError(DicomErrc::IoFailure, "no .dcm files under " + dir.string());

  std::map<std::string, std::vector<Slice>> series;
  for (const auto& f : files) {
    const auto bytes = read_file(f);
    auto extracted = extract_slice(parse_dicom_file(bytes));
    series[extracted.series_uid].push_back(std::move(extracted.slice));
  }
  auto best = series.begin();
  for (auto it = series.begin(); it != series.end(); ++it) {
    if (it->second.size() > best->second.size()) best = it;
  }
  return assemble_volume(best->second);
}

}  // namespace vg::ingest
