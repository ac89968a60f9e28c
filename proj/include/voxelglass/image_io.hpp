#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "voxelglass/error.hpp"

namespace vg {

enum class ImageErrc { IoFailure, DecodeFailure };
const char* to_string(ImageErrc e);
using ImageError = CodedError<ImageErrc>;

// 8-bit interleaved image, `channels` is 3 (RGB) or 4 (RGBA).
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  Image8() = default;
  Image8(int w, int h, int c) : width(w), height(h), channels(c), pixels(std::size_t(w) * h * c, 0) {}

  std::uint8_t* px(int x, int y) { return pixels.data() + (std::size_t(y) * width + x) * channels; }
  const std::uint8_t* px(int x, int y) const {
    return pixels.data() + (std::size_t(y) * width + x) * channels;
  }
  friend bool operator==(const Image8&, const Image8&) = default;
};

std::vector<std::uint8_t> encode_png(const Image8& img);
Image8 decode_png(const std::vector<std::uint8_t>& bytes);
void write_png(const std::filesystem::path& path, const Image8& img);
// Binary P6; alpha is dropped for RGBA input.
void write_ppm(const std::filesystem::path& path, const Image8& img);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace vg
