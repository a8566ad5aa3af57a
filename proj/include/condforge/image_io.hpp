#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace condforge {

/// Single-channel 8-bit raster, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  bool operator==(const GrayImage&) const = default;
};

/// Interleaved 8-bit raster with 1 (gray) or 3 (RGB) channels.
struct DecodedImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

enum class ImageFormat { Png, Jpeg, Unknown };

ImageFormat sniff_format(std::span<const std::uint8_t> bytes);

/// Decodes PNG or JPEG. Throws ImageError on anything else or on corrupt data.
DecodedImage decode_image(std::span<const std::uint8_t> bytes);

/// Rec. 601 luma; gray inputs are copied.
GrayImage to_gray(const DecodedImage& image);

/// Gray -> 3-channel replication (conditioning rasters are exported as RGB
/// only at the boundary).
DecodedImage replicate_to_rgb(const GrayImage& image);

std::vector<std::uint8_t> encode_png(const GrayImage& image);
std::vector<std::uint8_t> encode_png(const DecodedImage& image);
std::vector<std::uint8_t> encode_jpeg(const DecodedImage& image, int quality = 90);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace condforge
