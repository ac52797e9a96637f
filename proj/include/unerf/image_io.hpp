#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace unerf {

// Interleaved float image, row-major, values nominally in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> pixels;

  Image() = default;
  Image(int w, int h, int c) : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c) {}

  float& at(int row, int col, int ch) { return pixels[(static_cast<std::size_t>(row) * width + col) * channels + ch]; }
  float at(int row, int col, int ch) const {
    return pixels[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
};

// 8-bit PNG, RGB or RGBA according to channels (3 or 4). Values are
// clamped and rounded to the nearest code.
void write_png(const std::filesystem::path& path, const Image& image);
// Returns 3 or 4 channels as stored; grayscale and palette files are expanded to RGB(A).
Image read_png(const std::filesystem::path& path);

// Portable float map (3 channels, little-endian, bottom-to-top rows):
// lossless for 32-bit floats.
void write_pfm(const std::filesystem::path& path, const Image& image);
Image read_pfm(const std::filesystem::path& path);

}  // namespace unerf
