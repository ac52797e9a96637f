#include "unerf/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "unerf/errors.hpp"

namespace unerf {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  return f;
}

std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 3 && image.channels != 4) throw ContractError("write_png: need 3 or 4 channels");
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("write_png: libpng initialisation failed");
  }
  // Encode before setjmp so nothing local changes between it and a longjmp.
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
  std::vector<std::uint8_t> bytes(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), bytes.begin(), to_byte);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("write_png: failed writing '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, image.width, image.height, 8,
               image.channels == 4 ? PNG_COLOR_TYPE_RGBA : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < image.height; ++r) png_write_row(png, bytes.data() + static_cast<std::size_t>(r) * stride);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("read_png: libpng initialisation failed");
  }
  Image image;
  std::vector<std::uint8_t> bytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("read_png: '" + path.string() + "' is not a readable PNG");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (png_get_bit_depth(png, info) < 8) png_set_packing(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);
  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  bytes.resize(stride * image.height);
  std::vector<png_bytep> rows(image.height);
  for (int r = 0; r < image.height; ++r) rows[r] = bytes.data() + r * stride;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  image.pixels.resize(static_cast<std::size_t>(image.width) * image.height * image.channels);
  for (int r = 0; r < image.height; ++r) {
    const std::uint8_t* src = bytes.data() + r * stride;
    float* dst = image.pixels.data() + static_cast<std::size_t>(r) * image.width * image.channels;
    for (int i = 0; i < image.width * image.channels; ++i) dst[i] = src[i] / 255.0f;
  }
  return image;
}

void write_pfm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 3) throw ContractError("write_pfm: need 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "'");
  out << "PF\n" << image.width << " " << image.height << "\n-1.0\n";
  const std::size_t row = static_cast<std::size_t>(image.width) * 3;
  for (int r = image.height - 1; r >= 0; --r) {
    out.write(reinterpret_cast<const char*>(image.pixels.data() + r * row),
              static_cast<std::streamsize>(row * sizeof(float)));
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Image read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string magic;
  Image image;
  double scale = 0;
  in >> magic >> image.width >> image.height >> scale;
  in.get();
  if (magic != "PF" || image.width <= 0 || image.height <= 0 || scale >= 0) {
    throw ParseError("'" + path.string() + "' is not a little-endian colour PFM");
  }
  image.channels = 3;
  const std::size_t row = static_cast<std::size_t>(image.width) * 3;
  image.pixels.resize(row * image.height);
  for (int r = image.height - 1; r >= 0; --r) {
    in.read(reinterpret_cast<char*>(image.pixels.data() + r * row), static_cast<std::streamsize>(row * sizeof(float)));
  }
  if (!in) throw ParseError("'" + path.string() + "' is truncated");
  return image;
}

}  // namespace unerf
