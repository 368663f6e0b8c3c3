#include "liwt/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace liwt {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  auto* where = static_cast<std::string*>(png_get_error_ptr(png));
  if (where) *where = msg;
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

// libpng reports errors through longjmp, so each call site keeps all
// non-trivial objects outside the guarded region.
void write_rows(const std::string& path, int width, int height, int color_type, const std::vector<png_bytep>& rows) {
  File fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw ImageError("cannot open '" + path + "' for writing");
  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw ImageError("libpng initialisation failed for '" + path + "'");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageError("failed to encode '" + path + "': " + message);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(fp.get()) != 0) throw ImageError("failed writing '" + path + "'");
}

}  // namespace

std::uint8_t quantize(float v) {
  const float c = std::clamp(std::isnan(v) ? 0.0f : v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

Tensorf load_png(const std::string& path) {
  File fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw ImageError("cannot open '" + path + "'");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw ImageError("'" + path + "' is not a PNG file");
  }
  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("libpng initialisation failed for '" + path + "'");
  }
  // Buffers live behind a pointer that is fixed before setjmp.
  struct Buffers {
    std::vector<png_byte> pixels;
    std::vector<png_bytep> rows;
  };
  const auto buf = std::make_unique<Buffers>();
  auto& pixels = buf->pixels;
  auto& rows = buf->rows;
  png_uint_32 width = 0, height = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("failed to decode '" + path + "': " + message);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png), png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  const auto stride = png_get_rowbytes(png, info);
  if (stride != static_cast<std::size_t>(width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("'" + path + "': unsupported pixel layout");
  }
  pixels.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  std::vector<float> values(pixels.size());
  std::transform(pixels.begin(), pixels.end(), values.begin(), [](png_byte b) { return static_cast<float>(b) / 255.0f; });
  return Tensorf(Shape{static_cast<std::int64_t>(height), static_cast<std::int64_t>(width), 3}, std::move(values));
}

void save_png(const std::string& path, const Tensorf& rgb) {
  if (rgb.rank() != 3 || rgb.dim(2) != 3) throw InvalidArgument("save_png: expected H x W x 3, got " + shape_str(rgb.shape()));
  const auto h = rgb.dim(0), w = rgb.dim(1);
  std::vector<png_byte> bytes(static_cast<std::size_t>(h * w * 3));
  std::ranges::transform(rgb.data(), bytes.begin(), quantize);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (std::int64_t y = 0; y < h; ++y) rows[y] = bytes.data() + y * w * 3;
  write_rows(path, static_cast<int>(w), static_cast<int>(h), PNG_COLOR_TYPE_RGB, rows);
}

void save_gray_png(const std::string& path, const Tensorf& gray) {
  if (gray.rank() < 2 || (gray.rank() == 3 && gray.dim(2) != 1) || gray.rank() > 3) {
    throw InvalidArgument("save_gray_png: expected H x W, got " + shape_str(gray.shape()));
  }
  const auto h = gray.dim(0), w = gray.dim(1);
  std::vector<png_byte> bytes(static_cast<std::size_t>(h * w));
  std::ranges::transform(gray.data(), bytes.begin(), quantize);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (std::int64_t y = 0; y < h; ++y) rows[y] = bytes.data() + y * w;
  write_rows(path, static_cast<int>(w), static_cast<int>(h), PNG_COLOR_TYPE_GRAY, rows);
}

}  // namespace liwt
