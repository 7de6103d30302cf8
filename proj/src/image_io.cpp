#include "stvo/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include "stvo/error.hpp"

namespace stvo {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void png_warn(png_structp, png_const_charp) {}

// libpng reports errors by longjmp; everything that owns memory lives in the
// caller, outside the jump region.
struct PngImage {
  png_uint_32 width = 0, height = 0;
  int channels = 0, bit_depth = 0;
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
};

bool decode(std::FILE* fp, PngImage& img) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  img.channels = png_get_channels(png, info);
  img.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  img.pixels.resize(stride * img.height);
  img.rows.resize(img.height);
  for (png_uint_32 y = 0; y < img.height; ++y) img.rows[y] = img.pixels.data() + y * stride;
  png_read_image(png, img.rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool encode(std::FILE* fp, int width, int height, int channels,
            const std::vector<unsigned char>& pixels) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

DenseArray read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw Error(ErrorCode::kMissingImage, path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(ErrorCode::kMalformedFile, "not a PNG: " + path.string());
  }
  PngImage img;
  if (!decode(fp.get(), img)) throw Error(ErrorCode::kMalformedFile, "corrupt PNG: " + path.string());

  const int h = static_cast<int>(img.height), w = static_cast<int>(img.width);
  DenseArray out({img.channels, h, w});
  const bool wide = img.bit_depth == 16;
  const double scale = wide ? 1.0 / 65535.0 : 1.0 / 255.0;
  for (int y = 0; y < h; ++y) {
    const unsigned char* row = img.rows[y];
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        const std::size_t k = static_cast<std::size_t>(x) * img.channels + c;
        // 16-bit PNG samples are big-endian.
        const double v = wide ? (row[2 * k] << 8 | row[2 * k + 1]) : row[k];
        out(c, y, x) = v * scale;
      }
    }
  }
  return out;
}

void write_png(const std::filesystem::path& path, const DenseArray& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw Error(ErrorCode::kShapeMismatch, "write_png expects [1|3,H,W]");
  }
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<unsigned char> pixels(static_cast<std::size_t>(w) * h * c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) {
        const double v = std::clamp(image(k, y, x), 0.0, 1.0);
        pixels[(static_cast<std::size_t>(y) * w + x) * c + k] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error(ErrorCode::kMalformedFile, "cannot write " + path.string());
  if (!encode(fp.get(), w, h, c, pixels)) {
    throw Error(ErrorCode::kMalformedFile, "PNG encode failed: " + path.string());
  }
}

}  // namespace stvo
