#include "ulcerseg/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <string>

namespace ulcerseg {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw DataError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_error_handler(png_structp png, png_const_charp message) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = message;
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

// libpng reports errors by longjmp; nothing with a destructor may live between
// setjmp and the libpng calls below.
bool decode(std::FILE* file, PngRaster* out, std::string* error) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, error, png_error_handler,
                                           png_warning_handler);
  if (!png) {
    *error = "out of memory";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    *error = "out of memory";
    return false;
  }
  png_bytep* rows = nullptr;
  unsigned char* buffer = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    delete[] rows;
    delete[] buffer;
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, file);
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png);  // host little-endian 16-bit samples
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer = new unsigned char[rowbytes * height];
  rows = new png_bytep[height];
  for (png_uint_32 r = 0; r < height; ++r) rows[r] = buffer + r * rowbytes;
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  delete[] rows;
  rows = nullptr;
  png_destroy_read_struct(&png, &info, nullptr);

  out->height = static_cast<int>(height);
  out->width = static_cast<int>(width);
  out->channels = channels;
  out->bit_depth = out_depth;
  const std::size_t n = static_cast<std::size_t>(height) * width * channels;
  out->samples.resize(n);
  if (out_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      out->samples[i] = static_cast<std::uint16_t>(buffer[2 * i] | (buffer[2 * i + 1] << 8));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) out->samples[i] = buffer[i];
  }
  delete[] buffer;
  return true;
}

bool encode(std::FILE* file, int height, int width, int channels, int depth,
            const unsigned char* data, std::string* error) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, error, png_error_handler,
                                            png_warning_handler);
  if (!png) {
    *error = "out of memory";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    *error = "out of memory";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), depth,
               color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * (depth / 8);
  for (int r = 0; r < height; ++r) {
    png_write_row(png, data + static_cast<std::size_t>(r) * rowbytes);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

void write_png(const std::filesystem::path& path, int height, int width, int channels, int depth,
               const unsigned char* data) {
  auto file = open_file(path, "wb");
  std::string error;
  if (!encode(file.get(), height, width, channels, depth, data, &error)) {
    throw DataError("cannot write PNG " + path.string() + ": " + error);
  }
  if (std::fflush(file.get()) != 0) throw DataError("cannot write PNG " + path.string());
}

}  // namespace

double PngRaster::intensity(std::size_t i) const {
  const int colour = channels >= 3 ? 3 : 1;
  const std::uint16_t* px = samples.data() + i * channels;
  double sum = 0.0;
  for (int k = 0; k < colour; ++k) sum += px[k];
  return sum / colour;
}

PngRaster read_png(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError("not a PNG file: " + path.string());
  }
  std::rewind(file.get());
  PngRaster raster;
  std::string error;
  if (!decode(file.get(), &raster, &error)) {
    throw DataError("cannot decode PNG " + path.string() + ": " + error);
  }
  return raster;
}

ImageBuffer read_image_png(const std::filesystem::path& path) {
  const PngRaster png = read_png(path);
  const std::size_t n = static_cast<std::size_t>(png.height) * png.width;
  std::vector<std::uint8_t> data(n * 3);
  const bool colour = png.channels >= 3;
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      std::uint32_t v = png.samples[i * png.channels + (colour ? k : 0)];
      if (png.bit_depth == 16) v = (v * 255 + 32767) / 65535;
      data[i * 3 + k] = static_cast<std::uint8_t>(v);
    }
  }
  return ImageBuffer(png.height, png.width, std::move(data));
}

BinaryMask read_mask_png(const std::filesystem::path& path) {
  const PngRaster png = read_png(path);
  const std::size_t n = static_cast<std::size_t>(png.height) * png.width;
  const double cut = (png.max_value() + 1) / 2.0;
  std::vector<std::uint8_t> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = png.intensity(i) >= cut ? 1 : 0;
  return BinaryMask(png.height, png.width, std::move(data));
}

ProbMask read_prob_png(const std::filesystem::path& path) {
  const PngRaster png = read_png(path);
  if (png.channels != 1) {
    throw DataError("probability map " + path.string() + " must be single-channel grayscale, has " +
                    std::to_string(png.channels) + " channels");
  }
  const double scale = png.max_value();
  std::vector<double> data(png.samples.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = png.samples[i] / scale;
  try {
    return ProbMask(png.height, png.width, std::move(data));
  } catch (const ValidationError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_image_png(const std::filesystem::path& path, const ImageBuffer& image) {
  write_png(path, image.height(), image.width(), 3, 8, image.data().data());
}

void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
  std::vector<unsigned char> data(mask.pixel_count());
  const auto m = mask.data();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = m[i] ? 255 : 0;
  write_png(path, mask.height(), mask.width(), 1, 8, data.data());
}

void write_prob_png(const std::filesystem::path& path, const ProbMask& prob) {
  std::vector<unsigned char> data(prob.pixel_count());
  const auto p = prob.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = static_cast<unsigned char>(std::lround(p[i] * 255.0));
  }
  write_png(path, prob.height(), prob.width(), 1, 8, data.data());
}

void write_prob_png16(const std::filesystem::path& path, const ProbMask& prob) {
  // PNG stores 16-bit samples big-endian.
  std::vector<unsigned char> data(prob.pixel_count() * 2);
  const auto p = prob.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto v = static_cast<std::uint16_t>(std::lround(p[i] * 65535.0));
    data[2 * i] = static_cast<unsigned char>(v >> 8);
    data[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
  }
  write_png(path, prob.height(), prob.width(), 1, 16, data.data());
}

}  // namespace ulcerseg
