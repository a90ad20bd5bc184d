#include "ulcerseg/mask_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ulcerseg {
namespace {

void check_dims(int height, int width) {
  if (height < 0 || width < 0) {
    throw ValidationError("raster dimensions must be non-negative, got " +
                          std::to_string(height) + "x" + std::to_string(width));
  }
}

void check_length(std::size_t got, std::size_t expected, const char* what) {
  if (got != expected) {
    throw ValidationError(std::string(what) + ": expected " + std::to_string(expected) +
                          " values, got " + std::to_string(got));
  }
}

void check_pad_target(int height, int width, int target_h, int target_w) {
  if (target_h < height || target_w < width) {
    throw ValidationError("zero_pad target " + std::to_string(target_h) + "x" +
                          std::to_string(target_w) + " is smaller than source " +
                          std::to_string(height) + "x" + std::to_string(width));
  }
}

// Copies a row-major raster with `channels` values per pixel into the top-left
// corner of a zero-initialised target.
template <typename T>
std::vector<T> pad_top_left(std::span<const T> src, int height, int width, int channels,
                            int target_h, int target_w) {
  std::vector<T> out(static_cast<std::size_t>(target_h) * target_w * channels, T{});
  const std::size_t row_len = static_cast<std::size_t>(width) * channels;
  for (int r = 0; r < height; ++r) {
    std::copy_n(src.begin() + r * row_len, row_len,
                out.begin() + static_cast<std::size_t>(r) * target_w * channels);
  }
  return out;
}

}  // namespace

ImageBuffer::ImageBuffer(int height, int width)
    : height_(height), width_(width) {
  check_dims(height, width);
  data_.assign(static_cast<std::size_t>(height) * width * kChannels, 0);
}

ImageBuffer::ImageBuffer(int height, int width, std::vector<std::uint8_t> data)
    : height_(height), width_(width), data_(std::move(data)) {
  check_dims(height, width);
  check_length(data_.size(), static_cast<std::size_t>(height) * width * kChannels, "ImageBuffer");
}

ProbMask::ProbMask(int height, int width, std::vector<double> values)
    : height_(height), width_(width), data_(std::move(values)) {
  check_dims(height, width);
  check_length(data_.size(), static_cast<std::size_t>(height) * width, "ProbMask");
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const double v = data_[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError("ProbMask value " + std::to_string(v) + " at index " +
                            std::to_string(i) + " is outside [0, 1]");
    }
  }
}

ProbMask ProbMask::filled(int height, int width, double value) {
  check_dims(height, width);
  return ProbMask(height, width,
                  std::vector<double>(static_cast<std::size_t>(height) * width, value));
}

BinaryMask::BinaryMask(int height, int width) : height_(height), width_(width) {
  check_dims(height, width);
  data_.assign(static_cast<std::size_t>(height) * width, 0);
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> values)
    : height_(height), width_(width), data_(std::move(values)) {
  check_dims(height, width);
  check_length(data_.size(), static_cast<std::size_t>(height) * width, "BinaryMask");
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (data_[i] > 1) {
      throw ValidationError("BinaryMask value at index " + std::to_string(i) +
                            " is not 0 or 1");
    }
  }
}

std::size_t BinaryMask::foreground_count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

ImageBuffer zero_pad(const ImageBuffer& image, int target_h, int target_w) {
  check_pad_target(image.height(), image.width(), target_h, target_w);
  return ImageBuffer(target_h, target_w,
                     pad_top_left(image.data(), image.height(), image.width(),
                                  ImageBuffer::kChannels, target_h, target_w));
}

BinaryMask zero_pad_mask(const BinaryMask& mask, int target_h, int target_w) {
  check_pad_target(mask.height(), mask.width(), target_h, target_w);
  return BinaryMask(target_h, target_w,
                    pad_top_left(mask.data(), mask.height(), mask.width(), 1, target_h,
                                 target_w));
}

ProbMask zero_pad_prob(const ProbMask& mask, int target_h, int target_w) {
  check_pad_target(mask.height(), mask.width(), target_h, target_w);
  return ProbMask(target_h, target_w,
                  pad_top_left(mask.data(), mask.height(), mask.width(), 1, target_h,
                               target_w));
}

}  // namespace ulcerseg
