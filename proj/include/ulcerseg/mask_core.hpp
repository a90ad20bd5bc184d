#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ulcerseg/errors.hpp"

namespace ulcerseg {

// H x W x 3 row-major RGB raster. Channel values are bytes, so the [0, 255]
// range holds by construction.
class ImageBuffer {
 public:
  static constexpr int kChannels = 3;

  ImageBuffer() = default;
  // Zero-filled image.
  ImageBuffer(int height, int width);
  // Throws ValidationError unless data.size() == height * width * 3.
  ImageBuffer(int height, int width, std::vector<std::uint8_t> data);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }

  std::uint8_t at(int row, int col, int channel) const {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * kChannels + channel];
  }
  std::span<const std::uint8_t> data() const { return data_; }

  bool operator==(const ImageBuffer&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

// Per-pixel foreground probability. Construction is the only place the
// [0, 1] range is checked; every instance is valid afterwards.
class ProbMask {
 public:
  ProbMask() = default;
  // Throws ValidationError on a size mismatch or on the first value outside
  // [0, 1] (NaN included), naming its index.
  ProbMask(int height, int width, std::vector<double> values);
  // Constant-valued mask.
  static ProbMask filled(int height, int width, double value);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixel_count() const { return data_.size(); }

  double at(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  std::span<const double> data() const { return data_; }

  bool operator==(const ProbMask&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// Foreground/background raster stored one byte per pixel (0 or 1).
class BinaryMask {
 public:
  BinaryMask() = default;
  // All-background mask.
  BinaryMask(int height, int width);
  // Values must be 0 or 1.
  BinaryMask(int height, int width, std::vector<std::uint8_t> values);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixel_count() const { return data_.size(); }

  bool at(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * width_ + col] != 0;
  }
  std::span<const std::uint8_t> data() const { return data_; }
  std::size_t foreground_count() const;

  bool operator==(const BinaryMask&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

template <typename A, typename B>
bool same_shape(const A& a, const B& b) {
  return a.height() == b.height() && a.width() == b.width();
}

// Pads with zeros to target_h x target_w; the original occupies the top-left
// corner. Throws ValidationError if the target is smaller than the source.
ImageBuffer zero_pad(const ImageBuffer& image, int target_h, int target_w);
BinaryMask zero_pad_mask(const BinaryMask& mask, int target_h, int target_w);
ProbMask zero_pad_prob(const ProbMask& mask, int target_h, int target_w);

}  // namespace ulcerseg
