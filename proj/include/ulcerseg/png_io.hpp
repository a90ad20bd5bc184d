#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ulcerseg/mask_core.hpp"

namespace ulcerseg {

// Decoded PNG samples in file order. 8-bit files hold 0..255, 16-bit files
// 0..65535. Palette images are expanded to RGB(A).
struct PngRaster {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1 gray, 2 gray+alpha, 3 RGB, 4 RGBA
  int bit_depth = 8; // 8 or 16
  std::vector<std::uint16_t> samples;

  std::uint16_t max_value() const { return bit_depth == 16 ? 65535 : 255; }
  // Mean of the colour channels (alpha ignored) at pixel index i.
  double intensity(std::size_t i) const;
};

// Throws DataError naming the path on any I/O or decode failure.
PngRaster read_png(const std::filesystem::path& path);

// Gray is replicated to RGB, alpha dropped, 16-bit samples rounded to 8 bits.
ImageBuffer read_image_png(const std::filesystem::path& path);
// Foreground iff channel-mean intensity >= half of the sample range (128 for
// 8-bit files).
BinaryMask read_mask_png(const std::filesystem::path& path);
// Single-channel map decoded as v / 255 (8-bit) or v / 65535 (16-bit).
ProbMask read_prob_png(const std::filesystem::path& path);

void write_image_png(const std::filesystem::path& path, const ImageBuffer& image);
// 0 / 255 grayscale.
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);
// 8-bit grayscale, value = round(p * 255).
void write_prob_png(const std::filesystem::path& path, const ProbMask& prob);
// 16-bit grayscale, value = round(p * 65535).
void write_prob_png16(const std::filesystem::path& path, const ProbMask& prob);

}  // namespace ulcerseg
