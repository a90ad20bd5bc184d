#pragma once

#include <cstdint>
#include <vector>

#include "ulcerseg/mask_core.hpp"

namespace ulcerseg {

enum class Connectivity { kFour = 4, kEight = 8 };

// 4 <-> 8. Foreground and background use dual neighbourhoods when filling
// holes.
constexpr Connectivity dual(Connectivity c) {
  return c == Connectivity::kFour ? Connectivity::kEight : Connectivity::kFour;
}

Connectivity connectivity_from_int(int value);

struct PostprocessConfig {
  double threshold = 0.5;
  // Foreground components smaller than this are dropped. Sized for 512 x 512
  // inputs; scale it with the canvas.
  std::int64_t min_object_area = 100;
  // Foreground connectivity; hole filling treats background with the dual.
  Connectivity connectivity = Connectivity::kEight;

  void validate() const;
};

// Per-pixel component ids, 0 = background, 1..count numbered by the raster
// position of each component's first pixel.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<std::int32_t> labels;
  std::int32_t count = 0;

  std::int32_t at(int row, int col) const {
    return labels[static_cast<std::size_t>(row) * width + col];
  }
  // Pixel count per label; index 0 is the background.
  std::vector<std::int64_t> areas() const;
};

// Foreground iff value >= threshold. Threshold must lie in (0, 1).
BinaryMask binarize(const ProbMask& prob, double threshold = 0.5);

LabelMap connected_components(const BinaryMask& mask, Connectivity connectivity);

// Background regions (under dual(connectivity)) that do not touch the raster
// border become foreground.
BinaryMask fill_holes(const BinaryMask& mask, Connectivity connectivity = Connectivity::kEight);

// Drops foreground components with area < min_area.
BinaryMask remove_small_objects(const BinaryMask& mask, std::int64_t min_area,
                                Connectivity connectivity = Connectivity::kEight);

// binarize -> fill_holes -> remove_small_objects.
BinaryMask postprocess(const ProbMask& prob, const PostprocessConfig& cfg);

// {0, 1}-valued probability map of a mask.
ProbMask to_prob(const BinaryMask& mask);

}  // namespace ulcerseg
