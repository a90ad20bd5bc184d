#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <tuple>
#include <vector>

#include "ulcerseg/mask_core.hpp"
#include "ulcerseg/random.hpp"

namespace ulcerseg {

// One element of the dihedral group acting on rasters: rotate
// counter-clockwise by `quarter_turns` x 90 degrees, then optionally mirror
// left-right.
struct TtaVariant {
  int quarter_turns = 0;  // 0..3
  bool hflip = false;

  auto operator<=>(const TtaVariant&) const = default;

  bool is_identity() const { return quarter_turns == 0 && !hflip; }
  // Height/width of the transformed raster.
  std::pair<int, int> output_shape(int height, int width) const;
  // "rot90+hflip" style label; parse_variant accepts the same form.
  std::string label() const;
};

TtaVariant parse_variant(const std::string& text);

// All 8 rotations x {no flip, flip}; the default TTA list.
std::vector<TtaVariant> all_variants();
// The 4 rotations plus a single unrotated horizontal flip.
std::vector<TtaVariant> rotations_and_flip();

ImageBuffer apply_variant(const ImageBuffer& image, TtaVariant v);
ProbMask apply_variant(const ProbMask& mask, TtaVariant v);
BinaryMask apply_variant(const BinaryMask& mask, TtaVariant v);

// Maps a prediction made on apply_variant(x, v) back onto x's pixel grid.
// Throws ValidationError if prob's shape is not the one v produces.
ProbMask invert_variant(const ProbMask& prob, TtaVariant v, int original_height,
                        int original_width);
// Convenience form for callers that only have the transformed mask; the
// original shape is recovered by swapping for odd quarter turns.
ProbMask invert_variant(const ProbMask& prob, TtaVariant v);

using ImagePredictFn = std::function<ProbMask(const ImageBuffer&)>;

// Pixel-wise mean of the back-transformed predictions over `variants`.
// The result does not depend on the order of `variants`.
ProbMask tta_predict(const ImagePredictFn& predict, const ImageBuffer& image,
                     const std::vector<TtaVariant>& variants);

struct AugmentationConfig {
  double scale_limit = 0.1;
  double scale_prob = 0.3;
  double rot90_prob = 0.5;
  double hflip_prob = 0.5;
  double vflip_prob = 0.5;
  double brightness_contrast_limit = 0.15;
  double brightness_contrast_prob = 0.4;
  std::uint64_t rng_seed = 0;

  // Throws ValidationError when a probability leaves [0, 1] or a limit is
  // negative.
  void validate() const;
  // Every probability zeroed: augment() becomes the identity.
  static AugmentationConfig disabled();
};

struct AugmentedPair {
  ImageBuffer image;
  BinaryMask mask;
};

// Draw order per call: scale?, [factor], rot90?, [turns], hflip?, vflip?,
// photometric?, [brightness, contrast]. Geometry is shared between image and
// mask (bilinear vs nearest resampling); photometric shifts touch the image
// only. `rng` is advanced in place.
AugmentedPair augment(const ImageBuffer& image, const BinaryMask& mask,
                      const AugmentationConfig& cfg, Rng& rng);

// Building blocks of augment(), exposed for testing.
ImageBuffer rescale_image(const ImageBuffer& image, double factor);
BinaryMask rescale_mask(const BinaryMask& mask, double factor);
ImageBuffer flip_vertical(const ImageBuffer& image);
BinaryMask flip_vertical(const BinaryMask& mask);
ImageBuffer adjust_brightness_contrast(const ImageBuffer& image, double brightness,
                                       double contrast);

}  // namespace ulcerseg
