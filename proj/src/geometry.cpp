#include "ulcerseg/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "mean_accumulator.hpp"

namespace ulcerseg {
namespace {

struct Shape {
  int height;
  int width;
};

// Row-major index into the *input* raster read by output pixel (row, col).
// Output shape is `out`, input shape is `in`.
std::size_t source_index(TtaVariant v, Shape in, Shape out, int row, int col) {
  if (v.hflip) col = out.width - 1 - col;
  int sr = row;
  int sc = col;
  switch (v.quarter_turns) {
    case 1:
      sr = col;
      sc = in.width - 1 - row;
      break;
    case 2:
      sr = in.height - 1 - row;
      sc = in.width - 1 - col;
      break;
    case 3:
      sr = in.height - 1 - col;
      sc = row;
      break;
    default:
      break;
  }
  return static_cast<std::size_t>(sr) * in.width + sc;
}

void check_variant(TtaVariant v) {
  if (v.quarter_turns < 0 || v.quarter_turns > 3) {
    throw ValidationError("TTA variant quarter_turns must be in 0..3, got " +
                          std::to_string(v.quarter_turns));
  }
}

// Gathers `channels` values per pixel through the variant's index map.
template <typename T>
std::vector<T> gather(std::span<const T> src, Shape in, TtaVariant v, int channels,
                      Shape* out_shape) {
  check_variant(v);
  const auto [oh, ow] = v.output_shape(in.height, in.width);
  const Shape out{oh, ow};
  std::vector<T> dst(src.size());
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      const std::size_t s = source_index(v, in, out, r, c) * channels;
      const std::size_t d = (static_cast<std::size_t>(r) * ow + c) * channels;
      for (int k = 0; k < channels; ++k) dst[d + k] = src[s + k];
    }
  }
  *out_shape = out;
  return dst;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

int scaled_extent(int extent, double factor) {
  return std::max(1, static_cast<int>(std::lround(extent * factor)));
}

// Offset of the original-size window inside the resampled extent: positive
// means crop from that position, negative means pad by its magnitude.
int center_offset(int resampled, int original) { return (resampled - original) / 2; }

}  // namespace

std::pair<int, int> TtaVariant::output_shape(int height, int width) const {
  if (quarter_turns % 2 == 1) return {width, height};
  return {height, width};
}

std::string TtaVariant::label() const {
  std::string s = "rot" + std::to_string(quarter_turns * 90);
  if (hflip) s += "+hflip";
  return s;
}

TtaVariant parse_variant(const std::string& text) {
  for (const TtaVariant& v : all_variants()) {
    if (v.label() == text) return v;
  }
  throw ValidationError("unknown TTA variant '" + text +
                        "' (expected rot0|rot90|rot180|rot270 with optional +hflip)");
}

std::vector<TtaVariant> all_variants() {
  std::vector<TtaVariant> out;
  for (bool flip : {false, true}) {
    for (int k = 0; k < 4; ++k) out.push_back({k, flip});
  }
  return out;
}

std::vector<TtaVariant> rotations_and_flip() {
  return {{0, false}, {1, false}, {2, false}, {3, false}, {0, true}};
}

ImageBuffer apply_variant(const ImageBuffer& image, TtaVariant v) {
  Shape out{};
  auto data = gather(image.data(), {image.height(), image.width()}, v, ImageBuffer::kChannels,
                     &out);
  return ImageBuffer(out.height, out.width, std::move(data));
}

ProbMask apply_variant(const ProbMask& mask, TtaVariant v) {
  Shape out{};
  auto data = gather(mask.data(), {mask.height(), mask.width()}, v, 1, &out);
  return ProbMask(out.height, out.width, std::move(data));
}

BinaryMask apply_variant(const BinaryMask& mask, TtaVariant v) {
  Shape out{};
  auto data = gather(mask.data(), {mask.height(), mask.width()}, v, 1, &out);
  return BinaryMask(out.height, out.width, std::move(data));
}

ProbMask invert_variant(const ProbMask& prob, TtaVariant v, int original_height,
                        int original_width) {
  check_variant(v);
  const auto [eh, ew] = v.output_shape(original_height, original_width);
  if (prob.height() != eh || prob.width() != ew) {
    throw ValidationError("invert_variant(" + v.label() + "): expected " + std::to_string(eh) +
                          "x" + std::to_string(ew) + " mask, got " +
                          std::to_string(prob.height()) + "x" + std::to_string(prob.width()));
  }
  // Scatter each transformed pixel back to the position it was read from.
  const Shape in{original_height, original_width};
  const Shape out{eh, ew};
  const auto src = prob.data();
  std::vector<double> dst(src.size());
  for (int r = 0; r < eh; ++r) {
    for (int c = 0; c < ew; ++c) {
      dst[source_index(v, in, out, r, c)] = src[static_cast<std::size_t>(r) * ew + c];
    }
  }
  return ProbMask(original_height, original_width, std::move(dst));
}

ProbMask invert_variant(const ProbMask& prob, TtaVariant v) {
  const auto [h, w] = v.output_shape(prob.height(), prob.width());
  return invert_variant(prob, v, h, w);
}

ProbMask tta_predict(const ImagePredictFn& predict, const ImageBuffer& image,
                     const std::vector<TtaVariant>& variants) {
  if (variants.empty()) throw ValidationError("tta_predict: variant list is empty");
  std::vector<TtaVariant> ordered = variants;
  std::sort(ordered.begin(), ordered.end());

  internal::MeanAccumulator acc(image.height(), image.width());
  for (const TtaVariant& v : ordered) {
    const ProbMask pred = predict(apply_variant(image, v));
    const auto [eh, ew] = v.output_shape(image.height(), image.width());
    if (pred.height() != eh || pred.width() != ew) {
      throw ValidationError("TTA variant " + v.label() + ": predictor returned " +
                            std::to_string(pred.height()) + "x" + std::to_string(pred.width()) +
                            ", expected " + std::to_string(eh) + "x" + std::to_string(ew));
    }
    acc.add(invert_variant(pred, v, image.height(), image.width()));
  }
  return acc.mean();
}

void AugmentationConfig::validate() const {
  for (double p : {scale_prob, rot90_prob, hflip_prob, vflip_prob, brightness_contrast_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError("augmentation probability " + std::to_string(p) +
                            " is outside [0, 1]");
    }
  }
  if (!(scale_limit >= 0.0) || !(brightness_contrast_limit >= 0.0)) {
    throw ValidationError("augmentation limits must be non-negative");
  }
  if (scale_limit >= 1.0) throw ValidationError("scale_limit must be below 1");
}

AugmentationConfig AugmentationConfig::disabled() {
  AugmentationConfig cfg;
  cfg.scale_prob = cfg.rot90_prob = cfg.hflip_prob = cfg.vflip_prob = 0.0;
  cfg.brightness_contrast_prob = 0.0;
  return cfg;
}

ImageBuffer rescale_image(const ImageBuffer& image, double factor) {
  const int h = image.height();
  const int w = image.width();
  const int nh = scaled_extent(h, factor);
  const int nw = scaled_extent(w, factor);
  const int off_r = center_offset(nh, h);
  const int off_c = center_offset(nw, w);
  const double sy = static_cast<double>(h) / nh;
  const double sx = static_cast<double>(w) / nw;

  std::vector<std::uint8_t> out(static_cast<std::size_t>(h) * w * 3, 0);
  for (int r = 0; r < h; ++r) {
    const int rr = r + off_r;  // row in the resampled raster
    if (rr < 0 || rr >= nh) continue;
    const double y = std::clamp((rr + 0.5) * sy - 0.5, 0.0, h - 1.0);
    const int y0 = static_cast<int>(y);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fy = y - y0;
    for (int c = 0; c < w; ++c) {
      const int cc = c + off_c;
      if (cc < 0 || cc >= nw) continue;
      const double x = std::clamp((cc + 0.5) * sx - 0.5, 0.0, w - 1.0);
      const int x0 = static_cast<int>(x);
      const int x1 = std::min(x0 + 1, w - 1);
      const double fx = x - x0;
      for (int k = 0; k < 3; ++k) {
        const double top = image.at(y0, x0, k) * (1 - fx) + image.at(y0, x1, k) * fx;
        const double bottom = image.at(y1, x0, k) * (1 - fx) + image.at(y1, x1, k) * fx;
        out[(static_cast<std::size_t>(r) * w + c) * 3 + k] = to_byte(top * (1 - fy) + bottom * fy);
      }
    }
  }
  return ImageBuffer(h, w, std::move(out));
}

BinaryMask rescale_mask(const BinaryMask& mask, double factor) {
  const int h = mask.height();
  const int w = mask.width();
  const int nh = scaled_extent(h, factor);
  const int nw = scaled_extent(w, factor);
  const int off_r = center_offset(nh, h);
  const int off_c = center_offset(nw, w);

  std::vector<std::uint8_t> out(static_cast<std::size_t>(h) * w, 0);
  for (int r = 0; r < h; ++r) {
    const int rr = r + off_r;
    if (rr < 0 || rr >= nh) continue;
    const int sr = std::min(static_cast<int>((rr + 0.5) * h / nh), h - 1);
    for (int c = 0; c < w; ++c) {
      const int cc = c + off_c;
      if (cc < 0 || cc >= nw) continue;
      const int sc = std::min(static_cast<int>((cc + 0.5) * w / nw), w - 1);
      out[static_cast<std::size_t>(r) * w + c] = mask.at(sr, sc) ? 1 : 0;
    }
  }
  return BinaryMask(h, w, std::move(out));
}

ImageBuffer flip_vertical(const ImageBuffer& image) {
  // Vertical flip == rotate 180 then mirror left-right.
  return apply_variant(image, TtaVariant{2, true});
}

BinaryMask flip_vertical(const BinaryMask& mask) { return apply_variant(mask, TtaVariant{2, true}); }

ImageBuffer adjust_brightness_contrast(const ImageBuffer& image, double brightness,
                                       double contrast) {
  const auto src = image.data();
  std::vector<std::uint8_t> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    out[i] = to_byte((src[i] - 128.0) * (1.0 + contrast) + 128.0 + 255.0 * brightness);
  }
  return ImageBuffer(image.height(), image.width(), std::move(out));
}

AugmentedPair augment(const ImageBuffer& image, const BinaryMask& mask,
                      const AugmentationConfig& cfg, Rng& rng) {
  if (!same_shape(image, mask)) {
    throw ValidationError("augment: image and mask dimensions differ");
  }
  AugmentedPair out{image, mask};
  if (rng.bernoulli(cfg.scale_prob)) {
    const double factor = 1.0 + rng.uniform(-cfg.scale_limit, cfg.scale_limit);
    out.image = rescale_image(out.image, factor);
    out.mask = rescale_mask(out.mask, factor);
  }
  if (rng.bernoulli(cfg.rot90_prob)) {
    const TtaVariant rot{static_cast<int>(1 + rng.below(3)), false};
    out.image = apply_variant(out.image, rot);
    out.mask = apply_variant(out.mask, rot);
  }
  if (rng.bernoulli(cfg.hflip_prob)) {
    out.image = apply_variant(out.image, TtaVariant{0, true});
    out.mask = apply_variant(out.mask, TtaVariant{0, true});
  }
  if (rng.bernoulli(cfg.vflip_prob)) {
    out.image = flip_vertical(out.image);
    out.mask = flip_vertical(out.mask);
  }
  if (rng.bernoulli(cfg.brightness_contrast_prob)) {
    const double limit = cfg.brightness_contrast_limit;
    const double brightness = rng.uniform(-limit, limit);
    const double contrast = rng.uniform(-limit, limit);
    out.image = adjust_brightness_contrast(out.image, brightness, contrast);
  }
  return out;
}

}  // namespace ulcerseg
