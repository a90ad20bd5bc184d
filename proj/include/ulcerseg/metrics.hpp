#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ulcerseg/mask_core.hpp"

namespace ulcerseg {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
  bool gt_empty() const { return tp + fn == 0; }
  bool pred_empty() const { return tp + fp == 0; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

// Throws ValidationError when the masks differ in size.
ConfusionCounts confusion_counts(const BinaryMask& pred, const BinaryMask& gt);

// A ratio whose denominator may be zero; std::nullopt marks "undefined".
using Score = std::optional<double>;

// Data-based scores: counts are summed over all images before the ratio is
// formed. Each throws ValidationError on an empty list.
Score precision(std::span<const ConfusionCounts> counts);  // sum TP / (sum TP + sum FP)
Score recall(std::span<const ConfusionCounts> counts);     // sum TP / (sum TP + sum FN)
Score dice_data(std::span<const ConfusionCounts> counts);  // sum 2TP / (sum 2TP + FP + FN)
Score iou_data(std::span<const ConfusionCounts> counts);   // sum TP / (sum TP + FP + FN)

// Per-image Dice. An image with empty prediction and empty ground truth
// scores 1.0; exactly one side empty scores 0.0.
double image_dice(const ConfusionCounts& counts);
// Mean of image_dice over images.
double dice_image(std::span<const ConfusionCounts> counts);

struct MetricSet {
  Score precision;
  Score recall;
  Score dice_data;
  Score iou_data;
  double dice_image = 0.0;
  std::size_t n_images = 0;

  bool operator==(const MetricSet&) const = default;
};

MetricSet compute_metrics(std::span<const ConfusionCounts> counts);

// ---------------------------------------------------------------------------
// Training losses. `prob` is a flat per-pixel probability vector matching
// gt.pixel_count(); the ProbMask overloads forward to these.

struct LossConfig {
  double dice_weight = 0.5;
  double focal_weight = 0.5;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  double dice_smooth = 1.0;

  void validate() const;
};

// Probabilities are clamped to [kFocalEpsilon, 1 - kFocalEpsilon] inside the
// focal loss.
inline constexpr double kFocalEpsilon = 1e-7;

struct LossAndGradient {
  double value = 0.0;
  std::vector<double> grad;  // d value / d prob, one entry per pixel
};

// 1 - (2 sum(p g) + smooth) / (sum p + sum g + smooth).
double dice_loss(std::span<const double> prob, const BinaryMask& gt, double smooth);
LossAndGradient dice_loss_grad(std::span<const double> prob, const BinaryMask& gt, double smooth);

// Mean over pixels of -alpha_t (1 - p_t)^gamma log(p_t).
double focal_loss(std::span<const double> prob, const BinaryMask& gt, double gamma, double alpha);
LossAndGradient focal_loss_grad(std::span<const double> prob, const BinaryMask& gt, double gamma,
                                double alpha);

double combined_loss(std::span<const double> prob, const BinaryMask& gt, const LossConfig& cfg);
LossAndGradient combined_loss_grad(std::span<const double> prob, const BinaryMask& gt,
                                   const LossConfig& cfg);

inline double dice_loss(const ProbMask& prob, const BinaryMask& gt, double smooth) {
  return dice_loss(prob.data(), gt, smooth);
}
inline double focal_loss(const ProbMask& prob, const BinaryMask& gt, double gamma, double alpha) {
  return focal_loss(prob.data(), gt, gamma, alpha);
}
inline double combined_loss(const ProbMask& prob, const BinaryMask& gt, const LossConfig& cfg) {
  return combined_loss(prob.data(), gt, cfg);
}

}  // namespace ulcerseg
