#include "ulcerseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ulcerseg {
namespace {

ConfusionCounts sum_counts(std::span<const ConfusionCounts> counts, const char* what) {
  if (counts.empty()) throw ValidationError(std::string(what) + ": no images");
  ConfusionCounts total;
  for (const auto& c : counts) total += c;
  return total;
}

Score ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

void check_loss_inputs(std::span<const double> prob, const BinaryMask& gt, const char* what) {
  if (prob.size() != gt.pixel_count()) {
    throw ValidationError(std::string(what) + ": " + std::to_string(prob.size()) +
                          " probabilities for a " + std::to_string(gt.pixel_count()) +
                          "-pixel mask");
  }
}

}  // namespace

ConfusionCounts confusion_counts(const BinaryMask& pred, const BinaryMask& gt) {
  if (!same_shape(pred, gt)) {
    throw ValidationError("confusion_counts: prediction is " + std::to_string(pred.height()) +
                          "x" + std::to_string(pred.width()) + ", ground truth is " +
                          std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
  }
  // Index by (pred << 1 | gt).
  std::int64_t tally[4] = {0, 0, 0, 0};
  const auto p = pred.data();
  const auto g = gt.data();
  for (std::size_t i = 0; i < p.size(); ++i) ++tally[(p[i] << 1) | g[i]];
  return ConfusionCounts{tally[3], tally[2], tally[1], tally[0]};
}

Score precision(std::span<const ConfusionCounts> counts) {
  const auto s = sum_counts(counts, "precision");
  return ratio(s.tp, s.tp + s.fp);
}

Score recall(std::span<const ConfusionCounts> counts) {
  const auto s = sum_counts(counts, "recall");
  return ratio(s.tp, s.tp + s.fn);
}

Score dice_data(std::span<const ConfusionCounts> counts) {
  const auto s = sum_counts(counts, "dice_data");
  return ratio(2 * s.tp, 2 * s.tp + s.fp + s.fn);
}

Score iou_data(std::span<const ConfusionCounts> counts) {
  const auto s = sum_counts(counts, "iou_data");
  return ratio(s.tp, s.tp + s.fp + s.fn);
}

double image_dice(const ConfusionCounts& c) {
  const std::int64_t den = 2 * c.tp + c.fp + c.fn;
  if (den == 0) return 1.0;
  return static_cast<double>(2 * c.tp) / static_cast<double>(den);
}

double dice_image(std::span<const ConfusionCounts> counts) {
  if (counts.empty()) throw ValidationError("dice_image: no images");
  double sum = 0.0;
  for (const auto& c : counts) sum += image_dice(c);
  return sum / static_cast<double>(counts.size());
}

MetricSet compute_metrics(std::span<const ConfusionCounts> counts) {
  MetricSet m;
  m.precision = precision(counts);
  m.recall = recall(counts);
  m.dice_data = dice_data(counts);
  m.iou_data = iou_data(counts);
  m.dice_image = dice_image(counts);
  m.n_images = counts.size();
  return m;
}

void LossConfig::validate() const {
  if (!(dice_weight >= 0.0) || !(focal_weight >= 0.0)) {
    throw ValidationError("loss weights must be non-negative");
  }
  if (!(focal_gamma >= 0.0)) throw ValidationError("focal_gamma must be non-negative");
  if (!(focal_alpha >= 0.0 && focal_alpha <= 1.0)) {
    throw ValidationError("focal_alpha must be in [0, 1]");
  }
  if (!(dice_smooth > 0.0)) throw ValidationError("dice_smooth must be positive");
}

double dice_loss(std::span<const double> prob, const BinaryMask& gt, double smooth) {
  check_loss_inputs(prob, gt, "dice_loss");
  const auto g = gt.data();
  double inter = 0.0, sum_p = 0.0, sum_g = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    inter += prob[i] * g[i];
    sum_p += prob[i];
    sum_g += g[i];
  }
  return 1.0 - (2.0 * inter + smooth) / (sum_p + sum_g + smooth);
}

LossAndGradient dice_loss_grad(std::span<const double> prob, const BinaryMask& gt,
                               double smooth) {
  check_loss_inputs(prob, gt, "dice_loss");
  const auto g = gt.data();
  double inter = 0.0, sum_p = 0.0, sum_g = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    inter += prob[i] * g[i];
    sum_p += prob[i];
    sum_g += g[i];
  }
  const double num = 2.0 * inter + smooth;
  const double den = sum_p + sum_g + smooth;
  LossAndGradient out;
  out.value = 1.0 - num / den;
  out.grad.resize(prob.size());
  // d/dp_i of -num/den = -(2 g_i den - num) / den^2
  const double inv_den2 = 1.0 / (den * den);
  for (std::size_t i = 0; i < prob.size(); ++i) {
    out.grad[i] = -(2.0 * g[i] * den - num) * inv_den2;
  }
  return out;
}

double focal_loss(std::span<const double> prob, const BinaryMask& gt, double gamma,
                  double alpha) {
  return focal_loss_grad(prob, gt, gamma, alpha).value;
}

LossAndGradient focal_loss_grad(std::span<const double> prob, const BinaryMask& gt, double gamma,
                                double alpha) {
  check_loss_inputs(prob, gt, "focal_loss");
  const auto g = gt.data();
  const double n = static_cast<double>(prob.size());
  LossAndGradient out;
  out.grad.assign(prob.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double raw = prob[i];
    const double p = std::clamp(raw, kFocalEpsilon, 1.0 - kFocalEpsilon);
    const bool fg = g[i] != 0;
    const double pt = fg ? p : 1.0 - p;
    const double at = fg ? alpha : 1.0 - alpha;
    const double q = 1.0 - pt;
    const double log_pt = std::log(pt);
    const double q_gamma = std::pow(q, gamma);
    total += -at * q_gamma * log_pt;

    // d/dpt of -at q^gamma log(pt) = at (gamma q^(gamma-1) log(pt) - q^gamma / pt)
    const double dq_term = gamma == 0.0 ? 0.0 : gamma * std::pow(q, gamma - 1.0) * log_pt;
    double d_pt = at * (dq_term - q_gamma / pt);
    // The clamp has zero slope outside its range.
    if (raw < kFocalEpsilon || raw > 1.0 - kFocalEpsilon) d_pt = 0.0;
    out.grad[i] = (fg ? d_pt : -d_pt) / n;
  }
  out.value = prob.empty() ? 0.0 : total / n;
  return out;
}

double combined_loss(std::span<const double> prob, const BinaryMask& gt, const LossConfig& cfg) {
  return cfg.dice_weight * dice_loss(prob, gt, cfg.dice_smooth) +
         cfg.focal_weight * focal_loss(prob, gt, cfg.focal_gamma, cfg.focal_alpha);
}

LossAndGradient combined_loss_grad(std::span<const double> prob, const BinaryMask& gt,
                                   const LossConfig& cfg) {
  auto dice = dice_loss_grad(prob, gt, cfg.dice_smooth);
  const auto focal = focal_loss_grad(prob, gt, cfg.focal_gamma, cfg.focal_alpha);
  LossAndGradient out;
  out.value = cfg.dice_weight * dice.value + cfg.focal_weight * focal.value;
  out.grad = std::move(dice.grad);
  for (std::size_t i = 0; i < out.grad.size(); ++i) {
    out.grad[i] = cfg.dice_weight * out.grad[i] + cfg.focal_weight * focal.grad[i];
  }
  return out;
}

}  // namespace ulcerseg
