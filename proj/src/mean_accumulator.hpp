#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "ulcerseg/mask_core.hpp"

namespace ulcerseg::internal {

// Weighted pixel-wise mean. Terms are summed in the order they are added, and
// the result is clamped to the per-pixel [min, max] of the inputs so that the
// mean of identical maps is bit-identical to each of them.
class MeanAccumulator {
 public:
  MeanAccumulator(int height, int width)
      : height_(height),
        width_(width),
        sum_(static_cast<std::size_t>(height) * width, 0.0),
        lo_(sum_.size(), std::numeric_limits<double>::infinity()),
        hi_(sum_.size(), -std::numeric_limits<double>::infinity()) {}

  void add(const ProbMask& mask, double weight = 1.0) {
    const auto values = mask.data();
    for (std::size_t i = 0; i < sum_.size(); ++i) {
      sum_[i] += weight * values[i];
      lo_[i] = std::min(lo_[i], values[i]);
      hi_[i] = std::max(hi_[i], values[i]);
    }
    total_weight_ += weight;
  }

  ProbMask mean() const {
    std::vector<double> out(sum_.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = std::clamp(sum_[i] / total_weight_, lo_[i], hi_[i]);
    }
    return ProbMask(height_, width_, std::move(out));
  }

 private:
  int height_;
  int width_;
  double total_weight_ = 0.0;
  std::vector<double> sum_;
  std::vector<double> lo_;
  std::vector<double> hi_;
};

}  // namespace ulcerseg::internal
