#include "ulcerseg/postprocess.hpp"

#include <numeric>
#include <string>

namespace ulcerseg {
namespace {

class DisjointSet {
 public:
  std::int32_t make() {
    parent_.push_back(static_cast<std::int32_t>(parent_.size()));
    return parent_.back();
  }
  std::int32_t find(std::int32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }

 private:
  std::vector<std::int32_t> parent_;
};

// Two-pass union-find labelling of pixels whose mask value equals `value`.
LabelMap label_value(const BinaryMask& mask, std::uint8_t value, Connectivity connectivity) {
  const int h = mask.height();
  const int w = mask.width();
  const auto data = mask.data();
  LabelMap out{h, w, std::vector<std::int32_t>(data.size(), -1), 0};

  // Previously visited neighbours in raster order.
  static constexpr int kBack4[][2] = {{-1, 0}, {0, -1}};
  static constexpr int kBack8[][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}};
  const bool eight = connectivity == Connectivity::kEight;
  const auto* offsets = eight ? kBack8 : kBack4;
  const int n_offsets = eight ? 4 : 2;

  DisjointSet sets;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      if (data[i] != value) continue;
      std::int32_t label = -1;
      for (int k = 0; k < n_offsets; ++k) {
        const int nr = r + offsets[k][0];
        const int nc = c + offsets[k][1];
        if (nr < 0 || nc < 0 || nc >= w) continue;
        const std::int32_t nl = out.labels[static_cast<std::size_t>(nr) * w + nc];
        if (nl < 0) continue;
        if (label < 0) {
          label = nl;
        } else {
          sets.unite(label, nl);
        }
      }
      out.labels[i] = label >= 0 ? label : sets.make();
    }
  }

  // Final ids in order of each component's first pixel.
  std::vector<std::int32_t> final_id;
  for (auto& l : out.labels) {
    if (l < 0) {
      l = 0;
      continue;
    }
    const std::int32_t root = sets.find(l);
    if (static_cast<std::size_t>(root) >= final_id.size()) final_id.resize(root + 1, 0);
    if (final_id[root] == 0) final_id[root] = ++out.count;
    l = final_id[root];
  }
  return out;
}

}  // namespace

Connectivity connectivity_from_int(int value) {
  if (value == 4) return Connectivity::kFour;
  if (value == 8) return Connectivity::kEight;
  throw ValidationError("connectivity must be 4 or 8, got " + std::to_string(value));
}

void PostprocessConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ValidationError("threshold must lie in (0, 1), got " + std::to_string(threshold));
  }
  if (min_object_area < 0) throw ValidationError("min_object_area must be non-negative");
}

std::vector<std::int64_t> LabelMap::areas() const {
  std::vector<std::int64_t> out(static_cast<std::size_t>(count) + 1, 0);
  for (auto l : labels) ++out[static_cast<std::size_t>(l)];
  return out;
}

BinaryMask binarize(const ProbMask& prob, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ValidationError("binarize: threshold must lie in (0, 1), got " +
                          std::to_string(threshold));
  }
  const auto p = prob.data();
  std::vector<std::uint8_t> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] >= threshold ? 1 : 0;
  return BinaryMask(prob.height(), prob.width(), std::move(out));
}

LabelMap connected_components(const BinaryMask& mask, Connectivity connectivity) {
  return label_value(mask, 1, connectivity);
}

BinaryMask fill_holes(const BinaryMask& mask, Connectivity connectivity) {
  const int h = mask.height();
  const int w = mask.width();
  if (h == 0 || w == 0) return mask;
  const LabelMap bg = label_value(mask, 0, dual(connectivity));
  std::vector<std::uint8_t> touches(static_cast<std::size_t>(bg.count) + 1, 0);
  for (int r = 0; r < h; ++r) {
    touches[bg.at(r, 0)] = 1;
    touches[bg.at(r, w - 1)] = 1;
  }
  for (int c = 0; c < w; ++c) {
    touches[bg.at(0, c)] = 1;
    touches[bg.at(h - 1, c)] = 1;
  }
  std::vector<std::uint8_t> out(mask.data().begin(), mask.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto l = bg.labels[i];
    if (l > 0 && !touches[l]) out[i] = 1;
  }
  return BinaryMask(h, w, std::move(out));
}

BinaryMask remove_small_objects(const BinaryMask& mask, std::int64_t min_area,
                                Connectivity connectivity) {
  if (min_area < 0) throw ValidationError("remove_small_objects: min_area must be non-negative");
  if (min_area <= 1) return mask;  // every component has area >= 1
  const LabelMap fg = connected_components(mask, connectivity);
  const auto areas = fg.areas();
  std::vector<std::uint8_t> out(mask.data().begin(), mask.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto l = fg.labels[i];
    if (l > 0 && areas[l] < min_area) out[i] = 0;
  }
  return BinaryMask(mask.height(), mask.width(), std::move(out));
}

BinaryMask postprocess(const ProbMask& prob, const PostprocessConfig& cfg) {
  cfg.validate();
  const BinaryMask bin = binarize(prob, cfg.threshold);
  const BinaryMask filled = fill_holes(bin, cfg.connectivity);
  return remove_small_objects(filled, cfg.min_object_area, cfg.connectivity);
}

ProbMask to_prob(const BinaryMask& mask) {
  const auto m = mask.data();
  std::vector<double> out(m.begin(), m.end());
  return ProbMask(mask.height(), mask.width(), std::move(out));
}

}  // namespace ulcerseg
