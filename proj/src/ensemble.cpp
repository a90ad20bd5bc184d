#include "ulcerseg/ensemble.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "mean_accumulator.hpp"

namespace ulcerseg {

std::vector<std::size_t> FoldAssignment::holdout(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::training(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int f : fold_of) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

FoldAssignment split_folds(std::size_t n_items, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("split_folds: k must be at least 2, got " + std::to_string(k));
  if (n_items < static_cast<std::size_t>(k)) {
    throw ValidationError("split_folds: " + std::to_string(n_items) +
                          " items cannot fill " + std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order(n_items);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(order.begin(), order.end(), rng);

  FoldAssignment out;
  out.k = k;
  out.fold_of.resize(n_items);
  for (std::size_t pos = 0; pos < n_items; ++pos) {
    out.fold_of[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  }
  return out;
}

std::string fold_table(const FoldAssignment& folds, std::span<const std::string> ids) {
  if (ids.size() != folds.n_items()) {
    throw ValidationError("fold_table: " + std::to_string(ids.size()) + " ids for " +
                          std::to_string(folds.n_items()) + " items");
  }
  std::ostringstream os;
  os << "# folds=" << folds.k << "\nitem_id\tfold\n";
  for (std::size_t i = 0; i < ids.size(); ++i) os << ids[i] << '\t' << folds.fold_of[i] << '\n';
  return os.str();
}

FoldAssignment parse_fold_table(const std::string& text, std::vector<std::string>* ids) {
  std::istringstream is(text);
  std::string line;
  FoldAssignment out;
  ids->clear();
  bool header_seen = false;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("# folds=", 0) == 0) {
      out.k = std::stoi(line.substr(8));
      continue;
    }
    if (line[0] == '#') continue;
    if (!header_seen) {
      if (line != "item_id\tfold") throw DataError("fold table: missing header");
      header_seen = true;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("fold table line " + std::to_string(line_no) + ": expected id<TAB>fold");
    }
    ids->push_back(line.substr(0, tab));
    out.fold_of.push_back(std::stoi(line.substr(tab + 1)));
  }
  if (out.k < 2) throw DataError("fold table: missing or invalid '# folds=' line");
  for (int f : out.fold_of) {
    if (f < 0 || f >= out.k) throw DataError("fold table: fold index out of range");
  }
  return out;
}

ProbMask average_probmasks(std::span<const ProbMask> masks, std::span<const double> weights) {
  if (masks.empty()) throw ValidationError("average_probmasks: empty list");
  if (!weights.empty() && weights.size() != masks.size()) {
    throw ValidationError("average_probmasks: " + std::to_string(weights.size()) +
                          " weights for " + std::to_string(masks.size()) + " masks");
  }
  internal::MeanAccumulator acc(masks[0].height(), masks[0].width());
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (!same_shape(masks[i], masks[0])) {
      throw ValidationError("average_probmasks: mask " + std::to_string(i) + " is " +
                            std::to_string(masks[i].height()) + "x" +
                            std::to_string(masks[i].width()) + ", expected " +
                            std::to_string(masks[0].height()) + "x" +
                            std::to_string(masks[0].width()));
    }
    const double w = weights.empty() ? 1.0 : weights[i];
    if (!(w > 0.0)) throw ValidationError("average_probmasks: weights must be positive");
    acc.add(masks[i], w);
  }
  return acc.mean();
}

ProbMask fuse_models(const ProbMask& a, const ProbMask& b) {
  if (!same_shape(a, b)) throw ValidationError("fuse_models: mask dimensions differ");
  std::vector<double> out(a.pixel_count());
  const auto pa = a.data();
  const auto pb = b.data();
  // a + b is commutative in IEEE arithmetic, so fuse(a, b) == fuse(b, a) exactly.
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(0.5 * (pa[i] + pb[i]), 0.0, 1.0);
  return ProbMask(a.height(), a.width(), std::move(out));
}

void EnsembleSpec::validate() const {
  if (families.empty()) throw ValidationError("ensemble has no model families");
  for (const auto& fam : families) {
    if (fam.members.empty()) {
      throw ValidationError("model family '" + fam.name + "' has no members");
    }
    for (const auto& m : fam.members) {
      if (!m.predictor) throw ValidationError("model family '" + fam.name + "' has a null member");
      if (!(m.weight > 0.0)) {
        throw ValidationError("model family '" + fam.name + "' has a non-positive weight");
      }
    }
  }
}

ProbMask fold_ensemble_predict(std::span<const EnsembleMember> submodels, const ImageBuffer& image,
                               std::string_view image_id,
                               const std::optional<std::vector<TtaVariant>>& tta) {
  if (submodels.empty()) throw ValidationError("fold_ensemble_predict: no sub-models");
  std::vector<ProbMask> preds;
  std::vector<double> weights;
  preds.reserve(submodels.size());
  for (std::size_t i = 0; i < submodels.size(); ++i) {
    const Predictor& model = *submodels[i].predictor;
    try {
      ProbMask p;
      if (tta && model.image_dependent()) {
        p = tta_predict([&](const ImageBuffer& x) { return model.predict(x, image_id); }, image,
                        *tta);
      } else {
        p = model.predict(image, image_id);
      }
      if (!same_shape(p, image)) {
        throw PredictionError("returned " + std::to_string(p.height()) + "x" +
                              std::to_string(p.width()) + " map for a " +
                              std::to_string(image.height()) + "x" +
                              std::to_string(image.width()) + " image");
      }
      preds.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw PredictionError("sub-model " + std::to_string(i) + " (" + model.name() +
                            "): " + e.what());
    }
    weights.push_back(submodels[i].weight);
  }
  return average_probmasks(preds, weights);
}

ProbMask fold_ensemble_predict(std::span<const PredictorHandle> submodels,
                               const ImageBuffer& image,
                               const std::optional<std::vector<TtaVariant>>& tta,
                               std::string_view image_id) {
  std::vector<EnsembleMember> members;
  members.reserve(submodels.size());
  for (const auto& p : submodels) members.push_back({p, 1.0});
  return fold_ensemble_predict(members, image, image_id, tta);
}

ProbMask ensemble_predict(const EnsembleSpec& spec, const ImageBuffer& image,
                          std::string_view image_id,
                          const std::optional<std::vector<TtaVariant>>& tta) {
  spec.validate();
  std::vector<ProbMask> per_family;
  per_family.reserve(spec.families.size());
  for (const auto& fam : spec.families) {
    try {
      per_family.push_back(fold_ensemble_predict(fam.members, image, image_id, tta));
    } catch (const PredictionError& e) {
      throw PredictionError("family '" + fam.name + "': " + e.what());
    }
  }
  if (per_family.size() == 2) return fuse_models(per_family[0], per_family[1]);
  return average_probmasks(per_family);
}

}  // namespace ulcerseg
