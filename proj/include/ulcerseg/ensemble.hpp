#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ulcerseg/geometry.hpp"
#include "ulcerseg/mask_core.hpp"
#include "ulcerseg/predictor.hpp"

namespace ulcerseg {

// Item -> fold index for k-fold cross-validation.
struct FoldAssignment {
  int k = 0;
  std::vector<int> fold_of;

  std::size_t n_items() const { return fold_of.size(); }
  std::vector<std::size_t> holdout(int fold) const;
  std::vector<std::size_t> training(int fold) const;
  std::vector<std::size_t> fold_sizes() const;

  bool operator==(const FoldAssignment&) const = default;
};

// Shuffled balanced partition: fold sizes are floor(n/k) or ceil(n/k).
// Requires n_items >= k >= 2.
FoldAssignment split_folds(std::size_t n_items, int k, std::uint64_t seed);

// Tab-separated "item_id<TAB>fold" lines under a header. `ids` names the items
// in index order.
std::string fold_table(const FoldAssignment& folds, std::span<const std::string> ids);
// Inverse of fold_table; fills `ids` with the item ids in file order.
FoldAssignment parse_fold_table(const std::string& text, std::vector<std::string>* ids);

// Pixel-wise weighted mean (equal weights when `weights` is empty). Output is
// bounded per pixel by the inputs' min and max.
ProbMask average_probmasks(std::span<const ProbMask> masks, std::span<const double> weights = {});

// Unweighted mean of two model families' maps; commutative.
ProbMask fuse_models(const ProbMask& a, const ProbMask& b);

struct EnsembleMember {
  PredictorHandle predictor;
  double weight = 1.0;
};

// Sub-models of one architecture (e.g. the five cross-validation folds).
struct ModelFamily {
  std::string name;
  std::vector<EnsembleMember> members;
};

struct EnsembleSpec {
  std::vector<ModelFamily> families;

  void validate() const;
};

// Each sub-model's prediction (TTA-wrapped when `tta` is set and the
// predictor is image-dependent) is averaged in member order. Errors are
// rethrown as PredictionError prefixed with the sub-model index.
ProbMask fold_ensemble_predict(std::span<const EnsembleMember> submodels, const ImageBuffer& image,
                               std::string_view image_id,
                               const std::optional<std::vector<TtaVariant>>& tta);
ProbMask fold_ensemble_predict(std::span<const PredictorHandle> submodels,
                               const ImageBuffer& image,
                               const std::optional<std::vector<TtaVariant>>& tta,
                               std::string_view image_id = {});

// Fold ensemble per family, then equal-weight fusion across families.
ProbMask ensemble_predict(const EnsembleSpec& spec, const ImageBuffer& image,
                          std::string_view image_id,
                          const std::optional<std::vector<TtaVariant>>& tta);

}  // namespace ulcerseg
