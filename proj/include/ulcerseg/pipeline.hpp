#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ulcerseg/dataset.hpp"
#include "ulcerseg/ensemble.hpp"
#include "ulcerseg/metrics.hpp"
#include "ulcerseg/postprocess.hpp"

namespace ulcerseg {

// ---------------------------------------------------------------------------
// Cross-validated toy training

struct CrossValidationResult {
  FoldAssignment folds;
  std::vector<TrainingResult> models;  // one per fold, trained on the other k-1
};

// Splits `data` into k folds and trains one toy model per fold, validating on
// the held-out fold. Folds train concurrently; each fold's seed is derived
// from (seed, fold) so results do not depend on scheduling.
CrossValidationResult train_toy_cv(const std::vector<LabeledImage>& data, int k,
                                   std::uint64_t seed, const TrainingSchedule& schedule,
                                   const LossConfig& loss, const AugmentationConfig& augmentation,
                                   int workers = 0);

// The trained folds as one model family.
ModelFamily toy_family(const CrossValidationResult& cv, const std::string& name = "toy");

// ---------------------------------------------------------------------------
// Inference

struct InferenceResult {
  std::vector<std::string> ids;                 // dataset order
  std::vector<std::optional<ProbMask>> fused;   // per id, empty on failure
  std::vector<std::optional<BinaryMask>> masks; // per id, empty on failure
  std::map<std::string, std::string> failures;  // id -> error message

  std::map<std::string, BinaryMask> mask_map() const;
};

// Per image: fold ensemble within each family (TTA inside each sub-model),
// fusion across families, then post-processing. A failing id is recorded in
// `failures` and the run continues.
InferenceResult run_inference(const DatasetIndex& index, const EnsembleSpec& spec,
                              const std::optional<std::vector<TtaVariant>>& tta,
                              const PostprocessConfig& postprocess_cfg, int workers = 0);

// out_dir/prob/<id>.png (8-bit, round(p * 255)), out_dir/masks/<id>.png
// (0/255) and out_dir/inference.json listing ids and failures.
void write_inference(const InferenceResult& result, const std::filesystem::path& out_dir,
                     const nlohmann::json& config_echo);

// Reads every <id>.png in a directory as a binary mask, keyed by stem.
std::map<std::string, BinaryMask> read_mask_dir(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Evaluation

enum class ZeroDiceCause { kFalsePositiveOnEmptyGt, kMissedLesion, kDisjoint };

std::string_view cause_name(ZeroDiceCause cause);
ZeroDiceCause cause_from_name(std::string_view name);

struct ImageScore {
  std::string id;
  ConfusionCounts counts;
  double dice = 0.0;
  bool missing_prediction = false;

  bool operator==(const ImageScore&) const = default;
};

struct ZeroDiceEntry {
  std::string id;
  ZeroDiceCause cause;

  bool operator==(const ZeroDiceEntry&) const = default;
};

// poor: 0 < Dice < 0.6. zero: Dice == 0, tagged with the reason.
struct FailureBuckets {
  std::vector<std::string> poor;
  std::vector<ZeroDiceEntry> zero;

  bool operator==(const FailureBuckets&) const = default;
};

inline constexpr double kPoorDiceThreshold = 0.6;

FailureBuckets bucket_failures(const std::vector<ImageScore>& images);

struct EvaluationReport {
  std::vector<ImageScore> images;  // sorted by id
  MetricSet aggregate;
  FailureBuckets failures;
  std::vector<std::string> missing;  // ids scored as empty predictions
  nlohmann::json config;             // echo of the settings that produced it

  bool operator==(const EvaluationReport&) const = default;
};

// Scores every record of `index` (all must carry ground truth). Ids without a
// prediction raise DataError unless allow_missing, in which case they are
// scored as empty predictions and listed in `missing`.
EvaluationReport evaluate(const std::map<std::string, BinaryMask>& predictions,
                          const DatasetIndex& index, bool allow_missing,
                          const nlohmann::json& config_echo = nlohmann::json::object(),
                          int workers = 0);

// Builds a report directly from per-image counts.
EvaluationReport make_report(std::vector<ImageScore> images, std::vector<std::string> missing,
                             nlohmann::json config_echo);

std::string report_to_json(const EvaluationReport& report);
// Parses and re-derives aggregates, per-image Dice and buckets from the stored
// counts; any disagreement throws DataError.
EvaluationReport report_from_json(const std::string& text);

// One row per image plus a final aggregate row.
std::string report_to_csv(const EvaluationReport& report);
// Console table with the columns image-based Dice, precision, recall,
// data-based IoU, data-based Dice (percent, two decimals), followed by the
// failure buckets.
std::string render_table(const EvaluationReport& report, const std::string& row_label = "Ensemble");

std::string format_percent(const Score& score);

}  // namespace ulcerseg
