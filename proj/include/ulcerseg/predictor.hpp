#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ulcerseg/geometry.hpp"
#include "ulcerseg/mask_core.hpp"
#include "ulcerseg/metrics.hpp"

namespace ulcerseg {

// Anything that turns an image into a foreground probability map of the same
// size. Implementations must be safe to call concurrently.
class Predictor {
 public:
  enum class Kind { kFileBacked, kToy, kConstant, kCustom };

  virtual ~Predictor() = default;

  virtual Kind kind() const = 0;
  virtual const std::string& name() const = 0;
  // `image_id` is only consulted by file-backed predictors.
  virtual ProbMask predict(const ImageBuffer& image, std::string_view image_id = {}) const = 0;
  // False when the output does not depend on the pixels it is given (stored
  // maps); TTA is skipped for such predictors.
  virtual bool image_dependent() const { return true; }
};

using PredictorHandle = std::shared_ptr<const Predictor>;

std::string_view kind_name(Predictor::Kind kind);

PredictorHandle make_constant_predictor(double value, std::string name = "constant");
PredictorHandle make_function_predictor(std::string name,
                                        std::function<ProbMask(const ImageBuffer&)> fn);

// ---------------------------------------------------------------------------
// Learning-rate schedule

struct TrainingSchedule {
  int epochs = 80;
  double initial_lr = 0.001;
  int decay_every = 25;
  double decay_factor = 0.1;
  int batch_size = 4;

  void validate() const;
};

// initial_lr * decay_factor^floor(epoch / decay_every), by repeated
// multiplication so the decayed values match their decimal literals.
double lr_at(const TrainingSchedule& schedule, int epoch);

// ---------------------------------------------------------------------------
// Toy pixel classifier

inline constexpr int kFeatureCount = 5;  // R, G, B, 3x3 mean, 3x3 std

// Row-major per-pixel features, kFeatureCount values per pixel. RGB scaled to
// [0, 1]; the neighbourhood statistics are taken over the channel-mean
// intensity with clamped-edge 3x3 windows.
struct PixelFeatures {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  const double* pixel(std::size_t index) const { return values.data() + index * kFeatureCount; }
};

PixelFeatures extract_features(const ImageBuffer& image);

// Logistic model: weights[0..4] per feature, weights[5] bias.
struct ToyModel {
  std::array<double, kFeatureCount + 1> weights{};

  bool operator==(const ToyModel&) const = default;
};

ProbMask predict_toy(const ToyModel& model, const ImageBuffer& image);
ProbMask predict_toy(const ToyModel& model, const PixelFeatures& features);

struct LabeledImage {
  ImageBuffer image;
  BinaryMask mask;
};

struct TrainingResult {
  ToyModel model;            // best checkpoint
  ToyModel final_model;      // weights after the last epoch
  int best_epoch = 0;
  std::size_t gradient_steps = 0;
  std::vector<double> epoch_loss;      // mean training loss per epoch
  std::vector<double> validation_dice; // data-based Dice per epoch, 0.5 threshold
};

// Mini-batch Adam on combined_loss with per-sample augmentation. The
// checkpoint with the highest validation data-based Dice is returned (earliest
// epoch on ties). Throws PredictionError naming the epoch on a non-finite loss.
TrainingResult train_toy(const std::vector<LabeledImage>& train,
                         const std::vector<LabeledImage>& validation,
                         const TrainingSchedule& schedule, const LossConfig& loss,
                         const AugmentationConfig& augmentation, std::uint64_t seed);

PredictorHandle make_toy_predictor(ToyModel model, std::string name = "toy");

std::string toy_model_to_json(const ToyModel& model);
ToyModel toy_model_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// File-backed predictor

// Reads a plain-text id list: one id per line; blank lines and lines starting
// with '#' are skipped.
std::vector<std::string> read_manifest(const std::filesystem::path& path);

// Serves `<directory>/<id>.png` for every id in `ids`. Grayscale 8-bit maps
// decode as v/255, 16-bit maps as v/65535. Missing files are reported eagerly
// (DataError listing every missing id); maps are decoded on demand.
PredictorHandle load_file_predictor(const std::filesystem::path& directory,
                                    const std::vector<std::string>& ids,
                                    std::string name = "file");

}  // namespace ulcerseg
