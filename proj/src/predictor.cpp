#include "ulcerseg/predictor.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "ulcerseg/png_io.hpp"
#include "ulcerseg/postprocess.hpp"

namespace ulcerseg {
namespace {

class ConstantPredictor final : public Predictor {
 public:
  ConstantPredictor(double value, std::string name) : value_(value), name_(std::move(name)) {
    if (!(value >= 0.0 && value <= 1.0)) {
      throw ValidationError("constant predictor value must be in [0, 1]");
    }
  }
  Kind kind() const override { return Kind::kConstant; }
  const std::string& name() const override { return name_; }
  ProbMask predict(const ImageBuffer& image, std::string_view) const override {
    return ProbMask::filled(image.height(), image.width(), value_);
  }

 private:
  double value_;
  std::string name_;
};

class FunctionPredictor final : public Predictor {
 public:
  FunctionPredictor(std::string name, std::function<ProbMask(const ImageBuffer&)> fn)
      : name_(std::move(name)), fn_(std::move(fn)) {}
  Kind kind() const override { return Kind::kCustom; }
  const std::string& name() const override { return name_; }
  ProbMask predict(const ImageBuffer& image, std::string_view) const override { return fn_(image); }

 private:
  std::string name_;
  std::function<ProbMask(const ImageBuffer&)> fn_;
};

class ToyPredictor final : public Predictor {
 public:
  ToyPredictor(ToyModel model, std::string name) : model_(model), name_(std::move(name)) {}
  Kind kind() const override { return Kind::kToy; }
  const std::string& name() const override { return name_; }
  ProbMask predict(const ImageBuffer& image, std::string_view) const override {
    return predict_toy(model_, image);
  }

 private:
  ToyModel model_;
  std::string name_;
};

class FilePredictor final : public Predictor {
 public:
  FilePredictor(std::map<std::string, std::filesystem::path, std::less<>> files, std::string name)
      : files_(std::move(files)), name_(std::move(name)) {}
  Kind kind() const override { return Kind::kFileBacked; }
  const std::string& name() const override { return name_; }
  bool image_dependent() const override { return false; }

  // Maps stored at the original (unpadded) size are padded like the image.
  ProbMask predict(const ImageBuffer& image, std::string_view image_id) const override {
    const auto it = files_.find(image_id);
    if (it == files_.end()) {
      throw PredictionError("no stored probability map for id '" + std::string(image_id) + "'");
    }
    ProbMask map = read_prob_png(it->second);
    if (same_shape(map, image)) return map;
    if (map.height() <= image.height() && map.width() <= image.width()) {
      return zero_pad_prob(map, image.height(), image.width());
    }
    throw PredictionError(it->second.string() + " is " + std::to_string(map.height()) + "x" +
                          std::to_string(map.width()) + ", image is " +
                          std::to_string(image.height()) + "x" + std::to_string(image.width()));
  }

 private:
  std::map<std::string, std::filesystem::path, std::less<>> files_;
  std::string name_;
};

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double linear_score(const ToyModel& model, const double* x) {
  double z = model.weights[kFeatureCount];
  for (int k = 0; k < kFeatureCount; ++k) z += model.weights[k] * x[k];
  return z;
}

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-7;
  std::array<double, kFeatureCount + 1> m{};
  std::array<double, kFeatureCount + 1> v{};
  std::size_t t = 0;

  void step(ToyModel& model, const std::array<double, kFeatureCount + 1>& grad, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
    for (std::size_t k = 0; k < grad.size(); ++k) {
      m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * grad[k];
      v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * grad[k] * grad[k];
      model.weights[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + kEpsilon);
    }
  }
};

double validation_dice(const ToyModel& model, const std::vector<PixelFeatures>& features,
                       const std::vector<LabeledImage>& validation) {
  std::vector<ConfusionCounts> counts;
  counts.reserve(validation.size());
  for (std::size_t i = 0; i < validation.size(); ++i) {
    counts.push_back(confusion_counts(binarize(predict_toy(model, features[i]), 0.5),
                                      validation[i].mask));
  }
  // No foreground predicted or present anywhere counts as a perfect score.
  return dice_data(counts).value_or(1.0);
}

}  // namespace

std::string_view kind_name(Predictor::Kind kind) {
  switch (kind) {
    case Predictor::Kind::kFileBacked:
      return "file";
    case Predictor::Kind::kToy:
      return "toy";
    case Predictor::Kind::kConstant:
      return "constant";
    case Predictor::Kind::kCustom:
      return "custom";
  }
  return "unknown";
}

PredictorHandle make_constant_predictor(double value, std::string name) {
  return std::make_shared<ConstantPredictor>(value, std::move(name));
}

PredictorHandle make_function_predictor(std::string name,
                                        std::function<ProbMask(const ImageBuffer&)> fn) {
  return std::make_shared<FunctionPredictor>(std::move(name), std::move(fn));
}

PredictorHandle make_toy_predictor(ToyModel model, std::string name) {
  return std::make_shared<ToyPredictor>(model, std::move(name));
}

void TrainingSchedule::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (!(initial_lr > 0.0)) throw ValidationError("initial_lr must be positive");
  if (decay_every < 1) throw ValidationError("decay_every must be at least 1");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
    throw ValidationError("decay_factor must lie in (0, 1]");
  }
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
}

double lr_at(const TrainingSchedule& schedule, int epoch) {
  if (epoch < 0 || epoch >= schedule.epochs) {
    throw ValidationError("lr_at: epoch " + std::to_string(epoch) + " outside [0, " +
                          std::to_string(schedule.epochs) + ")");
  }
  double lr = schedule.initial_lr;
  for (int k = epoch / schedule.decay_every; k > 0; --k) lr *= schedule.decay_factor;
  return lr;
}

PixelFeatures extract_features(const ImageBuffer& image) {
  const int h = image.height();
  const int w = image.width();
  const std::size_t n = image.pixel_count();
  const auto data = image.data();

  // Channel sums (0..765) keep the window statistics in exact integer
  // arithmetic.
  std::vector<std::int64_t> sum3(n);
  for (std::size_t i = 0; i < n; ++i) sum3[i] = data[3 * i] + data[3 * i + 1] + data[3 * i + 2];

  PixelFeatures out{h, w, std::vector<double>(n * kFeatureCount)};
  constexpr double kWindowScale = 9.0 * 765.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      std::int64_t s = 0;
      std::int64_t sq = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        const int rr = std::clamp(r + dr, 0, h - 1);
        for (int dc = -1; dc <= 1; ++dc) {
          const int cc = std::clamp(c + dc, 0, w - 1);
          const std::int64_t v = sum3[static_cast<std::size_t>(rr) * w + cc];
          s += v;
          sq += v * v;
        }
      }
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      double* f = out.values.data() + i * kFeatureCount;
      f[0] = data[3 * i] / 255.0;
      f[1] = data[3 * i + 1] / 255.0;
      f[2] = data[3 * i + 2] / 255.0;
      f[3] = static_cast<double>(s) / kWindowScale;
      // 81 var = 9 sum(v^2) - (sum v)^2, exactly.
      f[4] = std::sqrt(static_cast<double>(9 * sq - s * s)) / kWindowScale;
    }
  }
  return out;
}

ProbMask predict_toy(const ToyModel& model, const PixelFeatures& features) {
  const std::size_t n = static_cast<std::size_t>(features.height) * features.width;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid(linear_score(model, features.pixel(i)));
  return ProbMask(features.height, features.width, std::move(out));
}

ProbMask predict_toy(const ToyModel& model, const ImageBuffer& image) {
  return predict_toy(model, extract_features(image));
}

TrainingResult train_toy(const std::vector<LabeledImage>& train,
                         const std::vector<LabeledImage>& validation,
                         const TrainingSchedule& schedule, const LossConfig& loss,
                         const AugmentationConfig& augmentation, std::uint64_t seed) {
  if (train.empty()) throw ValidationError("train_toy: empty training set");
  if (validation.empty()) throw ValidationError("train_toy: empty validation set");
  schedule.validate();
  loss.validate();
  augmentation.validate();

  std::vector<PixelFeatures> val_features;
  val_features.reserve(validation.size());
  for (const auto& v : validation) val_features.push_back(extract_features(v.image));

  Rng order_rng = Rng::stream(seed, 0);
  Rng aug_rng = Rng::stream(seed, 1 + augmentation.rng_seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainingResult result;
  ToyModel model;
  AdamState adam;
  double best_dice = -1.0;
  const auto batch = static_cast<std::size_t>(schedule.batch_size);

  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    const double lr = lr_at(schedule, epoch);
    shuffle(order.begin(), order.end(), order_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(start + batch, order.size());
      std::array<double, kFeatureCount + 1> grad{};
      double batch_loss = 0.0;
      for (std::size_t j = start; j < end; ++j) {
        const LabeledImage& sample = train[order[j]];
        const AugmentedPair aug = augment(sample.image, sample.mask, augmentation, aug_rng);
        const PixelFeatures feats = extract_features(aug.image);
        const ProbMask prob = predict_toy(model, feats);
        const LossAndGradient lg = combined_loss_grad(prob.data(), aug.mask, loss);
        batch_loss += lg.value;
        const auto p = prob.data();
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double dz = lg.grad[i] * p[i] * (1.0 - p[i]);  // through the sigmoid
          const double* x = feats.pixel(i);
          for (int k = 0; k < kFeatureCount; ++k) grad[k] += dz * x[k];
          grad[kFeatureCount] += dz;
        }
      }
      const double count = static_cast<double>(end - start);
      batch_loss /= count;
      for (auto& g : grad) g /= count;
      if (!std::isfinite(batch_loss)) {
        throw PredictionError("train_toy: non-finite loss at epoch " + std::to_string(epoch));
      }
      adam.step(model, grad, lr);
      ++result.gradient_steps;
      epoch_loss += batch_loss * count;
    }
    for (double wgt : model.weights) {
      if (!std::isfinite(wgt)) {
        throw PredictionError("train_toy: non-finite weights at epoch " + std::to_string(epoch));
      }
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(train.size()));
    const double dice = validation_dice(model, val_features, validation);
    result.validation_dice.push_back(dice);
    if (dice > best_dice) {
      best_dice = dice;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  result.final_model = model;
  return result;
}

std::string toy_model_to_json(const ToyModel& model) {
  nlohmann::json j;
  j["kind"] = "toy-logistic";
  j["features"] = {"r", "g", "b", "mean3x3", "std3x3"};
  j["weights"] = model.weights;
  return j.dump(2) + "\n";
}

ToyModel toy_model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("toy model: ") + e.what());
  }
  if (!j.is_object() || j.value("kind", "") != "toy-logistic" || !j.contains("weights") ||
      !j["weights"].is_array() || j["weights"].size() != kFeatureCount + 1) {
    throw DataError("toy model: expected {\"kind\": \"toy-logistic\", \"weights\": [6 numbers]}");
  }
  ToyModel model;
  for (std::size_t k = 0; k < model.weights.size(); ++k) {
    if (!j["weights"][k].is_number()) throw DataError("toy model: weights must be numbers");
    model.weights[k] = j["weights"][k].get<double>();
    if (!std::isfinite(model.weights[k])) throw DataError("toy model: non-finite weight");
  }
  return model;
}

std::vector<std::string> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read manifest " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.pop_back();
    }
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    ids.push_back(line.substr(first));
  }
  return ids;
}

PredictorHandle load_file_predictor(const std::filesystem::path& directory,
                                    const std::vector<std::string>& ids, std::string name) {
  if (!std::filesystem::is_directory(directory)) {
    throw DataError("probability map directory not found: " + directory.string());
  }
  std::map<std::string, std::filesystem::path, std::less<>> files;
  std::vector<std::string> missing;
  for (const auto& id : ids) {
    auto path = directory / (id + ".png");
    if (std::filesystem::is_regular_file(path)) {
      files.emplace(id, std::move(path));
    } else {
      missing.push_back(id);
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing probability maps in " + directory.string() + " for ids:";
    for (const auto& id : missing) msg += " " + id;
    throw DataError(msg);
  }
  return std::make_shared<FilePredictor>(std::move(files), std::move(name));
}

}  // namespace ulcerseg
