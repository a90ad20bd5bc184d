#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "ulcerseg/dataset.hpp"
#include "ulcerseg/errors.hpp"
#include "ulcerseg/png_io.hpp"
#include "ulcerseg/predictor.hpp"

using namespace ulcerseg;
namespace fs = std::filesystem;

namespace {

ImageBuffer solid(int h, int w, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  std::vector<std::uint8_t> v;
  for (int i = 0; i < h * w; ++i) {
    v.push_back(r);
    v.push_back(g);
    v.push_back(b);
  }
  return ImageBuffer(h, w, std::move(v));
}

fs::path scratch_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("ulcerseg_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<LabeledImage> samples(std::size_t n, int size, std::uint64_t seed) {
  std::vector<LabeledImage> out;
  for (auto& s : make_synthetic_blobs(n, size, seed)) out.push_back(std::move(s.data));
  return out;
}

}  // namespace

TEST_CASE("lr_at follows the step schedule") {
  const TrainingSchedule s;
  CHECK(lr_at(s, 0) == 0.001);
  CHECK(lr_at(s, 24) == 0.001);
  CHECK(lr_at(s, 25) == 0.0001);
  CHECK(lr_at(s, 49) == 0.0001);
  CHECK(lr_at(s, 50) == 0.00001);
  CHECK(lr_at(s, 79) == doctest::Approx(0.000001).epsilon(1e-12));
  CHECK_THROWS_AS(lr_at(s, -1), ValidationError);
  CHECK_THROWS_AS(lr_at(s, 80), ValidationError);
}

TEST_CASE("schedule validation") {
  TrainingSchedule s;
  s.epochs = 0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = {};
  s.batch_size = 0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = {};
  s.initial_lr = -1;
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("features of a constant image") {
  const auto f = extract_features(solid(4, 5, 51, 102, 204));
  for (std::size_t i = 0; i < 20; ++i) {
    const double* p = f.pixel(i);
    CHECK(p[0] == 51 / 255.0);
    CHECK(p[1] == 102 / 255.0);
    CHECK(p[2] == 204 / 255.0);
    CHECK(p[3] == doctest::Approx(357.0 / 765.0).epsilon(1e-15));
    CHECK(p[4] == 0.0);
  }
}

TEST_CASE("neighbourhood statistics around one white pixel") {
  std::vector<std::uint8_t> v(5 * 5 * 3, 0);
  const std::size_t centre = (2 * 5 + 2) * 3;
  v[centre] = v[centre + 1] = v[centre + 2] = 255;
  const auto f = extract_features(ImageBuffer(5, 5, std::move(v)));
  const double* p = f.pixel(12);
  CHECK(p[3] == doctest::Approx(1.0 / 9.0).epsilon(1e-15));
  // Population std of {1, 0 x 8}: sqrt(1/9 - 1/81).
  CHECK(p[4] == doctest::Approx(std::sqrt(8.0) / 9.0).epsilon(1e-15));
  CHECK(f.pixel(0)[3] == 0.0);
}

TEST_CASE("predict_toy") {
  const auto img = make_synthetic_blobs(1, 16, 3)[0].data.image;
  const auto flat = predict_toy(ToyModel{}, img);
  for (double p : flat.data()) CHECK(p == 0.5);

  ToyModel m;
  m.weights = {2.0, -1.5, 0.3, 0.7, -0.2, -0.1};
  const auto prob = predict_toy(m, img);
  const auto feats = extract_features(img);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    double z = m.weights[5];
    for (int k = 0; k < kFeatureCount; ++k) z += m.weights[k] * feats.pixel(i)[k];
    CHECK(prob.data()[i] == doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-14));
  }
}

TEST_CASE("train_toy bookkeeping and determinism") {
  const auto train = samples(10, 16, 11);
  const auto val = samples(4, 16, 12);
  TrainingSchedule s;
  s.epochs = 1;
  s.batch_size = 4;
  s.initial_lr = 0.05;
  const auto one = train_toy(train, val, s, LossConfig{}, AugmentationConfig{}, 7);
  CHECK(one.gradient_steps == 3);
  CHECK(one.epoch_loss.size() == 1);
  CHECK(one.validation_dice.size() == 1);

  s.epochs = 6;
  const auto a = train_toy(train, val, s, LossConfig{}, AugmentationConfig{}, 7);
  const auto b = train_toy(train, val, s, LossConfig{}, AugmentationConfig{}, 7);
  CHECK(a.model == b.model);
  CHECK(a.final_model == b.final_model);
  CHECK(a.epoch_loss == b.epoch_loss);
  CHECK(a.gradient_steps == 18);
  const double best = a.validation_dice[static_cast<std::size_t>(a.best_epoch)];
  for (double d : a.validation_dice) CHECK(best >= d);
  CHECK(best >= a.validation_dice.back());

  const auto c = train_toy(train, val, s, LossConfig{}, AugmentationConfig{}, 8);
  CHECK_FALSE(c.final_model == a.final_model);

  CHECK_THROWS_AS(train_toy({}, val, s, LossConfig{}, AugmentationConfig{}, 7), ValidationError);
}

TEST_CASE("train_toy learns the synthetic lesions") {
  const auto train = samples(24, 32, 21);
  const auto val = samples(8, 32, 22);
  TrainingSchedule s;
  s.epochs = 30;
  s.initial_lr = 0.05;
  s.decay_every = 10;
  const auto r = train_toy(train, val, s, LossConfig{}, AugmentationConfig{}, 1);
  CHECK(r.validation_dice[static_cast<std::size_t>(r.best_epoch)] >= 0.95);
  CHECK(r.epoch_loss.back() < r.epoch_loss.front());
}

TEST_CASE("toy model json round trip") {
  ToyModel m;
  m.weights = {0.1, -2.5, 1e-17, 3.0, 0.3333333333333333, -7.25};
  CHECK(toy_model_from_json(toy_model_to_json(m)) == m);
  CHECK_THROWS_AS(toy_model_from_json("{\"kind\":\"other\"}"), DataError);
  CHECK_THROWS_AS(toy_model_from_json("not json"), DataError);
}

TEST_CASE("read_manifest skips blanks and comments") {
  const auto dir = scratch_dir("manifest");
  std::ofstream(dir / "ids.txt") << "# header\nb\n\n  \na\r\n#x\n";
  CHECK(read_manifest(dir / "ids.txt") == std::vector<std::string>{"b", "a"});
  CHECK_THROWS_AS(read_manifest(dir / "absent.txt"), DataError);
}

TEST_CASE("file-backed predictor") {
  const auto dir = scratch_dir("filepred");
  write_prob_png(dir / "a.png", ProbMask::filled(3, 4, 128.0 / 255.0));
  write_prob_png16(dir / "b.png", ProbMask::filled(2, 2, 0.25));

  try {
    load_file_predictor(dir, {"a", "x", "y"});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("x") != std::string::npos);
    CHECK(msg.find("y") != std::string::npos);
  }

  const auto p = load_file_predictor(dir, {"a", "b"}, "stored");
  CHECK(p->kind() == Predictor::Kind::kFileBacked);
  CHECK_FALSE(p->image_dependent());
  CHECK(p->name() == "stored");
  const auto a = p->predict(ImageBuffer(3, 4), "a");
  for (double v : a.data()) CHECK(v == 128.0 / 255.0);
  // Maps smaller than the (padded) image are padded with zeros.
  const auto b = p->predict(ImageBuffer(3, 3), "b");
  CHECK(b.at(0, 0) == doctest::Approx(0.25).epsilon(1e-4));
  CHECK(b.at(2, 2) == 0.0);
  CHECK_THROWS_AS(p->predict(ImageBuffer(2, 2), "a"), PredictionError);
  CHECK_THROWS_AS(p->predict(ImageBuffer(3, 4), "zzz"), PredictionError);
}

TEST_CASE("every predictor kind honours the contract") {
  const auto dir = scratch_dir("contract");
  const auto img = make_synthetic_blobs(1, 12, 9)[0].data.image;
  write_prob_png(dir / "img000.png", ProbMask::filled(12, 12, 0.2));
  ToyModel tm;
  tm.weights = {1, -1, 0, 0.5, 0, 0};
  const std::vector<PredictorHandle> all = {
      make_constant_predictor(0.3),
      make_toy_predictor(tm),
      make_function_predictor("fn", [](const ImageBuffer& im) {
        return ProbMask::filled(im.height(), im.width(), 0.9);
      }),
      load_file_predictor(dir, {"img000"}),
  };
  for (const auto& p : all) {
    CAPTURE(kind_name(p->kind()));
    const auto out = p->predict(img, "img000");
    CHECK(out.height() == img.height());
    CHECK(out.width() == img.width());
    for (double v : out.data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(out == p->predict(img, "img000"));
  }
  CHECK_THROWS_AS(make_constant_predictor(1.5), ValidationError);
}

TEST_CASE("lr_at is non-increasing and steps at multiples of decay_every") {
  TrainingSchedule s;
  s.decay_every = 7;
  s.epochs = 40;
  for (int e = 1; e < s.epochs; ++e) {
    CHECK(lr_at(s, e) <= lr_at(s, e - 1));
    CHECK((lr_at(s, e) == lr_at(s, e - 1)) == (e % 7 != 0));
  }
}

TEST_CASE("features are finite and within their ranges") {
  Rng rng(17);
  std::vector<std::uint8_t> v(9 * 11 * 3);
  for (auto& x : v) x = static_cast<std::uint8_t>(rng.below(256));
  const auto f = extract_features(ImageBuffer(9, 11, std::move(v)));
  for (double x : f.values) {
    CHECK(std::isfinite(x));
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
  }
}

TEST_CASE("one epoch at a small learning rate lowers the training loss") {
  const auto train = samples(8, 16, 31);
  TrainingSchedule s;
  s.epochs = 1;
  s.batch_size = 8;
  s.initial_lr = 0.01;
  const auto r = train_toy(train, train, s, LossConfig{}, AugmentationConfig::disabled(), 2);
  auto batch_loss = [&](const ToyModel& m) {
    double total = 0;
    for (const auto& t : train) total += combined_loss(predict_toy(m, t.image), t.mask, LossConfig{});
    return total / static_cast<double>(train.size());
  };
  CHECK(r.gradient_steps == 1);
  CHECK(batch_loss(r.final_model) < batch_loss(ToyModel{}));
}
