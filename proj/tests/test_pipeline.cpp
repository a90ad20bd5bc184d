#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "ulcerseg/config.hpp"
#include "ulcerseg/dataset.hpp"
#include "ulcerseg/errors.hpp"
#include "ulcerseg/pipeline.hpp"
#include "ulcerseg/png_io.hpp"

using namespace ulcerseg;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("ulcerseg_pipe_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

DatasetRecord record(std::string id, BinaryMask gt) {
  DatasetRecord r;
  r.id = std::move(id);
  r.original_height = gt.height();
  r.original_width = gt.width();
  r.image = ImageBuffer(gt.height(), gt.width());
  r.gt = std::move(gt);
  return r;
}

ImageScore score(std::string id, ConfusionCounts c) {
  return {std::move(id), c, image_dice(c), false};
}

}  // namespace

TEST_CASE("png round trips") {
  const auto dir = scratch_dir("png");
  Rng rng(1);
  std::vector<std::uint8_t> px(7 * 5 * 3);
  for (auto& v : px) v = static_cast<std::uint8_t>(rng.below(256));
  const ImageBuffer img(7, 5, px);
  write_image_png(dir / "img.png", img);
  CHECK(read_image_png(dir / "img.png") == img);

  const auto mask = oracle::random_mask(rng, 6, 9, 0.3);
  write_mask_png(dir / "mask.png", mask);
  CHECK(read_mask_png(dir / "mask.png") == mask);
  const auto raw = read_png(dir / "mask.png");
  CHECK(raw.channels == 1);
  CHECK(raw.bit_depth == 8);

  const auto prob = oracle::random_prob(rng, 4, 4);
  write_prob_png(dir / "p8.png", prob);
  write_prob_png16(dir / "p16.png", prob);
  const auto p8 = read_prob_png(dir / "p8.png");
  const auto p16 = read_prob_png(dir / "p16.png");
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(std::fabs(p8.data()[i] - prob.data()[i]) <= 0.5 / 255 + 1e-12);
    CHECK(std::fabs(p16.data()[i] - prob.data()[i]) <= 0.5 / 65535 + 1e-12);
  }
  CHECK_THROWS_AS(read_png(dir / "absent.png"), DataError);
  std::ofstream(dir / "junk.png") << "not a png";
  CHECK_THROWS_AS(read_png(dir / "junk.png"), DataError);
}

TEST_CASE("ingest pads, sorts and pairs masks") {
  const auto root = scratch_dir("ingest");
  auto samples = make_synthetic_blobs(3, 10, 5, "case");
  write_dataset(root, samples);
  fs::remove(root / "masks" / "case001.png");

  const auto index = ingest(root, 16);
  CHECK(index.ids() == std::vector<std::string>{"case000", "case001", "case002"});
  CHECK_FALSE(index.has_all_masks());
  const auto* r0 = index.find("case000");
  REQUIRE(r0 != nullptr);
  CHECK(r0->image.height() == 16);
  CHECK(r0->original_height == 10);
  CHECK(*r0->gt == zero_pad_mask(samples[0].data.mask, 16, 16));
  CHECK(r0->image == zero_pad(samples[0].data.image, 16, 16));
  CHECK_FALSE(index.find("case001")->gt.has_value());
  CHECK(index.find("nope") == nullptr);

  CHECK_THROWS_AS(ingest(root, 8), DataError);
  write_mask_png(root / "masks" / "case001.png", BinaryMask(4, 4));
  try {
    ingest(root, 16);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("case001") != std::string::npos);
  }
  write_mask_png(root / "masks" / "case001.png", samples[1].data.mask);
  const auto serial = ingest(root, 16, 1);
  const auto threaded = ingest(root, 16, 3);
  REQUIRE(serial.records.size() == threaded.records.size());
  for (std::size_t i = 0; i < serial.records.size(); ++i) {
    CHECK(serial.records[i].id == threaded.records[i].id);
    CHECK(serial.records[i].image == threaded.records[i].image);
    CHECK(serial.records[i].gt == threaded.records[i].gt);
  }
  CHECK_THROWS_AS(ingest(root / "absent", 16), DataError);
}

TEST_CASE("synthetic blobs are deterministic per index") {
  const auto a = make_synthetic_blobs(12, 24, 3);
  const auto b = make_synthetic_blobs(5, 24, 3);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].data.image == b[i].data.image);
    CHECK(a[i].data.mask == b[i].data.mask);
  }
  CHECK(a[0].id == "img000");
  CHECK_FALSE(make_synthetic_blobs(1, 24, 4)[0].data.image == a[0].data.image);
}

TEST_CASE("config parsing") {
  const auto cfg = parse_config(R"({"canvas": 64, "folds": 3,
      "postprocess": {"threshold": 0.4, "min_object_area": 10, "connectivity": 4},
      "tta": "rotations+flip", "training": {"epochs": 5},
      "models": [{"family": "a", "kind": "constant", "value": 0.7}]})",
                                "/base");
  CHECK(cfg.canvas == 64);
  CHECK(cfg.folds == 3);
  CHECK(cfg.postprocess.threshold == 0.4);
  CHECK(cfg.postprocess.connectivity == Connectivity::kFour);
  REQUIRE(cfg.tta.has_value());
  CHECK(cfg.tta->size() == 5);
  CHECK(cfg.training.epochs == 5);
  CHECK(cfg.training.initial_lr == 0.001);
  REQUIRE(cfg.models.size() == 1);

  const auto defaults = parse_config("{}");
  CHECK(defaults.canvas == 512);
  CHECK(defaults.tta->size() == 8);
  CHECK_FALSE(parse_config(R"({"tta": "none"})").tta.has_value());
  CHECK(parse_config(R"({"tta": ["rot0", "rot180+hflip"]})").tta->size() == 2);

  CHECK_THROWS_AS(parse_config(R"({"canvs": 64})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"postprocess": {"thresh": 0.5}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"canvas": "big"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"folds": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"tta": ["rot45"]})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"models": [{"kind": "toy"}]})"), ConfigError);
  CHECK_THROWS_AS(build_ensemble(parse_config("{}"), {}), ConfigError);
}

TEST_CASE("evaluate on hand-made masks") {
  DatasetIndex index;
  index.records.push_back(record("a", BinaryMask(2, 2, {1, 1, 0, 0})));
  index.records.push_back(record("b", BinaryMask(2, 2, {0, 0, 1, 0})));
  std::map<std::string, BinaryMask> preds = {{"a", BinaryMask(2, 2, {1, 1, 0, 0})},
                                             {"b", BinaryMask(2, 2, {0, 0, 0, 1})}};
  const auto report = evaluate(preds, index, false);
  CHECK(*report.aggregate.dice_data == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
  CHECK(*report.aggregate.iou_data == 0.5);
  CHECK(report.aggregate.dice_image == 0.5);
  CHECK(report.failures.zero == std::vector<ZeroDiceEntry>{{"b", ZeroDiceCause::kDisjoint}});

  preds.erase("b");
  CHECK_THROWS_AS(evaluate(preds, index, false), DataError);
  const auto partial = evaluate(preds, index, true);
  CHECK(partial.missing == std::vector<std::string>{"b"});
  CHECK(partial.images[1].missing_prediction);
  CHECK(partial.failures.zero[0].cause == ZeroDiceCause::kMissedLesion);

  preds["b"] = BinaryMask(3, 3);
  CHECK_THROWS_AS(evaluate(preds, index, false), DataError);
}

TEST_CASE("perfect predictions score 1 everywhere with empty buckets") {
  Rng rng(3);
  DatasetIndex index;
  std::map<std::string, BinaryMask> preds;
  for (int i = 0; i < 6; ++i) {
    auto gt = oracle::random_mask(rng, 8, 8, 0.3);
    preds.emplace("p" + std::to_string(i), gt);
    index.records.push_back(record("p" + std::to_string(i), std::move(gt)));
  }
  const auto r = evaluate(preds, index, false);
  CHECK(*r.aggregate.precision == 1.0);
  CHECK(*r.aggregate.recall == 1.0);
  CHECK(*r.aggregate.dice_data == 1.0);
  CHECK(*r.aggregate.iou_data == 1.0);
  CHECK(r.aggregate.dice_image == 1.0);
  CHECK(r.failures == FailureBuckets{});
}

TEST_CASE("evaluate pads predictions given at the original size") {
  DatasetIndex index;
  auto rec = record("a", zero_pad_mask(BinaryMask(2, 3, {1, 1, 1, 0, 0, 0}), 4, 4));
  rec.original_height = 2;
  rec.original_width = 3;
  index.records.push_back(std::move(rec));
  const auto report = evaluate({{"a", BinaryMask(2, 3, {1, 1, 1, 0, 0, 0})}}, index, false);
  CHECK(report.images[0].counts == ConfusionCounts{3, 0, 0, 13});
}

TEST_CASE("failure buckets") {
  const std::vector<ImageScore> images = {
      score("perfect", {5, 0, 0, 0}),      score("empty", {0, 0, 0, 9}),
      score("poor", {1, 2, 2, 0}),         score("ok", {3, 1, 0, 0}),
      score("fp", {0, 4, 0, 5}),           score("missed", {0, 0, 4, 5}),
      score("disjoint", {0, 2, 3, 4}),     score("edge", {3, 2, 2, 0}),
  };
  const auto b = bucket_failures(images);
  // Dice of "edge" is 6/10 = 0.6, which is not poor.
  CHECK(b.poor == std::vector<std::string>{"poor"});
  CHECK(b.zero == std::vector<ZeroDiceEntry>{{"fp", ZeroDiceCause::kFalsePositiveOnEmptyGt},
                                             {"missed", ZeroDiceCause::kMissedLesion},
                                             {"disjoint", ZeroDiceCause::kDisjoint}});
  for (auto c : {ZeroDiceCause::kFalsePositiveOnEmptyGt, ZeroDiceCause::kMissedLesion,
                 ZeroDiceCause::kDisjoint}) {
    CHECK(cause_from_name(cause_name(c)) == c);
  }
}

TEST_CASE("report json is self-consistent and tamper-evident") {
  Rng rng(8);
  std::vector<ImageScore> images;
  for (int i = 0; i < 15; ++i) {
    const auto p = oracle::random_mask(rng, 8, 8, rng.uniform(0, 0.4));
    const auto g = oracle::random_mask(rng, 8, 8, rng.uniform(0, 0.4));
    images.push_back(score("id" + std::to_string(100 + i), confusion_counts(p, g)));
  }
  const auto report = make_report(images, {}, nlohmann::json{{"canvas", 8}});
  const std::string text = report_to_json(report);
  const auto back = report_from_json(text);
  CHECK(back == report);
  CHECK(report_to_json(back) == text);

  auto tampered = nlohmann::json::parse(text);
  tampered["images"][0]["tp"] = tampered["images"][0]["tp"].get<int>() + 1;
  CHECK_THROWS_AS(report_from_json(tampered.dump()), DataError);
  tampered = nlohmann::json::parse(text);
  tampered["aggregate"]["dice_image"] = 0.123;
  CHECK_THROWS_AS(report_from_json(tampered.dump()), DataError);
  CHECK_THROWS_AS(report_from_json("[]"), DataError);

  const std::string csv = report_to_csv(report);
  // Header, 15 images, blank separator, metric header, 6 metric rows.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 24);
}

TEST_CASE("table rendering") {
  const auto report = make_report({score("a", {2, 0, 0, 0}), score("b", {0, 1, 1, 0})}, {}, {});
  const auto table = render_table(report, "Ensemble");
  for (const char* col : {"image-based Dice [%]", "precision [%]", "recall [%]",
                          "data-based IoU [%]", "data-based Dice [%]"}) {
    CHECK(table.find(col) != std::string::npos);
  }
  CHECK(table.find("50.00") != std::string::npos);
  CHECK(table.find("66.67") != std::string::npos);
  CHECK(format_percent(std::nullopt) == "n/a");
  CHECK(format_percent(0.12345) == "12.35");
  const auto undefined = make_report({score("e", {0, 0, 0, 4})}, {}, {});
  CHECK(render_table(undefined).find("n/a") != std::string::npos);
}

TEST_CASE("run_inference averages stored maps and post-processes") {
  const auto dir = scratch_dir("infer");
  const auto samples = make_synthetic_blobs(3, 12, 17);
  const auto index = make_index(samples, 16);
  Rng rng(4);
  ModelFamily fam{"stored", {}};
  std::vector<std::vector<ProbMask>> maps(3);
  for (int m = 0; m < 10; ++m) {
    const auto sub = dir / ("m" + std::to_string(m));
    fs::create_directories(sub);
    for (std::size_t i = 0; i < 3; ++i) {
      auto p = oracle::random_prob(rng, 16, 16);
      write_prob_png16(sub / (samples[i].id + ".png"), p);
      maps[i].push_back(read_prob_png(sub / (samples[i].id + ".png")));
    }
    fam.members.push_back({load_file_predictor(sub, index.ids(), "m" + std::to_string(m)), 1.0});
  }
  EnsembleSpec spec{{fam}};
  PostprocessConfig pp;
  pp.min_object_area = 0;
  const auto result = run_inference(index, spec, all_variants(), pp, 2);
  CHECK(result.failures.empty());
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(result.fused[i].has_value());
    for (std::size_t px = 0; px < 256; ++px) {
      double sum = 0;
      for (const auto& m : maps[i]) sum += m.data()[px];
      CHECK(std::fabs(result.fused[i]->data()[px] - sum / 10) <= 1e-12);
    }
    CHECK(*result.masks[i] == postprocess(*result.fused[i], pp));
  }

  const auto again = run_inference(index, spec, all_variants(), pp, 1);
  CHECK(again.fused == result.fused);

  // A missing map is recorded as a failure for that id only.
  fs::remove(dir / "m3" / (samples[1].id + ".png"));
  const auto broken = run_inference(index, spec, all_variants(), pp, 2);
  CHECK(broken.failures.size() == 1);
  CHECK(broken.failures.contains(samples[1].id));
  CHECK(broken.failures.at(samples[1].id).find("m3") != std::string::npos);
  CHECK(broken.fused[0].has_value());
  CHECK_FALSE(broken.fused[1].has_value());

  write_inference(result, dir / "out", nlohmann::json::object());
  const EnsembleSpec zero{{ModelFamily{"zero", {{make_constant_predictor(0.0), 1.0}}}}};
  for (const auto& m : run_inference(index, zero, all_variants(), pp).masks) {
    CHECK(m->foreground_count() == 0);
  }
  const auto read_back = read_mask_dir(dir / "out" / "masks");
  CHECK(read_back == result.mask_map());
}
