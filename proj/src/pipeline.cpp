#include "ulcerseg/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "parallel.hpp"
#include "ulcerseg/png_io.hpp"

namespace ulcerseg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json score_json(const Score& s) { return s ? json(*s) : json(nullptr); }

Score score_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

}  // namespace

CrossValidationResult train_toy_cv(const std::vector<LabeledImage>& data, int k,
                                   std::uint64_t seed, const TrainingSchedule& schedule,
                                   const LossConfig& loss, const AugmentationConfig& augmentation,
                                   int workers) {
  CrossValidationResult cv;
  cv.folds = split_folds(data.size(), k, seed);
  cv.models.resize(static_cast<std::size_t>(k));
  internal::parallel_for(static_cast<std::size_t>(k), workers, [&](std::size_t fold) {
    std::vector<LabeledImage> train;
    std::vector<LabeledImage> validation;
    for (auto i : cv.folds.training(static_cast<int>(fold))) train.push_back(data[i]);
    for (auto i : cv.folds.holdout(static_cast<int>(fold))) validation.push_back(data[i]);
    const std::uint64_t fold_seed = Rng::stream(seed, fold).next_u64();
    cv.models[fold] = train_toy(train, validation, schedule, loss, augmentation, fold_seed);
  });
  return cv;
}

ModelFamily toy_family(const CrossValidationResult& cv, const std::string& name) {
  ModelFamily family{name, {}};
  for (std::size_t f = 0; f < cv.models.size(); ++f) {
    family.members.push_back(
        {make_toy_predictor(cv.models[f].model, name + "/fold" + std::to_string(f)), 1.0});
  }
  return family;
}

std::map<std::string, BinaryMask> InferenceResult::mask_map() const {
  std::map<std::string, BinaryMask> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (masks[i]) out.emplace(ids[i], *masks[i]);
  }
  return out;
}

InferenceResult run_inference(const DatasetIndex& index, const EnsembleSpec& spec,
                              const std::optional<std::vector<TtaVariant>>& tta,
                              const PostprocessConfig& postprocess_cfg, int workers) {
  spec.validate();
  postprocess_cfg.validate();
  const std::size_t n = index.records.size();
  InferenceResult result;
  result.ids = index.ids();
  result.fused.resize(n);
  result.masks.resize(n);
  std::vector<std::string> errors(n);

  internal::parallel_for(n, workers, [&](std::size_t i) {
    const auto& rec = index.records[i];
    try {
      ProbMask fused = ensemble_predict(spec, rec.image, rec.id, tta);
      result.masks[i] = postprocess(fused, postprocess_cfg);
      result.fused[i] = std::move(fused);
    } catch (const std::exception& e) {
      errors[i] = e.what();
      if (errors[i].empty()) errors[i] = "prediction failed";
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) result.failures.emplace(result.ids[i], errors[i]);
  }
  return result;
}

void write_inference(const InferenceResult& result, const fs::path& out_dir,
                     const json& config_echo) {
  fs::create_directories(out_dir / "prob");
  fs::create_directories(out_dir / "masks");
  for (std::size_t i = 0; i < result.ids.size(); ++i) {
    if (result.fused[i]) write_prob_png(out_dir / "prob" / (result.ids[i] + ".png"), *result.fused[i]);
    if (result.masks[i]) write_mask_png(out_dir / "masks" / (result.ids[i] + ".png"), *result.masks[i]);
  }
  json log;
  log["config"] = config_echo;
  log["ids"] = result.ids;
  log["failures"] = result.failures;
  write_text(out_dir / "inference.json", log.dump(2) + "\n");
}

std::map<std::string, BinaryMask> read_mask_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("prediction directory not found: " + dir.string());
  std::map<std::string, BinaryMask> out;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out.emplace(f.stem().string(), read_mask_png(f));
  return out;
}

std::string_view cause_name(ZeroDiceCause cause) {
  switch (cause) {
    case ZeroDiceCause::kFalsePositiveOnEmptyGt:
      return "false-positive-on-empty-gt";
    case ZeroDiceCause::kMissedLesion:
      return "missed-lesion";
    case ZeroDiceCause::kDisjoint:
      return "disjoint";
  }
  return "unknown";
}

ZeroDiceCause cause_from_name(std::string_view name) {
  for (auto c : {ZeroDiceCause::kFalsePositiveOnEmptyGt, ZeroDiceCause::kMissedLesion,
                 ZeroDiceCause::kDisjoint}) {
    if (cause_name(c) == name) return c;
  }
  throw DataError("unknown zero-Dice cause '" + std::string(name) + "'");
}

FailureBuckets bucket_failures(const std::vector<ImageScore>& images) {
  FailureBuckets out;
  for (const auto& img : images) {
    const auto& c = img.counts;
    if (img.dice == 0.0) {
      // Dice is zero only when tp == 0 and at least one side is non-empty.
      ZeroDiceCause cause = ZeroDiceCause::kDisjoint;
      if (c.gt_empty()) {
        cause = ZeroDiceCause::kFalsePositiveOnEmptyGt;
      } else if (c.pred_empty()) {
        cause = ZeroDiceCause::kMissedLesion;
      }
      out.zero.push_back({img.id, cause});
    } else if (img.dice < kPoorDiceThreshold) {
      out.poor.push_back(img.id);
    }
  }
  return out;
}

EvaluationReport make_report(std::vector<ImageScore> images, std::vector<std::string> missing,
                             json config_echo) {
  std::sort(images.begin(), images.end(),
            [](const ImageScore& a, const ImageScore& b) { return a.id < b.id; });
  std::sort(missing.begin(), missing.end());
  std::vector<ConfusionCounts> counts;
  counts.reserve(images.size());
  for (auto& img : images) {
    img.dice = image_dice(img.counts);
    counts.push_back(img.counts);
  }
  EvaluationReport report;
  report.aggregate = compute_metrics(counts);
  report.failures = bucket_failures(images);
  report.images = std::move(images);
  report.missing = std::move(missing);
  report.config = std::move(config_echo);
  return report;
}

EvaluationReport evaluate(const std::map<std::string, BinaryMask>& predictions,
                          const DatasetIndex& index, bool allow_missing, const json& config_echo,
                          int workers) {
  if (index.records.empty()) throw DataError("evaluate: dataset is empty");
  std::vector<std::string> missing;
  for (const auto& rec : index.records) {
    if (!rec.gt) throw DataError("evaluate: no ground-truth mask for id '" + rec.id + "'");
    if (!predictions.contains(rec.id)) missing.push_back(rec.id);
  }
  if (!missing.empty() && !allow_missing) {
    std::string msg = "evaluate: no prediction for " + std::to_string(missing.size()) + " id(s):";
    for (const auto& id : missing) msg += " " + id;
    throw DataError(msg + " (use --allow-missing to score them as empty)");
  }

  std::vector<ImageScore> images(index.records.size());
  internal::parallel_for(index.records.size(), workers, [&](std::size_t i) {
    const auto& rec = index.records[i];
    images[i].id = rec.id;
    const auto it = predictions.find(rec.id);
    if (it == predictions.end()) {
      images[i].missing_prediction = true;
      images[i].counts = confusion_counts(BinaryMask(rec.gt->height(), rec.gt->width()), *rec.gt);
      return;
    }
    BinaryMask pred = it->second;
    // Predictions at the original size are padded onto the canvas.
    if (!same_shape(pred, *rec.gt) && pred.height() == rec.original_height &&
        pred.width() == rec.original_width) {
      pred = zero_pad_mask(pred, rec.gt->height(), rec.gt->width());
    }
    if (!same_shape(pred, *rec.gt)) {
      throw DataError("evaluate: prediction for '" + rec.id + "' is " +
                      std::to_string(pred.height()) + "x" + std::to_string(pred.width()) +
                      ", ground truth is " + std::to_string(rec.gt->height()) + "x" +
                      std::to_string(rec.gt->width()));
    }
    images[i].counts = confusion_counts(pred, *rec.gt);
  });
  return make_report(std::move(images), std::move(missing), config_echo);
}

std::string report_to_json(const EvaluationReport& report) {
  json j;
  j["config"] = report.config;
  json images = json::array();
  for (const auto& img : report.images) {
    images.push_back({{"id", img.id},
                      {"tp", img.counts.tp},
                      {"fp", img.counts.fp},
                      {"fn", img.counts.fn},
                      {"tn", img.counts.tn},
                      {"dice", img.dice},
                      {"missing_prediction", img.missing_prediction}});
  }
  j["images"] = std::move(images);
  const auto& m = report.aggregate;
  j["aggregate"] = {{"precision", score_json(m.precision)}, {"recall", score_json(m.recall)},
                    {"dice_data", score_json(m.dice_data)}, {"iou_data", score_json(m.iou_data)},
                    {"dice_image", m.dice_image},           {"n_images", m.n_images}};
  json zero = json::array();
  for (const auto& z : report.failures.zero) {
    zero.push_back({{"id", z.id}, {"cause", cause_name(z.cause)}});
  }
  j["failures"] = {{"poor", report.failures.poor}, {"zero", std::move(zero)},
                   {"poor_threshold", kPoorDiceThreshold}};
  j["missing"] = report.missing;
  return j.dump(2) + "\n";
}

EvaluationReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
  EvaluationReport stored;
  std::vector<ImageScore> images;
  try {
    for (const auto& e : j.at("images")) {
      ImageScore s;
      s.id = e.at("id").get<std::string>();
      s.counts = {e.at("tp").get<std::int64_t>(), e.at("fp").get<std::int64_t>(),
                  e.at("fn").get<std::int64_t>(), e.at("tn").get<std::int64_t>()};
      s.dice = e.at("dice").get<double>();
      s.missing_prediction = e.value("missing_prediction", false);
      images.push_back(std::move(s));
    }
    const auto& a = j.at("aggregate");
    stored.aggregate = {score_from(a.at("precision")), score_from(a.at("recall")),
                        score_from(a.at("dice_data")), score_from(a.at("iou_data")),
                        a.at("dice_image").get<double>(), a.at("n_images").get<std::size_t>()};
    stored.failures.poor = j.at("failures").at("poor").get<std::vector<std::string>>();
    for (const auto& z : j.at("failures").at("zero")) {
      stored.failures.zero.push_back(
          {z.at("id").get<std::string>(), cause_from_name(z.at("cause").get<std::string>())});
    }
    stored.missing = j.value("missing", std::vector<std::string>{});
    stored.config = j.value("config", json::object());
  } catch (const json::exception& e) {
    throw DataError(std::string("report: malformed field: ") + e.what());
  }
  for (const auto& img : images) {
    if (img.counts.tp < 0 || img.counts.fp < 0 || img.counts.fn < 0 || img.counts.tn < 0) {
      throw DataError("report: negative count for id '" + img.id + "'");
    }
  }
  if (images.empty()) throw DataError("report: no images");
  stored.images = images;

  EvaluationReport derived = make_report(images, stored.missing, stored.config);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (derived.images[i].id != stored.images[i].id ||
        derived.images[i].dice != stored.images[i].dice) {
      throw DataError("report: per-image Dice for '" + stored.images[i].id +
                      "' disagrees with its counts (or images are not sorted by id)");
    }
  }
  if (!(derived.aggregate == stored.aggregate)) {
    throw DataError("report: aggregate metrics disagree with the per-image counts");
  }
  if (!(derived.failures == stored.failures)) {
    throw DataError("report: failure buckets disagree with the per-image counts");
  }
  return derived;
}

std::string format_percent(const Score& score) {
  if (!score) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *score * 100.0);
  return buf;
}

std::string report_to_csv(const EvaluationReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "id,tp,fp,fn,tn,dice,missing_prediction\n";
  for (const auto& img : report.images) {
    os << img.id << ',' << img.counts.tp << ',' << img.counts.fp << ',' << img.counts.fn << ','
       << img.counts.tn << ',' << img.dice << ',' << (img.missing_prediction ? 1 : 0) << '\n';
  }
  const auto& m = report.aggregate;
  auto field = [](const Score& s) {
    std::ostringstream f;
    f.precision(17);
    if (s) {
      f << *s;
    } else {
      f << "n/a";
    }
    return f.str();
  };
  os << "\nmetric,value\n";
  os << "image_based_dice," << field(m.dice_image) << '\n';
  os << "precision," << field(m.precision) << '\n';
  os << "recall," << field(m.recall) << '\n';
  os << "data_based_iou," << field(m.iou_data) << '\n';
  os << "data_based_dice," << field(m.dice_data) << '\n';
  os << "n_images," << m.n_images << '\n';
  return os.str();
}

std::string render_table(const EvaluationReport& report, const std::string& row_label) {
  static const char* kHeaders[] = {"image-based Dice [%]", "precision [%]", "recall [%]",
                                   "data-based IoU [%]", "data-based Dice [%]"};
  const auto& m = report.aggregate;
  const std::string values[] = {format_percent(m.dice_image), format_percent(m.precision),
                                format_percent(m.recall), format_percent(m.iou_data),
                                format_percent(m.dice_data)};
  const std::size_t label_w = std::max<std::size_t>(row_label.size(), 8) + 2;

  std::ostringstream os;
  std::string rule;
  std::ostringstream header;
  header << std::string(label_w, ' ');
  for (const char* h : kHeaders) header << "  " << h;
  rule.assign(header.str().size(), '=');
  os << rule << '\n' << header.str() << '\n' << rule << '\n';
  os << row_label << std::string(label_w - row_label.size(), ' ');
  for (std::size_t k = 0; k < 5; ++k) {
    const std::size_t w = std::string_view(kHeaders[k]).size();
    os << "  " << std::string(w - std::min(w, values[k].size()), ' ') << values[k];
  }
  os << '\n' << rule << '\n';
  os << "images: " << m.n_images;
  if (!report.missing.empty()) os << " (" << report.missing.size() << " scored as empty predictions)";
  os << '\n';
  os << "Dice below 60%: " << report.failures.poor.size() + report.failures.zero.size()
     << " (zero Dice: " << report.failures.zero.size() << ")\n";
  for (const auto& id : report.failures.poor) os << "  poor  " << id << '\n';
  for (const auto& z : report.failures.zero) os << "  zero  " << z.id << "  " << cause_name(z.cause) << '\n';
  return os.str();
}

}  // namespace ulcerseg
