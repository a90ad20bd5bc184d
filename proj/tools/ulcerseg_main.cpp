// Command-line front end for the ulcer segmentation pipeline.
//
//   ulcerseg synth     --out-dir data/train --count 100 --size 64 --seed 1
//   ulcerseg split     --config run.json --out-dir out
//   ulcerseg train-toy --config run.json --out-dir out
//   ulcerseg predict   --config run.json --out-dir out [--no-tta]
//   ulcerseg evaluate  --config run.json --out-dir out [--allow-missing]
//   ulcerseg report    out/report.json
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "ulcerseg/config.hpp"
#include "ulcerseg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace ulcerseg;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> folds;
  std::string out_dir = ".";
  std::string data;
  bool allow_missing = false;
  bool no_tta = false;
};

PipelineConfig resolve_config(const CommonFlags& flags) {
  PipelineConfig cfg;
  if (!flags.config.empty()) cfg = load_config(flags.config);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.folds) cfg.folds = *flags.folds;
  if (flags.no_tta) cfg.tta.reset();
  cfg.validate();
  return cfg;
}

fs::path require_path(const fs::path& p, const std::string& flag_hint) {
  if (p.empty()) throw ConfigError("no dataset given (" + flag_hint + ")");
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_split(const CommonFlags& flags) {
  const auto cfg = resolve_config(flags);
  const fs::path data = require_path(flags.data.empty() ? cfg.train_data : fs::path(flags.data),
                                     "--data or config train_data");
  const auto ids = list_image_ids(data);
  const auto folds = split_folds(ids.size(), cfg.folds, cfg.seed);
  fs::create_directories(flags.out_dir);
  write_text(fs::path(flags.out_dir) / "folds.tsv", fold_table(folds, ids));
  std::cout << "wrote " << ids.size() << " assignments over " << cfg.folds << " folds to "
            << (fs::path(flags.out_dir) / "folds.tsv").string() << '\n';
  return 0;
}

int cmd_train_toy(const CommonFlags& flags) {
  const auto cfg = resolve_config(flags);
  const fs::path data = require_path(flags.data.empty() ? cfg.train_data : fs::path(flags.data),
                                     "--data or config train_data");
  const DatasetIndex index = ingest(data, cfg.canvas, cfg.workers);
  if (!index.has_all_masks()) throw DataError("train-toy: every training image needs a mask");
  std::vector<LabeledImage> samples;
  for (const auto& rec : index.records) samples.push_back({rec.image, *rec.gt});

  const auto cv = train_toy_cv(samples, cfg.folds, cfg.seed, cfg.training, cfg.loss,
                               cfg.augmentation, cfg.workers);
  const fs::path out(flags.out_dir);
  fs::create_directories(out / "models");
  const auto ids = index.ids();
  write_text(out / "folds.tsv", fold_table(cv.folds, ids));

  nlohmann::json log = nlohmann::json::array();
  nlohmann::json members = nlohmann::json::array();
  for (std::size_t f = 0; f < cv.models.size(); ++f) {
    const auto& r = cv.models[f];
    const std::string file = "toy_fold" + std::to_string(f) + ".json";
    write_text(out / "models" / file, toy_model_to_json(r.model));
    log.push_back({{"fold", f},
                   {"best_epoch", r.best_epoch},
                   {"gradient_steps", r.gradient_steps},
                   {"epoch_loss", r.epoch_loss},
                   {"validation_dice", r.validation_dice}});
    members.push_back({{"family", "toy"}, {"kind", "toy"}, {"model", "models/" + file}});
    std::cout << "fold " << f << ": best validation data-based Dice "
              << format_percent(r.validation_dice[static_cast<std::size_t>(r.best_epoch)])
              << "% at epoch " << r.best_epoch << '\n';
  }
  write_text(out / "training.json", log.dump(2) + "\n");
  // Ready-to-paste "models" entries (paths relative to out-dir).
  write_text(out / "models.json", members.dump(2) + "\n");
  return 0;
}

int cmd_predict(const CommonFlags& flags) {
  const auto cfg = resolve_config(flags);
  if (cfg.models.empty()) {
    throw ConfigError("predict: no predictors configured (config key \"models\")");
  }
  const fs::path data = require_path(flags.data.empty() ? cfg.test_data : fs::path(flags.data),
                                     "--data or config test_data");
  const DatasetIndex index = ingest(data, cfg.canvas, cfg.workers);
  const EnsembleSpec spec = build_ensemble(cfg, index.ids());
  const auto result = run_inference(index, spec, cfg.tta, cfg.postprocess, cfg.workers);
  write_inference(result, flags.out_dir, cfg.echo());
  std::cout << "predicted " << result.ids.size() - result.failures.size() << " of "
            << result.ids.size() << " images into " << flags.out_dir << '\n';
  for (const auto& [id, msg] : result.failures) std::cerr << "failed " << id << ": " << msg << '\n';
  return result.failures.empty() ? 0 : kExitRuntime;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& pred_dir) {
  const auto cfg = resolve_config(flags);
  const fs::path data = require_path(flags.data.empty() ? cfg.test_data : fs::path(flags.data),
                                     "--data or config test_data");
  const DatasetIndex index = ingest(data, cfg.canvas, cfg.workers);
  const fs::path preds = pred_dir.empty() ? fs::path(flags.out_dir) / "masks" : fs::path(pred_dir);
  const auto predictions = read_mask_dir(preds);
  const auto report = evaluate(predictions, index, flags.allow_missing, cfg.echo(), cfg.workers);
  fs::create_directories(flags.out_dir);
  write_text(fs::path(flags.out_dir) / "report.json", report_to_json(report));
  write_text(fs::path(flags.out_dir) / "report.csv", report_to_csv(report));
  std::cout << render_table(report);
  return 0;
}

int cmd_report(const std::string& report_path, const std::string& out_dir,
               const std::string& label) {
  const auto report = report_from_json(read_text(report_path));
  std::cout << render_table(report, label);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "report.csv", report_to_csv(report));
  }
  return 0;
}

int cmd_synth(const std::string& out_dir, std::size_t count, int size, std::uint64_t seed,
              const std::string& prefix) {
  const auto samples = make_synthetic_blobs(count, size, seed, prefix);
  write_dataset(out_dir, samples);
  std::cout << "wrote " << count << " synthetic " << size << "x" << size << " images to "
            << out_dir << '\n';
  return 0;
}

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_data = true) {
  cmd->add_option("--config", flags.config, "JSON configuration file");
  cmd->add_option("--seed", flags.seed, "Override the configured seed");
  cmd->add_option("--out-dir", flags.out_dir, "Output directory");
  if (with_data) cmd->add_option("--data", flags.data, "Dataset root (images/, masks/)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Foot ulcer segmentation: ensembling, TTA, post-processing and evaluation"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto* split = app.add_subcommand("split", "Write a k-fold assignment of the training images");
  add_common(split, flags);
  split->add_option("--folds", flags.folds, "Number of folds");

  auto* train = app.add_subcommand("train-toy", "Cross-validated training of the toy pixel model");
  add_common(train, flags);
  train->add_option("--folds", flags.folds, "Number of folds");

  auto* predict = app.add_subcommand("predict", "Ensemble inference with TTA and post-processing");
  add_common(predict, flags);
  predict->add_flag("--no-tta", flags.no_tta, "Disable test-time augmentation");

  std::string pred_dir;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score predicted masks against ground truth");
  add_common(evaluate_cmd, flags);
  evaluate_cmd->add_option("--pred-dir", pred_dir, "Predicted masks (default <out-dir>/masks)");
  evaluate_cmd->add_flag("--allow-missing", flags.allow_missing,
                         "Score ids without a prediction as empty masks");

  std::string report_path;
  std::string report_out;
  std::string label = "Ensemble";
  auto* report = app.add_subcommand("report", "Render a saved evaluation report");
  report->add_option("report", report_path, "report.json written by evaluate")->required();
  report->add_option("--out-dir", report_out, "Also write report.csv here");
  report->add_option("--label", label, "Row label in the table");

  std::string synth_out;
  std::size_t synth_count = 100;
  int synth_size = 64;
  std::uint64_t synth_seed = 0;
  std::string synth_prefix = "img";
  auto* synth = app.add_subcommand("synth", "Generate a synthetic blob dataset");
  synth->add_option("--out-dir", synth_out, "Dataset root to create")->required();
  synth->add_option("--count", synth_count, "Number of images");
  synth->add_option("--size", synth_size, "Image side length in pixels");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--prefix", synth_prefix, "Id prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*split) return cmd_split(flags);
    if (*train) return cmd_train_toy(flags);
    if (*predict) return cmd_predict(flags);
    if (*evaluate_cmd) return cmd_evaluate(flags, pred_dir);
    if (*report) return cmd_report(report_path, report_out, label);
    if (*synth) return cmd_synth(synth_out, synth_count, synth_size, synth_seed, synth_prefix);
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ValidationError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
