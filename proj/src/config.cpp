#include "ulcerseg/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace ulcerseg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T* out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    *out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::optional<std::vector<TtaVariant>> parse_tta(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "all") return all_variants();
    if (s == "rotations+flip") return rotations_and_flip();
    if (s == "none") return std::nullopt;
    throw ConfigError("tta: expected \"all\", \"rotations+flip\", \"none\" or a list of variants");
  }
  if (!j.is_array() || j.empty()) throw ConfigError("tta: expected a non-empty list");
  std::vector<TtaVariant> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw ConfigError("tta: variants must be strings like \"rot90+hflip\"");
    try {
      out.push_back(parse_variant(v.get<std::string>()));
    } catch (const ValidationError& e) {
      throw ConfigError(std::string("tta: ") + e.what());
    }
  }
  return out;
}

}  // namespace

void PipelineConfig::validate() const {
  try {
    if (canvas < 0) throw ValidationError("canvas must be non-negative");
    if (folds < 2) throw ValidationError("folds must be at least 2");
    postprocess.validate();
    training.validate();
    loss.validate();
    augmentation.validate();
    for (const auto& m : models) {
      if (m.family.empty()) throw ValidationError("models: every entry needs a family");
      if (!(m.weight > 0.0)) throw ValidationError("models: weight must be positive");
      if (m.kind == "constant") {
        if (!(m.value >= 0.0 && m.value <= 1.0)) {
          throw ValidationError("models: constant value must be in [0, 1]");
        }
      } else if (m.kind == "toy") {
        if (m.model.empty()) throw ValidationError("models: toy entries need \"model\"");
      } else if (m.kind == "file") {
        if (m.directory.empty()) throw ValidationError("models: file entries need \"directory\"");
      } else {
        throw ValidationError("models: unknown kind '" + m.kind + "'");
      }
    }
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

json PipelineConfig::echo() const {
  json j;
  j["canvas"] = canvas;
  j["seed"] = seed;
  j["folds"] = folds;
  j["threshold"] = postprocess.threshold;
  j["min_object_area"] = postprocess.min_object_area;
  j["connectivity"] = static_cast<int>(postprocess.connectivity);
  json variants = json::array();
  if (tta) {
    for (const auto& v : *tta) variants.push_back(v.label());
  }
  j["tta"] = std::move(variants);
  json models_echo = json::array();
  for (const auto& m : models) {
    models_echo.push_back({{"family", m.family}, {"kind", m.kind}, {"name", m.name},
                           {"weight", m.weight}});
  }
  j["models"] = std::move(models_echo);
  return j;
}

PipelineConfig parse_config(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  reject_unknown(j,
                 {"canvas", "seed", "folds", "workers", "train_data", "test_data", "postprocess",
                  "tta", "training", "loss", "augmentation", "models"},
                 "config");
  PipelineConfig cfg;
  read(j, "canvas", &cfg.canvas, "config");
  read(j, "seed", &cfg.seed, "config");
  read(j, "folds", &cfg.folds, "config");
  read(j, "workers", &cfg.workers, "config");
  std::string path;
  read(j, "train_data", &path, "config");
  cfg.train_data = resolve(base_dir, path);
  path.clear();
  read(j, "test_data", &path, "config");
  cfg.test_data = resolve(base_dir, path);

  if (j.contains("postprocess")) {
    const auto& p = j["postprocess"];
    reject_unknown(p, {"threshold", "min_object_area", "connectivity"}, "postprocess");
    read(p, "threshold", &cfg.postprocess.threshold, "postprocess");
    read(p, "min_object_area", &cfg.postprocess.min_object_area, "postprocess");
    int conn = 8;
    read(p, "connectivity", &conn, "postprocess");
    try {
      cfg.postprocess.connectivity = connectivity_from_int(conn);
    } catch (const ValidationError& e) {
      throw ConfigError(std::string("postprocess: ") + e.what());
    }
  }
  if (j.contains("tta")) cfg.tta = parse_tta(j["tta"]);
  if (j.contains("training")) {
    const auto& t = j["training"];
    reject_unknown(t, {"epochs", "initial_lr", "decay_every", "decay_factor", "batch_size"},
                   "training");
    read(t, "epochs", &cfg.training.epochs, "training");
    read(t, "initial_lr", &cfg.training.initial_lr, "training");
    read(t, "decay_every", &cfg.training.decay_every, "training");
    read(t, "decay_factor", &cfg.training.decay_factor, "training");
    read(t, "batch_size", &cfg.training.batch_size, "training");
  }
  if (j.contains("loss")) {
    const auto& l = j["loss"];
    reject_unknown(l, {"dice_weight", "focal_weight", "focal_gamma", "focal_alpha", "dice_smooth"},
                   "loss");
    read(l, "dice_weight", &cfg.loss.dice_weight, "loss");
    read(l, "focal_weight", &cfg.loss.focal_weight, "loss");
    read(l, "focal_gamma", &cfg.loss.focal_gamma, "loss");
    read(l, "focal_alpha", &cfg.loss.focal_alpha, "loss");
    read(l, "dice_smooth", &cfg.loss.dice_smooth, "loss");
  }
  if (j.contains("augmentation")) {
    const auto& a = j["augmentation"];
    reject_unknown(a,
                   {"scale_limit", "scale_prob", "rot90_prob", "hflip_prob", "vflip_prob",
                    "brightness_contrast_limit", "brightness_contrast_prob", "rng_seed"},
                   "augmentation");
    auto& c = cfg.augmentation;
    read(a, "scale_limit", &c.scale_limit, "augmentation");
    read(a, "scale_prob", &c.scale_prob, "augmentation");
    read(a, "rot90_prob", &c.rot90_prob, "augmentation");
    read(a, "hflip_prob", &c.hflip_prob, "augmentation");
    read(a, "vflip_prob", &c.vflip_prob, "augmentation");
    read(a, "brightness_contrast_limit", &c.brightness_contrast_limit, "augmentation");
    read(a, "brightness_contrast_prob", &c.brightness_contrast_prob, "augmentation");
    read(a, "rng_seed", &c.rng_seed, "augmentation");
  }
  if (j.contains("models")) {
    if (!j["models"].is_array()) throw ConfigError("models: expected a list");
    std::size_t n = 0;
    for (const auto& m : j["models"]) {
      const std::string where = "models[" + std::to_string(n++) + "]";
      reject_unknown(m, {"family", "kind", "name", "weight", "value", "model", "directory", "manifest"},
                     where);
      ModelDecl d;
      read(m, "family", &d.family, where);
      read(m, "kind", &d.kind, where);
      read(m, "name", &d.name, where);
      read(m, "weight", &d.weight, where);
      read(m, "value", &d.value, where);
      std::string p;
      read(m, "model", &p, where);
      d.model = resolve(base_dir, p);
      p.clear();
      read(m, "directory", &p, where);
      d.directory = resolve(base_dir, p);
      p.clear();
      read(m, "manifest", &p, where);
      d.manifest = resolve(base_dir, p);
      if (d.name.empty()) d.name = d.family + "/" + d.kind + std::to_string(n - 1);
      cfg.models.push_back(std::move(d));
    }
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

EnsembleSpec build_ensemble(const PipelineConfig& cfg, const std::vector<std::string>& default_ids) {
  if (cfg.models.empty()) throw ConfigError("no predictors configured (config key \"models\")");
  EnsembleSpec spec;
  for (const auto& m : cfg.models) {
    auto fam = std::find_if(spec.families.begin(), spec.families.end(),
                            [&](const ModelFamily& f) { return f.name == m.family; });
    if (fam == spec.families.end()) {
      spec.families.push_back({m.family, {}});
      fam = std::prev(spec.families.end());
    }
    PredictorHandle handle;
    if (m.kind == "constant") {
      handle = make_constant_predictor(m.value, m.name);
    } else if (m.kind == "toy") {
      std::ifstream in(m.model);
      if (!in) throw DataError("cannot read toy model " + m.model.string());
      std::ostringstream ss;
      ss << in.rdbuf();
      handle = make_toy_predictor(toy_model_from_json(ss.str()), m.name);
    } else {
      const auto ids = m.manifest.empty() ? default_ids : read_manifest(m.manifest);
      handle = load_file_predictor(m.directory, ids, m.name);
    }
    fam->members.push_back({std::move(handle), m.weight});
  }
  return spec;
}

}  // namespace ulcerseg
