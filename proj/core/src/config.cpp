#include "ia/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "ia/strutil.hpp"

namespace ia {

void KvConfig::set(const std::string& key, const std::string& value, int line) {
  entries.push_back({key, value, line});
}

const std::string* KvConfig::find(const std::string& key) const {
  const std::string* found = nullptr;
  for (const KvEntry& e : entries) {
    if (e.key == key) found = &e.value;
  }
  return found;
}

KvConfig parse_kv_text(const std::string& text, const std::string& origin) {
  KvConfig cfg;
  int line_no = 0;
  std::string line;
  std::istringstream is(text);
  while (std::getline(is, line)) {
    ++line_no;
    std::string t = strutil::trim(line);
    const size_t hash = t.find('#');
    if (hash != std::string::npos) t = strutil::trim(t.substr(0, hash));
    if (t.empty()) continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected `key = value`, got '" + line + "'");
    }
    const std::string key = strutil::trim(t.substr(0, eq));
    const std::string value = strutil::trim(t.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    cfg.set(key, value, line_no);
  }
  return cfg;
}

KvConfig parse_kv_file(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot open config file " + file.string());
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_kv_text(text, file.string());
}

void apply_override(KvConfig& cfg, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must have the form key=value");
  }
  cfg.set(strutil::trim(assignment.substr(0, eq)), strutil::trim(assignment.substr(eq + 1)));
}

const std::vector<std::string>& valid_config_keys() {
  static const std::vector<std::string> keys = {
      "stages",         "widths",          "ia_placement",  "ia_modules",    "patch_sizes",
      "fusion",         "sigma1",          "sigma2",        "sigma_auto",    "arrangement",
      "remove_last_stride", "use_location", "use_appearance", "num_ids",
      "images_per_id",  "query_per_id",    "gallery_per_id", "canvas_h",     "canvas_w",
      "translation_max", "scale_min",      "scale_max",     "noise_std",     "seed",
      "lr",             "batch",           "epochs",        "ablate_axis",   "ablate_seeds",
      "flops_preset",   "flops_ia_stages", "flops_ia_modules",
  };
  return keys;
}

namespace {

std::set<int> placement_from_value(const std::string& value) {
  std::set<int> out;
  const std::string t = strutil::trim(value);
  if (t == "none" || t.empty()) return out;
  for (const std::string& part : strutil::split(t, ',')) {
    const std::string p = strutil::trim(part);
    if (p.rfind("stage", 0) != 0) {
      throw ConfigError("ia_placement entries look like stageN or none, got '" + p + "'");
    }
    out.insert(static_cast<int>(strutil::parse_int(p.substr(5), "ia_placement")));
  }
  return out;
}

[[noreturn]] void unknown_key(const KvEntry& e) {
  std::string msg = "unknown config key '" + e.key + "'";
  if (e.line > 0) msg += " (line " + std::to_string(e.line) + ")";
  msg += "; valid keys: ";
  msg += strutil::join(valid_config_keys(), ", ");
  throw ConfigError(msg);
}

}  // namespace

ExperimentConfig experiment_from_kv(const KvConfig& kv) {
  ExperimentConfig cfg;
  for (const KvEntry& e : kv.entries) {
    const std::string& v = e.value;
    if (e.key == "stages") {
      if (strutil::parse_int(v, e.key) != 4) {
        throw ConfigError("stages: the backbone is fixed at 4 stages");
      }
    } else if (e.key == "widths") {
      const auto w = strutil::parse_int_list(v, e.key);
      if (w.size() != 4) throw ConfigError("widths needs exactly 4 entries");
      for (size_t i = 0; i < 4; ++i) cfg.model.widths[i] = w[i];
    } else if (e.key == "ia_placement") {
      cfg.model.ia_placement = placement_from_value(v);
    } else if (e.key == "ia_modules") {
      cfg.model.ia_modules = ia_modules_from_string(v);
    } else if (e.key == "patch_sizes") {
      cfg.model.ia.patch_sizes = strutil::parse_int_list(v, e.key);
    } else if (e.key == "fusion") {
      cfg.model.ia.fusion = relation::fusion_from_string(v);
    } else if (e.key == "sigma1") {
      cfg.model.ia.sigma1 = strutil::parse_double(v, e.key);
    } else if (e.key == "sigma2") {
      cfg.model.ia.sigma2 = strutil::parse_double(v, e.key);
    } else if (e.key == "sigma_auto") {
      cfg.model.sigma_auto = strutil::parse_bool(v, e.key);
    } else if (e.key == "arrangement") {
      cfg.model.ia.arrangement = arrangement_from_string(v);
    } else if (e.key == "remove_last_stride") {
      cfg.model.remove_last_stride = strutil::parse_bool(v, e.key);
    } else if (e.key == "use_location") {
      cfg.model.ia.use_location = strutil::parse_bool(v, e.key);
    } else if (e.key == "use_appearance") {
      cfg.model.ia.use_appearance = strutil::parse_bool(v, e.key);
    } else if (e.key == "num_ids") {
      cfg.data.num_ids = static_cast<int>(strutil::parse_int(v, e.key));
    } else if (e.key == "images_per_id") {
      cfg.data.images_per_id = static_cast<int>(strutil::parse_int(v, e.key));
    } else if (e.key == "query_per_id") {
      cfg.data.query_per_id = static_cast<int>(strutil::parse_int(v, e.key));
    } else if (e.key == "gallery_per_id") {
      cfg.data.gallery_per_id = static_cast<int>(strutil::parse_int(v, e.key));
    } else if (e.key == "canvas_h") {
      cfg.data.canvas_h = strutil::parse_int(v, e.key);
    } else if (e.key == "canvas_w") {
      cfg.data.canvas_w = strutil::parse_int(v, e.key);
    } else if (e.key == "translation_max") {
      cfg.data.translation_max = strutil::parse_double(v, e.key);
    } else if (e.key == "scale_min") {
      cfg.data.scale_min = strutil::parse_double(v, e.key);
    } else if (e.key == "scale_max") {
      cfg.data.scale_max = strutil::parse_double(v, e.key);
    } else if (e.key == "noise_std") {
      cfg.data.noise_std = strutil::parse_double(v, e.key);
    } else if (e.key == "seed") {
      cfg.data.seed = static_cast<uint64_t>(strutil::parse_int(v, e.key));
      cfg.hyper.seed = cfg.data.seed;
    } else if (e.key == "lr") {
      cfg.hyper.lr = strutil::parse_double(v, e.key);
    } else if (e.key == "batch") {
      cfg.hyper.batch = static_cast<int>(strutil::parse_int(v, e.key));
    } else if (e.key == "epochs") {
      cfg.hyper.epochs = static_cast<int>(strutil::parse_int(v, e.key));
    } else if (e.key == "ablate_axis") {
      cfg.ablate_axis = strutil::trim(v);
    } else if (e.key == "ablate_seeds") {
      cfg.ablate_seeds.clear();
      for (int s : strutil::parse_int_list(v, e.key)) {
        cfg.ablate_seeds.push_back(static_cast<uint64_t>(s));
      }
      if (cfg.ablate_seeds.empty()) throw ConfigError("ablate_seeds must not be empty");
    } else if (e.key == "flops_preset") {
      cfg.flops_preset = strutil::trim(v);
    } else if (e.key == "flops_ia_stages") {
      cfg.flops_ia.stages.clear();
      for (int s : placement_from_value(v)) cfg.flops_ia.stages.insert(s);
    } else if (e.key == "flops_ia_modules") {
      const IAModules m = ia_modules_from_string(strutil::trim(v));
      cfg.flops_ia.sia = m != IAModules::kCiaOnly;
      cfg.flops_ia.cia = m != IAModules::kSiaOnly;
    } else {
      unknown_key(e);
    }
  }
  cfg.model.num_ids = cfg.data.num_ids;
  cfg.model.validate();
  return cfg;
}

AblateSpec ablate_spec_from(const ExperimentConfig& cfg) {
  AblateSpec spec;
  spec.axis = cfg.ablate_axis;
  spec.seeds = cfg.ablate_seeds;
  spec.data = cfg.data;
  spec.model = cfg.model;
  spec.hyper = cfg.hyper;
  return spec;
}

}  // namespace ia
