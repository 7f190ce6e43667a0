#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ia/ablate.hpp"
#include "ia/dataset.hpp"
#include "ia/flops.hpp"
#include "ia/model.hpp"
#include "ia/train.hpp"

namespace ia {

// UTF-8 `key = value` lines; '#' starts a comment. Later assignments win.
struct KvEntry {
  std::string key;
  std::string value;
  int line = 0;  // 0 for overrides
};

struct KvConfig {
  std::vector<KvEntry> entries;

  void set(const std::string& key, const std::string& value, int line = 0);
  const std::string* find(const std::string& key) const;
};

KvConfig parse_kv_text(const std::string& text, const std::string& origin);
KvConfig parse_kv_file(const std::filesystem::path& file);
// `assignment` has the form key=value.
void apply_override(KvConfig& cfg, const std::string& assignment);

// Full experiment configuration shared by the CLI subcommands.
struct ExperimentConfig {
  BackboneConfig model;
  SyntheticSpec data;
  TrainHyper hyper;
  std::string ablate_axis = "fusion";
  std::vector<uint64_t> ablate_seeds{1};
  std::string flops_preset;  // empty = toy backbone
  IaCostSpec flops_ia;       // for the resnet50 preset
};

// Typed extraction; unknown keys are rejected with the full list of valid
// keys and the offending line number.
ExperimentConfig experiment_from_kv(const KvConfig& kv);

const std::vector<std::string>& valid_config_keys();

AblateSpec ablate_spec_from(const ExperimentConfig& cfg);

}  // namespace ia
