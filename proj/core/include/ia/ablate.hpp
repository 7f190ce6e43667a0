#pragma once

#include <string>
#include <vector>

#include "ia/dataset.hpp"
#include "ia/model.hpp"
#include "ia/train.hpp"

namespace ia {

// One-axis ablation grids mirroring the SIA/CIA studies: context patch sizes,
// fusion functions, relation-map variants, block arrangements and placements.
struct AblateSpec {
  std::string axis = "fusion";  // none|context|fusion|variant|arrangement|placement
  std::vector<uint64_t> seeds{1};
  SyntheticSpec data;
  BackboneConfig model;
  TrainHyper hyper;
};

struct AblateRow {
  std::string config_id;
  double top1 = 0.0;
  double map = 0.0;
  double loss_final = 0.0;
  double seconds = 0.0;
  std::vector<double> loss_curve;  // not part of the TSV
};

struct AblateResult {
  std::vector<AblateRow> rows;
  std::vector<std::string> notes;  // qualitative direction checks, pass/fail
};

// The configurations an axis expands to, id first. "none" yields the base
// configuration alone; every other axis prepends an IA-free baseline.
std::vector<std::pair<std::string, BackboneConfig>> ablation_grid(const std::string& axis,
                                                                  const BackboneConfig& base);

// Trains and evaluates every grid entry on every seed (dataset and training
// seeds are shared across entries). With several seeds, per-entry medians are
// appended as `<id>@median` rows.
AblateResult ablate(const AblateSpec& spec);

// TSV: config_id, top1, map, loss_final, seconds.
std::string ablation_table_tsv(const AblateResult& result);

}  // namespace ia
