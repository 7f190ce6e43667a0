#pragma once

#include <set>
#include <string>
#include <vector>

#include "ia/model.hpp"

namespace ia {

struct LayerCount {
  std::string name;
  int64_t multiplies;
};

// Analytic multiply counts; additions are not counted. Only convolutions,
// linear layers and IA aggregations contribute.
struct FlopReport {
  std::vector<LayerCount> layers;
  int64_t backbone_multiplies = 0;
  int64_t ia_multiplies = 0;

  int64_t total() const { return backbone_multiplies + ia_multiplies; }
  double relative_overhead() const {
    return backbone_multiplies == 0
               ? 0.0
               : static_cast<double>(ia_multiplies) / static_cast<double>(backbone_multiplies);
  }
};

// Which attention costs to charge at each placed stage.
struct IaCostSpec {
  std::set<int> stages;
  bool sia = true;
  bool cia = true;
};

// Counts for the toy backbone, charging the IA blocks it would actually run.
FlopReport flop_report_toy(const BackboneConfig& cfg);

// ResNet-50 geometry at 256x128 input with the last spatial downsampling
// removed and a 751-way classifier; weights are never needed. Stage numbers
// in `ia` refer to the four residual stages (stage-3 output is 1024x16x8).
FlopReport flop_report_resnet50_256x128(const IaCostSpec& ia);

// Dispatch by preset name ("" or "toy" uses the toy config).
FlopReport flop_report(const std::string& preset, const BackboneConfig& toy_cfg,
                       const IaCostSpec& ia);

std::string format_flop_report(const FlopReport& report);

}  // namespace ia
