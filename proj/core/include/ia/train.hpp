#pragma once

#include <cstdint>
#include <vector>

#include "ia/dataset.hpp"
#include "ia/model.hpp"

namespace ia {

struct TrainHyper {
  double lr = 0.0003;
  int batch = 32;
  int epochs = 10;
  uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_curve;  // per-sample mean loss per epoch
};

// Identity-classification training with Adam. Deterministic for a fixed seed:
// parameter init, shuffling and update order all derive from it.
TrainResult train(const BackboneConfig& cfg, const LabeledImages& data, const TrainHyper& hyper);

}  // namespace ia
