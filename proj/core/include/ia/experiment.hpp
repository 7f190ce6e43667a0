#pragma once

#include "ia/dataset.hpp"
#include "ia/model.hpp"
#include "ia/retrieval.hpp"
#include "ia/train.hpp"

namespace ia {

// Embeds query and gallery in eval mode and ranks by cosine distance.
RetrievalReport evaluate_retrieval(const BackboneConfig& cfg, ModelParams& params,
                                   const LabeledImages& query, const LabeledImages& gallery);

struct ExperimentResult {
  TrainResult train;
  RetrievalReport retrieval;
};

ExperimentResult run_experiment(const BackboneConfig& cfg, const Dataset& data,
                                const TrainHyper& hyper);

}  // namespace ia
