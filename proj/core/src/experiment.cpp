#include "ia/experiment.hpp"

namespace ia {

RetrievalReport evaluate_retrieval(const BackboneConfig& cfg, ModelParams& params,
                                   const LabeledImages& query, const LabeledImages& gallery) {
  const Tensor q = embed(query.images, cfg, params);
  const Tensor g = embed(gallery.images, cfg, params);
  return cmc_map(distance_matrix(q, g), query.labels, gallery.labels);
}

ExperimentResult run_experiment(const BackboneConfig& cfg, const Dataset& data,
                                const TrainHyper& hyper) {
  ExperimentResult result;
  result.train = train(cfg, data.train, hyper);
  result.retrieval = evaluate_retrieval(cfg, result.train.params, data.query, data.gallery);
  return result;
}

}  // namespace ia
