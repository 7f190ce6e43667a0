#include "ia/train.hpp"

#include <cmath>
#include <numeric>

namespace ia {

namespace {

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  int64_t t = 0;
};

}  // namespace

TrainResult train(const BackboneConfig& cfg, const LabeledImages& data, const TrainHyper& hyper) {
  cfg.validate();
  if (data.count() == 0) throw ConfigError("training set is empty");
  if (cfg.num_ids < 2) throw ConfigError("training needs num_ids >= 2");
  if (hyper.batch < 1 || hyper.epochs < 0) throw ConfigError("bad batch size or epoch count");
  for (int label : data.labels) {
    if (label < 0 || label >= cfg.num_ids) {
      throw IndexError("training label " + std::to_string(label) + " outside [0," +
                       std::to_string(cfg.num_ids) + ")");
    }
  }

  TrainResult result;
  result.params = init_params(cfg, hyper.seed);
  auto tensors = result.params.trainable();

  AdamState adam;
  adam.m.reserve(tensors.size());
  adam.v.reserve(tensors.size());
  for (auto& [name, t] : tensors) {
    adam.m.push_back(Tensor::zeros(t->shape()));
    adam.v.push_back(Tensor::zeros(t->shape()));
  }

  // One deterministic shuffle; a fixed batch partition keeps the zero-lr
  // loss curve exactly flat (train-mode BN ties losses to batch composition).
  Rng shuffle_rng(hyper.seed ^ 0x9e3779b97f4a7c15ull);
  const int64_t n = data.count();
  std::vector<int64_t> indices(static_cast<size_t>(n));
  std::iota(indices.begin(), indices.end(), 0);
  shuffle_rng.shuffle(indices);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int64_t start = 0; start < n; start += hyper.batch) {
      const int64_t end = std::min<int64_t>(n, start + hyper.batch);
      const LabeledImages batch =
          gather(data, std::span<const int64_t>(indices.data() + start,
                                                static_cast<size_t>(end - start)));

      ag::GradTape tape;
      ModelVars vars = make_model_vars(tape, result.params, true);
      ag::Var images = tape.leaf(batch.images, false);
      ForwardOut out = model_forward(images, cfg, vars, ops::Mode::kTrain);
      ag::Var loss = model_loss(out.logits, batch.labels);
      const double loss_value = loss.value().item();
      if (!std::isfinite(loss_value)) {
        throw TrainingError("training diverged (non-finite loss) at epoch " +
                            std::to_string(epoch));
      }
      epoch_loss += loss_value * static_cast<double>(end - start);
      if (hyper.lr == 0.0) continue;  // null update; skip backward entirely
      tape.backward(loss);

      // Leaf order in ModelVars matches ModelParams::trainable().
      std::vector<const Tensor*> grads;
      grads.reserve(tensors.size());
      for (ConvBnVars& s : vars.stages) {
        grads.push_back(&s.kernel.grad());
        grads.push_back(&s.gamma.grad());
        grads.push_back(&s.beta.grad());
      }
      for (auto& [stage, block] : vars.ia) {
        grads.push_back(&block.sia.gamma.grad());
        grads.push_back(&block.sia.beta.grad());
        grads.push_back(&block.cia.gamma.grad());
        grads.push_back(&block.cia.beta.grad());
      }
      grads.push_back(&vars.cls_weight.grad());
      grads.push_back(&vars.cls_bias.grad());

      ++adam.t;
      const double bc1 = 1.0 - std::pow(hyper.adam_beta1, static_cast<double>(adam.t));
      const double bc2 = 1.0 - std::pow(hyper.adam_beta2, static_cast<double>(adam.t));
      for (size_t p = 0; p < tensors.size(); ++p) {
        Tensor& theta = *tensors[p].second;
        const Tensor& g = *grads[p];
        Tensor& m = adam.m[p];
        Tensor& v = adam.v[p];
        for (int64_t i = 0; i < theta.size(); ++i) {
          m[i] = hyper.adam_beta1 * m[i] + (1.0 - hyper.adam_beta1) * g[i];
          v[i] = hyper.adam_beta2 * v[i] + (1.0 - hyper.adam_beta2) * g[i] * g[i];
          theta[i] -= hyper.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + hyper.adam_eps);
        }
      }
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(n));
  }
  return result;
}

}  // namespace ia
