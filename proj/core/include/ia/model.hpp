#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ia/autograd.hpp"
#include "ia/ia_block.hpp"
#include "ia/tensor.hpp"

namespace ia {

// Which residual branches an inserted block applies. `kBoth` is the full IA
// block; the single-branch variants exist for ablations.
enum class IAModules { kBoth, kSiaOnly, kCiaOnly };

std::string to_string(IAModules m);
IAModules ia_modules_from_string(const std::string& s);

struct StageGeom {
  int64_t channels;
  int64_t h;
  int64_t w;
  int64_t stride;
};

// Four-stage convolutional backbone on 3x64x32 inputs. Stage 1 is the 3x3
// stride-1 stem; stages 2-4 downsample by 2, except stage 4 runs at stride 1
// when remove_last_stride is set (keeping the final 16x8 map).
struct BackboneConfig {
  int64_t in_channels = 3;
  int64_t in_h = 64;
  int64_t in_w = 32;
  std::array<int64_t, 4> widths{16, 32, 64, 128};
  std::set<int> ia_placement{2, 3};
  bool remove_last_stride = true;
  IAModules ia_modules = IAModules::kBoth;
  IAConfig ia;
  // When set, per-stage sigmas scale with the stage grid instead of using
  // ia.sigma1/sigma2 verbatim: sigma1 = W*10/8, sigma2 = H*20/16.
  bool sigma_auto = true;
  int64_t num_ids = 0;

  int64_t embed_dim() const { return widths[3]; }
  void validate() const;
  std::vector<StageGeom> stage_geometry() const;  // geometry after each stage
  IAConfig stage_ia_config(int stage) const;
};

struct ConvBnParams {
  Tensor kernel;  // [Cout, Cin, 3, 3]
  Tensor gamma;
  Tensor beta;
  ops::BatchNormState state;

  ConvBnParams(int64_t cout, int64_t cin)
      : kernel({cout, cin, 3, 3}), gamma(Tensor::ones({cout})), beta(Tensor::zeros({cout})),
        state(cout) {}
};

struct ModelParams {
  std::vector<ConvBnParams> stages;
  std::map<int, IABlockParams> ia;
  Tensor cls_weight;  // [num_ids, embed]
  Tensor cls_bias;    // [num_ids]

  // Fixed enumeration of trainable tensors; pairs of (name, tensor).
  std::vector<std::pair<std::string, Tensor*>> trainable();
};

// Backbone and classifier weights depend only on the seed and geometry, not
// on the IA placement, so an IA-augmented model starts from the same weights
// as its plain counterpart.
ModelParams init_params(const BackboneConfig& cfg, uint64_t seed);

struct ConvBnVars {
  ag::Var kernel;
  ag::Var gamma;
  ag::Var beta;
  ops::BatchNormState* state = nullptr;
};

struct ModelVars {
  std::vector<ConvBnVars> stages;
  std::map<int, IABlockVars> ia;
  ag::Var cls_weight;
  ag::Var cls_bias;
};

ModelVars make_model_vars(ag::GradTape& tape, ModelParams& params, bool requires_grad);

struct ForwardOut {
  ag::Var embeddings;  // [B, embed]
  ag::Var logits;      // [B, num_ids]
};

ForwardOut model_forward(const ag::Var& images, const BackboneConfig& cfg, const ModelVars& vars,
                         ops::Mode mode);

// Delegates to tensor-core cross entropy.
ag::Var model_loss(const ag::Var& logits, std::vector<int> labels);

// Eval-mode pooled pre-classifier features.
Tensor embed(const Tensor& images, const BackboneConfig& cfg, ModelParams& params);

// Eval-mode feature map entering the given stage's IA block, i.e. the stage
// output before any block inserted there (earlier stages run in full).
Tensor stage_features(const Tensor& images, const BackboneConfig& cfg, ModelParams& params,
                      int stage);
std::pair<Tensor, Tensor> forward_eval(const Tensor& images, const BackboneConfig& cfg,
                                       ModelParams& params);

// Checkpoints: named IATN tensors plus a config snapshot in the directory.
void save_checkpoint(const std::filesystem::path& dir, const BackboneConfig& cfg,
                     ModelParams& params);
std::pair<BackboneConfig, ModelParams> load_checkpoint(const std::filesystem::path& dir);

}  // namespace ia
