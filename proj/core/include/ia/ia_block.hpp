#pragma once

#include <span>
#include <string>
#include <vector>

#include "ia/autograd.hpp"
#include "ia/ops.hpp"
#include "ia/relation.hpp"
#include "ia/tensor.hpp"

namespace ia {

enum class Arrangement { kSiaThenCia, kCiaThenSia, kParallel };

std::string to_string(Arrangement a);
Arrangement arrangement_from_string(const std::string& s);

struct IAConfig {
  std::vector<int> patch_sizes{1, 2, 3};
  relation::Fusion fusion = relation::Fusion::kProd;
  double sigma1 = 5.0;
  double sigma2 = 10.0;
  bool use_location = true;
  bool use_appearance = true;
  Arrangement arrangement = Arrangement::kSiaThenCia;

  void validate() const;
  relation::RelationConfig relation_config(relation::Grid grid) const;
};

// Batch-norm parameters for one residual branch. Gammas start at exactly
// zero so a fresh block is the identity function.
struct BnParams {
  Tensor gamma;
  Tensor beta;
  ops::BatchNormState state;

  explicit BnParams(int64_t channels)
      : gamma(Tensor::zeros({channels})), beta(Tensor::zeros({channels})), state(channels) {}
};

struct IABlockParams {
  BnParams bn_sia;
  BnParams bn_cia;

  explicit IABlockParams(int64_t channels) : bn_sia(channels), bn_cia(channels) {}
};

// Tape handles for one branch's parameters; `state` stays owned by the caller.
struct BnVars {
  ag::Var gamma;
  ag::Var beta;
  ops::BatchNormState* state = nullptr;
};

struct IABlockVars {
  BnVars sia;
  BnVars cia;
};

IABlockVars block_vars(ag::GradTape& tape, IABlockParams& params, bool requires_grad);
IABlockVars block_consts(IABlockParams& params);

enum class InnerModule { kSia, kCia };

// E^S: per batch item, aggregate spatial features through the relation map,
// E = F S^T reshaped back to [B,C,H,W].
ag::Var sia_forward(const ag::Var& x, const IAConfig& cfg);

// E^C: per batch item, C = softmax(F F^T), E = C F.
ag::Var cia_forward(const ag::Var& x);

// Y = BN(E) + F for the selected inner module.
ag::Var ia_residual(const ag::Var& x, InnerModule inner, const IAConfig& cfg, const BnVars& bn,
                    ops::Mode mode);

// Sequential or parallel composition of SIA and CIA residual branches.
ag::Var ia_block(const ag::Var& x, const IAConfig& cfg, const IABlockVars& vars, ops::Mode mode);

// Plain-tensor entry points (train mode still updates running statistics).
Tensor sia_forward(const Tensor& x, const IAConfig& cfg);
Tensor cia_forward(const Tensor& x);
Tensor ia_residual(const Tensor& x, InnerModule inner, const IAConfig& cfg, IABlockParams& params,
                   ops::Mode mode);
Tensor ia_block(const Tensor& x, const IAConfig& cfg, IABlockParams& params, ops::Mode mode);

// Multiply counts. Extra context levels reuse the K=1 dot products and add
// only shifted sums, so the count is independent of the patch-size set.
int64_t sia_flops(int64_t c, int64_t h, int64_t w, std::span<const int> ks);
int64_t cia_flops(int64_t c, int64_t h, int64_t w);

}  // namespace ia
