#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ia/autograd.hpp"
#include "ia/tensor.hpp"

namespace ia::relation {

struct Grid {
  int64_t h = 1;
  int64_t w = 1;
  int64_t m() const { return h * w; }
  bool operator==(const Grid&) const = default;
};

enum class Fusion { kProd, kSum, kMax };

std::string to_string(Fusion f);
Fusion fusion_from_string(const std::string& s);

// M x M row-stochastic matrix over spatial positions, index i = y*W + x.
struct SpatialRelationMap {
  Grid grid;
  Tensor matrix;  // [M, M]
};

// Two-dimensional Gaussian prior over coordinate offsets; sigma1 acts on the
// horizontal (width) axis and sigma2 on the vertical (height) axis.
struct LocationPrior {
  double sigma1 = 5.0;
  double sigma2 = 10.0;
  Grid grid;
};

// Window offsets for a K x K context patch. Even K anchors at
// [-floor((K-1)/2), K-1-floor((K-1)/2)], so K=2 uses {0,1} and K=3 {-1,0,1}.
std::vector<std::pair<int, int>> patch_offsets(int k);

// G[i,j] = f_i . f_j for columns of fmat [C, M].
Tensor gram_logits(const Tensor& fmat);

// Shifted-Gram accumulation: L[i,j] = sum_d G[i+d, j+d] over the K x K window,
// with out-of-grid positions contributing zero.
Tensor patch_logits(const Tensor& gram, Grid grid, int k);
Tensor patch_logits_sum(const Tensor& gram, Grid grid, std::span<const int> ks);
// Adjoint of patch_logits_sum: the same accumulation with negated offsets.
Tensor patch_logits_sum_adjoint(const Tensor& grad, Grid grid, std::span<const int> ks);

SpatialRelationMap appearance_map_single(const Tensor& fmat, Grid grid, int k);

// Multi-context fusion. PROD runs in the log domain, which reduces to a row
// softmax of the summed raw patch logits (per-row softmax constants cancel).
// A singleton K set returns the single-context map unchanged for every fusion.
SpatialRelationMap appearance_map_multi(const Tensor& fmat, Grid grid, std::span<const int> ks,
                                        Fusion fusion);
// Literal evaluation: softmax each K, fuse (PROD via summed log maps), softmax.
SpatialRelationMap appearance_map_multi_literal(const Tensor& fmat, Grid grid,
                                                std::span<const int> ks, Fusion fusion);

// Pre-normalization Gaussian values, including the 1/(2 pi s1 s2) constant.
Tensor location_kernel(const LocationPrior& prior);
// Rows normalized to sum to one.
SpatialRelationMap location_map(const LocationPrior& prior);

// Integrates appearance with location relations; PROD in the log domain.
SpatialRelationMap semantic_map(const SpatialRelationMap& appearance,
                                const SpatialRelationMap& location, Fusion fusion);

// log with an underflow floor so fully-decayed prior entries stay finite.
Tensor safe_log(const Tensor& t);

// Everything needed to build the relation map for one feature matrix.
struct RelationConfig {
  Grid grid;
  std::vector<int> patch_sizes{1, 2, 3};
  Fusion fusion = Fusion::kProd;
  bool use_appearance = true;
  bool use_location = true;
  double sigma1 = 5.0;
  double sigma2 = 10.0;
};

// Location terms shared across a batch (empty tensors when unused).
struct LocationTerms {
  Tensor prob;      // S^L
  Tensor log_prob;  // log S^L
};
LocationTerms make_location_terms(const RelationConfig& cfg);

// Differentiable relation map S for fmat [C, M]. The PROD path runs as one
// fused node; SUM/MAX compose primitive ops. `loc` must come from
// make_location_terms(cfg).
ag::Var relation_map_var(const ag::Var& fmat, const RelationConfig& cfg,
                         const LocationTerms& loc);

// Plain-tensor convenience over the same code path.
SpatialRelationMap relation_map(const Tensor& fmat, const RelationConfig& cfg);

// Differentiable shifted-Gram patch logits.
ag::Var patch_logits_var(const ag::Var& gram, Grid grid, int k);

}  // namespace ia::relation
