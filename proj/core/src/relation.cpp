#include "ia/relation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ia/ops.hpp"

namespace ia::relation {

std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::kProd: return "prod";
    case Fusion::kSum: return "sum";
    case Fusion::kMax: return "max";
  }
  return "?";
}

Fusion fusion_from_string(const std::string& s) {
  if (s == "prod" || s == "PROD") return Fusion::kProd;
  if (s == "sum" || s == "SUM") return Fusion::kSum;
  if (s == "max" || s == "MAX") return Fusion::kMax;
  throw ConfigError("unknown fusion '" + s + "' (expected prod, sum or max)");
}

std::vector<std::pair<int, int>> patch_offsets(int k) {
  if (k < 1) throw ConfigError("patch size must be >= 1, got " + std::to_string(k));
  const int lo = -(k - 1) / 2;
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<size_t>(k) * static_cast<size_t>(k));
  for (int dy = lo; dy < lo + k; ++dy) {
    for (int dx = lo; dx < lo + k; ++dx) out.emplace_back(dy, dx);
  }
  return out;
}

Tensor gram_logits(const Tensor& fmat) {
  if (fmat.rank() != 2) {
    throw DimensionError("gram_logits expects [C,M], got " + shape_str(fmat.shape()));
  }
  return ops::gemm(fmat, fmat, true, false);
}

namespace {

void check_square(const Tensor& gram, Grid grid, const char* what) {
  if (gram.rank() != 2 || gram.extent(0) != grid.m() || gram.extent(1) != grid.m()) {
    throw DimensionError(std::string(what) + ": matrix " + shape_str(gram.shape()) +
                         " does not match grid " + std::to_string(grid.h) + "x" +
                         std::to_string(grid.w));
  }
}

// out[i,j] += in[i+d, j+d] for every offset, skipping out-of-grid positions.
void accumulate_shifted(const Tensor& in, Grid grid,
                        const std::vector<std::pair<int, int>>& offsets, Tensor& out) {
  const int64_t h = grid.h, w = grid.w, m = grid.m();
  for (const auto& [dy, dx] : offsets) {
    const int64_t y_lo = std::max<int64_t>(0, -dy), y_hi = std::min<int64_t>(h, h - dy);
    const int64_t x_lo = std::max<int64_t>(0, -dx), x_hi = std::min<int64_t>(w, w - dx);
    const int64_t shift = static_cast<int64_t>(dy) * w + dx;
    for (int64_t yi = y_lo; yi < y_hi; ++yi) {
      for (int64_t xi = x_lo; xi < x_hi; ++xi) {
        const int64_t i = yi * w + xi;
        const double* src = in.data() + (i + shift) * m + shift;
        double* dst = out.data() + i * m;
        for (int64_t yj = y_lo; yj < y_hi; ++yj) {
          const int64_t j0 = yj * w + x_lo;
          const double* s = src + j0;
          double* d = dst + j0;
          const int64_t len = x_hi - x_lo;
          for (int64_t t = 0; t < len; ++t) d[t] += s[t];
        }
      }
    }
  }
}

}  // namespace

Tensor patch_logits(const Tensor& gram, Grid grid, int k) {
  check_square(gram, grid, "patch_logits");
  if (k == 1) return gram;
  Tensor out({grid.m(), grid.m()});
  accumulate_shifted(gram, grid, patch_offsets(k), out);
  return out;
}

Tensor patch_logits_sum(const Tensor& gram, Grid grid, std::span<const int> ks) {
  check_square(gram, grid, "patch_logits_sum");
  std::vector<std::pair<int, int>> offsets;
  for (int k : ks) {
    auto o = patch_offsets(k);
    offsets.insert(offsets.end(), o.begin(), o.end());
  }
  Tensor out({grid.m(), grid.m()});
  accumulate_shifted(gram, grid, offsets, out);
  return out;
}

Tensor patch_logits_sum_adjoint(const Tensor& grad, Grid grid, std::span<const int> ks) {
  check_square(grad, grid, "patch_logits_sum_adjoint");
  std::vector<std::pair<int, int>> offsets;
  for (int k : ks) {
    for (auto [dy, dx] : patch_offsets(k)) offsets.emplace_back(-dy, -dx);
  }
  Tensor out({grid.m(), grid.m()});
  accumulate_shifted(grad, grid, offsets, out);
  return out;
}

SpatialRelationMap appearance_map_single(const Tensor& fmat, Grid grid, int k) {
  if (fmat.rank() != 2 || fmat.extent(1) != grid.m()) {
    throw DimensionError("appearance_map_single: fmat " + shape_str(fmat.shape()) +
                         " does not match grid " + std::to_string(grid.h) + "x" +
                         std::to_string(grid.w));
  }
  Tensor logits = patch_logits(gram_logits(fmat), grid, k);
  return {grid, ops::softmax_rows(logits)};
}

namespace {

void check_ks(std::span<const int> ks) {
  if (ks.empty()) throw ConfigError("appearance fusion needs at least one patch size");
}

Tensor fuse_prob_maps(std::span<const Tensor> maps, Fusion fusion) {
  Tensor fused = maps[0];
  for (size_t i = 1; i < maps.size(); ++i) {
    fused = ops::elementwise(fusion == Fusion::kMax ? ops::Ewise::kMax : ops::Ewise::kAdd, fused,
                             maps[i]);
  }
  return fused;
}

}  // namespace

SpatialRelationMap appearance_map_multi(const Tensor& fmat, Grid grid, std::span<const int> ks,
                                        Fusion fusion) {
  check_ks(ks);
  if (ks.size() == 1) return appearance_map_single(fmat, grid, ks[0]);
  const Tensor gram = gram_logits(fmat);
  if (fusion == Fusion::kProd) {
    // Log-domain product: inner softmax constants are per-row and cancel
    // under the outer row softmax, leaving the summed raw logits.
    return {grid, ops::softmax_rows(patch_logits_sum(gram, grid, ks))};
  }
  std::vector<Tensor> maps;
  maps.reserve(ks.size());
  for (int k : ks) maps.push_back(ops::softmax_rows(patch_logits(gram, grid, k)));
  return {grid, ops::softmax_rows(fuse_prob_maps(maps, fusion))};
}

SpatialRelationMap appearance_map_multi_literal(const Tensor& fmat, Grid grid,
                                                std::span<const int> ks, Fusion fusion) {
  check_ks(ks);
  if (ks.size() == 1) return appearance_map_single(fmat, grid, ks[0]);
  const Tensor gram = gram_logits(fmat);
  std::vector<Tensor> maps;
  maps.reserve(ks.size());
  for (int k : ks) {
    Tensor s = ops::softmax_rows(patch_logits(gram, grid, k));
    maps.push_back(fusion == Fusion::kProd ? safe_log(s) : std::move(s));
  }
  Tensor fused = fuse_prob_maps(maps, fusion);  // PROD fuses the log maps additively
  return {grid, ops::softmax_rows(fused)};
}

Tensor location_kernel(const LocationPrior& prior) {
  if (!(prior.sigma1 > 0.0) || !(prior.sigma2 > 0.0)) {
    throw ConfigError("location prior needs positive sigmas, got sigma1=" +
                      std::to_string(prior.sigma1) + " sigma2=" + std::to_string(prior.sigma2));
  }
  const int64_t h = prior.grid.h, w = prior.grid.w, m = prior.grid.m();
  const double norm = 1.0 / (2.0 * M_PI * prior.sigma1 * prior.sigma2);
  const double inv_s1 = 1.0 / (prior.sigma1 * prior.sigma1);
  const double inv_s2 = 1.0 / (prior.sigma2 * prior.sigma2);
  Tensor out({m, m});
  for (int64_t yi = 0; yi < h; ++yi) {
    for (int64_t xi = 0; xi < w; ++xi) {
      double* row = out.data() + (yi * w + xi) * m;
      for (int64_t yj = 0; yj < h; ++yj) {
        const double dy = static_cast<double>(yj - yi);
        for (int64_t xj = 0; xj < w; ++xj) {
          const double dx = static_cast<double>(xj - xi);
          row[yj * w + xj] = norm * std::exp(-0.5 * (dx * dx * inv_s1 + dy * dy * inv_s2));
        }
      }
    }
  }
  return out;
}

SpatialRelationMap location_map(const LocationPrior& prior) {
  Tensor kernel = location_kernel(prior);
  const int64_t m = prior.grid.m();
  for (int64_t i = 0; i < m; ++i) {
    double* row = kernel.data() + i * m;
    double sum = 0.0;
    for (int64_t j = 0; j < m; ++j) sum += row[j];
    const double inv = 1.0 / sum;
    for (int64_t j = 0; j < m; ++j) row[j] *= inv;
  }
  return {prior.grid, std::move(kernel)};
}

Tensor safe_log(const Tensor& t) {
  Tensor out(t.shape());
  const double floor = std::numeric_limits<double>::min();
  for (int64_t i = 0; i < t.size(); ++i) out[i] = std::log(std::max(t[i], floor));
  return out;
}

SpatialRelationMap semantic_map(const SpatialRelationMap& appearance,
                                const SpatialRelationMap& location, Fusion fusion) {
  if (!(appearance.grid == location.grid)) {
    throw DimensionError("semantic_map: appearance grid " + std::to_string(appearance.grid.h) +
                         "x" + std::to_string(appearance.grid.w) + " vs location grid " +
                         std::to_string(location.grid.h) + "x" + std::to_string(location.grid.w));
  }
  Tensor fused;
  switch (fusion) {
    case Fusion::kProd:
      fused = ops::elementwise(ops::Ewise::kAdd, safe_log(appearance.matrix),
                               safe_log(location.matrix));
      break;
    case Fusion::kSum:
      fused = ops::elementwise(ops::Ewise::kAdd, appearance.matrix, location.matrix);
      break;
    case Fusion::kMax:
      fused = ops::elementwise(ops::Ewise::kMax, appearance.matrix, location.matrix);
      break;
  }
  return {appearance.grid, ops::softmax_rows(fused)};
}

LocationTerms make_location_terms(const RelationConfig& cfg) {
  LocationTerms terms;
  if (!cfg.use_location) return terms;
  const auto sl = location_map({cfg.sigma1, cfg.sigma2, cfg.grid});
  terms.prob = sl.matrix;
  terms.log_prob = safe_log(sl.matrix);
  return terms;
}

ag::Var patch_logits_var(const ag::Var& gram, Grid grid, int k) {
  Tensor value = patch_logits(gram.value(), grid, k);
  return ag::make_op("patch_logits", std::move(value), {gram}, [grid, k](ag::Node& n) {
    const int ks[1] = {k};
    ag::accumulate_grad(*n.inputs[0], patch_logits_sum_adjoint(n.grad, grid, ks));
  });
}

namespace {

// Fused PROD-path node: S = softmax(sum_K patch_logits(F^T F) [+ log S^L]).
// Stores only S; the backward pass rebuilds the Gram adjoint on the fly.
ag::Var spatial_relation_prod(const ag::Var& fmat, Grid grid, std::vector<int> ks,
                              const Tensor* location_log) {
  const Tensor& f = fmat.value();
  Tensor logits = patch_logits_sum(gram_logits(f), grid, ks);
  if (location_log) {
    for (int64_t i = 0; i < logits.size(); ++i) logits[i] += (*location_log)[i];
  }
  Tensor value = ops::softmax_rows(logits);
  return ag::make_op(
      "spatial_relation", std::move(value), {fmat}, [grid, ks = std::move(ks)](ag::Node& n) {
        const Tensor& s = n.value;
        const int64_t m = grid.m();
        // softmax adjoint: dZ = S * (dS - rowdot(dS, S))
        Tensor dz({m, m});
        for (int64_t i = 0; i < m; ++i) {
          const double* sr = s.data() + i * m;
          const double* gr = n.grad.data() + i * m;
          double dot = 0.0;
          for (int64_t j = 0; j < m; ++j) dot += gr[j] * sr[j];
          double* o = dz.data() + i * m;
          for (int64_t j = 0; j < m; ++j) o[j] = sr[j] * (gr[j] - dot);
        }
        // patch adjoint: dG = sum_K unshift(dZ)
        Tensor dgram = patch_logits_sum_adjoint(dz, grid, ks);
        // Gram adjoint: dF = F (dG + dG^T)
        Tensor sym({m, m});
        for (int64_t i = 0; i < m; ++i) {
          for (int64_t j = 0; j < m; ++j) sym[i * m + j] = dgram[i * m + j] + dgram[j * m + i];
        }
        ag::accumulate_grad(*n.inputs[0], ops::matmul(n.inputs[0]->value, sym));
      });
}

}  // namespace

ag::Var relation_map_var(const ag::Var& fmat, const RelationConfig& cfg,
                         const LocationTerms& loc) {
  if (!cfg.use_appearance && !cfg.use_location) {
    throw ConfigError("relation map needs appearance or location relations enabled");
  }
  if (cfg.use_appearance && cfg.patch_sizes.empty()) {
    throw ConfigError("appearance relations need a nonempty patch size set");
  }
  if (!cfg.use_appearance) return ag::constant(loc.prob);

  if (cfg.fusion == Fusion::kProd || cfg.patch_sizes.size() == 1) {
    if (cfg.patch_sizes.size() == 1 && cfg.fusion != Fusion::kProd) {
      // Singleton context set: S^A is the single-context map for any fusion.
      ag::Var gram = ag::matmul(fmat, fmat, true, false);
      ag::Var sa = ag::softmax_rows(patch_logits_var(gram, cfg.grid, cfg.patch_sizes[0]));
      if (!cfg.use_location) return sa;
      switch (cfg.fusion) {
        case Fusion::kSum:
          return ag::softmax_rows(ag::add(sa, ag::constant(loc.prob)));
        case Fusion::kMax:
          return ag::softmax_rows(ag::emax(sa, ag::constant(loc.prob)));
        default: break;
      }
    }
    return spatial_relation_prod(fmat, cfg.grid, cfg.patch_sizes,
                                 cfg.use_location ? &loc.log_prob : nullptr);
  }

  // SUM / MAX: literal composition.
  ag::Var gram = ag::matmul(fmat, fmat, true, false);
  ag::Var fused;
  for (size_t i = 0; i < cfg.patch_sizes.size(); ++i) {
    ag::Var sk = ag::softmax_rows(patch_logits_var(gram, cfg.grid, cfg.patch_sizes[i]));
    fused = i == 0 ? sk
                   : (cfg.fusion == Fusion::kMax ? ag::emax(fused, sk) : ag::add(fused, sk));
  }
  ag::Var sa = ag::softmax_rows(fused);
  if (!cfg.use_location) return sa;
  ag::Var joint = cfg.fusion == Fusion::kMax ? ag::emax(sa, ag::constant(loc.prob))
                                             : ag::add(sa, ag::constant(loc.prob));
  return ag::softmax_rows(joint);
}

SpatialRelationMap relation_map(const Tensor& fmat, const RelationConfig& cfg) {
  ag::GradTape tape(false);
  const LocationTerms loc = make_location_terms(cfg);
  ag::Var s = relation_map_var(tape.leaf(fmat, false), cfg, loc);
  return {cfg.grid, s.value()};
}

}  // namespace ia::relation
