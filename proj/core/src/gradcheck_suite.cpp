#include "ia/gradcheck_suite.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "ia/autograd.hpp"
#include "ia/ia_block.hpp"
#include "ia/relation.hpp"

namespace ia {

namespace {

constexpr double kIsolated = 1e-6;
constexpr double kComposite = 1e-4;

// Weighted scalar readout so every output element contributes a distinct
// gradient path.
ag::Var readout(const ag::Var& v, const Tensor& weights) {
  return ag::sum(ag::mul(v, ag::constant(weights)));
}

}  // namespace

std::vector<GradcheckCase> canonical_gradcheck_suite(uint64_t seed) {
  std::vector<GradcheckCase> cases;
  auto add = [&cases](std::string name, double threshold, std::function<double()> run) {
    cases.push_back({std::move(name), threshold, std::move(run)});
  };

  add("matmul", kIsolated, [seed] {
    Rng rng(seed);
    const Tensor a = rng.uniform_tensor({3, 4}, -1.0, 1.0);
    const Tensor b = rng.uniform_tensor({4, 2}, -1.0, 1.0);
    const Tensor w = rng.uniform_tensor({3, 2}, -1.0, 1.0);
    return ag::gradcheck(
        [&w](ag::GradTape&, const std::vector<ag::Var>& in) {
          return readout(ag::matmul(in[0], in[1]), w);
        },
        {a, b});
  });

  add("softmax_rows", kIsolated, [seed] {
    Rng rng(seed + 1);
    const Tensor x = rng.uniform_tensor({3, 5}, -2.0, 2.0);
    // Sum of the first column.
    Tensor w = Tensor::zeros({3, 5});
    for (int64_t i = 0; i < 3; ++i) w[i * 5] = 1.0;
    return ag::gradcheck(
        [&w](ag::GradTape&, const std::vector<ag::Var>& in) {
          return readout(ag::softmax_rows(in[0]), w);
        },
        {x});
  });

  add("conv2d", kIsolated, [seed] {
    Rng rng(seed + 2);
    const Tensor x = rng.uniform_tensor({2, 2, 4, 3}, -1.0, 1.0);
    const Tensor k = rng.uniform_tensor({3, 2, 3, 3}, -0.7, 0.7);
    const Tensor w = rng.uniform_tensor({2, 3, 2, 1}, -1.0, 1.0);
    return ag::gradcheck(
        [&w](ag::GradTape&, const std::vector<ag::Var>& in) {
          return readout(ag::conv2d(in[0], in[1], 1, 0), w);
        },
        {x, k});
  });

  add("batchnorm2d", kIsolated, [seed] {
    Rng rng(seed + 3);
    const Tensor x = rng.uniform_tensor({2, 3, 2, 2}, -1.0, 1.0);
    const Tensor gamma = rng.uniform_tensor({3}, 0.5, 1.5);
    const Tensor beta = rng.uniform_tensor({3}, -0.5, 0.5);
    const Tensor w = rng.uniform_tensor({2, 3, 2, 2}, -1.0, 1.0);
    return ag::gradcheck(
        [&w](ag::GradTape&, const std::vector<ag::Var>& in) {
          ops::BatchNormState state(3);  // fresh per evaluation
          return readout(ag::batchnorm2d(in[0], in[1], in[2], ops::Mode::kTrain, state), w);
        },
        {x, gamma, beta});
  });

  for (auto [kind, name] : {std::pair{ops::Ewise::kAdd, "elementwise_add"},
                            std::pair{ops::Ewise::kMul, "elementwise_mul"},
                            std::pair{ops::Ewise::kMax, "elementwise_max"}}) {
    add(name, kIsolated, [seed, kind] {
      Rng rng(seed + 4);
      const Tensor a = rng.uniform_tensor({3, 4}, -1.0, 1.0);
      const Tensor b = rng.uniform_tensor({3, 4}, -1.0, 1.0);
      const Tensor w = rng.uniform_tensor({3, 4}, -1.0, 1.0);
      return ag::gradcheck(
          [&w, kind](ag::GradTape&, const std::vector<ag::Var>& in) {
            return readout(ag::elementwise(kind, in[0], in[1]), w);
          },
          {a, b});
    });
  }

  add("cross_entropy", kIsolated, [seed] {
    Rng rng(seed + 5);
    const Tensor logits = rng.uniform_tensor({4, 5}, -2.0, 2.0);
    return ag::gradcheck(
        [](ag::GradTape&, const std::vector<ag::Var>& in) {
          return ag::cross_entropy(in[0], {0, 3, 2, 4});
        },
        {logits});
  });

  add("relu", kIsolated, [seed] {
    Rng rng(seed + 6);
    // Keep inputs away from the kink, where central differences are wrong.
    Tensor x = rng.uniform_tensor({3, 4}, -1.0, 1.0);
    for (int64_t i = 0; i < x.size(); ++i) {
      if (std::abs(x[i]) < 0.05) x[i] = 0.1;
    }
    const Tensor w = rng.uniform_tensor({3, 4}, -1.0, 1.0);
    return ag::gradcheck(
        [&w](ag::GradTape&, const std::vector<ag::Var>& in) {
          return readout(ag::relu(in[0]), w);
        },
        {x});
  });

  add("log", kIsolated, [seed] {
    Rng rng(seed + 7);
    const Tensor x = rng.uniform_tensor({3, 3}, 0.2, 2.0);
    const Tensor w = rng.uniform_tensor({3, 3}, -1.0, 1.0);
    return ag::gradcheck(
        [&w](ag::GradTape&, const std::vector<ag::Var>& in) {
          return readout(ag::log(in[0]), w);
        },
        {x});
  });

  add("global_avg_pool", kIsolated, [seed] {
    Rng rng(seed + 8);
    const Tensor x = rng.uniform_tensor({2, 3, 2, 2}, -1.0, 1.0);
    const Tensor w = rng.uniform_tensor({2, 3}, -1.0, 1.0);
    return ag::gradcheck(
        [&w](ag::GradTape&, const std::vector<ag::Var>& in) {
          return readout(ag::global_avg_pool(in[0]), w);
        },
        {x});
  });

  add("avg_pool2d", kIsolated, [seed] {
    Rng rng(seed + 9);
    const Tensor x = rng.uniform_tensor({2, 2, 4, 4}, -1.0, 1.0);
    const Tensor w = rng.uniform_tensor({2, 2, 2, 2}, -1.0, 1.0);
    return ag::gradcheck(
        [&w](ag::GradTape&, const std::vector<ag::Var>& in) {
          return readout(ag::avg_pool2d(in[0]), w);
        },
        {x});
  });

  add("add_bias", kIsolated, [seed] {
    Rng rng(seed + 10);
    const Tensor x = rng.uniform_tensor({3, 4}, -1.0, 1.0);
    const Tensor b = rng.uniform_tensor({4}, -1.0, 1.0);
    const Tensor w = rng.uniform_tensor({3, 4}, -1.0, 1.0);
    return ag::gradcheck(
        [&w](ag::GradTape&, const std::vector<ag::Var>& in) {
          return readout(ag::add_row_bias(in[0], in[1]), w);
        },
        {x, b});
  });

  add("sum", kIsolated, [seed] {
    Rng rng(seed + 20);
    const Tensor x = rng.uniform_tensor({2, 3}, -1.0, 1.0);
    return ag::gradcheck(
        [](ag::GradTape&, const std::vector<ag::Var>& in) { return ag::sum(in[0]); }, {x});
  });

  add("scale", kIsolated, [seed] {
    Rng rng(seed + 21);
    const Tensor x = rng.uniform_tensor({2, 3}, -1.0, 1.0);
    const Tensor w = rng.uniform_tensor({2, 3}, -1.0, 1.0);
    return ag::gradcheck(
        [&w](ag::GradTape&, const std::vector<ag::Var>& in) {
          return readout(ag::scale(in[0], -1.7), w);
        },
        {x});
  });

  add("reshape", kIsolated, [seed] {
    Rng rng(seed + 22);
    const Tensor x = rng.uniform_tensor({2, 6}, -1.0, 1.0);
    const Tensor w = rng.uniform_tensor({3, 4}, -1.0, 1.0);
    return ag::gradcheck(
        [&w](ag::GradTape&, const std::vector<ag::Var>& in) {
          return readout(ag::reshape(in[0], {3, 4}), w);
        },
        {x});
  });

  add("item_view", kIsolated, [seed] {
    Rng rng(seed + 23);
    const Tensor x = rng.uniform_tensor({2, 2, 2, 3}, -1.0, 1.0);
    const Tensor w = rng.uniform_tensor({2, 6}, -1.0, 1.0);
    return ag::gradcheck(
        [&w](ag::GradTape&, const std::vector<ag::Var>& in) {
          return readout(ag::item_view(in[0], 1), w);
        },
        {x});
  });

  add("batch_stack", kIsolated, [seed] {
    Rng rng(seed + 24);
    const Tensor a = rng.uniform_tensor({2, 3}, -1.0, 1.0);
    const Tensor b = rng.uniform_tensor({2, 3}, -1.0, 1.0);
    const Tensor w = rng.uniform_tensor({2, 2, 3, 1}, -1.0, 1.0);
    return ag::gradcheck(
        [&w](ag::GradTape&, const std::vector<ag::Var>& in) {
          return readout(ag::batch_stack({in[0], in[1]}, {2, 2, 3, 1}), w);
        },
        {a, b});
  });

  add("patch_logits", kIsolated, [seed] {
    Rng rng(seed + 11);
    const relation::Grid grid{3, 2};
    const Tensor g = rng.uniform_tensor({6, 6}, -1.0, 1.0);
    const Tensor w = rng.uniform_tensor({6, 6}, -1.0, 1.0);
    return ag::gradcheck(
        [&w, grid](ag::GradTape&, const std::vector<ag::Var>& in) {
          return readout(relation::patch_logits_var(in[0], grid, 2), w);
        },
        {g});
  });

  add("spatial_relation", kComposite, [seed] {
    Rng rng(seed + 12);
    const relation::Grid grid{2, 2};
    relation::RelationConfig rcfg;
    rcfg.grid = grid;
    rcfg.patch_sizes = {1, 2};
    rcfg.sigma1 = 1.5;
    rcfg.sigma2 = 2.0;
    const relation::LocationTerms loc = relation::make_location_terms(rcfg);
    const Tensor f = rng.uniform_tensor({3, 4}, -1.0, 1.0);
    const Tensor w = rng.uniform_tensor({4, 4}, -1.0, 1.0);
    return ag::gradcheck(
        [&](ag::GradTape&, const std::vector<ag::Var>& in) {
          return readout(relation::relation_map_var(in[0], rcfg, loc), w);
        },
        {f});
  });

  add("sia_forward", kComposite, [seed] {
    Rng rng(seed + 13);
    IAConfig cfg;
    cfg.patch_sizes = {1, 2};
    cfg.sigma1 = 1.5;
    cfg.sigma2 = 2.0;
    const Tensor x = rng.uniform_tensor({1, 3, 2, 2}, -1.0, 1.0);
    const Tensor w = rng.uniform_tensor({1, 3, 2, 2}, -1.0, 1.0);
    return ag::gradcheck(
        [&](ag::GradTape&, const std::vector<ag::Var>& in) {
          return readout(sia_forward(in[0], cfg), w);
        },
        {x});
  });

  add("cia_forward", kComposite, [seed] {
    Rng rng(seed + 14);
    const Tensor x = rng.uniform_tensor({1, 3, 2, 2}, -1.0, 1.0);
    const Tensor w = rng.uniform_tensor({1, 3, 2, 2}, -1.0, 1.0);
    return ag::gradcheck(
        [&](ag::GradTape&, const std::vector<ag::Var>& in) {
          return readout(cia_forward(in[0]), w);
        },
        {x});
  });

  add("ia_block", kComposite, [seed] {
    Rng rng(seed + 15);
    IAConfig cfg;
    cfg.patch_sizes = {1, 2};
    cfg.sigma1 = 1.5;
    cfg.sigma2 = 2.0;
    const Tensor x = rng.uniform_tensor({1, 3, 2, 2}, -1.0, 1.0);
    const Tensor gs = rng.uniform_tensor({3}, 0.2, 1.0);
    const Tensor bs = rng.uniform_tensor({3}, -0.3, 0.3);
    const Tensor gc = rng.uniform_tensor({3}, 0.2, 1.0);
    const Tensor bc = rng.uniform_tensor({3}, -0.3, 0.3);
    const Tensor w = rng.uniform_tensor({1, 3, 2, 2}, -1.0, 1.0);
    return ag::gradcheck(
        [&](ag::GradTape&, const std::vector<ag::Var>& in) {
          ops::BatchNormState s1(3), s2(3);
          IABlockVars vars{{in[1], in[2], &s1}, {in[3], in[4], &s2}};
          return readout(ia_block(in[0], cfg, vars, ops::Mode::kTrain), w);
        },
        {x, gs, bs, gc, bc});
  });

  add("sia_cia_bn_pool_xent", kComposite, [seed] {
    Rng rng(seed + 16);
    IAConfig cfg;  // defaults: K={1,2,3}, PROD, semantic relations
    cfg.sigma1 = 1.5;
    cfg.sigma2 = 2.0;
    const Tensor x = rng.uniform_tensor({2, 3, 2, 2}, -1.0, 1.0);
    const Tensor gs = rng.uniform_tensor({3}, 0.2, 1.0);
    const Tensor bs = rng.uniform_tensor({3}, -0.3, 0.3);
    const Tensor gc = rng.uniform_tensor({3}, 0.2, 1.0);
    const Tensor bc = rng.uniform_tensor({3}, -0.3, 0.3);
    const Tensor cls = rng.uniform_tensor({2, 3}, -1.0, 1.0);
    return ag::gradcheck(
        [&](ag::GradTape&, const std::vector<ag::Var>& in) {
          ops::BatchNormState s1(3), s2(3);
          IABlockVars vars{{in[1], in[2], &s1}, {in[3], in[4], &s2}};
          ag::Var y = ia_block(in[0], cfg, vars, ops::Mode::kTrain);
          ag::Var pooled = ag::global_avg_pool(y);
          ag::Var logits = ag::matmul(pooled, in[5], false, true);
          return ag::cross_entropy(logits, {0, 1});
        },
        {x, gs, bs, gc, bc, cls});
  });

  return cases;
}

GradcheckOutcome run_gradcheck_suite(uint64_t seed) {
  GradcheckOutcome outcome;
  std::ostringstream os;
  for (const GradcheckCase& c : canonical_gradcheck_suite(seed)) {
    const double err = c.run();
    const bool ok = err < c.threshold;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-24s max_rel_error=%.3e threshold=%.0e %s\n",
                  c.name.c_str(), err, c.threshold, ok ? "ok" : "FAIL");
    os << buf;
    if (!ok && outcome.ok) {
      outcome.ok = false;
      outcome.first_fail = c.name;
    }
  }
  outcome.report = os.str();
  return outcome;
}

}  // namespace ia
