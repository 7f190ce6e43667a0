#include <doctest.h>

#include <cmath>

#include "ia/ops.hpp"
#include "support/oracles.hpp"

using namespace ia;

TEST_CASE("matmul identity and scalar cases") {
  Tensor eye({3, 3});
  for (int i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
  Rng rng(1);
  const Tensor b = rng.uniform_tensor({3, 3}, -2.0, 2.0);
  const Tensor prod = ops::matmul(eye, b);
  CHECK(oracle::max_abs_diff(prod, b) == 0.0);

  const Tensor two({1, 1}, {2.0});
  const Tensor three({1, 1}, {3.0});
  CHECK(ops::matmul(two, three)[0] == 6.0);
}

TEST_CASE("matmul matches the triple-loop oracle") {
  Rng rng(2);
  const Tensor a = rng.uniform_tensor({3, 4}, -1.0, 1.0);
  const Tensor b = rng.uniform_tensor({4, 2}, -1.0, 1.0);
  CHECK(oracle::max_abs_diff(ops::matmul(a, b), oracle::matmul(a, b)) < 1e-12);
}

TEST_CASE("matmul is linear in its second operand") {
  Rng rng(3);
  const Tensor a = rng.uniform_tensor({4, 5}, -1.0, 1.0);
  const Tensor b = rng.uniform_tensor({5, 3}, -1.0, 1.0);
  const Tensor c = rng.uniform_tensor({5, 3}, -1.0, 1.0);
  const Tensor lhs = ops::matmul(a, ops::elementwise(ops::Ewise::kAdd, b, c));
  const Tensor rhs = ops::elementwise(ops::Ewise::kAdd, ops::matmul(a, b), ops::matmul(a, c));
  CHECK(oracle::max_abs_diff(lhs, rhs) < 1e-10);
}

TEST_CASE("matmul rejects mismatched shapes naming both") {
  const Tensor a({2, 3});
  const Tensor b({4, 2});
  try {
    ops::matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[4,2]") != std::string::npos);
  }
}

TEST_CASE("gemm transpose flags agree with explicit transposes") {
  Rng rng(4);
  const Tensor a = rng.uniform_tensor({4, 3}, -1.0, 1.0);
  const Tensor b = rng.uniform_tensor({4, 5}, -1.0, 1.0);
  const Tensor expect = oracle::matmul(ops::transpose2d(a), b);
  CHECK(oracle::max_abs_diff(ops::gemm(a, b, true, false), expect) < 1e-12);
  const Tensor c = rng.uniform_tensor({5, 3}, -1.0, 1.0);
  const Tensor expect2 = oracle::matmul(a, ops::transpose2d(c));
  CHECK(oracle::max_abs_diff(ops::gemm(a, c, false, true), expect2) < 1e-12);
}

TEST_CASE("softmax analytic rows") {
  const Tensor zeros({1, 4});
  const Tensor uniform = ops::softmax_rows(zeros);
  for (int j = 0; j < 4; ++j) CHECK(uniform[j] == doctest::Approx(0.25).epsilon(1e-12));

  const Tensor row({1, 2}, {0.0, std::log(2.0)});
  const Tensor s = ops::softmax_rows(row);
  CHECK(s[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax rows are stochastic and shift invariant") {
  Rng rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    const Tensor x = rng.uniform_tensor({4, 7}, -30.0, 30.0);
    const Tensor s = ops::softmax_rows(x);
    for (int64_t i = 0; i < 4; ++i) {
      double sum = 0.0;
      for (int64_t j = 0; j < 7; ++j) {
        CHECK(s[i * 7 + j] >= 0.0);
        sum += s[i * 7 + j];
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    Tensor shifted = x;
    for (int64_t i = 0; i < shifted.size(); ++i) shifted[i] += 7.3;
    CHECK(oracle::max_abs_diff(ops::softmax_rows(shifted), s) < 1e-12);
  }
}

TEST_CASE("softmax survives extreme logits") {
  const Tensor x({1, 3}, {1000.0, 999.0, -1000.0});
  const Tensor s = ops::softmax_rows(x);
  CHECK(s.all_finite());
  CHECK(s[0] + s[1] + s[2] == doctest::Approx(1.0));
}

TEST_CASE("conv2d identity kernels") {
  Rng rng(6);
  const Tensor x = rng.uniform_tensor({1, 4, 5}, -1.0, 1.0);
  Tensor k1({1, 1, 1, 1}, {1.0});
  CHECK(oracle::max_abs_diff(ops::conv2d(x, k1, 1, 0), x) == 0.0);

  Tensor k3({1, 1, 3, 3});
  k3[4] = 1.0;  // centered delta
  CHECK(oracle::max_abs_diff(ops::conv2d(x, k3, 1, 1), x) == 0.0);
}

TEST_CASE("conv2d matches the direct-summation oracle") {
  Rng rng(7);
  const Tensor x = rng.uniform_tensor({2, 5, 5}, -1.0, 1.0);
  const Tensor k = rng.uniform_tensor({3, 2, 3, 3}, -1.0, 1.0);
  for (auto [stride, pad] : {std::pair<int64_t, int64_t>{1, 1}, {2, 1}, {1, 0}}) {
    if ((5 + 2 * pad - 3) % stride != 0) continue;
    CHECK(oracle::max_abs_diff(ops::conv2d(x, k, stride, pad),
                               oracle::conv2d(x, k, stride, pad)) < 1e-10);
  }
}

TEST_CASE("conv2d rejects non-integral geometry") {
  const Tensor x({1, 5, 5});
  const Tensor k({1, 1, 2, 2});
  CHECK_THROWS_AS(ops::conv2d(x, k, 2, 0), ConfigError);  // (5-2)/2 not integral
  CHECK_THROWS_AS(ops::conv2d(Tensor({2, 5, 5}), k, 1, 0), DimensionError);  // channel mismatch
}

TEST_CASE("batchnorm zero scale and fixed point") {
  Rng rng(8);
  const Tensor x = rng.uniform_tensor({2, 3, 2, 2}, -4.0, 4.0);
  const Tensor zeros({3});
  ops::BatchNormState state(3);
  const Tensor y = ops::batchnorm2d(x, zeros, zeros, ops::Mode::kTrain, state);
  for (int64_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0);

  // Pre-standardized data is a fixed point of gamma=1, beta=0. The exact
  // fixed point has batch variance 1 - eps, where the eps inside the square
  // root cancels.
  Tensor xs({2, 1, 2, 2}, {-1.5, -0.5, 0.5, 1.5, -1.5, -0.5, 0.5, 1.5});
  const double std = std::sqrt(1.25 / (1.0 - ops::kBatchNormEps));
  for (int64_t i = 0; i < xs.size(); ++i) xs[i] /= std;
  ops::BatchNormState st1(1);
  const Tensor fixed =
      ops::batchnorm2d(xs, Tensor::ones({1}), Tensor::zeros({1}), ops::Mode::kTrain, st1);
  CHECK(oracle::max_abs_diff(fixed, xs) < 1e-6);
}

TEST_CASE("batchnorm matches the two-pass statistics oracle") {
  Rng rng(9);
  const Tensor x = rng.uniform_tensor({2, 3, 2, 2}, -2.0, 2.0);
  const Tensor gamma = rng.uniform_tensor({3}, 0.5, 1.5);
  const Tensor beta = rng.uniform_tensor({3}, -0.5, 0.5);
  ops::BatchNormState state(3);
  const Tensor y = ops::batchnorm2d(x, gamma, beta, ops::Mode::kTrain, state);
  CHECK(oracle::max_abs_diff(y, oracle::batchnorm2d(x, gamma, beta, ops::kBatchNormEps)) < 1e-12);
}

TEST_CASE("batchnorm handles zero variance and updates running stats") {
  const Tensor x = Tensor::full({1, 1, 1, 4}, 3.0);
  ops::BatchNormState state(1);
  const Tensor y =
      ops::batchnorm2d(x, Tensor::ones({1}), Tensor::zeros({1}), ops::Mode::kTrain, state);
  CHECK(y.all_finite());
  CHECK(state.running_mean[0] == doctest::Approx(0.3));

  // Eval mode uses the running statistics.
  const Tensor ye =
      ops::batchnorm2d(x, Tensor::ones({1}), Tensor::zeros({1}), ops::Mode::kEval, state);
  CHECK(ye.all_finite());
  CHECK_THROWS_AS(
      ops::batchnorm2d(Tensor({1, 1, 1, 1}), Tensor::ones({1}), Tensor::zeros({1}),
                       ops::Mode::kTrain, state),
      ConfigError);
}

TEST_CASE("elementwise identities and oracle") {
  Rng rng(10);
  const Tensor x = rng.uniform_tensor({3, 4}, -1.0, 1.0);
  CHECK(oracle::max_abs_diff(ops::elementwise(ops::Ewise::kMul, x, Tensor::ones(x.shape())), x) ==
        0.0);
  CHECK(oracle::max_abs_diff(ops::elementwise(ops::Ewise::kMax, x, x), x) == 0.0);
  const Tensor y = rng.uniform_tensor({3, 4}, -1.0, 1.0);
  CHECK(oracle::max_abs_diff(ops::elementwise(ops::Ewise::kAdd, x, y),
                             oracle::elementwise_add(x, y)) == 0.0);
  CHECK_THROWS_AS(ops::elementwise(ops::Ewise::kAdd, x, Tensor({4, 3})), DimensionError);
}

TEST_CASE("cross entropy analytic values and oracle") {
  const Tensor uniform({2, 5});
  const int labels[2] = {0, 4};
  CHECK(ops::cross_entropy(uniform, labels) == doctest::Approx(std::log(5.0)).epsilon(1e-12));

  const Tensor logits({1, 2}, {0.0, std::log(3.0)});
  const int one[1] = {1};
  CHECK(ops::cross_entropy(logits, one) == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-9));
  CHECK(ops::cross_entropy(logits, one) == doctest::Approx(0.287682).epsilon(1e-5));

  Rng rng(11);
  const Tensor batch = rng.uniform_tensor({4, 6}, -3.0, 3.0);
  const int lbl[4] = {0, 5, 2, 3};
  CHECK(ops::cross_entropy(batch, lbl) ==
        doctest::Approx(oracle::cross_entropy(batch, lbl)).epsilon(1e-10));

  const int bad[1] = {2};
  CHECK_THROWS_AS(ops::cross_entropy(logits, bad), IndexError);
}

TEST_CASE("pooling ops") {
  Rng rng(12);
  const Tensor x = rng.uniform_tensor({2, 3, 4, 4}, -1.0, 1.0);
  const Tensor pooled = ops::global_avg_pool(x);
  double expect = 0.0;
  for (int64_t j = 0; j < 16; ++j) expect += x[j];
  CHECK(pooled[0] == doctest::Approx(expect / 16.0).epsilon(1e-12));

  const Tensor half = ops::avg_pool2d(x);
  CHECK(half.shape() == Shape{2, 3, 2, 2});
  CHECK(half[0] == doctest::Approx(0.25 * (x[0] + x[1] + x[4] + x[5])).epsilon(1e-12));
  CHECK_THROWS_AS(ops::avg_pool2d(Tensor({1, 1, 3, 4})), ConfigError);
}

TEST_CASE("kernels are deterministic across repeated runs") {
  Rng rng(13);
  const Tensor a = rng.uniform_tensor({40, 30}, -1.0, 1.0);
  const Tensor b = rng.uniform_tensor({30, 20}, -1.0, 1.0);
  const Tensor r1 = ops::matmul(a, b);
  const Tensor r2 = ops::matmul(a, b);
  CHECK(r1 == r2);
  const Tensor s1 = ops::softmax_rows(a);
  const Tensor s2 = ops::softmax_rows(a);
  CHECK(s1 == s2);
}
