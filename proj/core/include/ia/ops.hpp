#pragma once

#include <cstdint>
#include <span>

#include "ia/tensor.hpp"

namespace ia::ops {

enum class Ewise { kAdd, kMul, kMax };

// C[i,j] = sum_t A[i,t] * B[t,j] with a fixed ascending summation order.
Tensor matmul(const Tensor& a, const Tensor& b);
// General 2-D product with optional transposes of either operand.
Tensor gemm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b);
Tensor transpose2d(const Tensor& t);

// Row softmax with per-row max subtraction. Input must be rank 2.
Tensor softmax_rows(const Tensor& x);
// log(softmax_rows(x)), computed via log-sum-exp.
Tensor log_softmax_rows(const Tensor& x);

Tensor elementwise(Ewise kind, const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& x);

// Cross-correlation of a single image [Cin,H,W] with kernels [Cout,Cin,k,k].
Tensor conv2d(const Tensor& x, const Tensor& kernels, int64_t stride, int64_t pad);
// Batched variant over [B,Cin,H,W].
Tensor conv2d_batch(const Tensor& x, const Tensor& kernels, int64_t stride, int64_t pad);

// Output spatial extent of a convolution axis; throws ConfigError when the
// geometry does not divide evenly.
int64_t conv_out_extent(int64_t in, int64_t k, int64_t stride, int64_t pad);

// Gathers zero-padded patch columns: col[(ci*k+dy)*k+dx, oy*ow+ox]. Shared by
// the convolution forward and backward passes.
void detail_im2col(const double* x, int64_t cin, int64_t h, int64_t w, int64_t k, int64_t stride,
                   int64_t pad, int64_t oh, int64_t ow, double* col);
// Transposed layout: rows[oy*ow+ox, (ci*k+dy)*k+dx].
void detail_im2row(const double* x, int64_t cin, int64_t h, int64_t w, int64_t k, int64_t stride,
                   int64_t pad, int64_t oh, int64_t ow, double* rows);

struct BatchNormState {
  Tensor running_mean;  // [C]
  Tensor running_var;   // [C]
  double momentum = 0.1;

  explicit BatchNormState(int64_t channels = 1)
      : running_mean(Tensor::zeros({channels})), running_var(Tensor::ones({channels})) {}
};

constexpr double kBatchNormEps = 1e-5;

enum class Mode { kTrain, kEval };

// Per-channel standardization of [B,C,H,W] over batch and spatial dims, then
// affine gamma/beta. Train mode uses batch statistics and updates `state`;
// eval mode reads the running statistics.
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, Mode mode,
                   BatchNormState& state);

// Mean over the batch of -log softmax(logits)[label], in the log domain.
double cross_entropy(const Tensor& logits, std::span<const int> labels);

// [B,C,H,W] -> [B,C] spatial mean.
Tensor global_avg_pool(const Tensor& x);

// 2x2 stride-2 mean pooling; extents must be even.
Tensor avg_pool2d(const Tensor& x);

}  // namespace ia::ops
