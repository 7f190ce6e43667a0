#include "ia/ops.hpp"

#include <algorithm>
#include <cmath>

#include "ia/threading.hpp"

namespace ia::ops {

namespace {

void require_rank(const Tensor& t, int rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + " expects rank " + std::to_string(rank) +
                         ", got shape " + shape_str(t.shape()));
  }
}

// Row-major m x k times k x n kernel. Each output element accumulates over t
// in ascending order, so the result is bit-deterministic for any thread count.
Tensor gemm_rowmajor(const Tensor& a, const Tensor& b, int64_t m, int64_t k, int64_t n) {
  Tensor c({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  parallel_for(m, std::max<int64_t>(1, 65536 / std::max<int64_t>(1, k * n)),
               [&](int64_t lo, int64_t hi) {
                 for (int64_t i = lo; i < hi; ++i) {
                   double* crow = pc + i * n;
                   const double* arow = pa + i * k;
                   for (int64_t t = 0; t < k; ++t) {
                     const double av = arow[t];
                     const double* brow = pb + t * n;
                     for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
                   }
                 }
               });
  return c;
}

}  // namespace

Tensor transpose2d(const Tensor& t) {
  require_rank(t, 2, "transpose2d");
  const int64_t m = t.extent(0), n = t.extent(1);
  Tensor out({n, m});
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) out[j * m + i] = t[i * n + j];
  }
  return out;
}

Tensor gemm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const int64_t m = trans_a ? a.extent(1) : a.extent(0);
  const int64_t ka = trans_a ? a.extent(0) : a.extent(1);
  const int64_t kb = trans_b ? b.extent(1) : b.extent(0);
  const int64_t n = trans_b ? b.extent(0) : b.extent(1);
  if (ka != kb) {
    throw DimensionError("matmul inner extents differ: " + shape_str(a.shape()) +
                         (trans_a ? "^T" : "") + " x " + shape_str(b.shape()) +
                         (trans_b ? "^T" : ""));
  }
  const Tensor& ar = trans_a ? transpose2d(a) : a;
  const Tensor& br = trans_b ? transpose2d(b) : b;
  return gemm_rowmajor(ar, br, m, ka, n);
}

Tensor matmul(const Tensor& a, const Tensor& b) { return gemm(a, b, false, false); }

Tensor softmax_rows(const Tensor& x) {
  require_rank(x, 2, "softmax_rows");
  const int64_t m = x.extent(0), n = x.extent(1);
  Tensor out({m, n});
  parallel_for(m, std::max<int64_t>(8, 4096 / std::max<int64_t>(1, n)),
               [&](int64_t lo, int64_t hi) {
                 for (int64_t i = lo; i < hi; ++i) {
                   const double* row = x.data() + i * n;
                   double* o = out.data() + i * n;
                   double mx = row[0];
                   for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
                   double sum = 0.0;
                   for (int64_t j = 0; j < n; ++j) {
                     o[j] = std::exp(row[j] - mx);
                     sum += o[j];
                   }
                   const double inv = 1.0 / sum;
                   for (int64_t j = 0; j < n; ++j) o[j] *= inv;
                 }
               });
  return out;
}

Tensor log_softmax_rows(const Tensor& x) {
  require_rank(x, 2, "log_softmax_rows");
  const int64_t m = x.extent(0), n = x.extent(1);
  Tensor out({m, n});
  for (int64_t i = 0; i < m; ++i) {
    const double* row = x.data() + i * n;
    double* o = out.data() + i * n;
    double mx = row[0];
    for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < n; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    for (int64_t j = 0; j < n; ++j) o[j] = row[j] - lse;
  }
  return out;
}

Tensor elementwise(Ewise kind, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("elementwise shapes differ: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tensor out(a.shape());
  const int64_t n = a.size();
  switch (kind) {
    case Ewise::kAdd:
      for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
      break;
    case Ewise::kMul:
      for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
      break;
    case Ewise::kMax:
      for (int64_t i = 0; i < n; ++i) out[i] = std::max(a[i], b[i]);
      break;
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

int64_t conv_out_extent(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  const int64_t span = in + 2 * pad - k;
  if (stride <= 0 || pad < 0 || span < 0 || span % stride != 0) {
    throw ConfigError("conv geometry does not divide: in=" + std::to_string(in) +
                      " k=" + std::to_string(k) + " stride=" + std::to_string(stride) +
                      " pad=" + std::to_string(pad));
  }
  return span / stride + 1;
}

void detail_im2col(const double* x, int64_t cin, int64_t h, int64_t w, int64_t k, int64_t stride,
                   int64_t pad, int64_t oh, int64_t ow, double* col) {
  const int64_t p = oh * ow;
  for (int64_t ci = 0; ci < cin; ++ci) {
    for (int64_t dy = 0; dy < k; ++dy) {
      for (int64_t dx = 0; dx < k; ++dx) {
        double* dst = col + ((ci * k + dy) * k + dx) * p;
        for (int64_t oy = 0; oy < oh; ++oy) {
          const int64_t iy = oy * stride + dy - pad;
          if (iy < 0 || iy >= h) {
            std::fill(dst + oy * ow, dst + (oy + 1) * ow, 0.0);
            continue;
          }
          const double* src = x + (ci * h + iy) * w;
          for (int64_t ox = 0; ox < ow; ++ox) {
            const int64_t ix = ox * stride + dx - pad;
            dst[oy * ow + ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void detail_im2row(const double* x, int64_t cin, int64_t h, int64_t w, int64_t k, int64_t stride,
                   int64_t pad, int64_t oh, int64_t ow, double* rows) {
  const int64_t ckk = cin * k * k;
  for (int64_t oy = 0; oy < oh; ++oy) {
    for (int64_t ox = 0; ox < ow; ++ox) {
      double* dst = rows + (oy * ow + ox) * ckk;
      for (int64_t ci = 0; ci < cin; ++ci) {
        for (int64_t dy = 0; dy < k; ++dy) {
          const int64_t iy = oy * stride + dy - pad;
          for (int64_t dx = 0; dx < k; ++dx) {
            const int64_t ix = ox * stride + dx - pad;
            dst[(ci * k + dy) * k + dx] =
                (iy >= 0 && iy < h && ix >= 0 && ix < w) ? x[(ci * h + iy) * w + ix] : 0.0;
          }
        }
      }
    }
  }
}

namespace {

void conv2d_single(const double* x, const Tensor& kernels, int64_t cin, int64_t h, int64_t w,
                   int64_t stride, int64_t pad, int64_t oh, int64_t ow, double* out,
                   std::vector<double>& col_buf) {
  const int64_t cout = kernels.extent(0);
  const int64_t k = kernels.extent(2);
  const int64_t ckk = cin * k * k;
  const int64_t p = oh * ow;
  col_buf.resize(static_cast<size_t>(ckk * p));
  detail_im2col(x, cin, h, w, k, stride, pad, oh, ow, col_buf.data());
  const double* wmat = kernels.data();  // [cout, ckk] row-major
  for (int64_t co = 0; co < cout; ++co) {
    double* orow = out + co * p;
    std::fill(orow, orow + p, 0.0);
    const double* wrow = wmat + co * ckk;
    for (int64_t t = 0; t < ckk; ++t) {
      const double wv = wrow[t];
      const double* crow = col_buf.data() + t * p;
      for (int64_t j = 0; j < p; ++j) orow[j] += wv * crow[j];
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernels, int64_t stride, int64_t pad) {
  require_rank(x, 3, "conv2d input");
  require_rank(kernels, 4, "conv2d kernels");
  if (kernels.extent(2) != kernels.extent(3)) {
    throw DimensionError("conv2d kernels must be square, got " + shape_str(kernels.shape()));
  }
  if (x.extent(0) != kernels.extent(1)) {
    throw DimensionError("conv2d channel mismatch: input " + shape_str(x.shape()) +
                         " vs kernels " + shape_str(kernels.shape()));
  }
  const int64_t k = kernels.extent(2);
  const int64_t oh = conv_out_extent(x.extent(1), k, stride, pad);
  const int64_t ow = conv_out_extent(x.extent(2), k, stride, pad);
  Tensor out({kernels.extent(0), oh, ow});
  std::vector<double> col;
  conv2d_single(x.data(), kernels, x.extent(0), x.extent(1), x.extent(2), stride, pad, oh, ow,
                out.data(), col);
  return out;
}

Tensor conv2d_batch(const Tensor& x, const Tensor& kernels, int64_t stride, int64_t pad) {
  require_rank(x, 4, "conv2d_batch input");
  require_rank(kernels, 4, "conv2d kernels");
  if (x.extent(1) != kernels.extent(1)) {
    throw DimensionError("conv2d channel mismatch: input " + shape_str(x.shape()) +
                         " vs kernels " + shape_str(kernels.shape()));
  }
  const int64_t b = x.extent(0), cin = x.extent(1), h = x.extent(2), w = x.extent(3);
  const int64_t k = kernels.extent(2);
  const int64_t oh = conv_out_extent(h, k, stride, pad);
  const int64_t ow = conv_out_extent(w, k, stride, pad);
  const int64_t cout = kernels.extent(0);
  Tensor out({b, cout, oh, ow});
  parallel_for(b, 1, [&](int64_t lo, int64_t hi) {
    std::vector<double> col;
    for (int64_t i = lo; i < hi; ++i) {
      conv2d_single(x.data() + i * cin * h * w, kernels, cin, h, w, stride, pad, oh, ow,
                    out.data() + i * cout * oh * ow, col);
    }
  });
  return out;
}

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, Mode mode,
                   BatchNormState& state) {
  require_rank(x, 4, "batchnorm2d");
  const int64_t b = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
  if (gamma.size() != c || beta.size() != c || state.running_mean.size() != c ||
      state.running_var.size() != c) {
    throw DimensionError("batchnorm2d parameter extents do not match " + std::to_string(c) +
                         " channels");
  }
  const int64_t m = b * h * w;  // statistics population per channel
  if (mode == Mode::kTrain && m < 2) {
    throw ConfigError("train-mode batchnorm needs at least 2 values per channel, got " +
                      std::to_string(m));
  }
  Tensor out(x.shape());
  const int64_t hw = h * w;
  for (int64_t ci = 0; ci < c; ++ci) {
    double mean, var;
    if (mode == Mode::kTrain) {
      // Two-pass statistics, fixed accumulation order.
      double sum = 0.0;
      for (int64_t bi = 0; bi < b; ++bi) {
        const double* p = x.data() + (bi * c + ci) * hw;
        for (int64_t j = 0; j < hw; ++j) sum += p[j];
      }
      mean = sum / static_cast<double>(m);
      double sq = 0.0;
      for (int64_t bi = 0; bi < b; ++bi) {
        const double* p = x.data() + (bi * c + ci) * hw;
        for (int64_t j = 0; j < hw; ++j) {
          const double d = p[j] - mean;
          sq += d * d;
        }
      }
      var = sq / static_cast<double>(m);
      const double unbiased = m > 1 ? sq / static_cast<double>(m - 1) : var;
      state.running_mean[ci] =
          (1.0 - state.momentum) * state.running_mean[ci] + state.momentum * mean;
      state.running_var[ci] =
          (1.0 - state.momentum) * state.running_var[ci] + state.momentum * unbiased;
    } else {
      mean = state.running_mean[ci];
      var = state.running_var[ci];
    }
    const double inv_std = 1.0 / std::sqrt(var + kBatchNormEps);
    const double g = gamma[ci], bt = beta[ci];
    for (int64_t bi = 0; bi < b; ++bi) {
      const double* p = x.data() + (bi * c + ci) * hw;
      double* o = out.data() + (bi * c + ci) * hw;
      for (int64_t j = 0; j < hw; ++j) o[j] = g * (p[j] - mean) * inv_std + bt;
    }
  }
  return out;
}

double cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "cross_entropy logits");
  const int64_t b = logits.extent(0), n = logits.extent(1);
  if (static_cast<int64_t>(labels.size()) != b) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(b) + " rows");
  }
  double total = 0.0;
  for (int64_t i = 0; i < b; ++i) {
    const int label = labels[static_cast<size_t>(i)];
    if (label < 0 || label >= n) {
      throw IndexError("cross_entropy label " + std::to_string(label) + " out of range [0," +
                       std::to_string(n) + ")");
    }
    const double* row = logits.data() + i * n;
    double mx = row[0];
    for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < n; ++j) sum += std::exp(row[j] - mx);
    total += mx + std::log(sum) - row[label];
  }
  return total / static_cast<double>(b);
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 4, "global_avg_pool");
  const int64_t b = x.extent(0), c = x.extent(1), hw = x.extent(2) * x.extent(3);
  Tensor out({b, c});
  for (int64_t i = 0; i < b * c; ++i) {
    const double* p = x.data() + i * hw;
    double sum = 0.0;
    for (int64_t j = 0; j < hw; ++j) sum += p[j];
    out[i] = sum / static_cast<double>(hw);
  }
  return out;
}

Tensor avg_pool2d(const Tensor& x) {
  require_rank(x, 4, "avg_pool2d");
  const int64_t b = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ConfigError("avg_pool2d needs even extents, got " + shape_str(x.shape()));
  }
  const int64_t oh = h / 2, ow = w / 2;
  Tensor out({b, c, oh, ow});
  for (int64_t i = 0; i < b * c; ++i) {
    const double* p = x.data() + i * h * w;
    double* o = out.data() + i * oh * ow;
    for (int64_t y = 0; y < oh; ++y) {
      for (int64_t xx = 0; xx < ow; ++xx) {
        const double* q = p + 2 * y * w + 2 * xx;
        o[y * ow + xx] = 0.25 * (q[0] + q[1] + q[w] + q[w + 1]);
      }
    }
  }
  return out;
}

}  // namespace ia::ops
