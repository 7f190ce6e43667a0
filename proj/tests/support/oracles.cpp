#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracle {

using ia::Tensor;
using ia::relation::Fusion;
using ia::relation::Grid;

Tensor matmul(const Tensor& a, const Tensor& b) {
  const int64_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  Tensor c({m, n});
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t t = 0; t < k; ++t) acc += a[i * k + t] * b[t * n + j];
      c[i * n + j] = acc;
    }
  }
  return c;
}

Tensor softmax_rows(const Tensor& x) {
  const int64_t m = x.extent(0), n = x.extent(1);
  Tensor out({m, n});
  for (int64_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < n; ++j) mx = std::max(mx, x[i * n + j]);
    double sum = 0.0;
    for (int64_t j = 0; j < n; ++j) sum += std::exp(x[i * n + j] - mx);
    for (int64_t j = 0; j < n; ++j) out[i * n + j] = std::exp(x[i * n + j] - mx) / sum;
  }
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& kernels, int64_t stride, int64_t pad) {
  const int64_t cin = x.extent(0), h = x.extent(1), w = x.extent(2);
  const int64_t cout = kernels.extent(0), k = kernels.extent(2);
  const int64_t oh = (h + 2 * pad - k) / stride + 1;
  const int64_t ow = (w + 2 * pad - k) / stride + 1;
  Tensor out({cout, oh, ow});
  for (int64_t co = 0; co < cout; ++co) {
    for (int64_t oy = 0; oy < oh; ++oy) {
      for (int64_t ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (int64_t ci = 0; ci < cin; ++ci) {
          for (int64_t dy = 0; dy < k; ++dy) {
            for (int64_t dx = 0; dx < k; ++dx) {
              const int64_t iy = oy * stride + dy - pad;
              const int64_t ix = ox * stride + dx - pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += x[(ci * h + iy) * w + ix] * kernels[((co * cin + ci) * k + dy) * k + dx];
            }
          }
        }
        out[(co * oh + oy) * ow + ox] = acc;
      }
    }
  }
  return out;
}

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const int64_t b = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
  Tensor out(x.shape());
  for (int64_t ci = 0; ci < c; ++ci) {
    std::vector<double> vals;
    for (int64_t bi = 0; bi < b; ++bi) {
      for (int64_t j = 0; j < h * w; ++j) vals.push_back(x[(bi * c + ci) * h * w + j]);
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vals.size());
    for (int64_t bi = 0; bi < b; ++bi) {
      for (int64_t j = 0; j < h * w; ++j) {
        const int64_t idx = (bi * c + ci) * h * w + j;
        out[idx] = gamma[ci] * (x[idx] - mean) / std::sqrt(var + eps) + beta[ci];
      }
    }
  }
  return out;
}

double cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const int64_t b = logits.extent(0), n = logits.extent(1);
  double total = 0.0;
  for (int64_t i = 0; i < b; ++i) {
    double sum = 0.0;
    for (int64_t j = 0; j < n; ++j) sum += std::exp(logits[i * n + j]);
    const double p = std::exp(logits[i * n + labels[static_cast<size_t>(i)]]) / sum;
    total += -std::log(p);
  }
  return total / static_cast<double>(b);
}

Tensor elementwise_add(const Tensor& a, const Tensor& b) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor gram(const Tensor& fmat) {
  const int64_t c = fmat.extent(0), m = fmat.extent(1);
  Tensor g({m, m});
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int64_t t = 0; t < c; ++t) acc += fmat[t * m + i] * fmat[t * m + j];
      g[i * m + j] = acc;
    }
  }
  return g;
}

Tensor patch_logits(const Tensor& fmat, Grid grid, int k) {
  const int64_t c = fmat.extent(0), m = grid.m();
  const auto offsets = ia::relation::patch_offsets(k);
  // patches[i] holds the K*K zero-padded feature columns around position i.
  auto patch_at = [&](int64_t pos, size_t oi) {
    const int64_t y = pos / grid.w + offsets[oi].first;
    const int64_t x = pos % grid.w + offsets[oi].second;
    std::vector<double> f(static_cast<size_t>(c), 0.0);
    if (y >= 0 && y < grid.h && x >= 0 && x < grid.w) {
      for (int64_t t = 0; t < c; ++t) f[static_cast<size_t>(t)] = fmat[t * m + y * grid.w + x];
    }
    return f;
  };
  Tensor out({m, m});
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (size_t oi = 0; oi < offsets.size(); ++oi) {
        const auto pi = patch_at(i, oi);
        const auto pj = patch_at(j, oi);
        for (int64_t t = 0; t < c; ++t) {
          acc += pi[static_cast<size_t>(t)] * pj[static_cast<size_t>(t)];
        }
      }
      out[i * m + j] = acc;
    }
  }
  return out;
}

Tensor appearance_single(const Tensor& fmat, Grid grid, int k) {
  return softmax_rows(oracle::patch_logits(fmat, grid, k));
}

namespace {

Tensor safe_log(const Tensor& t) {
  Tensor out(t.shape());
  for (int64_t i = 0; i < t.size(); ++i) {
    out[i] = std::log(std::max(t[i], std::numeric_limits<double>::min()));
  }
  return out;
}

Tensor fuse(const Tensor& a, const Tensor& b, Fusion fusion) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) {
    out[i] = fusion == Fusion::kMax ? std::max(a[i], b[i]) : a[i] + b[i];
  }
  return out;
}

}  // namespace

Tensor appearance_multi(const Tensor& fmat, Grid grid, std::span<const int> ks, Fusion fusion) {
  if (ks.size() == 1) return appearance_single(fmat, grid, ks[0]);
  std::vector<Tensor> maps;
  for (int k : ks) {
    Tensor s = appearance_single(fmat, grid, k);
    maps.push_back(fusion == Fusion::kProd ? safe_log(s) : std::move(s));
  }
  Tensor fused = maps[0];
  for (size_t i = 1; i < maps.size(); ++i) fused = fuse(fused, maps[i], fusion);
  return softmax_rows(fused);
}

Tensor location_map(double sigma1, double sigma2, Grid grid) {
  const int64_t m = grid.m();
  Tensor out({m, m});
  for (int64_t i = 0; i < m; ++i) {
    const double yi = static_cast<double>(i / grid.w), xi = static_cast<double>(i % grid.w);
    double sum = 0.0;
    for (int64_t j = 0; j < m; ++j) {
      const double yj = static_cast<double>(j / grid.w), xj = static_cast<double>(j % grid.w);
      const double l = 1.0 / (2.0 * M_PI * sigma1 * sigma2) *
                       std::exp(-0.5 * ((xj - xi) * (xj - xi) / (sigma1 * sigma1) +
                                        (yj - yi) * (yj - yi) / (sigma2 * sigma2)));
      out[i * m + j] = l;
      sum += l;
    }
    for (int64_t j = 0; j < m; ++j) out[i * m + j] /= sum;
  }
  return out;
}

Tensor semantic_map(const Tensor& appearance, const Tensor& location, Fusion fusion) {
  Tensor fused = fusion == Fusion::kProd ? fuse(safe_log(appearance), safe_log(location), fusion)
                                         : fuse(appearance, location, fusion);
  return softmax_rows(fused);
}

Tensor sia_item(const Tensor& item, std::span<const int> ks, Fusion fusion, bool use_location,
                double sigma1, double sigma2) {
  const int64_t c = item.extent(0);
  const Grid grid{item.extent(1), item.extent(2)};
  const Tensor fmat = item.reshaped({c, grid.m()});
  Tensor s = appearance_multi(fmat, grid, ks, fusion);
  if (use_location) s = semantic_map(s, location_map(sigma1, sigma2, grid), fusion);
  // E = F S^T
  const int64_t m = grid.m();
  Tensor st({m, m});
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < m; ++j) st[i * m + j] = s[j * m + i];
  }
  return matmul(fmat, st).reshaped(item.shape());
}

Tensor cia_item(const Tensor& item) {
  const int64_t c = item.extent(0);
  const int64_t m = item.extent(1) * item.extent(2);
  const Tensor fmat = item.reshaped({c, m});
  Tensor logits({c, c});
  for (int64_t a = 0; a < c; ++a) {
    for (int64_t b = 0; b < c; ++b) {
      double acc = 0.0;
      for (int64_t t = 0; t < m; ++t) acc += fmat[a * m + t] * fmat[b * m + t];
      logits[a * c + b] = acc;
    }
  }
  return matmul(softmax_rows(logits), fmat).reshaped(item.shape());
}

Tensor cosine_distances(const Tensor& q, const Tensor& g) {
  const int64_t nq = q.extent(0), ng = g.extent(0), d = q.extent(1);
  Tensor out({nq, ng});
  for (int64_t i = 0; i < nq; ++i) {
    for (int64_t j = 0; j < ng; ++j) {
      double dot = 0.0, qq = 0.0, gg = 0.0;
      for (int64_t t = 0; t < d; ++t) {
        dot += q[i * d + t] * g[j * d + t];
        qq += q[i * d + t] * q[i * d + t];
        gg += g[j * d + t] * g[j * d + t];
      }
      out[i * ng + j] = 1.0 - dot / (std::sqrt(qq) * std::sqrt(gg));
    }
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double mx = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) mx = std::max(mx, std::abs(a[i] - b[i]));
  return mx;
}

double max_rel_diff(const Tensor& a, const Tensor& b) {
  double mx = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-12});
    mx = std::max(mx, std::abs(a[i] - b[i]) / denom);
  }
  return mx;
}

}  // namespace oracle
