#include "ia/autograd.hpp"

#include <algorithm>
#include <cmath>

#include "ia/threading.hpp"

namespace ia::ag {

namespace {

std::string g_perturb_op;  // empty = disabled

GradTape* common_tape(std::span<const Var> inputs) {
  GradTape* tape = nullptr;
  for (const Var& v : inputs) {
    GradTape* t = v.node()->tape;
    if (!t) continue;
    if (tape && tape != t) throw UsageError("operands come from different tapes");
    tape = t;
  }
  return tape;
}

}  // namespace

const Tensor& Var::grad() const {
  Node& n = *node_;
  if (!n.grad_allocated) {
    n.grad = Tensor::zeros(n.value.shape());
    n.grad_allocated = true;
  }
  return n.grad;
}

void accumulate_grad(Node& n, const Tensor& g) {
  if (!n.grad_allocated) {
    n.grad = Tensor::zeros(n.value.shape());
    n.grad_allocated = true;
  }
  for (int64_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

void accumulate_grad_scaled(Node& n, const Tensor& g, double scale) {
  if (!n.grad_allocated) {
    n.grad = Tensor::zeros(n.value.shape());
    n.grad_allocated = true;
  }
  for (int64_t i = 0; i < g.size(); ++i) n.grad[i] += scale * g[i];
}

Var GradTape::leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad && recording_;
  n->is_leaf = true;
  n->tape = this;
  if (n->requires_grad) record(n);
  return Var(n);
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->is_leaf = true;
  n->op = "constant";
  return Var(n);
}

Var make_op(const char* op, Tensor value, std::vector<Var> inputs,
            const std::function<void(Node&)>& backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  GradTape* tape = common_tape(inputs);
  bool needs = false;
  for (const Var& v : inputs) needs = needs || v.node()->requires_grad;
  if (tape && tape->recording() && needs) {
    n->tape = tape;
    n->requires_grad = true;
    n->inputs.reserve(inputs.size());
    for (Var& v : inputs) n->inputs.push_back(v.node());
    n->backward = backward;
    tape->record(n);
  }
  return Var(n);
}

void GradTape::backward(const Var& loss) {
  Node* ln = loss.node().get();
  if (!ln || ln->tape != this) throw UsageError("backward: loss was not recorded on this tape");
  if (ln->value.size() != 1) {
    throw UsageError("backward: loss must be scalar, got " + shape_str(ln->value.shape()));
  }
  ln->grad = Tensor::full(ln->value.shape(), 1.0);
  ln->grad_allocated = true;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (!n.grad_allocated || !n.backward) continue;
    if (!g_perturb_op.empty() && g_perturb_op == n.op) {
      for (int64_t i = 0; i < n.grad.size(); ++i) n.grad[i] = n.grad[i] * 1.01 + 1e-3;
    }
    n.backward(n);
    if (!n.is_leaf) {  // consumers already ran; buffers no longer needed
      n.value = Tensor();
      n.grad = Tensor();
      n.grad_allocated = false;
      n.backward = nullptr;
    }
  }
}

void set_backward_perturbation(std::string op_name) { g_perturb_op = std::move(op_name); }
void clear_backward_perturbation() { g_perturb_op.clear(); }

// --- primitive ops ----------------------------------------------------------

Var elementwise(ops::Ewise kind, const Var& a, const Var& b) {
  Tensor value = ops::elementwise(kind, a.value(), b.value());
  const char* name = kind == ops::Ewise::kAdd   ? "elementwise_add"
                     : kind == ops::Ewise::kMul ? "elementwise_mul"
                                                : "elementwise_max";
  switch (kind) {
    case ops::Ewise::kAdd:
      return make_op(name, std::move(value), {a, b}, [](Node& n) {
        if (n.inputs[0]->requires_grad) accumulate_grad(*n.inputs[0], n.grad);
        if (n.inputs[1]->requires_grad) accumulate_grad(*n.inputs[1], n.grad);
      });
    case ops::Ewise::kMul:
      return make_op(name, std::move(value), {a, b}, [](Node& n) {
        const Tensor& av = n.inputs[0]->value;
        const Tensor& bv = n.inputs[1]->value;
        if (n.inputs[0]->requires_grad) {
          accumulate_grad(*n.inputs[0], ops::elementwise(ops::Ewise::kMul, n.grad, bv));
        }
        if (n.inputs[1]->requires_grad) {
          accumulate_grad(*n.inputs[1], ops::elementwise(ops::Ewise::kMul, n.grad, av));
        }
      });
    case ops::Ewise::kMax:
    default:
      return make_op(name, std::move(value), {a, b}, [](Node& n) {
        const Tensor& av = n.inputs[0]->value;
        const Tensor& bv = n.inputs[1]->value;
        Tensor ga = Tensor::zeros(av.shape());
        Tensor gb = Tensor::zeros(bv.shape());
        for (int64_t i = 0; i < av.size(); ++i) {
          (av[i] >= bv[i] ? ga[i] : gb[i]) = n.grad[i];
        }
        if (n.inputs[0]->requires_grad) accumulate_grad(*n.inputs[0], ga);
        if (n.inputs[1]->requires_grad) accumulate_grad(*n.inputs[1], gb);
      });
  }
}

Var add(const Var& a, const Var& b) { return elementwise(ops::Ewise::kAdd, a, b); }
Var mul(const Var& a, const Var& b) { return elementwise(ops::Ewise::kMul, a, b); }
Var emax(const Var& a, const Var& b) { return elementwise(ops::Ewise::kMax, a, b); }

Var scale(const Var& a, double s) {
  Tensor value = a.value();
  for (int64_t i = 0; i < value.size(); ++i) value[i] *= s;
  return make_op("scale", std::move(value), {a},
                 [s](Node& n) { accumulate_grad_scaled(*n.inputs[0], n.grad, s); });
}

Var log(const Var& a) {
  Tensor value(a.shape());
  for (int64_t i = 0; i < value.size(); ++i) value[i] = std::log(a.value()[i]);
  return make_op("log", std::move(value), {a}, [](Node& n) {
    const Tensor& x = n.inputs[0]->value;
    Tensor g(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) g[i] = n.grad[i] / x[i];
    accumulate_grad(*n.inputs[0], g);
  });
}

Var relu(const Var& a) {
  return make_op("relu", ops::relu(a.value()), {a}, [](Node& n) {
    const Tensor& x = n.inputs[0]->value;
    Tensor g(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) g[i] = x[i] > 0.0 ? n.grad[i] : 0.0;
    accumulate_grad(*n.inputs[0], g);
  });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (int64_t i = 0; i < a.value().size(); ++i) total += a.value()[i];
  return make_op("sum", Tensor::scalar(total), {a}, [](Node& n) {
    Node& in = *n.inputs[0];
    accumulate_grad(in, Tensor::full(in.value.shape(), n.grad[0]));
  });
}

Var reshape(const Var& a, Shape shape) {
  return make_op("reshape", a.value().reshaped(std::move(shape)), {a}, [](Node& n) {
    accumulate_grad(*n.inputs[0], n.grad.reshaped(n.inputs[0]->value.shape()));
  });
}

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  Tensor value = ops::gemm(a.value(), b.value(), trans_a, trans_b);
  return make_op("matmul", std::move(value), {a, b}, [trans_a, trans_b](Node& n) {
    const Tensor& av = n.inputs[0]->value;
    const Tensor& bv = n.inputs[1]->value;
    const Tensor& g = n.grad;
    if (n.inputs[0]->requires_grad) {
      Tensor da = trans_a ? ops::gemm(bv, g, trans_b, true) : ops::gemm(g, bv, false, !trans_b);
      accumulate_grad(*n.inputs[0], da);
    }
    if (n.inputs[1]->requires_grad) {
      Tensor db = trans_b ? ops::gemm(g, av, true, trans_a) : ops::gemm(av, g, !trans_a, false);
      accumulate_grad(*n.inputs[1], db);
    }
  });
}

Var softmax_rows(const Var& x) {
  Tensor value = ops::softmax_rows(x.value());
  // The node's own buffers are still alive while its adjoint runs, so the
  // backward pass can read the stored output directly.
  return make_op("softmax_rows", std::move(value), {x}, [](Node& n) {
    const Tensor& y = n.value;
    const int64_t m = y.extent(0), cols = y.extent(1);
    Tensor g(y.shape());
    for (int64_t i = 0; i < m; ++i) {
      const double* yr = y.data() + i * cols;
      const double* gr = n.grad.data() + i * cols;
      double dot = 0.0;
      for (int64_t j = 0; j < cols; ++j) dot += gr[j] * yr[j];
      double* o = g.data() + i * cols;
      for (int64_t j = 0; j < cols; ++j) o[j] = yr[j] * (gr[j] - dot);
    }
    accumulate_grad(*n.inputs[0], g);
  });
}

Var conv2d(const Var& x, const Var& kernels, int64_t stride, int64_t pad) {
  Tensor value = ops::conv2d_batch(x.value(), kernels.value(), stride, pad);
  return make_op("conv2d", std::move(value), {x, kernels}, [stride, pad](Node& n) {
    Node& xn = *n.inputs[0];
    Node& wn = *n.inputs[1];
    const Tensor& xv = xn.value;
    const Tensor& wv = wn.value;
    const int64_t b = xv.extent(0), cin = xv.extent(1), h = xv.extent(2), w = xv.extent(3);
    const int64_t cout = wv.extent(0), k = wv.extent(2);
    const int64_t oh = n.grad.extent(2), ow = n.grad.extent(3);
    const int64_t p = oh * ow, ckk = cin * k * k;
    const bool need_dw = wn.requires_grad;
    const bool need_dx = xn.requires_grad;
    if (!need_dw && !need_dx) return;

    if (need_dx && !xn.grad_allocated) {
      xn.grad = Tensor::zeros(xv.shape());
      xn.grad_allocated = true;
    }
    // Per-item kernel partials summed in item order keep dW deterministic
    // for any thread count.
    std::vector<Tensor> partials(static_cast<size_t>(need_dw ? b : 0));
    parallel_for(b, 1, [&](int64_t lo, int64_t hi) {
      std::vector<double> rows(static_cast<size_t>(ckk * p));
      std::vector<double> dcol(static_cast<size_t>(ckk * p));
      for (int64_t bi = lo; bi < hi; ++bi) {
        const double* gi = n.grad.data() + bi * cout * p;
        if (need_dw) {
          ops::detail_im2row(xv.data() + bi * cin * h * w, cin, h, w, k, stride, pad, oh, ow,
                             rows.data());
          Tensor part({cout, cin, k, k});
          // dW[co, :] = sum_j g[co, j] * rows[j, :]
          for (int64_t co = 0; co < cout; ++co) {
            const double* grow = gi + co * p;
            double* prow = part.data() + co * ckk;
            for (int64_t j = 0; j < p; ++j) {
              const double gv = grow[j];
              if (gv == 0.0) continue;
              const double* rrow = rows.data() + j * ckk;
              for (int64_t t = 0; t < ckk; ++t) prow[t] += gv * rrow[t];
            }
          }
          partials[static_cast<size_t>(bi)] = std::move(part);
        }
        if (need_dx) {
          // dcol = W^T g, then scatter back through the patch geometry.
          std::fill(dcol.begin(), dcol.end(), 0.0);
          for (int64_t co = 0; co < cout; ++co) {
            const double* grow = gi + co * p;
            const double* wrow = wv.data() + co * ckk;
            for (int64_t t = 0; t < ckk; ++t) {
              const double wv_t = wrow[t];
              if (wv_t == 0.0) continue;
              double* drow = dcol.data() + t * p;
              for (int64_t j = 0; j < p; ++j) drow[j] += wv_t * grow[j];
            }
          }
          double* dxi = xn.grad.data() + bi * cin * h * w;
          for (int64_t ci = 0; ci < cin; ++ci) {
            for (int64_t dy = 0; dy < k; ++dy) {
              for (int64_t dx = 0; dx < k; ++dx) {
                const double* drow = dcol.data() + ((ci * k + dy) * k + dx) * p;
                for (int64_t oy = 0; oy < oh; ++oy) {
                  const int64_t iy = oy * stride + dy - pad;
                  if (iy < 0 || iy >= h) continue;
                  double* dst = dxi + (ci * h + iy) * w;
                  for (int64_t ox = 0; ox < ow; ++ox) {
                    const int64_t ix = ox * stride + dx - pad;
                    if (ix >= 0 && ix < w) dst[ix] += drow[oy * ow + ox];
                  }
                }
              }
            }
          }
        }
      }
    });
    if (need_dw) {
      if (!wn.grad_allocated) {
        wn.grad = Tensor::zeros(wv.shape());
        wn.grad_allocated = true;
      }
      for (int64_t bi = 0; bi < b; ++bi) {
        const Tensor& part = partials[static_cast<size_t>(bi)];
        for (int64_t i = 0; i < part.size(); ++i) wn.grad[i] += part[i];
      }
    }
  });
}

Var batchnorm2d(const Var& x, const Var& gamma, const Var& beta, ops::Mode mode,
                ops::BatchNormState& state) {
  const Tensor& xv = x.value();
  Tensor value = ops::batchnorm2d(xv, gamma.value(), beta.value(), mode, state);
  // Snapshot the statistics the forward pass actually used.
  const int64_t c = gamma.value().size();
  Tensor mean({c}), inv_std({c});
  if (mode == ops::Mode::kTrain) {
    const int64_t b = xv.extent(0), hw = xv.extent(2) * xv.extent(3);
    const int64_t m = b * hw;
    for (int64_t ci = 0; ci < c; ++ci) {
      double sum = 0.0;
      for (int64_t bi = 0; bi < b; ++bi) {
        const double* p = xv.data() + (bi * c + ci) * hw;
        for (int64_t j = 0; j < hw; ++j) sum += p[j];
      }
      const double mu = sum / static_cast<double>(m);
      double sq = 0.0;
      for (int64_t bi = 0; bi < b; ++bi) {
        const double* p = xv.data() + (bi * c + ci) * hw;
        for (int64_t j = 0; j < hw; ++j) {
          const double d = p[j] - mu;
          sq += d * d;
        }
      }
      mean[ci] = mu;
      inv_std[ci] = 1.0 / std::sqrt(sq / static_cast<double>(m) + ops::kBatchNormEps);
    }
  } else {
    for (int64_t ci = 0; ci < c; ++ci) {
      mean[ci] = state.running_mean[ci];
      inv_std[ci] = 1.0 / std::sqrt(state.running_var[ci] + ops::kBatchNormEps);
    }
  }

  return make_op(
      "batchnorm2d", std::move(value), {x, gamma, beta},
      [mode, mean = std::move(mean), inv_std = std::move(inv_std)](Node& n) {
        Node& xn = *n.inputs[0];
        Node& gn = *n.inputs[1];
        Node& bn = *n.inputs[2];
        const Tensor& xv = xn.value;
        const int64_t b = xv.extent(0), c = xv.extent(1), hw = xv.extent(2) * xv.extent(3);
        const int64_t m = b * hw;
        const Tensor& g = n.grad;

        Tensor dgamma({c}), dbeta({c});
        Tensor dx;
        const bool need_dx = xn.requires_grad;
        if (need_dx) dx = Tensor::zeros(xv.shape());

        for (int64_t ci = 0; ci < c; ++ci) {
          const double mu = mean[ci], is = inv_std[ci];
          double sum_g = 0.0, sum_gx = 0.0;
          for (int64_t bi = 0; bi < b; ++bi) {
            const double* xp = xv.data() + (bi * c + ci) * hw;
            const double* gp = g.data() + (bi * c + ci) * hw;
            for (int64_t j = 0; j < hw; ++j) {
              sum_g += gp[j];
              sum_gx += gp[j] * (xp[j] - mu) * is;
            }
          }
          dbeta[ci] = sum_g;
          dgamma[ci] = sum_gx;
          if (!need_dx) continue;
          const double gamma_v = gn.value[ci];
          if (mode == ops::Mode::kTrain) {
            const double inv_m = 1.0 / static_cast<double>(m);
            for (int64_t bi = 0; bi < b; ++bi) {
              const double* xp = xv.data() + (bi * c + ci) * hw;
              const double* gp = g.data() + (bi * c + ci) * hw;
              double* dp = dx.data() + (bi * c + ci) * hw;
              for (int64_t j = 0; j < hw; ++j) {
                const double xhat = (xp[j] - mu) * is;
                dp[j] = gamma_v * is * (gp[j] - inv_m * sum_g - inv_m * xhat * sum_gx);
              }
            }
          } else {
            for (int64_t bi = 0; bi < b; ++bi) {
              const double* gp = g.data() + (bi * c + ci) * hw;
              double* dp = dx.data() + (bi * c + ci) * hw;
              for (int64_t j = 0; j < hw; ++j) dp[j] = gamma_v * is * gp[j];
            }
          }
        }
        if (need_dx) accumulate_grad(xn, dx);
        if (gn.requires_grad) accumulate_grad(gn, dgamma);
        if (bn.requires_grad) accumulate_grad(bn, dbeta);
      });
}

Var cross_entropy(const Var& logits, std::vector<int> labels) {
  const double loss =
      ops::cross_entropy(logits.value(), std::span<const int>(labels.data(), labels.size()));
  Tensor probs = ops::softmax_rows(logits.value());
  return make_op("cross_entropy", Tensor::scalar(loss), {logits},
                 [labels = std::move(labels), probs = std::move(probs)](Node& n) {
                   const int64_t b = probs.extent(0), cols = probs.extent(1);
                   Tensor g(probs.shape());
                   const double s = n.grad[0] / static_cast<double>(b);
                   for (int64_t i = 0; i < b; ++i) {
                     for (int64_t j = 0; j < cols; ++j) g[i * cols + j] = s * probs[i * cols + j];
                     g[i * cols + labels[static_cast<size_t>(i)]] -= s;
                   }
                   accumulate_grad(*n.inputs[0], g);
                 });
}

Var global_avg_pool(const Var& x) {
  return make_op("global_avg_pool", ops::global_avg_pool(x.value()), {x}, [](Node& n) {
    Node& xn = *n.inputs[0];
    const int64_t b = xn.value.extent(0), c = xn.value.extent(1);
    const int64_t hw = xn.value.extent(2) * xn.value.extent(3);
    Tensor g(xn.value.shape());
    const double inv = 1.0 / static_cast<double>(hw);
    for (int64_t i = 0; i < b * c; ++i) {
      const double v = n.grad[i] * inv;
      double* p = g.data() + i * hw;
      for (int64_t j = 0; j < hw; ++j) p[j] = v;
    }
    accumulate_grad(xn, g);
  });
}

Var avg_pool2d(const Var& x) {
  return make_op("avg_pool2d", ops::avg_pool2d(x.value()), {x}, [](Node& n) {
    Node& xn = *n.inputs[0];
    const int64_t bc = xn.value.extent(0) * xn.value.extent(1);
    const int64_t h = xn.value.extent(2), w = xn.value.extent(3);
    const int64_t oh = h / 2, ow = w / 2;
    Tensor g(xn.value.shape());
    for (int64_t i = 0; i < bc; ++i) {
      const double* gp = n.grad.data() + i * oh * ow;
      double* dp = g.data() + i * h * w;
      for (int64_t y = 0; y < oh; ++y) {
        for (int64_t xx = 0; xx < ow; ++xx) {
          const double v = 0.25 * gp[y * ow + xx];
          double* q = dp + 2 * y * w + 2 * xx;
          q[0] = v;
          q[1] = v;
          q[w] = v;
          q[w + 1] = v;
        }
      }
    }
    accumulate_grad(xn, g);
  });
}

Var add_row_bias(const Var& x, const Var& b) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || b.value().size() != xv.extent(1)) {
    throw DimensionError("add_row_bias: " + shape_str(xv.shape()) + " + " +
                         shape_str(b.value().shape()));
  }
  Tensor value = xv;
  const int64_t rows = xv.extent(0), cols = xv.extent(1);
  for (int64_t i = 0; i < rows; ++i) {
    for (int64_t j = 0; j < cols; ++j) value[i * cols + j] += b.value()[j];
  }
  return make_op("add_bias", std::move(value), {x, b}, [](Node& n) {
    Node& xn = *n.inputs[0];
    Node& bn = *n.inputs[1];
    if (xn.requires_grad) accumulate_grad(xn, n.grad);
    if (bn.requires_grad) {
      const int64_t rows = n.grad.extent(0), cols = n.grad.extent(1);
      Tensor gb({cols});
      for (int64_t i = 0; i < rows; ++i) {
        for (int64_t j = 0; j < cols; ++j) gb[j] += n.grad[i * cols + j];
      }
      accumulate_grad(bn, gb);
    }
  });
}

Var item_view(const Var& x, int64_t b) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4) throw DimensionError("item_view expects [B,C,H,W]");
  if (b < 0 || b >= xv.extent(0)) throw IndexError("item_view index out of range");
  const int64_t c = xv.extent(1), m = xv.extent(2) * xv.extent(3);
  Tensor value({c, m});
  const double* src = xv.data() + b * c * m;
  std::copy(src, src + c * m, value.data());
  return make_op("item_view", std::move(value), {x}, [b](Node& n) {
    Node& xn = *n.inputs[0];
    if (!xn.grad_allocated) {
      xn.grad = Tensor::zeros(xn.value.shape());
      xn.grad_allocated = true;
    }
    const int64_t cm = n.grad.size();
    double* dst = xn.grad.data() + b * cm;
    for (int64_t i = 0; i < cm; ++i) dst[i] += n.grad[i];
  });
}

Var batch_stack(const std::vector<Var>& items, Shape out_shape) {
  if (items.empty()) throw DimensionError("batch_stack: no items");
  Tensor value(std::move(out_shape));
  const int64_t per = value.size() / static_cast<int64_t>(items.size());
  for (size_t i = 0; i < items.size(); ++i) {
    const Tensor& t = items[i].value();
    if (t.size() != per) throw DimensionError("batch_stack: item size mismatch");
    std::copy(t.data(), t.data() + per, value.data() + static_cast<int64_t>(i) * per);
  }
  return make_op("batch_stack", std::move(value), items, [](Node& n) {
    const int64_t per = n.grad.size() / static_cast<int64_t>(n.inputs.size());
    for (size_t i = 0; i < n.inputs.size(); ++i) {
      Node& in = *n.inputs[i];
      if (!in.requires_grad) continue;
      if (!in.grad_allocated) {
        in.grad = Tensor::zeros(in.value.shape());
        in.grad_allocated = true;
      }
      const double* src = n.grad.data() + static_cast<int64_t>(i) * per;
      for (int64_t j = 0; j < per; ++j) in.grad[j] += src[j];
    }
  });
}

double gradcheck(const TapeFn& fn, const std::vector<Tensor>& inputs, double epsilon) {
  GradTape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
  Var loss = fn(tape, leaves);
  std::vector<Tensor> analytic;
  analytic.reserve(leaves.size());
  {
    // Grab gradients before backward releases interior buffers.
    tape.backward(loss);
    for (const Var& v : leaves) analytic.push_back(v.grad());
  }

  auto eval = [&fn](const std::vector<Tensor>& xs) {
    GradTape t(false);
    std::vector<Var> vs;
    vs.reserve(xs.size());
    for (const Tensor& x : xs) vs.push_back(t.leaf(x, false));
    return fn(t, vs).value().item();
  };

  double max_rel = 0.0;
  std::vector<Tensor> work = inputs;
  for (size_t ti = 0; ti < work.size(); ++ti) {
    for (int64_t i = 0; i < work[ti].size(); ++i) {
      const double orig = work[ti][i];
      work[ti][i] = orig + epsilon;
      const double fp = eval(work);
      work[ti][i] = orig - epsilon;
      const double fm = eval(work);
      work[ti][i] = orig;
      const double fd = (fp - fm) / (2.0 * epsilon);
      const double an = analytic[ti][i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
      max_rel = std::max(max_rel, std::abs(fd - an) / denom);
    }
  }
  return max_rel;
}

}  // namespace ia::ag
