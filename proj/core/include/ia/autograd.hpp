#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ia/ops.hpp"
#include "ia/tensor.hpp"

namespace ia::ag {

class GradTape;

struct Node {
  Tensor value;
  Tensor grad;  // same shape as value once allocated
  bool grad_allocated = false;
  bool requires_grad = false;
  bool is_leaf = false;
  const char* op = "leaf";
  GradTape* tape = nullptr;
  std::vector<std::shared_ptr<Node>> inputs;
  // Accumulates into the inputs' grads; reads this->grad and any captured state.
  std::function<void(Node&)> backward;
};

// Handle to a node in the computation graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  bool valid() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  // Gradient after backward(); zeros if the tensor was never touched.
  const Tensor& grad() const;
  bool requires_grad() const { return node_->requires_grad; }

  std::shared_ptr<Node>& node() { return node_; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  mutable std::shared_ptr<Node> node_;
};

// Records executed operations in order; replaying their adjoints in reverse
// yields exactly one gradient accumulation per tracked input. A tape is
// confined to one logical training step.
class GradTape {
 public:
  GradTape() = default;
  explicit GradTape(bool recording) : recording_(recording) {}
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  bool recording() const { return recording_; }
  size_t node_count() const { return nodes_.size(); }

  // Tracked input tensor.
  Var leaf(Tensor value, bool requires_grad = true);

  // Runs adjoints in reverse tape order; loss must be a scalar recorded on
  // this tape. Non-leaf buffers are released as soon as they are consumed.
  void backward(const Var& loss);

  void record(const std::shared_ptr<Node>& n) { nodes_.push_back(n); }

 private:
  bool recording_ = true;
  std::vector<std::shared_ptr<Node>> nodes_;
};

// Untracked value, usable with any tape.
Var constant(Tensor value);

// Core infrastructure for defining ops. `backward` may be empty for
// non-differentiable results. Custom ops (fused kernels) use this directly.
Var make_op(const char* op, Tensor value, std::vector<Var> inputs,
            const std::function<void(Node&)>& make_backward_grad);

// Adds `g` into the node's gradient buffer, allocating zeros on first touch.
void accumulate_grad(Node& n, const Tensor& g);
void accumulate_grad_scaled(Node& n, const Tensor& g, double scale);

// --- primitive ops ---------------------------------------------------------

Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var emax(const Var& a, const Var& b);  // ties resolve to the first operand
Var elementwise(ops::Ewise kind, const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var log(const Var& a);
Var relu(const Var& a);
Var sum(const Var& a);  // scalar
Var reshape(const Var& a, Shape shape);
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);
Var softmax_rows(const Var& x);
Var conv2d(const Var& x, const Var& kernels, int64_t stride, int64_t pad);  // [B,Cin,H,W]
Var batchnorm2d(const Var& x, const Var& gamma, const Var& beta, ops::Mode mode,
                ops::BatchNormState& state);
Var cross_entropy(const Var& logits, std::vector<int> labels);  // scalar
Var global_avg_pool(const Var& x);              // [B,C,H,W] -> [B,C]
Var avg_pool2d(const Var& x);                   // 2x2 stride-2 mean pool
Var add_row_bias(const Var& x, const Var& b);   // [B,N] + [N]
Var item_view(const Var& x, int64_t b);         // [B,C,H,W] -> [C, H*W]
Var batch_stack(const std::vector<Var>& items, Shape out_shape);

// --- gradient checking ------------------------------------------------------

using TapeFn = std::function<Var(GradTape&, const std::vector<Var>&)>;

// Max relative error between tape gradients and central differences,
// (f(x+eps) - f(x-eps)) / 2eps, with denominator max(|a|,|b|,1e-8).
double gradcheck(const TapeFn& fn, const std::vector<Tensor>& inputs, double epsilon = 1e-5);

// Debug hook: corrupts the stored gradient of every node whose op name
// matches before its adjoint runs. Lets callers verify that gradcheck
// actually detects a broken backward pass.
void set_backward_perturbation(std::string op_name);
void clear_backward_perturbation();

}  // namespace ia::ag
