#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ptdx/common.hpp"

namespace ptdx {

// --- grad mode -------------------------------------------------------------

bool grad_enabled();

// Disables tape recording in scope (sampling, EMA updates, evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

namespace detail {

struct GradNode;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily; same element count as data
  bool requires_grad = false;
  std::shared_ptr<GradNode> node;  // null for leaves
};

struct GradNode {
  const char* op = "";
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  TensorImpl* out = nullptr;  // non-owning; node lifetime is bounded by out
  std::function<void(const std::vector<double>& out_grad)> backward;
};

void accumulate_grad(TensorImpl& t, const double* g, int64_t n);

}  // namespace detail

// Dense row-major double tensor with reverse-mode autodiff.
// Value semantics over a shared impl. Immutable once built into a graph,
// except the gradient accumulator; leaf data may be updated between recorded
// graphs (that is how the optimizer steps parameters).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from_data(Shape shape, std::vector<double> data);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int ndim() const { return static_cast<int>(shape().size()); }
  int64_t size(int axis) const;
  int64_t numel() const;

  const std::vector<double>& data() const;
  std::vector<double>& mutable_data();
  double item() const;                       // numel()==1 only
  double at(const std::vector<int64_t>& idx) const;

  Tensor& set_requires_grad(bool value);
  bool requires_grad() const;
  // Gradient accumulator; zeros until a backward pass reaches this tensor.
  const std::vector<double>& grad() const;
  void zero_grad();

  // Reverse-mode pass from a scalar. Leaf gradients accumulate across calls;
  // intermediate gradients are scratch re-derived per call.
  void backward();

  std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }
  static Tensor wrap(std::shared_ptr<detail::TensorImpl> impl);

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// --- ops -------------------------------------------------------------------
// Binary elementwise ops broadcast trailing-aligned extents of 1.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

// Contracts the last axis of `a` with the second-to-last of `b`; leading axes
// are batch and broadcast. Reports multiply-accumulate counts to the active
// FlopCounter (flops.hpp).
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, const std::vector<int>& axes);
Tensor transpose_last2(const Tensor& a);

Tensor softmax(const Tensor& a, int axis);
// Normalizes the last axis; gain/bias optional (undefined tensors = no affine).
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);
Tensor gelu(const Tensor& x);  // tanh approximation
Tensor silu(const Tensor& x);

Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor mse_loss(const Tensor& a, const Tensor& b);

Tensor slice_last(const Tensor& x, int64_t start, int64_t len);
// table: [V, D]; result: [ids.size(), D]. Backward scatter-adds into table.
Tensor embedding_lookup(const Tensor& table, const std::vector<int64_t>& ids);
// Cyclic shift; shifts[i] applies to axes[i], positive toward higher index.
Tensor roll_axes(const Tensor& x, const std::vector<int>& axes, const std::vector<int64_t>& shifts);
// Linear resize along one axis, endpoints aligned; identity when sizes match.
Tensor interp_linear_axis(const Tensor& x, int axis, int64_t out_len);
Tensor mean_axis(const Tensor& x, int axis);  // drops the axis

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }

}  // namespace ptdx
