#include "ptdx/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "ptdx/flops.hpp"

namespace ptdx {

using detail::GradNode;
using detail::TensorImpl;

namespace {

thread_local bool g_grad_enabled = true;

std::vector<int64_t> contig_strides(const Shape& s) {
  std::vector<int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
  return st;
}

Shape broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
  size_t n = std::max(a.size(), b.size());
  Shape out(n);
  for (size_t i = 0; i < n; ++i) {
    int64_t da = i < n - a.size() ? 1 : a[i - (n - a.size())];
    int64_t db = i < n - b.size() ? 1 : b[i - (n - b.size())];
    if (da != db && da != 1 && db != 1)
      throw std::invalid_argument(std::string(op) + ": shapes not broadcastable, " + shape_str(a) +
                                  " vs " + shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

// Element strides for reading a tensor of shape `s` as if broadcast to `out`
// (trailing-aligned; broadcast axes get stride 0).
std::vector<int64_t> bcast_strides(const Shape& s, const Shape& out) {
  auto st = contig_strides(s);
  std::vector<int64_t> r(out.size(), 0);
  size_t off = out.size() - s.size();
  for (size_t i = 0; i < s.size(); ++i) r[off + i] = (s[i] == 1 && out[off + i] != 1) ? 0 : st[i];
  return r;
}

// Row-major iteration over `shape`, tracking one strided input offset.
template <class Fn>
void iter1(const Shape& shape, const std::vector<int64_t>& s0, Fn fn) {
  int nd = static_cast<int>(shape.size());
  int64_t n = shape_numel(shape);
  if (n == 0) return;
  if (nd == 0) {
    fn(static_cast<int64_t>(0), static_cast<int64_t>(0));
    return;
  }
  std::vector<int64_t> c(nd, 0);
  int64_t o0 = 0;
  for (int64_t i = 0;;) {
    fn(i, o0);
    if (++i == n) break;
    int ax = nd - 1;
    for (;;) {
      ++c[ax];
      o0 += s0[ax];
      if (c[ax] < shape[ax]) break;
      o0 -= s0[ax] * shape[ax];
      c[ax] = 0;
      --ax;
    }
  }
}

// Same, with two strided offsets.
template <class Fn>
void iter2(const Shape& shape, const std::vector<int64_t>& s0, const std::vector<int64_t>& s1, Fn fn) {
  int nd = static_cast<int>(shape.size());
  int64_t n = shape_numel(shape);
  if (n == 0) return;
  if (nd == 0) {
    fn(static_cast<int64_t>(0), static_cast<int64_t>(0), static_cast<int64_t>(0));
    return;
  }
  std::vector<int64_t> c(nd, 0);
  int64_t o0 = 0, o1 = 0;
  for (int64_t i = 0;;) {
    fn(i, o0, o1);
    if (++i == n) break;
    int ax = nd - 1;
    for (;;) {
      ++c[ax];
      o0 += s0[ax];
      o1 += s1[ax];
      if (c[ax] < shape[ax]) break;
      o0 -= s0[ax] * shape[ax];
      o1 -= s1[ax] * shape[ax];
      c[ax] = 0;
      --ax;
    }
  }
}

std::shared_ptr<TensorImpl> make_impl(Shape shape, std::vector<double> data) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("tensor: data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return impl;
}

bool any_requires(const std::vector<std::shared_ptr<TensorImpl>>& ins) {
  for (const auto& i : ins)
    if (i->requires_grad) return true;
  return false;
}

// Attaches a grad node when recording; no-op otherwise.
void attach(const std::shared_ptr<TensorImpl>& out, const char* op,
            std::vector<std::shared_ptr<TensorImpl>> inputs,
            std::function<void(const std::vector<double>&)> bw) {
  if (!g_grad_enabled || !any_requires(inputs)) return;
  out->requires_grad = true;
  auto node = std::make_shared<GradNode>();
  node->op = op;
  node->inputs = std::move(inputs);
  node->out = out.get();
  node->backward = std::move(bw);
  out->node = std::move(node);
}

void ensure_grad(TensorImpl& t) {
  if (t.grad.size() != t.data.size()) t.grad.assign(t.data.size(), 0.0);
}

int normalize_axis(int axis, int ndim, const char* op) {
  int a = axis < 0 ? axis + ndim : axis;
  if (a < 0 || a >= ndim)
    throw std::invalid_argument(std::string(op) + ": axis " + std::to_string(axis) +
                                " out of range for ndim " + std::to_string(ndim));
  return a;
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

namespace detail {
void accumulate_grad(TensorImpl& t, const double* g, int64_t n) {
  ensure_grad(t);
  for (int64_t i = 0; i < n; ++i) t.grad[i] += g[i];
}
}  // namespace detail

// --- Tensor methods --------------------------------------------------------

Tensor Tensor::wrap(std::shared_ptr<TensorImpl> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

Tensor Tensor::zeros(Shape shape) {
  int64_t n = shape_numel(shape);
  return wrap(make_impl(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::full(Shape shape, double value) {
  int64_t n = shape_numel(shape);
  return wrap(make_impl(std::move(shape), std::vector<double>(n, value)));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  return wrap(make_impl(std::move(shape), std::move(data)));
}

Tensor Tensor::scalar(double value) { return from_data({}, {value}); }

const Shape& Tensor::shape() const {
  if (!impl_) throw std::runtime_error("tensor: undefined");
  return impl_->shape;
}

int64_t Tensor::size(int axis) const {
  return shape().at(static_cast<size_t>(normalize_axis(axis, ndim(), "size")));
}

int64_t Tensor::numel() const { return static_cast<int64_t>(data().size()); }

const std::vector<double>& Tensor::data() const {
  if (!impl_) throw std::runtime_error("tensor: undefined");
  return impl_->data;
}

std::vector<double>& Tensor::mutable_data() {
  if (!impl_) throw std::runtime_error("tensor: undefined");
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1)
    throw std::invalid_argument("item: tensor has " + std::to_string(numel()) + " elements");
  return data()[0];
}

double Tensor::at(const std::vector<int64_t>& idx) const {
  const Shape& s = shape();
  if (idx.size() != s.size())
    throw std::invalid_argument("at: index rank " + std::to_string(idx.size()) +
                                " does not match shape " + shape_str(s));
  auto st = contig_strides(s);
  int64_t off = 0;
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= s[i])
      throw std::invalid_argument("at: index out of range on axis " + std::to_string(i));
    off += idx[i] * st[i];
  }
  return data()[off];
}

Tensor& Tensor::set_requires_grad(bool value) {
  if (!impl_) throw std::runtime_error("tensor: undefined");
  if (impl_->node && !value) throw std::invalid_argument("set_requires_grad: tensor is not a leaf");
  impl_->requires_grad = value;
  return *this;
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

const std::vector<double>& Tensor::grad() const {
  if (!impl_) throw std::runtime_error("tensor: undefined");
  ensure_grad(*impl_);  // zeros until touched, including disconnected leaves
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_) throw std::runtime_error("tensor: undefined");
  impl_->grad.assign(impl_->data.size(), 0.0);
}

void Tensor::backward() {
  if (!impl_) throw std::runtime_error("backward: undefined tensor");
  if (numel() != 1)
    throw std::invalid_argument("backward: output must be a scalar, got shape " + shape_str(shape()));
  TensorImpl* root = impl_.get();
  if (!root->node) {
    if (root->requires_grad) {
      double one = 1.0;
      detail::accumulate_grad(*root, &one, 1);
    }
    return;
  }

  // Post-order over grad nodes (inputs before outputs), then run reversed.
  std::vector<GradNode*> order;
  std::unordered_set<TensorImpl*> seen;
  struct Frame {
    TensorImpl* impl;
    size_t next;
  };
  std::vector<Frame> stack;
  seen.insert(root);
  stack.push_back({root, 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    GradNode* n = f.impl->node.get();
    if (f.next < n->inputs.size()) {
      TensorImpl* in = n->inputs[f.next++].get();
      if (in->node && seen.insert(in).second) stack.push_back({in, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Non-leaf grads are per-pass scratch; leaf grads accumulate across calls.
  for (GradNode* n : order) n->out->grad.assign(n->out->data.size(), 0.0);
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    GradNode* n = *it;
    if (n->backward) n->backward(n->out->grad);
  }
}

// --- elementwise -----------------------------------------------------------

namespace {

template <class FwdFn, class BwdFn>
Tensor ew_binary(const char* op, const Tensor& a, const Tensor& b, FwdFn fwd, BwdFn bwd) {
  auto ai = a.impl();
  auto bi = b.impl();
  Shape os = broadcast_shapes(ai->shape, bi->shape, op);
  auto sa = bcast_strides(ai->shape, os);
  auto sb = bcast_strides(bi->shape, os);
  std::vector<double> out(shape_numel(os));
  const double* A = ai->data.data();
  const double* B = bi->data.data();
  iter2(os, sa, sb, [&](int64_t i, int64_t oa, int64_t ob) { out[i] = fwd(A[oa], B[ob]); });
  auto oi = make_impl(os, std::move(out));
  attach(oi, op, {ai, bi}, [ai, bi, os, sa, sb, bwd](const std::vector<double>& og) {
    bool na = ai->requires_grad, nb = bi->requires_grad;
    if (na) ensure_grad(*ai);
    if (nb) ensure_grad(*bi);
    const double* A = ai->data.data();
    const double* B = bi->data.data();
    iter2(os, sa, sb, [&](int64_t i, int64_t oa, int64_t ob) {
      auto [da, db] = bwd(A[oa], B[ob]);
      if (na) ai->grad[oa] += og[i] * da;
      if (nb) bi->grad[ob] += og[i] * db;
    });
  });
  return Tensor::wrap(oi);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return std::pair<double, double>{1.0, 1.0}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return std::pair<double, double>{1.0, -1.0}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y) { return std::pair<double, double>{y, x}; });
}

Tensor scale(const Tensor& a, double s) {
  auto ai = a.impl();
  std::vector<double> out(ai->data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = ai->data[i] * s;
  auto oi = make_impl(ai->shape, std::move(out));
  attach(oi, "scale", {ai}, [ai, s](const std::vector<double>& og) {
    if (!ai->requires_grad) return;
    ensure_grad(*ai);
    for (size_t i = 0; i < og.size(); ++i) ai->grad[i] += og[i] * s;
  });
  return Tensor::wrap(oi);
}

Tensor add_scalar(const Tensor& a, double s) {
  auto ai = a.impl();
  std::vector<double> out(ai->data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = ai->data[i] + s;
  auto oi = make_impl(ai->shape, std::move(out));
  attach(oi, "add_scalar", {ai}, [ai](const std::vector<double>& og) {
    if (!ai->requires_grad) return;
    ensure_grad(*ai);
    for (size_t i = 0; i < og.size(); ++i) ai->grad[i] += og[i];
  });
  return Tensor::wrap(oi);
}

// --- matmul ----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  auto ai = a.impl();
  auto bi = b.impl();
  const Shape& as = ai->shape;
  const Shape& bs = bi->shape;
  if (as.size() < 2 || bs.size() < 2)
    throw std::invalid_argument("matmul: operands must have ndim >= 2, got " + shape_str(as) +
                                " and " + shape_str(bs));
  int64_t M = as[as.size() - 2], K = as[as.size() - 1];
  int64_t Kb = bs[bs.size() - 2], P = bs[bs.size() - 1];
  if (K != Kb)
    throw std::invalid_argument("matmul: inner dimensions mismatch, " + shape_str(as) + " x " +
                                shape_str(bs));
  Shape abatch(as.begin(), as.end() - 2), bbatch(bs.begin(), bs.end() - 2);
  Shape obatch = broadcast_shapes(abatch, bbatch, "matmul");
  auto sa = bcast_strides(abatch, obatch);
  auto sb = bcast_strides(bbatch, obatch);
  for (auto& v : sa) v *= M * K;
  for (auto& v : sb) v *= K * P;

  Shape os = obatch;
  os.push_back(M);
  os.push_back(P);
  int64_t nbatch = shape_numel(obatch);
  std::vector<double> out(nbatch * M * P, 0.0);
  const double* A = ai->data.data();
  const double* B = bi->data.data();
  // Two strided offsets over the batch cells; inner kernel is i-k-j with
  // contiguous rows so it vectorizes.
  iter2(obatch, sa, sb, [&](int64_t cell, int64_t oa, int64_t ob) {
    const double* Ac = A + oa;
    const double* Bc = B + ob;
    double* Cc = out.data() + cell * M * P;
    for (int64_t i = 0; i < M; ++i) {
      const double* arow = Ac + i * K;
      double* crow = Cc + i * P;
      for (int64_t k = 0; k < K; ++k) {
        double av = arow[k];
        const double* brow = Bc + k * P;
        for (int64_t p = 0; p < P; ++p) crow[p] += av * brow[p];
      }
    }
  });
  detail::report_macs(nbatch * M * K * P);

  auto oi = make_impl(std::move(os), std::move(out));
  attach(oi, "matmul", {ai, bi},
         [ai, bi, obatch, sa, sb, M, K, P](const std::vector<double>& og) {
           bool na = ai->requires_grad, nb = bi->requires_grad;
           if (na) ensure_grad(*ai);
           if (nb) ensure_grad(*bi);
           const double* A = ai->data.data();
           const double* B = bi->data.data();
           // Broadcast batch cells share an offset, so += realizes the
           // reduction over broadcast axes with no temporaries.
           iter2(obatch, sa, sb, [&](int64_t cell, int64_t oa, int64_t ob) {
             const double* G = og.data() + cell * M * P;
             if (na) {
               double* dA = ai->grad.data() + oa;
               const double* Bc = B + ob;
               for (int64_t i = 0; i < M; ++i) {
                 const double* grow = G + i * P;
                 double* darow = dA + i * K;
                 for (int64_t k = 0; k < K; ++k) {
                   const double* brow = Bc + k * P;
                   double acc = 0.0;
                   for (int64_t p = 0; p < P; ++p) acc += grow[p] * brow[p];
                   darow[k] += acc;
                 }
               }
             }
             if (nb) {
               const double* Ac = A + oa;
               double* dB = bi->grad.data() + ob;
               for (int64_t i = 0; i < M; ++i) {
                 const double* arow = Ac + i * K;
                 const double* grow = G + i * P;
                 for (int64_t k = 0; k < K; ++k) {
                   double av = arow[k];
                   double* dbrow = dB + k * P;
                   for (int64_t p = 0; p < P; ++p) dbrow[p] += av * grow[p];
                 }
               }
             }
           });
         });
  return Tensor::wrap(oi);
}

// --- shape ops -------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  auto ai = a.impl();
  if (shape_numel(shape) != static_cast<int64_t>(ai->data.size()))
    throw std::invalid_argument("reshape: cannot view " + shape_str(ai->shape) + " as " +
                                shape_str(shape));
  auto oi = make_impl(std::move(shape), ai->data);
  attach(oi, "reshape", {ai}, [ai](const std::vector<double>& og) {
    if (!ai->requires_grad) return;
    detail::accumulate_grad(*ai, og.data(), static_cast<int64_t>(og.size()));
  });
  return Tensor::wrap(oi);
}

Tensor permute(const Tensor& a, const std::vector<int>& axes) {
  auto ai = a.impl();
  int nd = static_cast<int>(ai->shape.size());
  if (static_cast<int>(axes.size()) != nd)
    throw std::invalid_argument("permute: got " + std::to_string(axes.size()) + " axes for ndim " +
                                std::to_string(nd));
  std::vector<bool> used(nd, false);
  Shape os(nd);
  auto ist = contig_strides(ai->shape);
  std::vector<int64_t> strides(nd);
  for (int i = 0; i < nd; ++i) {
    int ax = normalize_axis(axes[i], nd, "permute");
    if (used[ax]) throw std::invalid_argument("permute: duplicate axis " + std::to_string(ax));
    used[ax] = true;
    os[i] = ai->shape[ax];
    strides[i] = ist[ax];
  }
  std::vector<double> out(ai->data.size());
  const double* A = ai->data.data();
  iter1(os, strides, [&](int64_t i, int64_t off) { out[i] = A[off]; });
  auto oi = make_impl(std::move(os), std::move(out));
  const Shape& oshape = oi->shape;
  attach(oi, "permute", {ai}, [ai, oshape, strides](const std::vector<double>& og) {
    if (!ai->requires_grad) return;
    ensure_grad(*ai);
    iter1(oshape, strides, [&](int64_t i, int64_t off) { ai->grad[off] += og[i]; });
  });
  return Tensor::wrap(oi);
}

Tensor transpose_last2(const Tensor& a) {
  int nd = a.ndim();
  if (nd < 2) throw std::invalid_argument("transpose_last2: ndim must be >= 2");
  std::vector<int> axes(nd);
  for (int i = 0; i < nd; ++i) axes[i] = i;
  std::swap(axes[nd - 1], axes[nd - 2]);
  return permute(a, axes);
}

// --- softmax / layernorm / activations -------------------------------------

namespace {

Tensor softmax_last(const Tensor& a) {
  auto ai = a.impl();
  if (ai->shape.empty()) throw std::invalid_argument("softmax: scalar input");
  int64_t D = ai->shape.back();
  int64_t rows = static_cast<int64_t>(ai->data.size()) / D;
  for (double v : ai->data)
    if (!std::isfinite(v)) throw std::invalid_argument("softmax: non-finite input");
  std::vector<double> out(ai->data.size());
  const double* X = ai->data.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* x = X + r * D;
    double* y = out.data() + r * D;
    double mx = x[0];
    for (int64_t j = 1; j < D; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < D; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    double inv = 1.0 / sum;
    for (int64_t j = 0; j < D; ++j) y[j] *= inv;
  }
  auto oi = make_impl(ai->shape, std::move(out));
  TensorImpl* oraw = oi.get();  // alive while its node runs
  attach(oi, "softmax", {ai}, [ai, oraw, D, rows](const std::vector<double>& og) {
    if (!ai->requires_grad) return;
    ensure_grad(*ai);
    const double* Y = oraw->data.data();
    for (int64_t r = 0; r < rows; ++r) {
      const double* y = Y + r * D;
      const double* g = og.data() + r * D;
      double dot = 0.0;
      for (int64_t j = 0; j < D; ++j) dot += g[j] * y[j];
      double* dx = ai->grad.data() + r * D;
      for (int64_t j = 0; j < D; ++j) dx[j] += y[j] * (g[j] - dot);
    }
  });
  return Tensor::wrap(oi);
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
  int nd = a.ndim();
  int ax = normalize_axis(axis, nd, "softmax");
  if (ax == nd - 1) return softmax_last(a);
  std::vector<int> axes(nd);
  for (int i = 0; i < nd; ++i) axes[i] = i;
  std::swap(axes[ax], axes[nd - 1]);
  return permute(softmax_last(permute(a, axes)), axes);
}

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("layernorm: eps must be positive");
  auto xi = x.impl();
  if (xi->shape.empty()) throw std::invalid_argument("layernorm: scalar input");
  int64_t D = xi->shape.back();
  int64_t rows = static_cast<int64_t>(xi->data.size()) / D;
  bool affine = gain.defined();
  std::shared_ptr<TensorImpl> gi = affine ? gain.impl() : nullptr;
  std::shared_ptr<TensorImpl> bi = affine ? bias.impl() : nullptr;
  if (affine) {
    if (!bias.defined()) throw std::invalid_argument("layernorm: gain given without bias");
    if (static_cast<int64_t>(gi->data.size()) != D || static_cast<int64_t>(bi->data.size()) != D)
      throw std::invalid_argument("layernorm: affine parameters must have " + std::to_string(D) +
                                  " elements");
  }

  std::vector<double> out(xi->data.size());
  auto mu = std::make_shared<std::vector<double>>(rows);
  auto rstd = std::make_shared<std::vector<double>>(rows);
  const double* X = xi->data.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = X + r * D;
    double m = 0.0;
    for (int64_t j = 0; j < D; ++j) m += xr[j];
    m /= static_cast<double>(D);
    double v = 0.0;
    for (int64_t j = 0; j < D; ++j) {
      double d = xr[j] - m;
      v += d * d;
    }
    v /= static_cast<double>(D);
    double rs = 1.0 / std::sqrt(v + eps);
    (*mu)[r] = m;
    (*rstd)[r] = rs;
    double* y = out.data() + r * D;
    if (affine) {
      const double* g = gi->data.data();
      const double* b = bi->data.data();
      for (int64_t j = 0; j < D; ++j) y[j] = (xr[j] - m) * rs * g[j] + b[j];
    } else {
      for (int64_t j = 0; j < D; ++j) y[j] = (xr[j] - m) * rs;
    }
  }
  auto oi = make_impl(xi->shape, std::move(out));
  std::vector<std::shared_ptr<TensorImpl>> ins = {xi};
  if (affine) {
    ins.push_back(gi);
    ins.push_back(bi);
  }
  attach(oi, "layernorm", std::move(ins),
         [xi, gi, bi, mu, rstd, D, rows, affine](const std::vector<double>& og) {
           bool nx = xi->requires_grad;
           bool ng = affine && gi->requires_grad;
           bool nb = affine && bi->requires_grad;
           if (nx) ensure_grad(*xi);
           if (ng) ensure_grad(*gi);
           if (nb) ensure_grad(*bi);
           const double* X = xi->data.data();
           for (int64_t r = 0; r < rows; ++r) {
             const double* xr = X + r * D;
             const double* g = og.data() + r * D;
             double m = (*mu)[r], rs = (*rstd)[r];
             double m1 = 0.0, m2 = 0.0;
             for (int64_t j = 0; j < D; ++j) {
               double xh = (xr[j] - m) * rs;
               double dh = affine ? g[j] * gi->data[j] : g[j];
               m1 += dh;
               m2 += dh * xh;
               if (ng) gi->grad[j] += g[j] * xh;
               if (nb) bi->grad[j] += g[j];
             }
             m1 /= static_cast<double>(D);
             m2 /= static_cast<double>(D);
             if (nx) {
               double* dx = xi->grad.data() + r * D;
               for (int64_t j = 0; j < D; ++j) {
                 double xh = (xr[j] - m) * rs;
                 double dh = affine ? g[j] * gi->data[j] : g[j];
                 dx[j] += (dh - m1 - xh * m2) * rs;
               }
             }
           }
         });
  return Tensor::wrap(oi);
}

namespace {
constexpr double kGeluC = 0.7978845608028653558;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& x) {
  auto xi = x.impl();
  std::vector<double> out(xi->data.size());
  for (size_t i = 0; i < out.size(); ++i) {
    double v = xi->data[i];
    out[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  }
  auto oi = make_impl(xi->shape, std::move(out));
  attach(oi, "gelu", {xi}, [xi](const std::vector<double>& og) {
    if (!xi->requires_grad) return;
    ensure_grad(*xi);
    for (size_t i = 0; i < og.size(); ++i) {
      double v = xi->data[i];
      double u = kGeluC * (v + kGeluA * v * v * v);
      double t = std::tanh(u);
      double sech2 = 1.0 - t * t;
      double d = 0.5 * (1.0 + t) + 0.5 * v * sech2 * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      xi->grad[i] += og[i] * d;
    }
  });
  return Tensor::wrap(oi);
}

Tensor silu(const Tensor& x) {
  auto xi = x.impl();
  std::vector<double> out(xi->data.size());
  for (size_t i = 0; i < out.size(); ++i) {
    double v = xi->data[i];
    out[i] = v / (1.0 + std::exp(-v));
  }
  auto oi = make_impl(xi->shape, std::move(out));
  attach(oi, "silu", {xi}, [xi](const std::vector<double>& og) {
    if (!xi->requires_grad) return;
    ensure_grad(*xi);
    for (size_t i = 0; i < og.size(); ++i) {
      double v = xi->data[i];
      double s = 1.0 / (1.0 + std::exp(-v));
      xi->grad[i] += og[i] * s * (1.0 + v * (1.0 - s));
    }
  });
  return Tensor::wrap(oi);
}

// --- reductions / losses ---------------------------------------------------

Tensor sum_all(const Tensor& x) {
  auto xi = x.impl();
  double s = 0.0;
  for (double v : xi->data) s += v;
  auto oi = make_impl({}, {s});
  attach(oi, "sum_all", {xi}, [xi](const std::vector<double>& og) {
    if (!xi->requires_grad) return;
    ensure_grad(*xi);
    for (auto& g : xi->grad) g += og[0];
  });
  return Tensor::wrap(oi);
}

Tensor mean_all(const Tensor& x) {
  auto xi = x.impl();
  int64_t n = static_cast<int64_t>(xi->data.size());
  if (n == 0) throw std::invalid_argument("mean_all: empty tensor");
  double s = 0.0;
  for (double v : xi->data) s += v;
  auto oi = make_impl({}, {s / static_cast<double>(n)});
  attach(oi, "mean_all", {xi}, [xi, n](const std::vector<double>& og) {
    if (!xi->requires_grad) return;
    ensure_grad(*xi);
    double g = og[0] / static_cast<double>(n);
    for (auto& gv : xi->grad) gv += g;
  });
  return Tensor::wrap(oi);
}

Tensor mse_loss(const Tensor& a, const Tensor& b) {
  auto ai = a.impl();
  auto bi = b.impl();
  if (ai->shape != bi->shape)
    throw std::invalid_argument("mse_loss: shape mismatch, " + shape_str(ai->shape) + " vs " +
                                shape_str(bi->shape));
  int64_t n = static_cast<int64_t>(ai->data.size());
  if (n == 0) throw std::invalid_argument("mse_loss: empty tensors");
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double d = ai->data[i] - bi->data[i];
    s += d * d;
  }
  auto oi = make_impl({}, {s / static_cast<double>(n)});
  attach(oi, "mse_loss", {ai, bi}, [ai, bi, n](const std::vector<double>& og) {
    bool na = ai->requires_grad, nb = bi->requires_grad;
    if (na) ensure_grad(*ai);
    if (nb) ensure_grad(*bi);
    double c = 2.0 * og[0] / static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i) {
      double d = c * (ai->data[i] - bi->data[i]);
      if (na) ai->grad[i] += d;
      if (nb) bi->grad[i] -= d;
    }
  });
  return Tensor::wrap(oi);
}

// --- indexing / structural -------------------------------------------------

Tensor slice_last(const Tensor& x, int64_t start, int64_t len) {
  auto xi = x.impl();
  if (xi->shape.empty()) throw std::invalid_argument("slice_last: scalar input");
  int64_t D = xi->shape.back();
  if (start < 0 || len < 0 || start + len > D)
    throw std::invalid_argument("slice_last: range [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") out of extent " + std::to_string(D));
  int64_t rows = static_cast<int64_t>(xi->data.size()) / D;
  Shape os = xi->shape;
  os.back() = len;
  std::vector<double> out(rows * len);
  for (int64_t r = 0; r < rows; ++r)
    std::memcpy(out.data() + r * len, xi->data.data() + r * D + start, sizeof(double) * len);
  auto oi = make_impl(std::move(os), std::move(out));
  attach(oi, "slice_last", {xi}, [xi, start, len, D, rows](const std::vector<double>& og) {
    if (!xi->requires_grad) return;
    ensure_grad(*xi);
    for (int64_t r = 0; r < rows; ++r) {
      double* dst = xi->grad.data() + r * D + start;
      const double* src = og.data() + r * len;
      for (int64_t j = 0; j < len; ++j) dst[j] += src[j];
    }
  });
  return Tensor::wrap(oi);
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int64_t>& ids) {
  auto ti = table.impl();
  if (ti->shape.size() != 2)
    throw std::invalid_argument("embedding_lookup: table must be 2-d, got " + shape_str(ti->shape));
  int64_t V = ti->shape[0], D = ti->shape[1];
  for (int64_t id : ids)
    if (id < 0 || id >= V)
      throw std::invalid_argument("embedding_lookup: id " + std::to_string(id) +
                                  " out of range for table " + shape_str(ti->shape));
  int64_t n = static_cast<int64_t>(ids.size());
  std::vector<double> out(n * D);
  for (int64_t r = 0; r < n; ++r)
    std::memcpy(out.data() + r * D, ti->data.data() + ids[r] * D, sizeof(double) * D);
  auto oi = make_impl({n, D}, std::move(out));
  attach(oi, "embedding_lookup", {ti}, [ti, ids, D](const std::vector<double>& og) {
    if (!ti->requires_grad) return;
    ensure_grad(*ti);
    for (size_t r = 0; r < ids.size(); ++r) {
      double* dst = ti->grad.data() + ids[r] * D;
      const double* src = og.data() + r * D;
      for (int64_t j = 0; j < D; ++j) dst[j] += src[j];
    }
  });
  return Tensor::wrap(oi);
}

namespace {

// dst[c] (+)= src[c - shifts (cyclic)]; per-axis offset tables keep it simple.
void roll_kernel(const Shape& shape, const std::vector<int>& axes, const std::vector<int64_t>& shifts,
                 const double* src, double* dst, bool accumulate) {
  int nd = static_cast<int>(shape.size());
  auto st = contig_strides(shape);
  std::vector<std::vector<int64_t>> offmap(nd);
  for (int ax = 0; ax < nd; ++ax) {
    offmap[ax].resize(shape[ax]);
    for (int64_t c = 0; c < shape[ax]; ++c) offmap[ax][c] = c * st[ax];
  }
  for (size_t i = 0; i < axes.size(); ++i) {
    int ax = axes[i];
    int64_t e = shape[ax];
    int64_t s = ((shifts[i] % e) + e) % e;
    for (int64_t c = 0; c < e; ++c) offmap[ax][c] = ((c - s + e) % e) * st[ax];
  }
  std::vector<int64_t> coord(nd, 0);
  int64_t n = shape_numel(shape);
  int64_t srcoff = 0;
  for (int ax = 0; ax < nd; ++ax) srcoff += offmap[ax][0];
  for (int64_t i = 0;;) {
    if (accumulate)
      dst[srcoff] += src[i];
    else
      dst[i] = src[srcoff];
    if (++i == n) break;
    int ax = nd - 1;
    for (;;) {
      srcoff -= offmap[ax][coord[ax]];
      if (++coord[ax] < shape[ax]) {
        srcoff += offmap[ax][coord[ax]];
        break;
      }
      coord[ax] = 0;
      srcoff += offmap[ax][0];
      --ax;
    }
  }
}

}  // namespace

Tensor roll_axes(const Tensor& x, const std::vector<int>& axes, const std::vector<int64_t>& shifts) {
  auto xi = x.impl();
  if (axes.size() != shifts.size())
    throw std::invalid_argument("roll_axes: axes and shifts must pair up");
  int nd = static_cast<int>(xi->shape.size());
  std::vector<int> ax(axes.size());
  std::vector<bool> used(nd, false);
  for (size_t i = 0; i < axes.size(); ++i) {
    ax[i] = normalize_axis(axes[i], nd, "roll_axes");
    if (used[ax[i]]) throw std::invalid_argument("roll_axes: duplicate axis " + std::to_string(ax[i]));
    used[ax[i]] = true;
  }
  std::vector<double> out(xi->data.size());
  roll_kernel(xi->shape, ax, shifts, xi->data.data(), out.data(), false);
  auto oi = make_impl(xi->shape, std::move(out));
  attach(oi, "roll_axes", {xi}, [xi, ax, shifts](const std::vector<double>& og) {
    if (!xi->requires_grad) return;
    ensure_grad(*xi);
    // Forward reads src[c - s]; the adjoint scatters back at the same mapping.
    roll_kernel(xi->shape, ax, shifts, og.data(), xi->grad.data(), true);
  });
  return Tensor::wrap(oi);
}

Tensor interp_linear_axis(const Tensor& x, int axis, int64_t out_len) {
  auto xi = x.impl();
  int nd = static_cast<int>(xi->shape.size());
  int ax = normalize_axis(axis, nd, "interp_linear_axis");
  if (out_len < 1) throw std::invalid_argument("interp_linear_axis: output length must be >= 1");
  int64_t n = xi->shape[ax];
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= xi->shape[i];
  for (int i = ax + 1; i < nd; ++i) inner *= xi->shape[i];

  // Endpoint-aligned sampling; w==0 / w==1 copy exactly, and the lerp form
  // a + w*(b-a) preserves constant fields exactly.
  struct Tap {
    int64_t i0;
    double w;
  };
  std::vector<Tap> taps(out_len);
  for (int64_t i = 0; i < out_len; ++i) {
    if (n == 1 || out_len == 1) {
      taps[i] = {0, 0.0};
      continue;
    }
    double t = static_cast<double>(i) * static_cast<double>(n - 1) / static_cast<double>(out_len - 1);
    int64_t i0 = std::min(static_cast<int64_t>(t), n - 2);
    taps[i] = {i0, t - static_cast<double>(i0)};
  }

  Shape os = xi->shape;
  os[ax] = out_len;
  std::vector<double> out(outer * out_len * inner);
  const double* X = xi->data.data();
  for (int64_t o = 0; o < outer; ++o) {
    const double* xo = X + o * n * inner;
    double* yo = out.data() + o * out_len * inner;
    for (int64_t i = 0; i < out_len; ++i) {
      const Tap& t = taps[i];
      const double* a = xo + t.i0 * inner;
      double* y = yo + i * inner;
      if (t.w == 0.0) {
        std::memcpy(y, a, sizeof(double) * inner);
      } else if (t.w == 1.0) {
        std::memcpy(y, a + inner, sizeof(double) * inner);
      } else {
        const double* b = a + inner;
        for (int64_t j = 0; j < inner; ++j) y[j] = a[j] + t.w * (b[j] - a[j]);
      }
    }
  }
  auto oi = make_impl(std::move(os), std::move(out));
  attach(oi, "interp_linear_axis", {xi},
         [xi, taps, outer, inner, n, out_len](const std::vector<double>& og) {
           if (!xi->requires_grad) return;
           ensure_grad(*xi);
           for (int64_t o = 0; o < outer; ++o) {
             double* dxo = xi->grad.data() + o * n * inner;
             const double* go = og.data() + o * out_len * inner;
             for (int64_t i = 0; i < out_len; ++i) {
               const Tap& t = taps[i];
               const double* g = go + i * inner;
               double* da = dxo + t.i0 * inner;
               if (t.w == 0.0) {
                 for (int64_t j = 0; j < inner; ++j) da[j] += g[j];
               } else {
                 double* db = da + inner;
                 for (int64_t j = 0; j < inner; ++j) {
                   da[j] += (1.0 - t.w) * g[j];
                   db[j] += t.w * g[j];
                 }
               }
             }
           }
         });
  return Tensor::wrap(oi);
}

Tensor mean_axis(const Tensor& x, int axis) {
  auto xi = x.impl();
  int nd = static_cast<int>(xi->shape.size());
  int ax = normalize_axis(axis, nd, "mean_axis");
  int64_t e = xi->shape[ax];
  if (e == 0) throw std::invalid_argument("mean_axis: empty axis");
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= xi->shape[i];
  for (int i = ax + 1; i < nd; ++i) inner *= xi->shape[i];
  Shape os;
  for (int i = 0; i < nd; ++i)
    if (i != ax) os.push_back(xi->shape[i]);
  std::vector<double> out(outer * inner, 0.0);
  const double* X = xi->data.data();
  double invE = 1.0 / static_cast<double>(e);
  for (int64_t o = 0; o < outer; ++o) {
    const double* xo = X + o * e * inner;
    double* yo = out.data() + o * inner;
    for (int64_t c = 0; c < e; ++c) {
      const double* row = xo + c * inner;
      for (int64_t j = 0; j < inner; ++j) yo[j] += row[j];
    }
    for (int64_t j = 0; j < inner; ++j) yo[j] *= invE;
  }
  auto oi = make_impl(std::move(os), std::move(out));
  attach(oi, "mean_axis", {xi}, [xi, outer, inner, e, invE](const std::vector<double>& og) {
    if (!xi->requires_grad) return;
    ensure_grad(*xi);
    for (int64_t o = 0; o < outer; ++o) {
      const double* g = og.data() + o * inner;
      double* dxo = xi->grad.data() + o * e * inner;
      for (int64_t c = 0; c < e; ++c) {
        double* row = dxo + c * inner;
        for (int64_t j = 0; j < inner; ++j) row[j] += g[j] * invE;
      }
    }
  });
  return Tensor::wrap(oi);
}

}  // namespace ptdx
