#include "ptdx/nn.hpp"

#include <cmath>

namespace ptdx {

Tensor ParamRegistry::create(const std::string& name, Shape shape, Init init, Rng& rng) {
  if (by_name_.count(name))
    throw std::invalid_argument("ParamRegistry: duplicate parameter name '" + name + "'");
  int64_t n = shape_numel(shape);
  std::vector<double> data(n, 0.0);
  switch (init) {
    case Init::TruncNormal02:
      for (auto& v : data) v = rng.trunc_normal(0.02);
      break;
    case Init::Zeros:
      break;
    case Init::Identity: {
      if (shape.size() != 2)
        throw std::invalid_argument("ParamRegistry: identity init needs a 2-d shape, got " +
                                    shape_str(shape));
      int64_t m = std::min(shape[0], shape[1]);
      for (int64_t i = 0; i < m; ++i) data[i * shape[1] + i] = 1.0;
      break;
    }
  }
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->tensor = Tensor::from_data(std::move(shape), std::move(data)).set_requires_grad(true);
  p->init = init;
  Parameter* raw = p.get();
  params_.push_back(std::move(p));
  by_name_[name] = raw;
  return raw->tensor;
}

Parameter* ParamRegistry::find(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParamRegistry::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

int64_t ParamRegistry::total_elements() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p->tensor.numel();
  return n;
}

void ParamRegistry::zero_grad() {
  for (const auto& p : params_) p->tensor.zero_grad();
}

Linear::Linear(ParamRegistry& reg, const std::string& prefix, int64_t in_features,
               int64_t out_features, Rng& rng, Init weight_init)
    : in(in_features), out(out_features) {
  w = reg.create(prefix + ".weight", {in_features, out_features}, weight_init, rng);
  b = reg.create(prefix + ".bias", {out_features}, Init::Zeros, rng);
}

Tensor Linear::forward(const Tensor& x) const {
  if (x.ndim() < 2 || x.size(-1) != in)
    throw std::invalid_argument("Linear: expected input [..., " + std::to_string(in) + "], got " +
                                shape_str(x.shape()));
  return add(matmul(x, w), b);
}

Mlp::Mlp(ParamRegistry& reg, const std::string& prefix, int64_t dim, int64_t hidden, Rng& rng)
    : fc1(reg, prefix + ".fc1", dim, hidden, rng), fc2(reg, prefix + ".fc2", hidden, dim, rng) {}

Tensor Mlp::forward(const Tensor& x) const { return fc2.forward(gelu(fc1.forward(x))); }

AdamW::AdamW(double lr, double beta1, double beta2, double eps, double weight_decay)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), wd_(weight_decay) {}

void AdamW::step(ParamRegistry& reg) {
  const auto& ps = reg.params();
  m_.resize(ps.size());
  v_.resize(ps.size());
  ++t_;
  double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (size_t i = 0; i < ps.size(); ++i) {
    Tensor& p = ps[i]->tensor;
    const auto& g = p.grad();
    auto& data = p.mutable_data();
    if (m_[i].size() != data.size()) m_[i].assign(data.size(), 0.0);
    if (v_[i].size() != data.size()) v_[i].assign(data.size(), 0.0);
    for (size_t k = 0; k < data.size(); ++k) {
      double gk = g[k];
      m_[i][k] = b1_ * m_[i][k] + (1.0 - b1_) * gk;
      v_[i][k] = b2_ * v_[i][k] + (1.0 - b2_) * gk * gk;
      double mh = m_[i][k] / c1;
      double vh = v_[i][k] / c2;
      data[k] -= lr_ * (mh / (std::sqrt(vh) + eps_) + wd_ * data[k]);
    }
  }
}

void AdamW::restore(std::vector<std::vector<double>> m, std::vector<std::vector<double>> v,
                    int64_t t) {
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

}  // namespace ptdx
