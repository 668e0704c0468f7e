#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "ptdx/common.hpp"
#include "ptdx/tensor.hpp"

namespace ptdx {

enum class Init { TruncNormal02, Zeros, Identity };

struct Parameter {
  std::string name;
  Tensor tensor;
  Init init = Init::Zeros;
};

// Owns every trainable tensor of a model. Names are unique and stable in
// construction order, which is what the checkpoint and optimizer key on.
class ParamRegistry {
 public:
  Tensor create(const std::string& name, Shape shape, Init init, Rng& rng);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  const std::vector<std::unique_ptr<Parameter>>& params() const { return params_; }
  int64_t total_elements() const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, Parameter*> by_name_;
};

// y = x·W + b with W: [in, out]; x: [..., in].
struct Linear {
  Tensor w, b;
  int64_t in = 0, out = 0;

  Linear() = default;
  Linear(ParamRegistry& reg, const std::string& prefix, int64_t in_features, int64_t out_features,
         Rng& rng, Init weight_init = Init::TruncNormal02);
  Tensor forward(const Tensor& x) const;
};

// Linear -> GELU -> Linear.
struct Mlp {
  Linear fc1, fc2;

  Mlp() = default;
  Mlp(ParamRegistry& reg, const std::string& prefix, int64_t dim, int64_t hidden, Rng& rng);
  Tensor forward(const Tensor& x) const;
};

// Adam with decoupled weight decay; weight_decay 0 gives plain Adam.
// State is keyed by registry order so checkpoints restore exactly.
class AdamW {
 public:
  explicit AdamW(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
                 double weight_decay = 0.0);

  void step(ParamRegistry& reg);
  int64_t step_count() const { return t_; }
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

  const std::vector<std::vector<double>>& m_state() const { return m_; }
  const std::vector<std::vector<double>>& v_state() const { return v_; }
  void restore(std::vector<std::vector<double>> m, std::vector<std::vector<double>> v, int64_t t);

 private:
  double lr_, b1_, b2_, eps_, wd_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace ptdx
