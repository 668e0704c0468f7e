#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ptdx/model.hpp"
#include "ptdx/nn.hpp"
#include "ptdx/tensor.hpp"

namespace ptdx {

// Squared-cosine noise schedule in the v-prediction convention. alpha_bar is
// strictly decreasing and stays inside (0, 1) at both ends; alpha_t^2 +
// sigma_t^2 == 1 by construction.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(std::vector<double> alpha_bar);
  static NoiseSchedule cosine(int64_t steps = 1000, double s = 0.008);

  int64_t steps() const { return int64_t(alpha_bar_.size()); }
  double alpha_bar(int64_t t) const;
  double alpha(int64_t t) const;  // sqrt(alpha_bar)
  double sigma(int64_t t) const;  // sqrt(1 - alpha_bar)

 private:
  std::vector<double> alpha_bar_;
};

// x_t = alpha_t * x0 + sigma_t * noise, with one timestep per batch element.
Tensor q_sample(const Tensor& x0, const Tensor& noise, const NoiseSchedule& sched,
                const std::vector<int64_t>& ts);

// v = alpha_t * noise - sigma_t * x0.
Tensor v_target(const Tensor& x0, const Tensor& noise, const NoiseSchedule& sched,
                const std::vector<int64_t>& ts);

// Inverses of the v parameterization.
Tensor x0_from_v(const Tensor& xt, const Tensor& v, const NoiseSchedule& sched,
                 const std::vector<int64_t>& ts);
Tensor noise_from_v(const Tensor& xt, const Tensor& v, const NoiseSchedule& sched,
                    const std::vector<int64_t>& ts);

// Exponential moving average of every registered parameter, indexed in
// registry order. Freshly constructed shadows equal the current parameters.
class Ema {
 public:
  Ema(const ParamRegistry& reg, double decay);

  void update(const ParamRegistry& reg);
  void copy_to(ParamRegistry& reg) const;
  double decay() const { return decay_; }
  const std::vector<std::vector<double>>& shadow() const { return shadow_; }
  void restore(std::vector<std::vector<double>> shadow);

 private:
  double decay_;
  std::vector<std::vector<double>> shadow_;
};

// Replaces conditioning with the learned null condition: the spare class
// index in class mode, all-padding token rows in text mode.
Conditioning null_conditioning(const ModelConfig& cfg, int64_t batch);

struct TrainStepConfig {
  double cond_dropout = 0.1;
};

// One optimization step: draw per-element timesteps and noise from
// derive_seed(master_seed, step_index), apply condition dropout, minimize
// MSE against the v target, then update the EMA shadow. Returns the loss.
// Throws on a non-finite loss. Reproducible given (master_seed, step_index).
double training_step(PtDit& model, AdamW& opt, Ema& ema, const NoiseSchedule& sched,
                     const Tensor& x0, const Conditioning& cond, uint64_t master_seed,
                     int64_t step_index, const TrainStepConfig& tcfg = {});

struct SamplerConfig {
  int64_t steps = 50;
  double guidance_scale = 6.0;
  // Evaluate only the conditional branch (guidance must be 1).
  bool conditional_only = false;
};

// Velocity predictor: (x_t, per-element timesteps, conditional?) -> v.
using VModel = std::function<Tensor(const Tensor& xt, const std::vector<int64_t>& ts,
                                    bool conditional)>;

// Deterministic DDIM reverse process in the v parameterization over `steps`
// uniformly spaced timesteps; the last step returns the denoised estimate.
// Guided velocity: v_uncond + s * (v_cond - v_uncond). Pure in `seed`.
Tensor ddim_sample(const VModel& model, const NoiseSchedule& sched, const Shape& shape,
                   const SamplerConfig& scfg, uint64_t seed);

// The uniformly spaced descending timestep sequence used by ddim_sample.
std::vector<int64_t> sampler_timesteps(int64_t T, int64_t steps);

// Samples from a trained model with classifier-free guidance; the
// unconditional branch uses null_conditioning.
Tensor cfg_sample(const PtDit& model, const NoiseSchedule& sched, const Shape& latent_shape,
                  const Conditioning& cond, const SamplerConfig& scfg, uint64_t seed);

}  // namespace ptdx
