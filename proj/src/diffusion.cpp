#include "ptdx/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace ptdx {

namespace {

constexpr double kPi = 3.14159265358979323846;

// [B] schedule values broadcast over the trailing axes of a batch tensor.
Tensor batch_coeff(const std::vector<double>& values, int ndim) {
  Shape shape(size_t(ndim), 1);
  shape[0] = int64_t(values.size());
  Tensor t = Tensor::zeros(shape);
  t.mutable_data() = values;
  return t;
}

std::vector<double> gather(const NoiseSchedule& sched, const std::vector<int64_t>& ts,
                           double (NoiseSchedule::*fn)(int64_t) const) {
  std::vector<double> out(ts.size());
  for (size_t i = 0; i < ts.size(); ++i) out[i] = (sched.*fn)(ts[i]);
  return out;
}

void check_batch(const Tensor& x, const std::vector<int64_t>& ts) {
  if (x.ndim() < 1 || x.size(0) != int64_t(ts.size()))
    throw std::invalid_argument("expected one timestep per batch element, got " +
                                std::to_string(ts.size()) + " for batch " +
                                shape_str(x.shape()));
}

}  // namespace

NoiseSchedule::NoiseSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
  if (alpha_bar_.empty()) throw std::invalid_argument("schedule needs at least one step");
  double prev = 1.0;
  for (size_t t = 0; t < alpha_bar_.size(); ++t) {
    double a = alpha_bar_[t];
    if (!(a > 0.0) || !(a < 1.0))
      throw std::invalid_argument("alpha_bar[" + std::to_string(t) +
                                  "] = " + std::to_string(a) + " outside (0,1)");
    if (!(a < prev))
      throw std::invalid_argument("alpha_bar must be strictly decreasing at t = " +
                                  std::to_string(t));
    prev = a;
  }
}

NoiseSchedule NoiseSchedule::cosine(int64_t steps, double s) {
  if (steps < 1) throw std::invalid_argument("schedule needs at least one step");
  if (s <= 0.0) throw std::invalid_argument("cosine offset must be positive");
  // Sampling the squared cosine at half-integer points keeps both endpoints
  // strictly inside (0,1): integer sampling would land alpha_bar exactly on
  // zero at the last step.
  auto f = [&](double u) {
    double c = std::cos((u + s) / (1.0 + s) * (kPi / 2.0));
    return c * c;
  };
  const double f0 = f(0.0);
  std::vector<double> ab(static_cast<size_t>(steps));
  for (int64_t t = 0; t < steps; ++t)
    ab[size_t(t)] = f((double(t) + 0.5) / double(steps)) / f0;
  return NoiseSchedule(std::move(ab));
}

double NoiseSchedule::alpha_bar(int64_t t) const {
  if (t < 0 || t >= steps())
    throw std::invalid_argument("timestep " + std::to_string(t) + " outside [0," +
                                std::to_string(steps()) + ")");
  return alpha_bar_[size_t(t)];
}

double NoiseSchedule::alpha(int64_t t) const { return std::sqrt(alpha_bar(t)); }

double NoiseSchedule::sigma(int64_t t) const { return std::sqrt(1.0 - alpha_bar(t)); }

Tensor q_sample(const Tensor& x0, const Tensor& noise, const NoiseSchedule& sched,
                const std::vector<int64_t>& ts) {
  check_batch(x0, ts);
  Tensor a = batch_coeff(gather(sched, ts, &NoiseSchedule::alpha), x0.ndim());
  Tensor s = batch_coeff(gather(sched, ts, &NoiseSchedule::sigma), x0.ndim());
  return add(mul(a, x0), mul(s, noise));
}

Tensor v_target(const Tensor& x0, const Tensor& noise, const NoiseSchedule& sched,
                const std::vector<int64_t>& ts) {
  check_batch(x0, ts);
  Tensor a = batch_coeff(gather(sched, ts, &NoiseSchedule::alpha), x0.ndim());
  Tensor s = batch_coeff(gather(sched, ts, &NoiseSchedule::sigma), x0.ndim());
  return sub(mul(a, noise), mul(s, x0));
}

Tensor x0_from_v(const Tensor& xt, const Tensor& v, const NoiseSchedule& sched,
                 const std::vector<int64_t>& ts) {
  check_batch(xt, ts);
  Tensor a = batch_coeff(gather(sched, ts, &NoiseSchedule::alpha), xt.ndim());
  Tensor s = batch_coeff(gather(sched, ts, &NoiseSchedule::sigma), xt.ndim());
  return sub(mul(a, xt), mul(s, v));
}

Tensor noise_from_v(const Tensor& xt, const Tensor& v, const NoiseSchedule& sched,
                    const std::vector<int64_t>& ts) {
  check_batch(xt, ts);
  Tensor a = batch_coeff(gather(sched, ts, &NoiseSchedule::alpha), xt.ndim());
  Tensor s = batch_coeff(gather(sched, ts, &NoiseSchedule::sigma), xt.ndim());
  return add(mul(s, xt), mul(a, v));
}

Ema::Ema(const ParamRegistry& reg, double decay) : decay_(decay) {
  if (!(decay >= 0.0) || !(decay <= 1.0))
    throw std::invalid_argument("EMA decay must lie in [0,1]");
  for (const auto& p : reg.params()) shadow_.push_back(p->tensor.data());
}

void Ema::update(const ParamRegistry& reg) {
  const auto& ps = reg.params();
  if (ps.size() != shadow_.size())
    throw std::invalid_argument("EMA shadow tracks a different parameter set");
  for (size_t i = 0; i < ps.size(); ++i) {
    const auto& src = ps[i]->tensor.data();
    auto& dst = shadow_[i];
    if (src.size() != dst.size())
      throw std::invalid_argument("EMA shadow size mismatch for " + ps[i]->name);
    for (size_t k = 0; k < src.size(); ++k)
      dst[k] = decay_ * dst[k] + (1.0 - decay_) * src[k];
  }
}

void Ema::copy_to(ParamRegistry& reg) const {
  const auto& ps = reg.params();
  if (ps.size() != shadow_.size())
    throw std::invalid_argument("EMA shadow tracks a different parameter set");
  for (size_t i = 0; i < ps.size(); ++i) {
    if (ps[i]->tensor.numel() != int64_t(shadow_[i].size()))
      throw std::invalid_argument("EMA shadow size mismatch for " + ps[i]->name);
    ps[i]->tensor.mutable_data() = shadow_[i];
  }
}

void Ema::restore(std::vector<std::vector<double>> shadow) {
  if (shadow.size() != shadow_.size())
    throw std::invalid_argument("restored EMA shadow has wrong parameter count");
  for (size_t i = 0; i < shadow.size(); ++i)
    if (shadow[i].size() != shadow_[i].size())
      throw std::invalid_argument("restored EMA shadow has wrong sizes");
  shadow_ = std::move(shadow);
}

Conditioning null_conditioning(const ModelConfig& cfg, int64_t batch) {
  if (cfg.conditioning == ConditioningMode::ClassLabel)
    return Conditioning::for_class(std::vector<int64_t>(size_t(batch), cfg.num_classes));
  return Conditioning::for_text(std::vector<std::vector<int64_t>>(
      size_t(batch), std::vector<int64_t>(size_t(cfg.text_token_len), 0)));
}

double training_step(PtDit& model, AdamW& opt, Ema& ema, const NoiseSchedule& sched,
                     const Tensor& x0, const Conditioning& cond, uint64_t master_seed,
                     int64_t step_index, const TrainStepConfig& tcfg) {
  const ModelConfig& cfg = model.config();
  const int64_t B = x0.size(0);
  const bool class_mode = cfg.conditioning == ConditioningMode::ClassLabel;
  if (class_mode && int64_t(cond.labels.size()) != B)
    throw std::invalid_argument("training batch needs one label per element");
  if (!class_mode && int64_t(cond.text_ids.size()) != B)
    throw std::invalid_argument("training batch needs one id row per element");

  // One generator per step, drawn in a fixed order (timesteps, noise,
  // condition dropout) so that resuming at step_index replays this step
  // exactly.
  Rng rng(derive_seed(master_seed, uint64_t(step_index)));
  std::vector<int64_t> ts(static_cast<size_t>(B));
  for (auto& t : ts) t = rng.uniform_int(sched.steps());

  Tensor noise = Tensor::zeros(x0.shape());
  for (auto& v : noise.mutable_data()) v = rng.normal();

  Conditioning dropped = cond;
  for (int64_t b = 0; b < B; ++b) {
    if (rng.uniform() < tcfg.cond_dropout) {
      if (class_mode)
        dropped.labels[size_t(b)] = cfg.num_classes;
      else
        dropped.text_ids[size_t(b)].assign(size_t(cfg.text_token_len), 0);
    }
  }

  Tensor xt, vt;
  {
    NoGradGuard ng;
    xt = q_sample(x0, noise, sched, ts);
    vt = v_target(x0, noise, sched, ts);
  }

  model.params().zero_grad();
  Tensor out = model.forward(xt, ts, dropped);
  Tensor loss = mse_loss(out, vt);
  const double value = loss.item();
  if (!std::isfinite(value))
    throw std::runtime_error("non-finite loss " + std::to_string(value) + " at step " +
                             std::to_string(step_index) + "; aborting before the update");
  loss.backward();
  opt.step(model.params());
  ema.update(model.params());
  return value;
}

std::vector<int64_t> sampler_timesteps(int64_t T, int64_t steps) {
  if (steps < 1 || steps > T)
    throw std::invalid_argument("sampler steps must lie in [1," + std::to_string(T) + "], got " +
                                std::to_string(steps));
  std::vector<int64_t> ts(static_cast<size_t>(steps));
  for (int64_t i = 0; i < steps; ++i) ts[size_t(steps - 1 - i)] = (i + 1) * T / steps - 1;
  return ts;
}

Tensor ddim_sample(const VModel& model, const NoiseSchedule& sched, const Shape& shape,
                   const SamplerConfig& scfg, uint64_t seed) {
  if (scfg.guidance_scale < 0.0)
    throw std::invalid_argument("guidance scale must be nonnegative");
  if (scfg.conditional_only && scfg.guidance_scale != 1.0)
    throw std::invalid_argument(
        "conditional-only sampling has no unconditional branch; guidance must be 1");
  if (shape.empty() || shape[0] < 1) throw std::invalid_argument("empty sample shape");

  NoGradGuard ng;
  Rng rng(derive_seed(seed, 0));
  Tensor x = Tensor::zeros(shape);
  for (auto& v : x.mutable_data()) v = rng.normal();

  const int64_t B = shape[0];
  const std::vector<int64_t> ts_desc = sampler_timesteps(sched.steps(), scfg.steps);
  for (size_t i = 0; i < ts_desc.size(); ++i) {
    const int64_t t = ts_desc[i];
    const std::vector<int64_t> tb(size_t(B), t);
    Tensor v = model(x, tb, true);
    if (!scfg.conditional_only && scfg.guidance_scale != 1.0) {
      Tensor vu = model(x, tb, false);
      v = add(vu, scale(sub(v, vu), scfg.guidance_scale));
    }
    Tensor x0 = x0_from_v(x, v, sched, tb);
    if (i + 1 == ts_desc.size()) {
      x = x0;
    } else {
      Tensor eps = noise_from_v(x, v, sched, tb);
      const std::vector<int64_t> tn(size_t(B), ts_desc[i + 1]);
      x = q_sample(x0, eps, sched, tn);
    }
  }
  return x;
}

Tensor cfg_sample(const PtDit& model, const NoiseSchedule& sched, const Shape& latent_shape,
                  const Conditioning& cond, const SamplerConfig& scfg, uint64_t seed) {
  if (latent_shape.size() != 5)
    throw std::invalid_argument("latent shape must be [batch, channels, frames, height, width]");
  const int64_t B = latent_shape[0];
  const Conditioning uncond = null_conditioning(model.config(), B);
  VModel vm = [&](const Tensor& xt, const std::vector<int64_t>& ts, bool conditional) {
    return model.forward(xt, ts, conditional ? cond : uncond);
  };
  return ddim_sample(vm, sched, latent_shape, scfg, seed);
}

}  // namespace ptdx
