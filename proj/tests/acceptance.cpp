// Acceptance gate. Each criterion prints exactly one PASS/FAIL line with its
// pinned tolerance and wall time; `--criterion N` runs one of them, no
// arguments runs all ten. Exit code 0 iff every requested criterion passed.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ptdx/analysis.hpp"
#include "ptdx/checkpoint.hpp"
#include "ptdx/commands.hpp"
#include "ptdx/dataset.hpp"
#include "ptdx/diffusion.hpp"
#include "ptdx/model.hpp"
#include "ptdx/runconfig.hpp"

#include "attn_oracle.hpp"

using namespace ptdx;

namespace {

struct Outcome {
  bool pass = false;
  std::string note;
};

Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::zeros(shape);
  for (auto& v : t.mutable_data()) v = rng.normal() * scale;
  return t;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// Central-difference check over every element of every leaf; returns the
// worst relative error under the max(1, |a|+|n|) normalizer.
double worst_grad_error(const std::function<Tensor()>& loss_fn, std::vector<Tensor> leaves,
                        double h = 1e-5) {
  for (auto& leaf : leaves) leaf.set_requires_grad(true);
  for (auto& leaf : leaves) leaf.zero_grad();
  loss_fn().backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (auto& leaf : leaves) analytic.push_back(leaf.grad());

  double worst = 0.0;
  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& data = leaves[li].mutable_data();
    for (size_t k = 0; k < data.size(); ++k) {
      const double saved = data[k];
      data[k] = saved + h;
      const double fp = loss_fn().item();
      data[k] = saved - h;
      const double fm = loss_fn().item();
      data[k] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[li][k];
      worst = std::max(worst,
                       std::fabs(a - numeric) / std::max(1.0, std::fabs(a) + std::fabs(numeric)));
    }
  }
  return worst;
}

// d(out[flat_index]) / d(grid) via one backward pass.
std::vector<double> jacobian_row(const std::function<Tensor()>& fwd, Tensor grid,
                                 int64_t flat_index) {
  grid.set_requires_grad(true);
  grid.zero_grad();
  Tensor out = fwd();
  Tensor mask = Tensor::zeros(out.shape());
  mask.mutable_data()[size_t(flat_index)] = 1.0;
  sum_all(mul(out, mask)).backward();
  return grid.grad();
}

void set_identity(ParamRegistry& reg, const std::string& name, int64_t d) {
  auto& w = reg.find(name)->tensor.mutable_data();
  for (int64_t i = 0; i < d; ++i) w[size_t(i * d + i)] = 1.0;
}

ModelConfig micro_model() {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.hidden_dim = 16;
  cfg.heads = 4;
  cfg.in_channels = 1;
  cfg.ratio = {1, 2, 2};
  cfg.conditioning = ConditioningMode::ClassLabel;
  cfg.num_classes = 4;
  return cfg;
}

// ---------------------------------------------------------------------------

Outcome criterion_complexity_ratios() {
  AnalyzeArgs args;
  args.resolutions = {256, 512, 1024, 2048};
  std::ostringstream os;
  const int rc = cmd_analyze(args, os);

  const double r256 = ptdit_attention_flops(256, 288, {1, 2, 2}).ratio_vs_global;
  const double r1024 = ptdit_attention_flops(1024, 288, {1, 4, 4}).ratio_vs_global;
  const double r4096 = ptdit_attention_flops(4096, 288, {1, 8, 8}).ratio_vs_global;
  const double r16384 = ptdit_attention_flops(16384, 288, {1, 16, 16}).ratio_vs_global;

  const bool near = std::fabs(r256 - 0.343) <= 1e-3 && std::fabs(r1024 - 0.097) <= 1e-3 &&
                    std::fabs(r4096 - 0.047) <= 1e-3;
  const bool largest = std::fabs(r16384 - 0.035) <= 1e-3;
  const bool flagged = contains(os.str(), "3.517%") && contains(os.str(), "2.3%");

  Outcome out;
  out.pass = rc == kExitOk && near && largest && flagged;
  out.note = "ratio_vs_global " + fmt(100 * r256, "%.3f") + "/" + fmt(100 * r1024, "%.3f") + "/" +
             fmt(100 * r4096, "%.3f") + "% within 0.1 pt of 34.3/9.7/4.7; 16384 tokens reported " +
             fmt(100 * r16384, "%.3f") + "% with the 2.3% figure flagged as unreconciled";
  return out;
}

Outcome criterion_instrumented_flops() {
  ModelConfig cfg = ModelConfig::preset("tiny");
  cfg.ratio = {1, 2, 2};
  const int64_t n = 16, d = cfg.hidden_dim;  // 8x8 image, patch 2

  NoGradGuard ng;
  Rng rng(4);
  const Tensor x = random_tensor({1, cfg.in_channels, 1, 8, 8}, rng, 0.5);

  FlopCounter proxy_counter;
  {
    PtDit model(cfg, 1);
    FlopTallyGuard tally(&proxy_counter);
    model.forward(x, {3}, Conditioning::for_class({1}));
  }
  const FlopsReport measured =
      measured_attention_flops(proxy_counter, n, d, cfg.ratio, 1, cfg.layers);
  const FlopsReport closed = ptdit_attention_flops(n, d, cfg.ratio);

  ModelConfig ref = cfg;
  ref.global_attention_reference = true;
  FlopCounter ref_counter;
  {
    PtDit model(ref, 1);
    FlopTallyGuard tally(&ref_counter);
    model.forward(x, {3}, Conditioning::for_class({1}));
  }
  const FlopsReport ref_measured =
      measured_attention_flops(ref_counter, n, d, cfg.ratio, 1, cfg.layers);

  const bool proxy_exact =
      measured.giim_sa == closed.giim_sa && measured.giim_inject == closed.giim_inject &&
      measured.tcm_wsa == closed.tcm_wsa && measured.tcm_swsa == closed.tcm_swsa;
  const bool dense_exact = ref_measured.global_sa == attention_flops_global(n, d);

  Outcome out;
  out.pass = proxy_exact && dense_exact;
  out.note = "instrumented attention products equal the closed forms exactly (tolerance 0) on "
             "the tiny preset, 16 tokens, ratio (1,2,2), proxy and dense paths";
  return out;
}

Outcome criterion_identity_at_init() {
  NoGradGuard ng;
  Rng drng(34);
  const Tensor grid = random_tensor({2, 1, 4, 4, 6}, drng);
  double worst_module = 0.0;
  for (auto proxy : {ProxyStrategy::Average, ProxyStrategy::TopLeft, ProxyStrategy::Random}) {
    for (auto inject : {InjectionStrategy::CrossAttention, InjectionStrategy::Interpolate,
                        InjectionStrategy::LinearMap}) {
      Rng rng(35);
      ParamRegistry reg;
      Giim giim(reg, "g", 6, 2, CompressionRatio{1, 2, 2}, proxy, inject, rng, 9);
      worst_module = std::max(worst_module, max_abs_diff(giim.forward(grid).data(), grid.data()));
    }
  }

  // Two fresh models differing only in depth share every pre-block parameter
  // draw; zero-init tensors consume none. With the same nonzero final
  // projection patched in, equal outputs mean the extra block left the token
  // stream untouched.
  ModelConfig one = micro_model();
  one.layers = 1;
  ModelConfig two = micro_model();
  PtDit a(one, 11), b(two, 11);
  {
    Rng prng(77);
    auto& wa = a.params().find("final.proj.weight")->tensor.mutable_data();
    auto& wb = b.params().find("final.proj.weight")->tensor.mutable_data();
    for (size_t i = 0; i < wa.size(); ++i) wa[i] = wb[i] = prng.normal() * 0.1;
  }
  Rng xrng(78);
  const Tensor x = random_tensor({2, 1, 1, 8, 8}, xrng);
  const Conditioning cond = Conditioning::for_class({1, 3});
  const double worst_block =
      max_abs_diff(a.forward(x, {3, 17}, cond).data(), b.forward(x, {3, 17}, cond).data());

  Outcome out;
  out.pass = worst_module < 1e-12 && worst_block < 1e-12;
  out.note = "fresh global-interaction module deviates " + fmt(worst_module) +
             " from identity over 9 strategy combinations; an extra fresh block changes the "
             "output by " + fmt(worst_block) + " (tolerance 1e-12)";
  return out;
}

Outcome criterion_oracle_equivalences() {
  // Windowed attention with the window equal to the whole grid, against a
  // dense straight-line self-attention oracle on the same projections.
  double worst_wsa = 0.0;
  {
    NoGradGuard ng;
    const int64_t D = 4, H = 2;
    Rng rng(51);
    ParamRegistry reg;
    Tcm tcm(reg, "t", D, H, CompressionRatio{1, 2, 2}, rng);
    Rng drng(52);
    const Tensor grid = random_tensor({1, 1, 2, 2, D}, drng);
    const Tensor got = tcm.window_attention(grid);
    const auto sa = ptdx_test::oracle_mha(reg, "t.wsa", H, grid.data(), 4, grid.data(), 4, D);
    for (int64_t i = 0; i < 4 * D; ++i)
      worst_wsa = std::max(worst_wsa,
                           std::fabs(got.data()[size_t(i)] - (grid.data()[size_t(i)] + sa[size_t(i)])));
  }

  // Full global-interaction forward on an 8x8 grid (64 tokens) against the
  // composed oracle: window means, proxy self-attention, dense injection.
  double worst_giim = 0.0;
  {
    NoGradGuard ng;
    const int64_t D = 4, H = 2, g = 8, N = 64, P = 16;
    Rng rng(36);
    ParamRegistry reg;
    Giim giim(reg, "g", D, H, CompressionRatio{1, 2, 2}, ProxyStrategy::Average,
              InjectionStrategy::CrossAttention, rng);
    set_identity(reg, "g.gate.weight", D);
    Rng drng(37);
    const Tensor grid = random_tensor({1, 1, g, g, D}, drng);
    const Tensor got = giim.forward(grid);

    std::vector<double> proxies(size_t(P * D), 0.0);
    for (int64_t wh = 0; wh < 4; ++wh)
      for (int64_t ww = 0; ww < 4; ++ww)
        for (int64_t ih = 0; ih < 2; ++ih)
          for (int64_t iw = 0; iw < 2; ++iw)
            for (int64_t d = 0; d < D; ++d)
              proxies[size_t((wh * 4 + ww) * D + d)] +=
                  0.25 * grid.data()[size_t((((wh * 2 + ih) * g) + (ww * 2 + iw)) * D + d)];
    const auto sa = ptdx_test::oracle_mha(reg, "g.proxy_sa", H, proxies, P, proxies, P, D);
    const auto cs = ptdx_test::oracle_mha(reg, "g.inject", H, grid.data(), N, sa, P, D);
    for (int64_t i = 0; i < N * D; ++i)
      worst_giim = std::max(worst_giim,
                            std::fabs(got.data()[size_t(i)] - (grid.data()[size_t(i)] + cs[size_t(i)])));
  }

  // Redundancy profiler against a brute-force cosine computation.
  double worst_red = 0.0;
  {
    const int64_t g = 16, heads = 3, n = g * g, w = 4, wg = g / w;
    AttnCapture::Entry entry;
    entry.site = "global_sa";
    entry.heads = heads;
    entry.nq = n;
    entry.nk = n;
    entry.probs.resize(size_t(heads * n * n));
    Rng rng(91);
    for (int64_t h = 0; h < heads; ++h)
      for (int64_t i = 0; i < n; ++i) {
        double z = 0;
        for (int64_t j = 0; j < n; ++j) {
          const double v = rng.uniform() + 1e-3;
          entry.probs[size_t((h * n + i) * n + j)] = float(v);
          z += v;
        }
        for (int64_t j = 0; j < n; ++j) entry.probs[size_t((h * n + i) * n + j)] /= float(z);
      }

    const RedundancyReport rep = redundancy_profile(entry, w, w, 1);

    auto window_of = [&](int64_t tok) {
      return std::pair<int64_t, int64_t>{(tok / g) / w, (tok % g) / w};
    };
    std::vector<double> oracle_near, oracle_far;
    double near_sum = 0, far_sum = 0;
    for (int64_t wy = 0; wy < wg; ++wy)
      for (int64_t wx = 0; wx < wg; ++wx) {
        std::vector<int64_t> rows;
        for (int64_t t = 0; t < n; ++t)
          if (window_of(t) == std::pair<int64_t, int64_t>{wy, wx}) rows.push_back(t);
        std::vector<char> near(size_t(n));
        for (int64_t t = 0; t < n; ++t) {
          const auto [cy, cx] = window_of(t);
          near[size_t(t)] = std::abs(cy - wy) <= 1 && std::abs(cx - wx) <= 1;
        }
        double wnear = 0, wfar = 0;
        for (int64_t h = 0; h < heads; ++h) {
          double hnear = 0, hfar = 0;
          int64_t pairs = 0;
          for (size_t i = 0; i < rows.size(); ++i)
            for (size_t j = i + 1; j < rows.size(); ++j) {
              for (int mask = 0; mask < 2; ++mask) {
                double dot = 0, na = 0, nb = 0;
                for (int64_t c = 0; c < n; ++c) {
                  if (int(near[size_t(c)]) != mask) continue;
                  const double pa = entry.probs[size_t((h * n + rows[i]) * n + c)];
                  const double pb = entry.probs[size_t((h * n + rows[j]) * n + c)];
                  dot += pa * pb;
                  na += pa * pa;
                  nb += pb * pb;
                }
                const double cosv = (na > 0 && nb > 0) ? dot / std::sqrt(na * nb) : 0.0;
                (mask ? hnear : hfar) += cosv;
              }
              ++pairs;
            }
          wnear += hnear / double(pairs);
          wfar += hfar / double(pairs);
        }
        oracle_near.push_back(wnear / double(heads));
        oracle_far.push_back(wfar / double(heads));
        near_sum += oracle_near.back();
        far_sum += oracle_far.back();
      }
    worst_red = std::max(max_abs_diff(rep.window_neighbor, oracle_near),
                         max_abs_diff(rep.window_distant, oracle_far));
    worst_red = std::max(worst_red, std::fabs(rep.neighbor_mean - near_sum / double(wg * wg)));
    worst_red = std::max(worst_red, std::fabs(rep.distant_mean - far_sum / double(wg * wg)));
  }

  Outcome out;
  out.pass = worst_wsa < 1e-10 && worst_giim < 1e-10 && worst_red < 1e-10;
  out.note = "single-window attention vs dense oracle " + fmt(worst_wsa) +
             ", 64-token global-interaction forward vs composed oracle " + fmt(worst_giim) +
             ", redundancy profile vs brute force " + fmt(worst_red) + " (tolerance 1e-10)";
  return out;
}

Outcome criterion_jacobian_structure() {
  const int64_t D = 2, g = 4;
  Rng rng(55);
  ParamRegistry reg;
  Tcm tcm(reg, "t", D, 1, CompressionRatio{1, 2, 2}, rng);
  Rng drng(56);
  Tensor grid = random_tensor({1, 1, g, g, D}, drng);

  double cross_wsa = 0.0;
  for (int64_t oh : {0L, 1L, 2L, 3L})
    for (int64_t ow : {0L, 3L}) {
      const auto jac =
          jacobian_row([&] { return tcm.window_attention(grid); }, grid, ((oh * g) + ow) * D);
      for (int64_t ih = 0; ih < g; ++ih)
        for (int64_t iw = 0; iw < g; ++iw) {
          if (oh / 2 == ih / 2 && ow / 2 == iw / 2) continue;
          for (int64_t d = 0; d < D; ++d)
            cross_wsa = std::max(cross_wsa, std::fabs(jac[size_t(((ih * g) + iw) * D + d)]));
        }
    }

  double cross_both = 0.0;
  {
    const auto jac = jacobian_row([&] { return tcm.forward(grid); }, grid, 0);
    for (int64_t ih = 0; ih < g; ++ih)
      for (int64_t iw = 0; iw < g; ++iw) {
        if (ih / 2 == 0 && iw / 2 == 0) continue;
        for (int64_t d = 0; d < D; ++d)
          cross_both = std::max(cross_both, std::fabs(jac[size_t(((ih * g) + iw) * D + d)]));
      }
  }

  Outcome out;
  out.pass = cross_wsa == 0.0 && cross_both > 0.0;
  out.note = "windowed-pass cross-window Jacobian entries are exactly 0 (largest " +
             fmt(cross_wsa) + "); adding the shifted pass couples windows (largest cross entry " +
             fmt(cross_both) + ")";
  return out;
}

Outcome criterion_gradients() {
  Rng rng(42);
  double worst = 0.0;
  int checks = 0;
  auto track = [&](double rel) {
    worst = std::max(worst, rel);
    ++checks;
  };

  {
    Tensor a = random_tensor({2, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    track(worst_grad_error([&] { return sum_all(mul(add(a, b), sub(a, b))); }, {a, b}));
  }
  {
    Tensor a = random_tensor({2, 3}, rng);
    Tensor b = random_tensor({3, 4}, rng);
    track(worst_grad_error([&] { return sum_all(matmul(a, b)); }, {a, b}));
  }
  {
    Tensor a = random_tensor({2, 2, 3}, rng);
    Tensor b = random_tensor({3, 2}, rng);
    track(worst_grad_error([&] { return mean_all(matmul(a, b)); }, {a, b}));
  }
  {
    Tensor a = random_tensor({3, 4}, rng);
    track(worst_grad_error([&] { return sum_all(mul(softmax(a, -1), a)); }, {a}));
  }
  {
    Tensor a = random_tensor({2, 5}, rng);
    Tensor gain = random_tensor({5}, rng);
    Tensor bias = random_tensor({5}, rng);
    track(worst_grad_error([&] { return sum_all(mul(layernorm(a, gain, bias, 1e-6), a)); },
                           {a, gain, bias}));
    track(worst_grad_error([&] { return sum_all(mul(layernorm(a, Tensor(), Tensor(), 1e-6), a)); },
                           {a}));
  }
  {
    Tensor a = random_tensor({7}, rng);
    track(worst_grad_error([&] { return sum_all(gelu(a)); }, {a}));
    track(worst_grad_error([&] { return sum_all(silu(a)); }, {a}));
  }
  {
    Tensor a = random_tensor({2, 3}, rng);
    track(worst_grad_error([&] { return mean_all(reshape(a, {6})); }, {a}));
    track(worst_grad_error(
        [&] { return sum_all(mul(transpose_last2(a), transpose_last2(a))); }, {a}));
  }
  {
    Tensor a = random_tensor({2, 3, 4}, rng);
    track(worst_grad_error(
        [&] {
          Tensor p = permute(a, {2, 0, 1});
          return sum_all(mul(p, p));
        },
        {a}));
  }
  {
    Tensor a = random_tensor({2, 6}, rng);
    track(worst_grad_error(
        [&] {
          Tensor s = slice_last(a, 1, 4);
          return sum_all(mul(s, s));
        },
        {a}));
  }
  {
    Tensor a = random_tensor({3, 4}, rng);
    track(worst_grad_error(
        [&] { return sum_all(mul(roll_axes(a, {0, 1}, {1, -2}), a)); }, {a}));
  }
  {
    Tensor a = random_tensor({3, 2}, rng);
    track(worst_grad_error(
        [&] {
          Tensor u = interp_linear_axis(a, 0, 5);
          return sum_all(mul(u, u));
        },
        {a}));
    track(worst_grad_error(
        [&] {
          Tensor dn = interp_linear_axis(a, 0, 2);
          return sum_all(mul(dn, dn));
        },
        {a}));
  }
  {
    Tensor a = random_tensor({4, 3}, rng);
    track(worst_grad_error(
        [&] {
          Tensor m = mean_axis(a, 0);
          return sum_all(mul(m, m));
        },
        {a}));
  }
  {
    Tensor table = random_tensor({5, 3}, rng);
    track(worst_grad_error(
        [&] {
          Tensor e = embedding_lookup(table, {1, 4, 1});
          return sum_all(mul(e, e));
        },
        {table}));
  }
  {
    Tensor a = random_tensor({2, 3}, rng);
    Tensor b = random_tensor({2, 3}, rng);
    track(worst_grad_error([&] { return mse_loss(a, b); }, {a, b}));
  }
  {
    Tensor a = random_tensor({4}, rng);
    track(worst_grad_error([&] { return mean_all(scale(add_scalar(a, 0.5), 3.0)); }, {a}));
  }

  // Composite modules: attention, global interaction (all injections), and
  // the two-pass texture module, differentiating through every parameter.
  {
    ParamRegistry reg;
    MultiHeadAttention attn(reg, "a", 4, 2, rng);
    Tensor xq = random_tensor({1, 3, 4}, rng, 0.5);
    Tensor xkv = random_tensor({1, 2, 4}, rng, 0.5);
    std::vector<Tensor> leaves{xq, xkv};
    for (const auto& p : reg.params()) leaves.push_back(p->tensor);
    track(worst_grad_error([&] { return mean_all(attn.forward(xq, xkv)); }, leaves));
  }
  for (auto inject : {InjectionStrategy::CrossAttention, InjectionStrategy::Interpolate,
                      InjectionStrategy::LinearMap}) {
    ParamRegistry reg;
    Giim giim(reg, "g", 2, 1, CompressionRatio{1, 2, 2}, ProxyStrategy::Average, inject, rng);
    auto& gw = reg.find("g.gate.weight")->tensor.mutable_data();
    for (auto& v : gw) v = rng.normal() * 0.3;
    Tensor grid = random_tensor({1, 1, 2, 4, 2}, rng, 0.5);
    std::vector<Tensor> leaves{grid};
    for (const auto& p : reg.params()) leaves.push_back(p->tensor);
    track(worst_grad_error([&] { return mean_all(giim.forward(grid)); }, leaves));
  }
  {
    ParamRegistry reg;
    Tcm tcm(reg, "t", 2, 1, CompressionRatio{1, 2, 2}, rng);
    Tensor grid = random_tensor({1, 1, 2, 4, 2}, rng, 0.5);
    std::vector<Tensor> leaves{grid};
    for (const auto& p : reg.params()) leaves.push_back(p->tensor);
    track(worst_grad_error([&] { return mean_all(tcm.forward(grid)); }, leaves));
  }

  Outcome out;
  out.pass = worst < 1e-4;
  out.note = "central differences (h=1e-5) across " + std::to_string(checks) +
             " op and module checks, worst relative error " + fmt(worst) + " (tolerance 1e-4)";
  return out;
}

Outcome criterion_diffusion_algebra() {
  const NoiseSchedule sched = NoiseSchedule::cosine(1000);
  double worst_unit = 0.0;
  for (int64_t t = 0; t < sched.steps(); ++t) {
    const double a = sched.alpha(t), s = sched.sigma(t);
    worst_unit = std::max(worst_unit, std::fabs(a * a + s * s - 1.0));
  }

  Rng rng(71);
  const Tensor x0 = random_tensor({4, 1, 1, 4, 4}, rng);
  const Tensor noise = random_tensor({4, 1, 1, 4, 4}, rng);
  const std::vector<int64_t> ts{0, 317, 640, 999};
  const Tensor xt = q_sample(x0, noise, sched, ts);
  const Tensor v = v_target(x0, noise, sched, ts);
  const double worst_rt =
      std::max(max_abs_diff(x0_from_v(xt, v, sched, ts).data(), x0.data()),
               max_abs_diff(noise_from_v(xt, v, sched, ts).data(), noise.data()));

  // A briefly trained model makes both guidance branches nontrivial.
  ModelConfig mcfg = micro_model();
  PtDit model(mcfg, 2);
  AdamW opt(1e-3);
  Ema ema(model.params(), 0.9);
  const NoiseSchedule tsched = NoiseSchedule::cosine(40);
  DatasetConfig dcfg;
  dcfg.num_classes = mcfg.num_classes;
  for (int64_t i = 0; i < 5; ++i) {
    auto [bx, blabels] = dataset_batch(dcfg, 4, i);
    training_step(model, opt, ema, tsched, bx, Conditioning::for_class(blabels), 3, i);
  }
  SamplerConfig unit;
  unit.steps = 10;
  unit.guidance_scale = 1.0;
  SamplerConfig cond_only = unit;
  cond_only.conditional_only = true;
  const Conditioning cond = Conditioning::for_class({2});
  const Tensor guided = cfg_sample(model, tsched, {1, 1, 1, 8, 8}, cond, unit, 7);
  const Tensor conditional = cfg_sample(model, tsched, {1, 1, 1, 8, 8}, cond, cond_only, 7);
  const double worst_cfg = max_abs_diff(guided.data(), conditional.data());

  Outcome out;
  out.pass = worst_unit < 1e-12 && worst_rt < 1e-10 && worst_cfg < 1e-10;
  out.note = "alpha^2+sigma^2 deviates " + fmt(worst_unit) +
             " from 1 over 1000 steps (tolerance 1e-12); v/x0/noise round trips deviate " +
             fmt(worst_rt) + " and unit-scale guidance deviates " + fmt(worst_cfg) +
             " from conditional sampling (tolerance 1e-10)";
  return out;
}

Outcome criterion_memorization() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string dir =
      (std::filesystem::temp_directory_path() / "ptdx_acceptance_memorize").string();
  std::filesystem::remove_all(dir);

  RunConfig cfg;
  cfg.model = ModelConfig::preset("tiny");
  cfg.dataset = DatasetConfig{DataGenerator::SingleImageMemorization, 8, 1, 4, 0};
  cfg.schedule_steps = 50;
  cfg.train_steps = 5000;
  cfg.batch = 12;
  cfg.lr = 3e-3;
  cfg.lr_decay_start = 0.5;
  cfg.ema_decay = 0.999;
  cfg.cond_dropout = 0.1;
  cfg.master_seed = 1;
  cfg.init_seed = 1;
  cfg.checkpoint_every = 5000;
  cfg.out_dir = dir;

  std::ostringstream log;
  const TrainOutcome train = cmd_train(cfg, "", log);
  Outcome out;
  if (train.exit_code != kExitOk) {
    out.note = "training failed: " + log.str();
    return out;
  }

  std::vector<double> losses;
  {
    std::ifstream is(dir + "/loss.log");
    std::string line;
    while (std::getline(is, line)) {
      std::istringstream fields(line);
      int64_t s;
      double loss, lr;
      fields >> s >> loss >> lr;
      losses.push_back(loss);
    }
  }
  double tail_mean = 0.0;
  const size_t tail = 100;
  for (size_t i = losses.size() - tail; i < losses.size(); ++i) tail_mean += losses[i];
  tail_mean /= double(tail);

  const Checkpoint chk = read_checkpoint(train.last_checkpoint);
  PtDit model(chk.config, 0);
  restore_weights(model, chk);
  SamplerConfig scfg;
  scfg.steps = 50;
  scfg.guidance_scale = 1.0;
  const Tensor sample = cfg_sample(model, NoiseSchedule::cosine(cfg.schedule_steps),
                                   {1, 1, 1, 8, 8}, Conditioning::for_class({0}), scfg, 42);
  const Tensor target = memorization_target(cfg.dataset);
  double mse = 0.0;
  for (size_t i = 0; i < sample.data().size(); ++i) {
    const double d = sample.data()[i] - target.data()[i];
    mse += d * d;
  }
  mse /= double(sample.data().size());

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::filesystem::remove_all(dir);

  out.pass = losses.size() == 5000 && tail_mean < 1e-3 && mse < 0.05 && secs < 600;
  out.note = "tiny preset on the single-image set: mean loss over the last 100 of 5000 steps " +
             fmt(tail_mean) + " (bound 1e-3), sample MSE vs target " + fmt(mse) +
             " (bound 0.05), " + fmt(secs, "%.0f") + " s (bound 600)";
  return out;
}

Outcome criterion_parameter_counts() {
  struct Row {
    const char* name;
    double target;
  };
  const std::vector<Row> rows{{"s-class", 32e6}, {"b", 144e6}, {"l", 605e6},
                              {"xl", 1142e6}, {"h", 1795e6}};

  // The closed-form count is certified against full construction at the two
  // sizes that fit comfortably in memory; the larger presets use the formula.
  bool formula_ok = true;
  for (const char* name : {"tiny", "s-class"}) {
    const ModelConfig cfg = ModelConfig::preset(name);
    PtDit model(cfg, 1);
    formula_ok = formula_ok && model.param_count() == PtDit::param_count_analytic(cfg);
  }

  bool all_within = true;
  std::string detail;
  for (const Row& row : rows) {
    const double n = double(PtDit::param_count_analytic(ModelConfig::preset(row.name)));
    const double dev = (n - row.target) / row.target;
    all_within = all_within && std::fabs(dev) <= 0.02;
    if (!detail.empty()) detail += ", ";
    detail += std::string(row.name) + " " + fmt(100 * dev, "%+.2f") + "%";
  }

  Outcome out;
  out.pass = formula_ok && all_within;
  out.note = "deviation from the nominal 32M/144M/605M/1142M/1795M sizes (bound 2%): " + detail +
             "; counts certified against construction on tiny and s-class. The xl preset has no "
             "configuration consistent with its neighbors that reaches 1142M; its count is "
             "pinned at 1083215248 and the shortfall is documented";
  return out;
}

Outcome criterion_ablation_surface() {
  using Inventory = std::vector<LayerInfo>;
  auto inventory = [](const ModelConfig& cfg) { return PtDit(cfg, 1).layer_inventory(); };
  auto has = [](const Inventory& inv, const std::string& sublayer) {
    for (const auto& row : inv)
      if (row.sublayer == sublayer) return true;
    return false;
  };
  auto detail_of = [](const Inventory& inv, const std::string& sublayer) -> std::string {
    for (const auto& row : inv)
      if (row.sublayer == sublayer) return row.detail;
    return "";
  };

  int failures = 0;
  auto expect = [&](bool ok) { failures += ok ? 0 : 1; };

  const ModelConfig base = micro_model();
  {
    const Inventory inv = inventory(base);
    expect(has(inv, "giim") && has(inv, "tcm_wsa") && has(inv, "tcm_swsa") &&
           has(inv, "cond_attn") && has(inv, "mlp") && !has(inv, "global_self_attention"));
  }
  {
    ModelConfig cfg = base;
    cfg.giim_enabled = false;
    const Inventory inv = inventory(cfg);
    expect(!has(inv, "giim") && has(inv, "tcm_wsa") && has(inv, "tcm_swsa"));
  }
  {
    ModelConfig cfg = base;
    cfg.swsa_enabled = false;
    const Inventory inv = inventory(cfg);
    expect(has(inv, "giim") && has(inv, "tcm_wsa") && !has(inv, "tcm_swsa"));
  }
  {
    ModelConfig cfg = base;
    cfg.tcm_enabled = false;
    const Inventory inv = inventory(cfg);
    expect(has(inv, "giim") && !has(inv, "tcm_wsa") && !has(inv, "tcm_swsa"));
  }
  for (auto proxy : {ProxyStrategy::Average, ProxyStrategy::TopLeft, ProxyStrategy::Random}) {
    ModelConfig cfg = base;
    cfg.proxy_strategy = proxy;
    expect(contains(detail_of(inventory(cfg), "giim"),
                    std::string("proxy=") + proxy_strategy_name(proxy)));
  }
  for (auto inject : {InjectionStrategy::CrossAttention, InjectionStrategy::Interpolate,
                      InjectionStrategy::LinearMap}) {
    ModelConfig cfg = base;
    cfg.injection_strategy = inject;
    expect(contains(detail_of(inventory(cfg), "giim"),
                    std::string("injection=") + injection_strategy_name(inject)));
  }
  for (const CompressionRatio ratio : {CompressionRatio{1, 2, 2}, CompressionRatio{1, 4, 4},
                                       CompressionRatio{1, 8, 8}}) {
    ModelConfig cfg = base;
    cfg.ratio = ratio;
    const std::string want = "ratio=(1," + std::to_string(ratio.ph) + "," +
                             std::to_string(ratio.pw) + ")";
    const Inventory inv = inventory(cfg);
    expect(contains(detail_of(inv, "giim"), want) && contains(detail_of(inv, "tcm_wsa"), want));
  }
  {
    ModelConfig cfg = base;
    cfg.global_attention_reference = true;
    const Inventory inv = inventory(cfg);
    expect(has(inv, "global_self_attention") && !has(inv, "giim") && !has(inv, "tcm_wsa") &&
           !has(inv, "tcm_swsa") && has(inv, "cond_attn") && has(inv, "mlp"));
  }
  // Every variant's registry agrees with the closed-form parameter count, so
  // the inventory differences reflect real parameter wiring.
  for (ModelConfig cfg : {base, [&] { ModelConfig c = base; c.giim_enabled = false; return c; }(),
                          [&] { ModelConfig c = base; c.tcm_enabled = false; return c; }(),
                          [&] { ModelConfig c = base; c.global_attention_reference = true; return c; }()}) {
    PtDit model(cfg, 1);
    expect(model.param_count() == PtDit::param_count_analytic(cfg));
  }

  Outcome out;
  out.pass = failures == 0;
  out.note = "layer inventories reproduce every toggle wiring (module removal, 3 proxy picks, "
             "3 injections, 3 window ratios, dense reference); " +
             std::to_string(failures) + " structural mismatches";
  return out;
}

struct Criterion {
  int id;
  const char* title;
  Outcome (*run)();
};

const std::vector<Criterion>& catalogue() {
  static const std::vector<Criterion> all{
      {1, "complexity ratios", criterion_complexity_ratios},
      {2, "closed-form vs instrumented attention cost", criterion_instrumented_flops},
      {3, "identity at initialization", criterion_identity_at_init},
      {4, "oracle equivalences", criterion_oracle_equivalences},
      {5, "attention Jacobian structure", criterion_jacobian_structure},
      {6, "gradient correctness", criterion_gradients},
      {7, "diffusion algebra", criterion_diffusion_algebra},
      {8, "end-to-end memorization", criterion_memorization},
      {9, "parameter-count fidelity", criterion_parameter_counts},
      {10, "ablation surface", criterion_ablation_surface},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if ((arg == "--criterion" || arg == "-c") && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--criterion N]\n";
      return 1;
    }
  }
  if (only < 0 || only > 10) {
    std::cerr << "error: criterion must lie in [1, 10]\n";
    return 1;
  }

  bool all_pass = true;
  for (const Criterion& c : catalogue()) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.note = std::string("unexpected exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << c.id << " (" << c.title << "): "
              << (out.pass ? "PASS" : "FAIL") << "  " << out.note << "  [" << fmt(secs, "%.1f")
              << " s]\n";
    all_pass = all_pass && out.pass;
  }
  return all_pass ? 0 : 1;
}
