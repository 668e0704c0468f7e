#include "ptdx/giim.hpp"

#include <stdexcept>

#include "ptdx/flops.hpp"

namespace ptdx {

const char* proxy_strategy_name(ProxyStrategy s) {
  switch (s) {
    case ProxyStrategy::Average: return "average";
    case ProxyStrategy::TopLeft: return "top_left";
    case ProxyStrategy::Random: return "random";
  }
  return "?";
}

const char* injection_strategy_name(InjectionStrategy s) {
  switch (s) {
    case InjectionStrategy::CrossAttention: return "cross_attention";
    case InjectionStrategy::Interpolate: return "interpolate";
    case InjectionStrategy::LinearMap: return "linear";
  }
  return "?";
}

ProxyStrategy proxy_strategy_from_name(const std::string& name) {
  if (name == "average") return ProxyStrategy::Average;
  if (name == "top_left") return ProxyStrategy::TopLeft;
  if (name == "random") return ProxyStrategy::Random;
  throw std::invalid_argument("unknown proxy strategy: " + name);
}

InjectionStrategy injection_strategy_from_name(const std::string& name) {
  if (name == "cross_attention") return InjectionStrategy::CrossAttention;
  if (name == "interpolate") return InjectionStrategy::Interpolate;
  if (name == "linear") return InjectionStrategy::LinearMap;
  throw std::invalid_argument("unknown injection strategy: " + name);
}

Tensor extract_proxies(const Tensor& grid, const CompressionRatio& ratio,
                       ProxyStrategy strategy, uint64_t seed) {
  LatentGrid::check_shape(grid);
  const Shape& s = grid.shape();
  const int64_t B = s[0], f = s[1], h = s[2], w = s[3], D = s[4];
  ratio.validate(f, h, w);
  const int64_t nf = f / ratio.pf, nh = h / ratio.ph, nw = w / ratio.pw;
  const int64_t p = ratio.window_tokens();
  Tensor wins = window_partition(grid, ratio);  // [B*W, p, D]
  const int64_t rows = wins.size(0);

  Tensor picked;
  switch (strategy) {
    case ProxyStrategy::Average:
      picked = mean_axis(wins, 1);  // [B*W, D]
      break;
    case ProxyStrategy::TopLeft:
      picked = slice_last(reshape(wins, {rows, p * D}), 0, D);
      break;
    case ProxyStrategy::Random: {
      // Constant one-hot selector per window; matmul routes gradients back to
      // the chosen tokens. Drawn from `seed` so every forward picks the same.
      Rng rng(derive_seed(seed, 0x9e3779b9));
      Tensor sel = Tensor::zeros({rows, 1, p});
      for (int64_t r = 0; r < rows; ++r)
        sel.mutable_data()[r * p + rng.uniform_int(p)] = 1.0;
      picked = matmul(sel, wins);  // [B*W, 1, D]
      break;
    }
  }
  return reshape(picked, {B, nf, nh, nw, D});
}

Tensor interpolate_injection(const Tensor& proxy_grid, int64_t f, int64_t h, int64_t w) {
  LatentGrid::check_shape(proxy_grid);
  const Shape& s = proxy_grid.shape();
  if (f % s[1] != 0 || h % s[2] != 0 || w % s[3] != 0)
    throw std::invalid_argument("interpolation target (" + std::to_string(f) + "," +
                                std::to_string(h) + "," + std::to_string(w) +
                                ") is not a multiple of proxy extents " + shape_str(s));
  Tensor t = interp_linear_axis(proxy_grid, 1, f);
  t = interp_linear_axis(t, 2, h);
  t = interp_linear_axis(t, 3, w);
  return t;
}

Giim::Giim(ParamRegistry& reg, const std::string& prefix, int64_t dim, int64_t heads,
           const CompressionRatio& ratio, ProxyStrategy proxy, InjectionStrategy injection,
           Rng& rng, uint64_t seed)
    : ratio_(ratio),
      proxy_(proxy),
      injection_(injection),
      proxy_sa_(reg, prefix + ".proxy_sa", dim, heads, rng),
      gate_(reg, prefix + ".gate", dim, dim, rng, Init::Zeros),
      seed_(seed) {
  if (injection == InjectionStrategy::CrossAttention)
    inject_attn_.emplace(reg, prefix + ".inject", dim, heads, rng);
  else if (injection == InjectionStrategy::LinearMap)
    inject_linear_.emplace(reg, prefix + ".inject", dim, ratio.window_tokens() * dim, rng);
}

Tensor Giim::forward(const Tensor& grid, AttnCapture* capture) const {
  LatentGrid::check_shape(grid);
  const Shape& s = grid.shape();
  const int64_t B = s[0], f = s[1], h = s[2], w = s[3], D = s[4];
  const int64_t nf = f / ratio_.pf, nh = h / ratio_.ph, nw = w / ratio_.pw;
  const int64_t P = nf * nh * nw;

  Tensor proxies = extract_proxies(grid, ratio_, proxy_, seed_);
  Tensor proxy_tokens = reshape(proxies, {B, P, D});
  {
    FlopLabelGuard label("giim_sa");
    proxy_tokens = proxy_sa_.self_forward(proxy_tokens, capture, "giim_sa");
  }

  Tensor tokens = grid_to_tokens(grid);
  Tensor injected;
  {
    FlopLabelGuard label("giim_inject");
    switch (injection_) {
      case InjectionStrategy::CrossAttention:
        injected = inject_attn_->forward(tokens, proxy_tokens, capture, "giim_inject");
        break;
      case InjectionStrategy::Interpolate: {
        Tensor pg = reshape(proxy_tokens, {B, nf, nh, nw, D});
        injected = grid_to_tokens(interpolate_injection(pg, f, h, w));
        break;
      }
      case InjectionStrategy::LinearMap: {
        // Each proxy populates its own window's positions.
        Tensor expanded = inject_linear_->forward(proxy_tokens);  // [B, P, p*D]
        Tensor wins = reshape(expanded, {B * P, ratio_.window_tokens(), D});
        injected = grid_to_tokens(window_unpartition(wins, ratio_, B, f, h, w));
        break;
      }
    }
  }

  Tensor out = add(tokens, gate_.forward(injected));
  return tokens_to_grid(out, f, h, w);
}

}  // namespace ptdx
