#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ptdx/attention.hpp"
#include "ptdx/latent_grid.hpp"
#include "ptdx/nn.hpp"

namespace ptdx {

enum class ProxyStrategy { Average, TopLeft, Random };
enum class InjectionStrategy { CrossAttention, Interpolate, LinearMap };

const char* proxy_strategy_name(ProxyStrategy s);
const char* injection_strategy_name(InjectionStrategy s);
ProxyStrategy proxy_strategy_from_name(const std::string& name);
InjectionStrategy injection_strategy_from_name(const std::string& name);

// One representative token per window. `average` is the arithmetic mean,
// `top_left` the window's first token in (f, h, w) order, `random` a uniform
// pick per window drawn from `seed` (the same pick on every call, so repeated
// forwards are reproducible). Returns the proxy grid [B, f/pf, h/ph, w/pw, D].
Tensor extract_proxies(const Tensor& grid, const CompressionRatio& ratio,
                       ProxyStrategy strategy, uint64_t seed = 0);

// Separable endpoint-aligned linear interpolation of the proxy grid
// [B, nf, nh, nw, D] up to [B, f, h, w, D]. Singleton axes broadcast.
Tensor interpolate_injection(const Tensor& proxy_grid, int64_t f, int64_t h, int64_t w);

// Global interaction: proxy extraction, self-attention over the proxies, and
// injection of the result back to every token, added through a zero-init
// linear gate so the module starts as the identity.
class Giim {
 public:
  Giim(ParamRegistry& reg, const std::string& prefix, int64_t dim, int64_t heads,
       const CompressionRatio& ratio, ProxyStrategy proxy, InjectionStrategy injection,
       Rng& rng, uint64_t seed = 0);

  // [B, f, h, w, D] -> [B, f, h, w, D]
  Tensor forward(const Tensor& grid, AttnCapture* capture = nullptr) const;

  const CompressionRatio& ratio() const { return ratio_; }
  ProxyStrategy proxy_strategy() const { return proxy_; }
  InjectionStrategy injection_strategy() const { return injection_; }

 private:
  CompressionRatio ratio_;
  ProxyStrategy proxy_;
  InjectionStrategy injection_;
  MultiHeadAttention proxy_sa_;
  std::optional<MultiHeadAttention> inject_attn_;
  std::optional<Linear> inject_linear_;
  Linear gate_;
  uint64_t seed_;
};

}  // namespace ptdx
