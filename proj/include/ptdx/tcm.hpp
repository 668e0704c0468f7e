#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ptdx/attention.hpp"
#include "ptdx/latent_grid.hpp"
#include "ptdx/nn.hpp"

namespace ptdx {

// Texture complement: window self-attention, then shift-window self-attention,
// each with its own parameters and a residual add. The shifted pass rolls the
// grid by half a window per axis so neighboring windows exchange information.
class Tcm {
 public:
  Tcm(ParamRegistry& reg, const std::string& prefix, int64_t dim, int64_t heads,
      const CompressionRatio& ratio, Rng& rng, bool shifted_pass_enabled = true);

  // [B, f, h, w, D] -> [B, f, h, w, D]
  Tensor forward(const Tensor& grid, AttnCapture* capture = nullptr) const;

  // Single passes, residual included; exposed for the isolation tests.
  Tensor window_attention(const Tensor& grid, AttnCapture* capture = nullptr) const;
  Tensor shift_window_attention(const Tensor& grid, AttnCapture* capture = nullptr) const;

  // Attention outputs without the residual add, for callers that gate the
  // branch themselves.
  Tensor window_core(const Tensor& grid, AttnCapture* capture = nullptr) const;
  Tensor shifted_core(const Tensor& grid, AttnCapture* capture = nullptr) const;

  const CompressionRatio& ratio() const { return ratio_; }
  bool shifted_pass_enabled() const { return swsa_.has_value(); }

 private:
  Tensor windowed_core(const MultiHeadAttention& attn, const Tensor& grid,
                       AttnCapture* capture, const std::string& site) const;

  CompressionRatio ratio_;
  MultiHeadAttention wsa_;
  std::optional<MultiHeadAttention> swsa_;
};

}  // namespace ptdx
