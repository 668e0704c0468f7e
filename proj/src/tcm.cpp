#include "ptdx/tcm.hpp"

#include <stdexcept>

#include "ptdx/flops.hpp"

namespace ptdx {

Tcm::Tcm(ParamRegistry& reg, const std::string& prefix, int64_t dim, int64_t heads,
         const CompressionRatio& ratio, Rng& rng, bool shifted_pass_enabled)
    : ratio_(ratio), wsa_(reg, prefix + ".wsa", dim, heads, rng) {
  if (shifted_pass_enabled)
    swsa_.emplace(reg, prefix + ".swsa", dim, heads, rng);
}

Tensor Tcm::windowed_core(const MultiHeadAttention& attn, const Tensor& grid,
                          AttnCapture* capture, const std::string& site) const {
  const Shape& s = grid.shape();
  Tensor wins = window_partition(grid, ratio_);
  Tensor out = attn.self_forward(wins, capture, site);
  return window_unpartition(out, ratio_, s[0], s[1], s[2], s[3]);
}

Tensor Tcm::window_core(const Tensor& grid, AttnCapture* capture) const {
  LatentGrid::check_shape(grid);
  FlopLabelGuard label("tcm_wsa");
  return windowed_core(wsa_, grid, capture, "tcm_wsa");
}

Tensor Tcm::shifted_core(const Tensor& grid, AttnCapture* capture) const {
  LatentGrid::check_shape(grid);
  if (!swsa_.has_value())
    throw std::logic_error("shifted window pass is disabled in this module");
  FlopLabelGuard label("tcm_swsa");
  const int64_t sf = ratio_.pf / 2, sh = ratio_.ph / 2, sw = ratio_.pw / 2;
  Tensor rolled = roll_axes(grid, {1, 2, 3}, {-sf, -sh, -sw});
  Tensor attended = windowed_core(*swsa_, rolled, capture, "tcm_swsa");
  return roll_axes(attended, {1, 2, 3}, {sf, sh, sw});
}

Tensor Tcm::window_attention(const Tensor& grid, AttnCapture* capture) const {
  return add(window_core(grid, capture), grid);
}

Tensor Tcm::shift_window_attention(const Tensor& grid, AttnCapture* capture) const {
  return add(shifted_core(grid, capture), grid);
}

Tensor Tcm::forward(const Tensor& grid, AttnCapture* capture) const {
  Tensor hat = window_attention(grid, capture);
  if (!swsa_.has_value()) return hat;
  return shift_window_attention(hat, capture);
}

}  // namespace ptdx
