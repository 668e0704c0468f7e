#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "ptdx/tensor.hpp"

namespace ptdx {

// Window geometry over a (frames, height, width) token grid. Each window spans
// pf*ph*pw tokens; proxy extraction keeps one token per window.
struct CompressionRatio {
  int64_t pf = 1;
  int64_t ph = 1;
  int64_t pw = 1;

  int64_t window_tokens() const { return pf * ph * pw; }

  void validate(int64_t f, int64_t h, int64_t w) const {
    if (pf <= 0 || ph <= 0 || pw <= 0)
      throw std::invalid_argument("compression ratio must be positive, got (" +
                                  std::to_string(pf) + "," + std::to_string(ph) + "," +
                                  std::to_string(pw) + ")");
    if (f % pf != 0)
      throw std::invalid_argument("frame extent " + std::to_string(f) +
                                  " not divisible by ratio " + std::to_string(pf));
    if (h % ph != 0)
      throw std::invalid_argument("height extent " + std::to_string(h) +
                                  " not divisible by ratio " + std::to_string(ph));
    if (w % pw != 0)
      throw std::invalid_argument("width extent " + std::to_string(w) +
                                  " not divisible by ratio " + std::to_string(pw));
  }
};

// Token grid [B, f, h, w, D]. A plain shape contract shared by the attention
// modules; flattened token order is (f, h, w) row-major.
struct LatentGrid {
  Tensor x;

  int64_t batch() const { return x.shape()[0]; }
  int64_t frames() const { return x.shape()[1]; }
  int64_t height() const { return x.shape()[2]; }
  int64_t width() const { return x.shape()[3]; }
  int64_t dim() const { return x.shape()[4]; }
  int64_t tokens() const { return frames() * height() * width(); }

  static void check_shape(const Tensor& t) {
    if (t.ndim() != 5)
      throw std::invalid_argument("latent grid must be [batch, frames, height, width, dim], got " +
                                  shape_str(t.shape()));
  }
};

// [B, f, h, w, D] -> [B * num_windows, window_tokens, D]; windows are laid out
// window-major so tokens of one window are contiguous rows.
inline Tensor window_partition(const Tensor& grid, const CompressionRatio& r) {
  LatentGrid::check_shape(grid);
  const Shape& s = grid.shape();
  const int64_t B = s[0], f = s[1], h = s[2], w = s[3], D = s[4];
  r.validate(f, h, w);
  const int64_t nf = f / r.pf, nh = h / r.ph, nw = w / r.pw;
  Tensor split = reshape(grid, {B, nf, r.pf, nh, r.ph, nw, r.pw, D});
  Tensor grouped = permute(split, {0, 1, 3, 5, 2, 4, 6, 7});
  return reshape(grouped, {B * nf * nh * nw, r.window_tokens(), D});
}

// Inverse of window_partition for the same geometry.
inline Tensor window_unpartition(const Tensor& wins, const CompressionRatio& r,
                                 int64_t B, int64_t f, int64_t h, int64_t w) {
  const int64_t nf = f / r.pf, nh = h / r.ph, nw = w / r.pw;
  const int64_t D = wins.shape().back();
  Tensor grouped = reshape(wins, {B, nf, nh, nw, r.pf, r.ph, r.pw, D});
  Tensor split = permute(grouped, {0, 1, 4, 2, 5, 3, 6, 7});
  return reshape(split, {B, f, h, w, D});
}

// Flatten the spatial axes: [B, f, h, w, D] -> [B, f*h*w, D].
inline Tensor grid_to_tokens(const Tensor& grid) {
  LatentGrid::check_shape(grid);
  const Shape& s = grid.shape();
  return reshape(grid, {s[0], s[1] * s[2] * s[3], s[4]});
}

inline Tensor tokens_to_grid(const Tensor& tokens, int64_t f, int64_t h, int64_t w) {
  const Shape& s = tokens.shape();
  return reshape(tokens, {s[0], f, h, w, s[2]});
}

}  // namespace ptdx
