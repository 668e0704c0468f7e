#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptdx/nn.hpp"
#include "ptdx/tensor.hpp"

namespace ptdx {

// Opt-in sink for attention maps. When attached, each forward stores a
// single-precision copy of the softmax probabilities for batch element 0,
// laid out [heads, nq, nk].
struct AttnCapture {
  struct Entry {
    std::string site;
    int64_t heads = 0;
    int64_t nq = 0;
    int64_t nk = 0;
    std::vector<float> probs;
  };
  std::vector<Entry> entries;

  void clear() { entries.clear(); }
  const Entry* find(const std::string& site) const {
    for (const auto& e : entries)
      if (e.site == site) return &e;
    return nullptr;
  }
};

// Multi-head scaled dot-product attention with learned q/k/v/o projections.
// Queries and key/value sources may differ (cross-attention). Scaling is
// 1/sqrt(head_dim). The two attention products are tallied under the
// "attn_map" label segment; projections under "proj".
class MultiHeadAttention {
 public:
  MultiHeadAttention(ParamRegistry& reg, const std::string& prefix,
                     int64_t dim, int64_t heads, Rng& rng);

  // xq: [B, Nq, D], xkv: [B, Nk, D] -> [B, Nq, D].
  Tensor forward(const Tensor& xq, const Tensor& xkv,
                 AttnCapture* capture = nullptr, const std::string& site = "") const;

  Tensor self_forward(const Tensor& x,
                      AttnCapture* capture = nullptr, const std::string& site = "") const {
    return forward(x, x, capture, site);
  }

  int64_t dim() const { return dim_; }
  int64_t heads() const { return heads_; }
  int64_t head_dim() const { return head_dim_; }

 private:
  Linear q_, k_, v_, o_;
  int64_t dim_;
  int64_t heads_;
  int64_t head_dim_;
};

}  // namespace ptdx
