#include "ptdx/attention.hpp"

#include <cmath>
#include <stdexcept>

#include "ptdx/flops.hpp"

namespace ptdx {

MultiHeadAttention::MultiHeadAttention(ParamRegistry& reg, const std::string& prefix,
                                       int64_t dim, int64_t heads, Rng& rng)
    : q_(reg, prefix + ".q", dim, dim, rng),
      k_(reg, prefix + ".k", dim, dim, rng),
      v_(reg, prefix + ".v", dim, dim, rng),
      o_(reg, prefix + ".o", dim, dim, rng),
      dim_(dim),
      heads_(heads),
      head_dim_(dim / heads) {
  if (heads <= 0 || dim % heads != 0)
    throw std::invalid_argument("attention dim " + std::to_string(dim) +
                                " not divisible by heads " + std::to_string(heads));
}

namespace {

// [B, N, D] -> [B, H, N, head_dim]
Tensor split_heads(const Tensor& x, int64_t heads, int64_t head_dim) {
  const Shape& s = x.shape();
  Tensor r = reshape(x, {s[0], s[1], heads, head_dim});
  return permute(r, {0, 2, 1, 3});
}

}  // namespace

Tensor MultiHeadAttention::forward(const Tensor& xq, const Tensor& xkv,
                                   AttnCapture* capture, const std::string& site) const {
  if (xq.ndim() != 3 || xkv.ndim() != 3)
    throw std::invalid_argument("attention expects [batch, tokens, dim], got " +
                                shape_str(xq.shape()) + " and " + shape_str(xkv.shape()));
  if (xq.size(0) != xkv.size(0))
    throw std::invalid_argument("attention batch mismatch: " + shape_str(xq.shape()) +
                                " vs " + shape_str(xkv.shape()));
  if (xq.size(2) != dim_ || xkv.size(2) != dim_)
    throw std::invalid_argument("attention dim mismatch: expected " + std::to_string(dim_) +
                                ", got " + shape_str(xq.shape()) + " and " +
                                shape_str(xkv.shape()));
  const int64_t B = xq.size(0), Nq = xq.size(1), Nk = xkv.size(1);

  Tensor q, k, v;
  {
    FlopLabelGuard label("proj");
    q = split_heads(q_.forward(xq), heads_, head_dim_);
    k = split_heads(k_.forward(xkv), heads_, head_dim_);
    v = split_heads(v_.forward(xkv), heads_, head_dim_);
  }

  Tensor probs, ctx;
  {
    FlopLabelGuard label("attn_map");
    Tensor scores = scale(matmul(q, transpose_last2(k)), 1.0 / std::sqrt(double(head_dim_)));
    probs = softmax(scores, -1);
    ctx = matmul(probs, v);
  }

  if (capture != nullptr) {
    AttnCapture::Entry e;
    e.site = site;
    e.heads = heads_;
    e.nq = Nq;
    e.nk = Nk;
    e.probs.resize(heads_ * Nq * Nk);
    const auto& pd = probs.data();
    for (size_t i = 0; i < e.probs.size(); ++i) e.probs[i] = static_cast<float>(pd[i]);
    capture->entries.push_back(std::move(e));
  }

  Tensor merged = reshape(permute(ctx, {0, 2, 1, 3}), {B, Nq, dim_});
  FlopLabelGuard label("proj");
  return o_.forward(merged);
}

}  // namespace ptdx
