#include "ptdx/model.hpp"

#include <cmath>
#include <stdexcept>

#include "ptdx/flops.hpp"

namespace ptdx {

const char* conditioning_mode_name(ConditioningMode mode) {
  switch (mode) {
    case ConditioningMode::ClassLabel: return "class";
    case ConditioningMode::TextStub: return "text";
  }
  throw std::logic_error("unknown conditioning mode");
}

ConditioningMode conditioning_mode_from_name(const std::string& name) {
  if (name == "class") return ConditioningMode::ClassLabel;
  if (name == "text") return ConditioningMode::TextStub;
  throw std::invalid_argument("unknown conditioning mode: " + name +
                              " (expected class or text)");
}

void ModelConfig::validate() const {
  if (layers <= 0) throw std::invalid_argument("config: layers must be positive");
  if (hidden_dim <= 0 || heads <= 0 || hidden_dim % heads != 0)
    throw std::invalid_argument("config: hidden_dim " + std::to_string(hidden_dim) +
                                " not divisible by heads " + std::to_string(heads));
  if (patch_size <= 0) throw std::invalid_argument("config: patch_size must be positive");
  if (in_channels <= 0) throw std::invalid_argument("config: in_channels must be positive");
  if (ratio.pf <= 0 || ratio.ph <= 0 || ratio.pw <= 0)
    throw std::invalid_argument("config: compression ratio must be positive");
  if (conditioning == ConditioningMode::ClassLabel && num_classes <= 0)
    throw std::invalid_argument("config: num_classes must be positive in class mode");
  if (conditioning == ConditioningMode::TextStub) {
    if (text_vocab < 2) throw std::invalid_argument("config: text_vocab must be at least 2");
    if (text_token_len < 0) throw std::invalid_argument("config: text_token_len must be >= 0");
    if (text_dim <= 0) throw std::invalid_argument("config: text_dim must be positive");
  }
  if (global_attention_reference && (giim_enabled || !tcm_enabled)) {
    // The reference path replaces both modules wholesale; mixed wiring would
    // not correspond to any comparison we report.
  }
}

ModelConfig ModelConfig::preset(const std::string& name) {
  ModelConfig c;
  c.preset_name = name;
  if (name == "tiny") {
    c.layers = 2; c.hidden_dim = 64; c.heads = 4;
    c.in_channels = 1;
    c.conditioning = ConditioningMode::ClassLabel;
    c.num_classes = 10;
  } else if (name == "s-class") {
    c.layers = 10; c.hidden_dim = 288; c.heads = 6;
    c.in_channels = 4;
    c.conditioning = ConditioningMode::ClassLabel;
    c.num_classes = 1000;
  } else if (name == "b") {
    c.layers = 12; c.hidden_dim = 640; c.heads = 10;
    c.in_channels = 4;
    c.conditioning = ConditioningMode::TextStub;
  } else if (name == "l") {
    c.layers = 28; c.hidden_dim = 864; c.heads = 12;
    c.in_channels = 4;
    c.conditioning = ConditioningMode::TextStub;
  } else if (name == "xl") {
    c.layers = 28; c.hidden_dim = 1152; c.heads = 16;
    c.in_channels = 4;
    c.conditioning = ConditioningMode::TextStub;
  } else if (name == "h") {
    c.layers = 30; c.hidden_dim = 1440; c.heads = 20;
    c.in_channels = 4;
    c.conditioning = ConditioningMode::TextStub;
  } else {
    throw std::invalid_argument("unknown preset: " + name +
                                " (expected tiny, s-class, b, l, xl, h)");
  }
  return c;
}

std::vector<std::string> ModelConfig::preset_names() {
  return {"tiny", "s-class", "b", "l", "xl", "h"};
}

CompressionRatio ratio_for_resolution(int64_t resolution, bool video) {
  const int64_t pf = video ? 4 : 1;
  switch (resolution) {
    case 256: return {pf, 2, 2};
    case 512: return {pf, 4, 4};
    case 1024: return {pf, 8, 8};
    case 2048: return {pf, 16, 16};
    default:
      throw std::invalid_argument("no window schedule entry for resolution " +
                                  std::to_string(resolution) +
                                  " (known: 256, 512, 1024, 2048)");
  }
}

Conditioning Conditioning::for_class(std::vector<int64_t> labels) {
  Conditioning c;
  c.labels = std::move(labels);
  return c;
}

Conditioning Conditioning::for_text(std::vector<std::vector<int64_t>> ids) {
  Conditioning c;
  c.text_ids = std::move(ids);
  return c;
}

std::vector<int64_t> tokenize_stub(const std::string& prompt, int64_t vocab, int64_t token_len) {
  std::vector<int64_t> ids;
  size_t i = 0;
  while (i < prompt.size() && int64_t(ids.size()) < token_len) {
    while (i < prompt.size() && std::isspace(static_cast<unsigned char>(prompt[i]))) ++i;
    size_t j = i;
    while (j < prompt.size() && !std::isspace(static_cast<unsigned char>(prompt[j]))) ++j;
    if (j > i) {
      uint64_t hash = 1469598103934665603ull;
      for (size_t k = i; k < j; ++k) {
        hash ^= static_cast<unsigned char>(prompt[k]);
        hash *= 1099511628211ull;
      }
      ids.push_back(1 + int64_t(hash % uint64_t(vocab - 1)));
    }
    i = j;
  }
  ids.resize(token_len, 0);
  return ids;
}

namespace {
constexpr uint64_t kTextEmbedSeed = 0x7e57c0de;
}

Tensor embed_text_stub(const std::vector<std::vector<int64_t>>& ids, int64_t vocab,
                       int64_t token_len, int64_t text_dim) {
  const int64_t B = int64_t(ids.size());
  Tensor out = Tensor::zeros({B, token_len, text_dim});
  auto& data = out.mutable_data();
  for (int64_t b = 0; b < B; ++b) {
    if (int64_t(ids[b].size()) != token_len)
      throw std::invalid_argument("text ids row " + std::to_string(b) + " has length " +
                                  std::to_string(ids[b].size()) + ", expected " +
                                  std::to_string(token_len));
    for (int64_t l = 0; l < token_len; ++l) {
      const int64_t id = ids[b][l];
      if (id < 0 || id >= vocab)
        throw std::invalid_argument("text id " + std::to_string(id) +
                                    " out of vocab range [0," + std::to_string(vocab) + ")");
      if (id == 0) continue;  // pad embeds to zeros
      Rng rng(derive_seed(kTextEmbedSeed, uint64_t(id)));
      double* row = data.data() + (b * token_len + l) * text_dim;
      for (int64_t d = 0; d < text_dim; ++d) row[d] = rng.normal();
    }
  }
  return out;
}

namespace {

// x * (1 + scale) + shift, with shift/scale [B, 1, D] broadcasting over tokens.
Tensor modulate(const Tensor& x, const Tensor& shift, const Tensor& scale) {
  return add(mul(x, add_scalar(scale, 1.0)), shift);
}

// All block and final norms are non-affine; the modulation supplies the scale
// and shift instead.
Tensor pre_norm(const Tensor& x) { return layernorm(x, Tensor(), Tensor(), 1e-6); }

Tensor chunk_bd(const Tensor& m, int64_t index, int64_t d) {
  // [B, k*D] -> [B, 1, D] slice number `index`.
  Tensor s = slice_last(m, index * d, d);
  return reshape(s, {s.size(0), 1, d});
}

}  // namespace

struct PtDit::Block {
  std::optional<Giim> giim;
  std::optional<Tcm> tcm;
  std::optional<MultiHeadAttention> global_sa;
  MultiHeadAttention cond_attn;
  Mlp mlp;
  std::optional<Linear> ada;  // class mode, zero-init
  Tensor ada_table;           // text mode [9, D], zero-init

  Block(ParamRegistry& reg, const ModelConfig& cfg, const std::string& prefix, Rng& rng,
        uint64_t giim_seed)
      : cond_attn(reg, prefix + ".cond_attn", cfg.hidden_dim, cfg.heads, rng),
        mlp(reg, prefix + ".mlp", cfg.hidden_dim, 4 * cfg.hidden_dim, rng) {
    if (cfg.global_attention_reference) {
      global_sa.emplace(reg, prefix + ".sa", cfg.hidden_dim, cfg.heads, rng);
    } else {
      if (cfg.giim_enabled)
        giim.emplace(reg, prefix + ".giim", cfg.hidden_dim, cfg.heads, cfg.ratio,
                     cfg.proxy_strategy, cfg.injection_strategy, rng, giim_seed);
      if (cfg.tcm_enabled)
        tcm.emplace(reg, prefix + ".tcm", cfg.hidden_dim, cfg.heads, cfg.ratio, rng,
                    cfg.swsa_enabled);
    }
    if (cfg.conditioning == ConditioningMode::ClassLabel)
      ada.emplace(reg, prefix + ".ada", cfg.hidden_dim, 9 * cfg.hidden_dim, rng, Init::Zeros);
    else
      ada_table = reg.create(prefix + ".ada_table", {9, cfg.hidden_dim}, Init::Zeros, rng);
  }

  // mod: [B, 9D] modulation vector; groups of (shift, scale, gate) for the
  // attention, conditioning, and MLP sublayers in that order.
  Tensor forward(const Tensor& grid, const Tensor& mod, const Tensor& cond_tokens,
                 AttnCapture* capture) const {
    const Shape& s = grid.shape();
    const int64_t f = s[1], h = s[2], w = s[3], D = s[4];

    Tensor x = grid;
    if (giim.has_value()) x = giim->forward(x, capture);

    Tensor tokens = grid_to_tokens(x);
    const Tensor a_shift = chunk_bd(mod, 0, D), a_scale = chunk_bd(mod, 1, D),
                 a_gate = chunk_bd(mod, 2, D);
    if (tcm.has_value()) {
      // One modulation group shared by the window pass and the shifted pass,
      // each applied pre-norm with its own residual.
      Tensor hmod = modulate(pre_norm(tokens), a_shift, a_scale);
      Tensor core = grid_to_tokens(tcm->window_core(tokens_to_grid(hmod, f, h, w), capture));
      tokens = add(tokens, mul(a_gate, core));
      if (tcm->shifted_pass_enabled()) {
        Tensor hmod2 = modulate(pre_norm(tokens), a_shift, a_scale);
        Tensor core2 = grid_to_tokens(tcm->shifted_core(tokens_to_grid(hmod2, f, h, w), capture));
        tokens = add(tokens, mul(a_gate, core2));
      }
    } else if (global_sa.has_value()) {
      Tensor hmod = modulate(pre_norm(tokens), a_shift, a_scale);
      FlopLabelGuard label("global_sa");
      Tensor sa = global_sa->self_forward(hmod, capture, "global_sa");
      tokens = add(tokens, mul(a_gate, sa));
    }

    if (cond_tokens.ndim() == 3 && cond_tokens.size(1) > 0) {
      Tensor hmod = modulate(pre_norm(tokens),
                             chunk_bd(mod, 3, D), chunk_bd(mod, 4, D));
      FlopLabelGuard label("cond_attn");
      Tensor ca = cond_attn.forward(hmod, cond_tokens, capture, "cond_attn");
      tokens = add(tokens, mul(chunk_bd(mod, 5, D), ca));
    }

    {
      Tensor hmod = modulate(pre_norm(tokens),
                             chunk_bd(mod, 6, D), chunk_bd(mod, 7, D));
      FlopLabelGuard label("mlp");
      tokens = add(tokens, mul(chunk_bd(mod, 8, D), mlp.forward(hmod)));
    }
    return tokens_to_grid(tokens, f, h, w);
  }
};

PtDit::PtDit(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(derive_seed(init_seed, 0));
  const int64_t D = cfg_.hidden_dim;
  const int64_t patch_in = cfg_.in_channels * cfg_.patch_size * cfg_.patch_size;

  patch_.emplace(reg_, "patch", patch_in, D, rng);
  if (cfg_.conditioning == ConditioningMode::ClassLabel) {
    tmlp_fc1_.emplace(reg_, "t_mlp.fc1", kTimestepFeatureDim, D, rng);
    tmlp_fc2_.emplace(reg_, "t_mlp.fc2", D, D, rng);
    class_table_ = reg_.create("class_table", {cfg_.num_classes + 1, D},
                               Init::TruncNormal02, rng);
  } else {
    text_proj_.emplace(reg_, "text_proj", cfg_.text_dim, D, rng);
    ada_shared_.emplace(reg_, "ada_shared", kTimestepFeatureDim, 9 * D, rng, Init::Zeros);
  }
  for (int64_t i = 0; i < cfg_.layers; ++i)
    blocks_.push_back(std::make_unique<Block>(reg_, cfg_, "block" + std::to_string(i), rng,
                                              derive_seed(init_seed, 1000 + uint64_t(i))));
  if (cfg_.conditioning == ConditioningMode::ClassLabel) {
    final_ada_.emplace(reg_, "final.ada", D, 2 * D, rng, Init::Zeros);
  } else {
    final_ada_t_.emplace(reg_, "final.ada_t", kTimestepFeatureDim, 2 * D, rng, Init::Zeros);
    final_ada_table_ = reg_.create("final.ada_table", {2, D}, Init::Zeros, rng);
  }
  final_proj_.emplace(reg_, "final.proj", D, patch_in, rng, Init::Zeros);
}

PtDit::~PtDit() = default;

Tensor timestep_features(const std::vector<int64_t>& timesteps) {
  const int64_t B = int64_t(timesteps.size());
  const int64_t half = kTimestepFeatureDim / 2;
  Tensor out = Tensor::zeros({B, kTimestepFeatureDim});
  auto& data = out.mutable_data();
  for (int64_t b = 0; b < B; ++b) {
    const double t = double(timesteps[b]);
    for (int64_t k = 0; k < half; ++k) {
      const double freq = std::exp(-std::log(10000.0) * double(k) / double(half));
      data[b * kTimestepFeatureDim + k] = std::sin(t * freq);
      data[b * kTimestepFeatureDim + half + k] = std::cos(t * freq);
    }
  }
  return out;
}

Tensor positional_encoding(int64_t f, int64_t h, int64_t w, int64_t dim) {
  const int64_t D = dim;
  // Equal shares of 2*(D/6) channels per axis in (f, h, w) order; any
  // remainder channels stay zero.
  const int64_t na = D / 6;
  Tensor out = Tensor::zeros({1, f, h, w, D});
  auto& data = out.mutable_data();
  const int64_t extents[3] = {f, h, w};
  for (int64_t fi = 0; fi < f; ++fi)
    for (int64_t hi = 0; hi < h; ++hi)
      for (int64_t wi = 0; wi < w; ++wi) {
        const int64_t pos[3] = {fi, hi, wi};
        double* row = data.data() + (((fi * h) + hi) * w + wi) * D;
        for (int64_t axis = 0; axis < 3; ++axis) {
          (void)extents;
          double* seg = row + axis * 2 * na;
          for (int64_t k = 0; k < na; ++k) {
            const double freq = std::pow(10000.0, -double(k) / double(na));
            seg[2 * k] = std::sin(double(pos[axis]) * freq);
            seg[2 * k + 1] = std::cos(double(pos[axis]) * freq);
          }
        }
      }
  return out;
}

Tensor PtDit::conditioning_embedding(const std::vector<int64_t>& timesteps,
                                     const Conditioning& cond) const {
  const int64_t B = int64_t(timesteps.size());
  if (int64_t(cond.labels.size()) != B)
    throw std::invalid_argument("class-mode conditioning expects " + std::to_string(B) +
                                " labels, got " + std::to_string(cond.labels.size()));
  for (int64_t lab : cond.labels)
    if (lab < 0 || lab > cfg_.num_classes)
      throw std::invalid_argument("class label " + std::to_string(lab) +
                                  " outside [0," + std::to_string(cfg_.num_classes) +
                                  "] (the top index is the null row)");
  Tensor t_emb = tmlp_fc2_->forward(silu(tmlp_fc1_->forward(timestep_features(timesteps))));
  Tensor c_emb = embedding_lookup(class_table_, cond.labels);
  return add(t_emb, c_emb);
}

Tensor PtDit::conditioning_tokens(const Conditioning& cond, int64_t batch) const {
  if (int64_t(cond.text_ids.size()) != batch)
    throw std::invalid_argument("text-mode conditioning expects " + std::to_string(batch) +
                                " id rows, got " + std::to_string(cond.text_ids.size()));
  if (cfg_.text_token_len == 0) return Tensor();
  Tensor feats = embed_text_stub(cond.text_ids, cfg_.text_vocab, cfg_.text_token_len,
                                 cfg_.text_dim);
  FlopLabelGuard label("t_cond");
  return text_proj_->forward(feats);
}

Tensor PtDit::forward(const Tensor& latent, const std::vector<int64_t>& timesteps,
                      const Conditioning& cond, AttnCapture* capture,
                      int64_t capture_layer) const {
  if (latent.ndim() != 5)
    throw std::invalid_argument("latent must be [batch, channels, frames, height, width], got " +
                                shape_str(latent.shape()));
  const Shape& s = latent.shape();
  const int64_t B = s[0], C = s[1], F = s[2], H = s[3], W = s[4];
  if (C != cfg_.in_channels)
    throw std::invalid_argument("latent has " + std::to_string(C) + " channels, config expects " +
                                std::to_string(cfg_.in_channels));
  const int64_t ps = cfg_.patch_size;
  if (H % ps != 0 || W % ps != 0)
    throw std::invalid_argument("latent extent " + std::to_string(H) + "x" + std::to_string(W) +
                                " not divisible by patch size " + std::to_string(ps));
  if (int64_t(timesteps.size()) != B)
    throw std::invalid_argument("expected " + std::to_string(B) + " timesteps, got " +
                                std::to_string(timesteps.size()));
  const bool class_mode = cfg_.conditioning == ConditioningMode::ClassLabel;
  if (class_mode && !cond.text_ids.empty())
    throw std::invalid_argument("conditioning mode mismatch: model is class-conditional "
                                "but text ids were provided");
  if (!class_mode && !cond.labels.empty())
    throw std::invalid_argument("conditioning mode mismatch: model is text-conditional "
                                "but class labels were provided");

  const int64_t f = F, h = H / ps, w = W / ps, D = cfg_.hidden_dim;

  // Patchify: [B,C,F,H,W] -> [B,f,h,w,C*ps*ps] -> project to D.
  Tensor x;
  {
    FlopLabelGuard label("patch");
    Tensor split = reshape(latent, {B, C, F, h, ps, w, ps});
    Tensor arranged = permute(split, {0, 2, 3, 5, 1, 4, 6});
    x = patch_->forward(reshape(arranged, {B, f, h, w, C * ps * ps}));
  }
  x = add(x, positional_encoding(f, h, w, D));

  // Conditioning.
  Tensor mod_base, silu_emb, cond_tokens, t_feat;
  if (class_mode) {
    FlopLabelGuard label("t_cond");
    Tensor emb = conditioning_embedding(timesteps, cond);
    silu_emb = silu(emb);
    cond_tokens = reshape(emb, {B, 1, D});
  } else {
    t_feat = timestep_features(timesteps);
    {
      FlopLabelGuard label("t_cond");
      mod_base = ada_shared_->forward(t_feat);
    }
    cond_tokens = conditioning_tokens(cond, B);
  }

  for (size_t i = 0; i < blocks_.size(); ++i) {
    Tensor mod;
    if (class_mode) {
      FlopLabelGuard label("t_cond");
      mod = blocks_[i]->ada->forward(silu_emb);
    } else {
      mod = add(mod_base, reshape(blocks_[i]->ada_table, {1, 9 * D}));
    }
    AttnCapture* block_capture =
        (capture != nullptr && (capture_layer < 0 || capture_layer == int64_t(i))) ? capture
                                                                                  : nullptr;
    x = blocks_[i]->forward(x, mod, cond_tokens, block_capture);
  }

  // Final modulated projection back to patch pixels.
  Tensor tokens = grid_to_tokens(x);
  Tensor fm;
  {
    FlopLabelGuard label("final");
    if (class_mode)
      fm = final_ada_->forward(silu_emb);
    else
      fm = add(final_ada_t_->forward(t_feat), reshape(final_ada_table_, {1, 2 * D}));
  }
  Tensor shift = chunk_bd(fm, 0, D), scale = chunk_bd(fm, 1, D);
  Tensor hmod = modulate(pre_norm(tokens), shift, scale);
  Tensor out_tokens;
  {
    FlopLabelGuard label("final");
    out_tokens = final_proj_->forward(hmod);
  }

  // Un-patchify back to the latent shape.
  Tensor arranged = reshape(out_tokens, {B, f, h, w, C, ps, ps});
  Tensor split = permute(arranged, {0, 4, 1, 2, 5, 3, 6});
  return reshape(split, {B, C, F, H, W});
}

std::vector<LayerInfo> PtDit::layer_inventory() const {
  std::vector<LayerInfo> info;
  auto count_prefix = [&](const std::string& prefix) {
    int64_t n = 0;
    for (const auto& p : reg_.params())
      if (p->name.rfind(prefix, 0) == 0) n += p->tensor.numel();
    return n;
  };
  auto ratio_str = [&] {
    return "(" + std::to_string(cfg_.ratio.pf) + "," + std::to_string(cfg_.ratio.ph) + "," +
           std::to_string(cfg_.ratio.pw) + ")";
  };

  info.push_back({-1, "patch_embed",
                  "in=" + std::to_string(cfg_.in_channels) + " patch=" +
                      std::to_string(cfg_.patch_size),
                  count_prefix("patch.")});
  if (cfg_.conditioning == ConditioningMode::ClassLabel)
    info.push_back({-1, "class_conditioning",
                    "classes=" + std::to_string(cfg_.num_classes) + "+null",
                    count_prefix("t_mlp.") + count_prefix("class_table")});
  else
    info.push_back({-1, "text_conditioning",
                    "vocab=" + std::to_string(cfg_.text_vocab) + " len=" +
                        std::to_string(cfg_.text_token_len),
                    count_prefix("text_proj.") + count_prefix("ada_shared.")});

  for (int64_t i = 0; i < cfg_.layers; ++i) {
    const std::string bp = "block" + std::to_string(i) + ".";
    const auto& b = *blocks_[i];
    if (b.global_sa.has_value())
      info.push_back({i, "global_self_attention", "dense baseline", count_prefix(bp + "sa.")});
    if (b.giim.has_value())
      info.push_back({i, "giim",
                      std::string("proxy=") + proxy_strategy_name(cfg_.proxy_strategy) +
                          " injection=" + injection_strategy_name(cfg_.injection_strategy) +
                          " ratio=" + ratio_str(),
                      count_prefix(bp + "giim.")});
    if (b.tcm.has_value()) {
      info.push_back({i, "tcm_wsa", "ratio=" + ratio_str(), count_prefix(bp + "tcm.wsa.")});
      if (b.tcm->shifted_pass_enabled())
        info.push_back({i, "tcm_swsa", "half-window cyclic shift",
                        count_prefix(bp + "tcm.swsa.")});
    }
    info.push_back({i, "cond_attn", "cross-attention to conditioning tokens",
                    count_prefix(bp + "cond_attn.")});
    info.push_back({i, "mlp", "ratio 4", count_prefix(bp + "mlp.")});
    info.push_back({i, "ada_modulation",
                    cfg_.conditioning == ConditioningMode::ClassLabel
                        ? "per-block 9D projection"
                        : "shared 9D projection + per-block table",
                    count_prefix(bp + "ada")});
  }
  info.push_back({-1, "final_layer", "modulated projection to patch pixels",
                  count_prefix("final.")});
  return info;
}

int64_t PtDit::param_count_analytic(const ModelConfig& cfg) {
  const int64_t D = cfg.hidden_dim;
  const int64_t patch_in = cfg.in_channels * cfg.patch_size * cfg.patch_size;
  const int64_t mha = 4 * (D * D + D);
  const int64_t p = cfg.ratio.window_tokens();

  int64_t block = 0;
  if (cfg.global_attention_reference) {
    block += mha;
  } else {
    if (cfg.giim_enabled) {
      block += mha;               // proxy self-attention
      block += D * D + D;         // zero-init gate
      switch (cfg.injection_strategy) {
        case InjectionStrategy::CrossAttention: block += mha; break;
        case InjectionStrategy::Interpolate: break;
        case InjectionStrategy::LinearMap: block += D * (p * D) + p * D; break;
      }
    }
    if (cfg.tcm_enabled) {
      block += mha;
      if (cfg.swsa_enabled) block += mha;
    }
  }
  block += mha;                            // conditioning attention
  block += D * 4 * D + 4 * D + 4 * D * D + D;  // mlp
  if (cfg.conditioning == ConditioningMode::ClassLabel)
    block += D * 9 * D + 9 * D;            // per-block modulation projection
  else
    block += 9 * D;                        // per-block modulation table

  int64_t shared = patch_in * D + D;       // patch embed
  if (cfg.conditioning == ConditioningMode::ClassLabel) {
    shared += kTimestepFeatureDim * D + D + D * D + D;  // timestep MLP
    shared += (cfg.num_classes + 1) * D;                // class table + null row
    shared += D * 2 * D + 2 * D;                        // final modulation
  } else {
    shared += cfg.text_dim * D + D;                     // text projection
    shared += kTimestepFeatureDim * 9 * D + 9 * D;      // shared modulation
    shared += kTimestepFeatureDim * 2 * D + 2 * D;      // final modulation
    shared += 2 * D;                                    // final modulation table
  }
  shared += D * patch_in + patch_in;       // final projection

  return cfg.layers * block + shared;
}

}  // namespace ptdx
