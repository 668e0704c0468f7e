#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ptdx/attention.hpp"
#include "ptdx/giim.hpp"
#include "ptdx/latent_grid.hpp"
#include "ptdx/nn.hpp"
#include "ptdx/tcm.hpp"

namespace ptdx {

enum class ConditioningMode { ClassLabel, TextStub };

const char* conditioning_mode_name(ConditioningMode mode);
ConditioningMode conditioning_mode_from_name(const std::string& name);

struct ModelConfig {
  std::string preset_name = "custom";
  int64_t layers = 2;
  int64_t hidden_dim = 64;
  int64_t heads = 4;
  int64_t patch_size = 2;
  int64_t in_channels = 1;
  CompressionRatio ratio{1, 2, 2};
  ProxyStrategy proxy_strategy = ProxyStrategy::Average;
  InjectionStrategy injection_strategy = InjectionStrategy::CrossAttention;
  bool giim_enabled = true;
  bool tcm_enabled = true;
  bool swsa_enabled = true;
  // Swaps GIIM+TCM for one full self-attention per block: the dense baseline
  // used for cost comparison and for profiling square attention maps.
  bool global_attention_reference = false;
  ConditioningMode conditioning = ConditioningMode::ClassLabel;
  int64_t num_classes = 10;
  int64_t text_vocab = 4096;
  int64_t text_token_len = 120;
  int64_t text_dim = 1024;

  void validate() const;
  // tiny, s-class, b, l, xl, h
  static ModelConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();
};

// Window geometry schedule keyed by image resolution: 256 -> (1,2,2),
// 512 -> (1,4,4), 1024 -> (1,8,8), 2048 -> (1,16,16); frame ratio 4 when
// frames > 1.
CompressionRatio ratio_for_resolution(int64_t resolution, bool video = false);

// Per-sample conditioning. Class mode uses `labels` (label == num_classes is
// the learned null row used for guidance dropout); text mode uses `text_ids`
// rows of token ids (all-pad rows condition on nothing).
struct Conditioning {
  std::vector<int64_t> labels;
  std::vector<std::vector<int64_t>> text_ids;

  static Conditioning for_class(std::vector<int64_t> labels);
  static Conditioning for_text(std::vector<std::vector<int64_t>> ids);
};

// Deterministic stand-in for a frozen text encoder: FNV-1a word hashing into
// [1, vocab) and a seeded pseudo-embedding per id; pad id 0 embeds to zeros.
std::vector<int64_t> tokenize_stub(const std::string& prompt, int64_t vocab, int64_t token_len);
Tensor embed_text_stub(const std::vector<std::vector<int64_t>>& ids, int64_t vocab,
                       int64_t token_len, int64_t text_dim);

constexpr int64_t kTimestepFeatureDim = 256;

// [B, 256]: 128 sine then 128 cosine channels, frequency exp(-ln 1e4 * k/128).
Tensor timestep_features(const std::vector<int64_t>& timesteps);

// Constant sinusoidal grid encoding [1, f, h, w, dim]: the frame, height and
// width axes each get 2*(dim/6) channels (sin/cos interleaved); remainder
// channels stay zero.
Tensor positional_encoding(int64_t f, int64_t h, int64_t w, int64_t dim);

// One sublayer row of the structural inventory used to verify ablation
// wirings without training.
struct LayerInfo {
  int64_t block = -1;  // -1 for shared/model-level entries
  std::string sublayer;
  std::string detail;
  int64_t param_elements = 0;
};

class PtDit {
 public:
  PtDit(const ModelConfig& cfg, uint64_t init_seed);
  ~PtDit();

  // latent: [B, C, F, H, W]; timesteps: one integer per batch element.
  // Returns the v-prediction, same shape as the input. When capture is given,
  // capture_layer selects which block records its maps (-1 = every block).
  Tensor forward(const Tensor& latent, const std::vector<int64_t>& timesteps,
                 const Conditioning& cond, AttnCapture* capture = nullptr,
                 int64_t capture_layer = -1) const;

  const ModelConfig& config() const { return cfg_; }
  ParamRegistry& params() { return reg_; }
  const ParamRegistry& params() const { return reg_; }
  int64_t param_count() const { return reg_.total_elements(); }

  std::vector<LayerInfo> layer_inventory() const;

  static int64_t param_count_analytic(const ModelConfig& cfg);

 private:
  struct Block;

  Tensor conditioning_embedding(const std::vector<int64_t>& timesteps,
                                const Conditioning& cond) const;  // class mode [B, D]
  Tensor conditioning_tokens(const Conditioning& cond, int64_t batch) const;  // [B, L, D]

  ModelConfig cfg_;
  ParamRegistry reg_;
  std::optional<Linear> patch_;
  std::optional<Linear> tmlp_fc1_, tmlp_fc2_;   // class mode timestep MLP
  Tensor class_table_;                          // class mode [num_classes+1, D]
  std::optional<Linear> text_proj_;             // text mode [text_dim -> D]
  std::optional<Linear> ada_shared_;            // text mode [256 -> 9D], zero-init
  std::vector<std::unique_ptr<Block>> blocks_;
  std::optional<Linear> final_ada_;             // class mode [D -> 2D], zero-init
  std::optional<Linear> final_ada_t_;           // text mode [256 -> 2D], zero-init
  Tensor final_ada_table_;                      // text mode [2, D], zero-init
  std::optional<Linear> final_proj_;            // zero-init
};

}  // namespace ptdx
