#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptdx/attention.hpp"
#include "ptdx/flops.hpp"
#include "ptdx/latent_grid.hpp"
#include "ptdx/model.hpp"

namespace ptdx {

// Attention-product cost of one block for one sample, in multiply-accumulate
// units summed over the two products of each attention (score map and
// weighted sum). The doubled arithmetic-flop convention is a rendering
// concern; see render_flops_table. ratio_vs_global compares the proxy stack
// against a dense self-attention over the same tokens.
struct FlopsReport {
  int64_t n = 0, d = 0;
  CompressionRatio ratio;
  double giim_sa = 0;      // self-attention over the n/p proxy tokens
  double giim_inject = 0;  // grid queries against proxy keys
  double tcm_wsa = 0;      // windowed self-attention, n/p windows of p tokens
  double tcm_swsa = 0;     // the shifted pass, same geometry
  double global_sa = 0;    // dense baseline over all n tokens
  double ratio_vs_global = 0;

  double proxy_total() const { return giim_sa + giim_inject + tcm_wsa + tcm_swsa; }
};

// Dense self-attention cost: 2*n^2*d multiply-accumulates (score map plus
// weighted sum; softmax's lower-order term excluded).
double attention_flops_global(int64_t n, int64_t d);

// Closed forms for the proxy attention stack with window volume p:
//   giim_sa     = 2*n^2*d / p^2
//   giim_inject = 2*n^2*d / p
//   tcm_wsa = tcm_swsa = 2*n*p*d
//   ratio_vs_global = 1/p^2 + 1/p + 2p/n
// p must divide n.
FlopsReport ptdit_attention_flops(int64_t n, int64_t d, CompressionRatio ratio);

// Normalizes the "attn_map" tallies of a counted model run to per-layer,
// per-sample counts, site by site, for direct comparison against the closed
// forms (equality is exact under the shared multiply-accumulate convention).
// When the run used the proxy path the dense baseline is filled in
// analytically so ratio_vs_global stays defined.
FlopsReport measured_attention_flops(const FlopCounter& counter, int64_t n, int64_t d,
                                     CompressionRatio ratio, int64_t batch, int64_t layers);

// Coarse byte model: exact parameter bytes plus an inventory-based estimate
// of retained activations and attention maps. batch 0 prices the parameters
// alone. Monotone nondecreasing in both n_tokens and batch.
struct MemoryEstimate {
  double param_bytes = 0;
  double activation_bytes = 0;
  double attention_map_bytes = 0;

  double total_bytes() const { return param_bytes + activation_bytes + attention_map_bytes; }
};
MemoryEstimate memory_estimate(const ModelConfig& cfg, int64_t n_tokens, int64_t batch);

// Pairwise similarity of attention rows inside each spatial window. Columns
// are split per window into a neighborhood (every key whose window lies
// within `radius` window steps, Chebyshev) and the distant remainder; the two
// sets partition the keys. For each window the mean pairwise cosine among its
// rows is computed on each restriction, averaged over heads. A pair with a
// zero-norm restriction contributes 0; a single-row window reports 1.
struct RedundancyReport {
  int64_t grid = 0;  // token grid side; maps must cover grid*grid tokens
  int64_t window_h = 0, window_w = 0;
  int64_t radius = 1;
  std::vector<double> window_neighbor;  // row-major over the window grid
  std::vector<double> window_distant;
  double neighbor_mean = 0;
  double distant_mean = 0;
};
RedundancyReport redundancy_profile(const AttnCapture::Entry& maps, int64_t window_h,
                                    int64_t window_w, int64_t radius = 1);

// Profiler map container: round trips every captured entry bit-exactly.
void save_attention_maps(const std::string& path, const AttnCapture& capture);
AttnCapture load_attention_maps(const std::string& path);

// Tab-delimited table, one row per report, with both multiply-accumulate and
// doubled arithmetic-flop columns. The largest schedule step carries a note:
// the 2.3% sometimes quoted for it is not what the closed form yields, so the
// table shows the formula value.
std::string render_flops_table(const std::vector<FlopsReport>& rows);

// Key-value lines for the byte and redundancy reports.
std::string render_memory_estimate(const MemoryEstimate& est);
std::string render_redundancy_report(const RedundancyReport& rep);

}  // namespace ptdx
