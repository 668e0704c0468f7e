#include "ptdx/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "ptdx/io.hpp"

namespace ptdx {

namespace {

void require_positive(int64_t n, int64_t d) {
  if (n < 1 || d < 1) throw std::invalid_argument("token count and width must be at least 1");
}

double site_total(const FlopCounter& c, std::string_view site, int64_t batch, int64_t layers) {
  return double(c.total_matching({site, "attn_map"})) / double(batch * layers);
}

std::string format_count(double macs) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.0f", macs);
  return buf;
}

}  // namespace

double attention_flops_global(int64_t n, int64_t d) {
  require_positive(n, d);
  return 2.0 * double(n) * double(n) * double(d);
}

FlopsReport ptdit_attention_flops(int64_t n, int64_t d, CompressionRatio ratio) {
  require_positive(n, d);
  const int64_t p = ratio.window_tokens();
  if (p < 1 || n % p != 0)
    throw std::invalid_argument("window volume " + std::to_string(p) +
                                " does not divide token count " + std::to_string(n));
  FlopsReport r;
  r.n = n;
  r.d = d;
  r.ratio = ratio;
  const double n2d = 2.0 * double(n) * double(n) * double(d);
  r.giim_sa = n2d / double(p * p);
  r.giim_inject = n2d / double(p);
  r.tcm_wsa = 2.0 * double(n) * double(p) * double(d);
  r.tcm_swsa = r.tcm_wsa;
  r.global_sa = attention_flops_global(n, d);
  r.ratio_vs_global = r.proxy_total() / r.global_sa;
  return r;
}

FlopsReport measured_attention_flops(const FlopCounter& counter, int64_t n, int64_t d,
                                     CompressionRatio ratio, int64_t batch, int64_t layers) {
  require_positive(n, d);
  if (batch < 1 || layers < 1)
    throw std::invalid_argument("batch and layer counts must be at least 1");
  FlopsReport r;
  r.n = n;
  r.d = d;
  r.ratio = ratio;
  r.giim_sa = site_total(counter, "giim_sa", batch, layers);
  r.giim_inject = site_total(counter, "giim_inject", batch, layers);
  r.tcm_wsa = site_total(counter, "tcm_wsa", batch, layers);
  r.tcm_swsa = site_total(counter, "tcm_swsa", batch, layers);
  r.global_sa = site_total(counter, "global_sa", batch, layers);
  if (r.global_sa == 0.0) r.global_sa = attention_flops_global(n, d);
  r.ratio_vs_global = r.proxy_total() / r.global_sa;
  return r;
}

MemoryEstimate memory_estimate(const ModelConfig& cfg, int64_t n_tokens, int64_t batch) {
  cfg.validate();
  if (n_tokens < 1) throw std::invalid_argument("token count must be at least 1");
  if (batch < 0) throw std::invalid_argument("batch must be nonnegative");

  constexpr double kBytes = 8.0;
  MemoryEstimate est;
  est.param_bytes = double(PtDit::param_count_analytic(cfg)) * kBytes;
  if (batch == 0) return est;

  const double n = double(n_tokens);
  const double d = double(cfg.hidden_dim);
  const double heads = double(cfg.heads);
  const double layers = double(cfg.layers);
  const double cond = cfg.conditioning == ConditioningMode::ClassLabel
                          ? 1.0
                          : double(cfg.text_token_len);

  // Attention-map entries per head per block.
  double map_entries = n * cond;  // conditioning attention
  double act_block = 0;           // retained elements per block per sample
  if (cfg.global_attention_reference) {
    map_entries += n * n;
    act_block += 2 * n * d + 4 * n * d;  // residual in/out + q,k,v,out
  } else {
    const int64_t p = cfg.ratio.window_tokens();
    if (n_tokens % p != 0)
      throw std::invalid_argument("window volume does not divide the token count");
    const double m = n / double(p);
    if (cfg.giim_enabled) {
      map_entries += m * m + n * m;
      act_block += 2 * n * d + 4 * m * d + (2 * n + 2 * m) * d;
    }
    if (cfg.tcm_enabled) {
      map_entries += n * double(p);
      act_block += 2 * n * d + 4 * n * d;
      if (cfg.swsa_enabled) {
        map_entries += n * double(p);
        act_block += 2 * n * d + 4 * n * d;
      }
    }
  }
  act_block += 2 * n * d + (2 * n + 2 * cond) * d;  // conditioning attention
  act_block += 2 * n * d + 8 * n * d;               // MLP in/out + hidden both sides

  est.attention_map_bytes = double(batch) * layers * heads * map_entries * kBytes;
  est.activation_bytes = double(batch) * (layers * act_block + 4 * n * d) * kBytes;
  return est;
}

RedundancyReport redundancy_profile(const AttnCapture::Entry& maps, int64_t window_h,
                                    int64_t window_w, int64_t radius) {
  if (maps.heads < 1 || maps.nq < 1 || maps.nq != maps.nk)
    throw std::invalid_argument("profiling expects square per-head maps");
  const int64_t g = int64_t(std::llround(std::sqrt(double(maps.nq))));
  if (g * g != maps.nq)
    throw std::invalid_argument("token count " + std::to_string(maps.nq) +
                                " is not a square grid");
  if (window_h < 1 || window_w < 1 || g % window_h != 0 || g % window_w != 0)
    throw std::invalid_argument("window must divide the grid side");
  if (radius < 0) throw std::invalid_argument("radius must be nonnegative");

  const int64_t gy = g / window_h, gx = g / window_w;
  const int64_t n = maps.nq;
  const int64_t rows_per_window = window_h * window_w;

  // Window coordinate of every column.
  std::vector<int64_t> col_wy(static_cast<size_t>(n)), col_wx(static_cast<size_t>(n));
  for (int64_t c = 0; c < n; ++c) {
    col_wy[size_t(c)] = (c / g) / window_h;
    col_wx[size_t(c)] = (c % g) / window_w;
  }

  RedundancyReport rep;
  rep.grid = g;
  rep.window_h = window_h;
  rep.window_w = window_w;
  rep.radius = radius;
  rep.window_neighbor.assign(size_t(gy * gx), 0.0);
  rep.window_distant.assign(size_t(gy * gx), 0.0);

  std::vector<int64_t> tokens(static_cast<size_t>(rows_per_window));
  std::vector<char> near(static_cast<size_t>(n));
  for (int64_t wy = 0; wy < gy; ++wy) {
    for (int64_t wx = 0; wx < gx; ++wx) {
      for (int64_t c = 0; c < n; ++c)
        near[size_t(c)] = std::abs(col_wy[size_t(c)] - wy) <= radius &&
                          std::abs(col_wx[size_t(c)] - wx) <= radius;
      int64_t k = 0;
      for (int64_t dy = 0; dy < window_h; ++dy)
        for (int64_t dx = 0; dx < window_w; ++dx)
          tokens[size_t(k++)] = (wy * window_h + dy) * g + (wx * window_w + dx);

      double near_sum = 0, far_sum = 0;
      int64_t pairs = 0;
      for (int64_t h = 0; h < maps.heads; ++h) {
        const float* base = maps.probs.data() + h * n * n;
        for (int64_t i = 0; i < rows_per_window; ++i) {
          const float* a = base + tokens[size_t(i)] * n;
          for (int64_t j = i + 1; j < rows_per_window; ++j) {
            const float* b = base + tokens[size_t(j)] * n;
            double dot_n = 0, na = 0, nb = 0, dot_f = 0, fa = 0, fb = 0;
            for (int64_t c = 0; c < n; ++c) {
              const double x = a[c], y = b[c];
              if (near[size_t(c)]) {
                dot_n += x * y;
                na += x * x;
                nb += y * y;
              } else {
                dot_f += x * y;
                fa += x * x;
                fb += y * y;
              }
            }
            near_sum += (na > 0 && nb > 0) ? dot_n / std::sqrt(na * nb) : 0.0;
            far_sum += (fa > 0 && fb > 0) ? dot_f / std::sqrt(fa * fb) : 0.0;
            ++pairs;
          }
        }
      }
      const size_t w = size_t(wy * gx + wx);
      rep.window_neighbor[w] = pairs > 0 ? near_sum / double(pairs) : 1.0;
      rep.window_distant[w] = pairs > 0 ? far_sum / double(pairs) : 1.0;
    }
  }

  for (size_t w = 0; w < rep.window_neighbor.size(); ++w) {
    rep.neighbor_mean += rep.window_neighbor[w];
    rep.distant_mean += rep.window_distant[w];
  }
  rep.neighbor_mean /= double(rep.window_neighbor.size());
  rep.distant_mean /= double(rep.window_distant.size());
  return rep;
}

void save_attention_maps(const std::string& path, const AttnCapture& capture) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write("PTAM", 4);
  write_u32(os, 1);
  write_u64(os, capture.entries.size());
  for (const auto& e : capture.entries) {
    write_str(os, e.site);
    write_i64(os, e.heads);
    write_i64(os, e.nq);
    write_i64(os, e.nk);
    write_u64(os, e.probs.size());
    for (float v : e.probs) write_f64(os, double(v));
  }
  if (!os) throw std::runtime_error("write failed for " + path);
}

AttnCapture load_attention_maps(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "PTAM")
    throw std::runtime_error(path + " is not an attention map file");
  if (read_u32(is) != 1) throw std::runtime_error("unsupported attention map file version");

  AttnCapture cap;
  const uint64_t n_entries = read_u64(is);
  for (uint64_t i = 0; i < n_entries; ++i) {
    AttnCapture::Entry e;
    e.site = read_str(is);
    e.heads = read_i64(is);
    e.nq = read_i64(is);
    e.nk = read_i64(is);
    const uint64_t count = read_u64(is);
    if (e.heads < 1 || e.nq < 1 || e.nk < 1 ||
        count != uint64_t(e.heads) * uint64_t(e.nq) * uint64_t(e.nk))
      throw std::runtime_error("corrupt attention map entry in " + path);
    e.probs.resize(count);
    for (auto& v : e.probs) v = float(read_f64(is));
    if (!is) throw std::runtime_error("truncated attention map file: " + path);
    cap.entries.push_back(std::move(e));
  }
  return cap;
}

std::string render_flops_table(const std::vector<FlopsReport>& rows) {
  std::string out =
      "n\tratio\tgiim_sa\tgiim_inject\ttcm_wsa\ttcm_swsa\tproxy_macs\tproxy_flops\t"
      "global_macs\tglobal_flops\tpct_of_global\n";
  bool flag_largest_step = false;
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "(%lld,%lld,%lld)", (long long)r.ratio.pf,
                  (long long)r.ratio.ph, (long long)r.ratio.pw);
    out += std::to_string(r.n) + "\t" + buf + "\t";
    out += format_count(r.giim_sa) + "\t" + format_count(r.giim_inject) + "\t";
    out += format_count(r.tcm_wsa) + "\t" + format_count(r.tcm_swsa) + "\t";
    out += format_count(r.proxy_total()) + "\t" + format_count(2 * r.proxy_total()) + "\t";
    out += format_count(r.global_sa) + "\t" + format_count(2 * r.global_sa) + "\t";
    std::snprintf(buf, sizeof(buf), "%.3f%%", 100.0 * r.ratio_vs_global);
    out += buf;
    if (r.ratio.window_tokens() == 256 && r.n == 16384) {
      out += "\t*";
      flag_largest_step = true;
    }
    out += "\n";
  }
  if (flag_largest_step)
    out +=
        "* the 2.3% often quoted for this step is not what the closed form yields; "
        "the table shows the formula value\n";
  return out;
}

std::string render_memory_estimate(const MemoryEstimate& est) {
  std::string out;
  out += "param_bytes: " + format_count(est.param_bytes) + "\n";
  out += "activation_bytes: " + format_count(est.activation_bytes) + "\n";
  out += "attention_map_bytes: " + format_count(est.attention_map_bytes) + "\n";
  out += "total_bytes: " + format_count(est.total_bytes()) + "\n";
  return out;
}

std::string render_redundancy_report(const RedundancyReport& rep) {
  char buf[128];
  std::string out;
  std::snprintf(buf, sizeof(buf), "grid: %lldx%lld\n", (long long)rep.grid, (long long)rep.grid);
  out += buf;
  std::snprintf(buf, sizeof(buf), "window: %lldx%lld\n", (long long)rep.window_h,
                (long long)rep.window_w);
  out += buf;
  std::snprintf(buf, sizeof(buf), "radius: %lld\n", (long long)rep.radius);
  out += buf;
  std::snprintf(buf, sizeof(buf), "neighbor_mean: %.6f\n", rep.neighbor_mean);
  out += buf;
  std::snprintf(buf, sizeof(buf), "distant_mean: %.6f\n", rep.distant_mean);
  out += buf;
  const int64_t gx = rep.grid / rep.window_w;
  for (size_t w = 0; w < rep.window_neighbor.size(); ++w) {
    std::snprintf(buf, sizeof(buf), "window %lld,%lld: neighbor %.6f distant %.6f\n",
                  (long long)(int64_t(w) / gx), (long long)(int64_t(w) % gx),
                  rep.window_neighbor[w], rep.window_distant[w]);
    out += buf;
  }
  return out;
}

}  // namespace ptdx
