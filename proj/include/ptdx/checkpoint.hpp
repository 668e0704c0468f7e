#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ptdx/diffusion.hpp"
#include "ptdx/model.hpp"

namespace ptdx {

// Self-describing training snapshot: format version, model config as JSON,
// named weight tensors (registry order), and optional EMA shadow and
// optimizer moment sections so a run resumes exactly. All numeric payloads
// are little-endian and round trips are bit-exact.
struct Checkpoint {
  uint32_t version = 1;
  ModelConfig config;
  uint64_t step = 0;
  uint64_t master_seed = 0;
  std::vector<std::pair<std::string, Tensor>> weights;

  bool has_ema = false;
  double ema_decay = 0.0;
  std::vector<std::vector<double>> ema_shadow;

  bool has_opt = false;
  int64_t opt_t = 0;
  std::vector<std::vector<double>> opt_m, opt_v;
};

void save_checkpoint(const std::string& path, const PtDit& model, uint64_t step,
                     uint64_t master_seed, const Ema* ema = nullptr,
                     const AdamW* opt = nullptr);

Checkpoint read_checkpoint(const std::string& path);

// Copies checkpoint weights into a model constructed from the same config;
// every name and shape must match the registry exactly.
void restore_weights(PtDit& model, const Checkpoint& chk);

}  // namespace ptdx
