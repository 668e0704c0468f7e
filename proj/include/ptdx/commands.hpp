#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ptdx/latent_grid.hpp"
#include "ptdx/runconfig.hpp"

namespace ptdx {

// Exit codes shared by every command: 0 success, 1 bad input or config,
// 2 internal failure (a run that started and then broke its invariants).
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInternal = 2;

struct TrainOutcome {
  int exit_code = kExitOk;
  int64_t steps_run = 0;       // optimization steps taken in this invocation
  double final_loss = 0;       // loss of the last step taken (0 when none ran)
  std::string last_checkpoint; // path of the rolling checkpoint
};

// Runs or resumes the training loop described by the run config. Each step
// appends "step\tloss\tlr" to <out_dir>/loss.log (a fresh run truncates the
// log first); every checkpoint_every steps and at the end the full state
// (weights, EMA shadow, optimizer moments) goes to checkpoint_<step>.bin and
// the rolling checkpoint_last.bin. Resuming restores weights, optimizer and
// EMA from `resume_path` and continues the seed-derived draw sequence, so a
// split run reproduces an unbroken one exactly.
TrainOutcome cmd_train(const RunConfig& cfg, const std::string& resume_path, std::ostream& log);

struct SampleArgs {
  std::string checkpoint;
  std::string out_prefix;       // writes <prefix>.tensor and <prefix>.pgm/.ppm
  int64_t label = -1;           // class-conditional models
  std::string prompt;           // text-conditional models
  int64_t steps = 50;
  double guidance_scale = 6.0;
  bool conditional_only = false;
  bool use_ema = false;
  uint64_t seed = 0;
  int64_t size = 8;             // spatial side of the generated latent
  int64_t frames = 1;
  int64_t schedule_steps = 1000;
};

// Generates one sample with classifier-free guidance and writes it as a raw
// tensor plus an 8-bit preview (PGM, or PPM for three-channel models). The
// conditioning flag must match the model: --label for class models, --prompt
// for text models. Deterministic in (checkpoint, args).
int cmd_sample(const SampleArgs& args, std::ostream& log);

struct AnalyzeCell {
  int64_t n = 0;  // token count
  CompressionRatio ratio;
};

struct AnalyzeArgs {
  std::vector<int64_t> resolutions;  // rows keyed by image resolution
  std::vector<AnalyzeCell> custom;   // extra rows with explicit (n, ratio)
  int64_t dim = 288;
  bool video = false;    // resolution rows use the video window schedule
  int64_t frames = 1;    // token multiplier for resolution rows
  std::string out_path;  // also write the table here when nonempty
};

// Prints the attention cost table for the requested rows: resolutions map to
// the published window schedule (tokens = (res/16)^2 after the 8x VAE and
// patch 2), custom rows take (n, ratio) directly. A row whose window volume
// does not divide its token count is reported as an error line instead of
// aborting the table.
int cmd_analyze(const AnalyzeArgs& args, std::ostream& os);

struct ProfileArgs {
  std::string checkpoint;
  int64_t layer = 0;
  int64_t timestep = 0;
  int64_t window_h = 0, window_w = 0;  // 0 = the model's window side
  int64_t radius = 1;
  uint64_t seed = 0;
  int64_t size = 16;       // image side of the probe input
  std::string maps_out;    // optional raw attention-map dump
};

// Runs one forward pass of a dense-attention model over a structured probe
// input, captures the selected block's self-attention map, and reports mean
// pairwise row cosines split into neighboring and distant windows. Requires
// a checkpoint trained with global_attention_reference.
int cmd_profile(const ProfileArgs& args, std::ostream& os);

// Prints a checkpoint's header: format version, step, seed, config JSON,
// parameter count, the structural layer inventory, and which optional
// sections (EMA, optimizer) are present.
int cmd_inspect(const std::string& path, std::ostream& os);

}  // namespace ptdx
