#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ptdx/commands.hpp"
#include "ptdx/runconfig.hpp"

namespace {

// "n:pf,ph,pw" -> one custom analyze cell.
bool parse_cell(const std::string& text, ptdx::AnalyzeCell& cell) {
  int64_t n, pf, ph, pw;
  char c1, c2, c3;
  std::istringstream is(text);
  if (!(is >> n >> c1 >> pf >> c2 >> ph >> c3 >> pw) || c1 != ':' || c2 != ',' || c3 != ',')
    return false;
  std::string rest;
  if (is >> rest) return false;
  cell.n = n;
  cell.ratio = {pf, ph, pw};
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proxy-token diffusion transformer: training, sampling and cost analysis"};
  app.require_subcommand(1);

  std::string config_path, resume_path;
  CLI::App* train = app.add_subcommand("train", "Train a model from a JSON run config");
  train->add_option("config", config_path, "run config JSON path")->required();
  train->add_option("--resume", resume_path, "checkpoint to resume from");

  ptdx::SampleArgs sargs;
  CLI::App* sample = app.add_subcommand("sample", "Generate one sample from a checkpoint");
  sample->add_option("checkpoint", sargs.checkpoint, "checkpoint path")->required();
  sample->add_option("-o,--out", sargs.out_prefix, "output prefix (.tensor plus .pgm/.ppm)")
      ->required();
  sample->add_option("--label", sargs.label, "class label (class-conditional models)");
  sample->add_option("--prompt", sargs.prompt, "text prompt (text-conditional models)");
  sample->add_option("--steps", sargs.steps, "sampler steps (default 50)");
  sample->add_option("--guidance", sargs.guidance_scale, "guidance scale (default 6)");
  sample->add_flag("--conditional-only", sargs.conditional_only,
                   "skip the unconditional branch (guidance must be 1)");
  sample->add_flag("--ema", sargs.use_ema, "sample from the EMA weights");
  sample->add_option("--seed", sargs.seed, "sampling seed (default 0)");
  sample->add_option("--size", sargs.size, "latent spatial side (default 8)");
  sample->add_option("--frames", sargs.frames, "latent frame count (default 1)");
  sample->add_option("--schedule-steps", sargs.schedule_steps,
                     "noise schedule length (default 1000)");

  ptdx::AnalyzeArgs aargs;
  std::vector<std::string> cell_texts;
  CLI::App* analyze = app.add_subcommand("analyze", "Print the attention cost table");
  analyze->add_option("--resolution", aargs.resolutions,
                      "image resolutions on the published window schedule");
  analyze->add_option("--cell", cell_texts, "extra rows as n:pf,ph,pw");
  analyze->add_option("--dim", aargs.dim, "attention width (default 288)");
  analyze->add_flag("--video", aargs.video, "use the video window schedule");
  analyze->add_option("--frames", aargs.frames, "frame count for resolution rows (default 1)");
  analyze->add_option("-o,--out", aargs.out_path, "also write the table to this file");

  ptdx::ProfileArgs pargs;
  CLI::App* profile = app.add_subcommand(
      "profile", "Window redundancy of a dense-attention checkpoint's maps");
  profile->add_option("checkpoint", pargs.checkpoint, "checkpoint path")->required();
  profile->add_option("--layer", pargs.layer, "block whose map to capture (default 0)");
  profile->add_option("--timestep", pargs.timestep, "timestep fed to the model (default 0)");
  profile->add_option("--window-h", pargs.window_h, "window height (default: the model's)");
  profile->add_option("--window-w", pargs.window_w, "window width (default: the model's)");
  profile->add_option("--radius", pargs.radius, "neighborhood radius in windows (default 1)");
  profile->add_option("--seed", pargs.seed, "probe input seed (default 0)");
  profile->add_option("--size", pargs.size, "probe image side (default 16)");
  profile->add_option("--maps-out", pargs.maps_out, "also dump the raw maps to this file");

  std::string inspect_path;
  CLI::App* inspect = app.add_subcommand("inspect-checkpoint", "Print a checkpoint's header");
  inspect->add_option("checkpoint", inspect_path, "checkpoint path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      ptdx::RunConfig cfg;
      try {
        cfg = ptdx::load_run_config(config_path);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return ptdx::kExitUsage;
      }
      return ptdx::cmd_train(cfg, resume_path, std::cout).exit_code;
    }
    if (sample->parsed()) return ptdx::cmd_sample(sargs, std::cout);
    if (analyze->parsed()) {
      for (const std::string& text : cell_texts) {
        ptdx::AnalyzeCell cell;
        if (!parse_cell(text, cell)) {
          std::cerr << "error: bad cell '" << text << "', expected n:pf,ph,pw\n";
          return ptdx::kExitUsage;
        }
        aargs.custom.push_back(cell);
      }
      return ptdx::cmd_analyze(aargs, std::cout);
    }
    if (profile->parsed()) return ptdx::cmd_profile(pargs, std::cout);
    if (inspect->parsed()) return ptdx::cmd_inspect(inspect_path, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return ptdx::kExitInternal;
  }
  return ptdx::kExitUsage;
}
