#include "ptdx/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ptdx/analysis.hpp"
#include "ptdx/checkpoint.hpp"
#include "ptdx/config_json.hpp"
#include "ptdx/dataset.hpp"
#include "ptdx/diffusion.hpp"
#include "ptdx/io.hpp"
#include "ptdx/model.hpp"

namespace ptdx {

namespace {

std::string fmt17(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

Conditioning batch_conditioning(const ModelConfig& cfg, const std::vector<int64_t>& labels) {
  if (cfg.conditioning == ConditioningMode::ClassLabel) return Conditioning::for_class(labels);
  std::vector<std::vector<int64_t>> ids;
  ids.reserve(labels.size());
  for (int64_t label : labels)
    ids.push_back(tokenize_stub("class " + std::to_string(label), cfg.text_vocab,
                                cfg.text_token_len));
  return Conditioning::for_text(std::move(ids));
}

double scheduled_lr(const RunConfig& cfg, int64_t step) {
  const int64_t start = int64_t(cfg.lr_decay_start * double(cfg.train_steps));
  if (start >= cfg.train_steps || step <= start) return cfg.lr;
  return cfg.lr * (1.0 - double(step - start) / double(cfg.train_steps - start));
}

void save_train_state(const std::string& dir, const PtDit& model, int64_t step,
                      uint64_t master_seed, const Ema& ema, const AdamW& opt,
                      bool numbered) {
  if (numbered)
    save_checkpoint(dir + "/checkpoint_" + std::to_string(step) + ".bin", model,
                    uint64_t(step), master_seed, &ema, &opt);
  save_checkpoint(dir + "/checkpoint_last.bin", model, uint64_t(step), master_seed, &ema, &opt);
}

// [1, C, F, H, W] -> [H, W] (channel 0, frame 0) or [3, H, W] interleaved.
Tensor preview_image(const Tensor& x) {
  const Shape& s = x.shape();
  const int64_t c = s[1], f = s[2], h = s[3], w = s[4];
  const int64_t plane = h * w;
  const std::vector<double>& d = x.data();
  if (c == 3) {
    std::vector<double> out(size_t(3 * plane));
    for (int64_t ch = 0; ch < 3; ++ch)
      for (int64_t i = 0; i < plane; ++i)
        out[size_t(ch * plane + i)] = d[size_t((ch * f) * plane + i)];
    return Tensor::from_data({3, h, w}, std::move(out));
  }
  std::vector<double> out(d.begin(), d.begin() + plane);
  return Tensor::from_data({h, w}, std::move(out));
}

}  // namespace

TrainOutcome cmd_train(const RunConfig& cfg, const std::string& resume_path, std::ostream& log) {
  TrainOutcome out;
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    out.exit_code = kExitUsage;
    return out;
  }

  std::optional<PtDit> model;
  std::optional<AdamW> opt;
  std::optional<Ema> ema;
  int64_t start_step = 0;

  try {
    if (resume_path.empty()) {
      model.emplace(cfg.model, cfg.init_seed);
      opt.emplace(cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay);
      ema.emplace(model->params(), cfg.ema_decay);
    } else {
      Checkpoint chk = read_checkpoint(resume_path);
      if (nlohmann::json(chk.config) != nlohmann::json(cfg.model)) {
        log << "error: checkpoint model config differs from the run config\n";
        out.exit_code = kExitUsage;
        return out;
      }
      if (chk.master_seed != cfg.master_seed) {
        log << "error: checkpoint master_seed " << chk.master_seed
            << " differs from the run config's " << cfg.master_seed << "\n";
        out.exit_code = kExitUsage;
        return out;
      }
      model.emplace(chk.config, cfg.init_seed);
      restore_weights(*model, chk);
      opt.emplace(cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay);
      if (chk.has_opt) opt->restore(chk.opt_m, chk.opt_v, chk.opt_t);
      ema.emplace(model->params(), chk.has_ema ? chk.ema_decay : cfg.ema_decay);
      if (chk.has_ema) ema->restore(chk.ema_shadow);
      start_step = int64_t(chk.step);
    }
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    out.exit_code = kExitUsage;
    return out;
  }

  std::filesystem::create_directories(cfg.out_dir);
  const std::string loss_path = cfg.out_dir + "/loss.log";
  std::ofstream loss_log(loss_path, resume_path.empty() ? std::ios::trunc : std::ios::app);
  if (!loss_log) {
    log << "error: cannot open " << loss_path << " for writing\n";
    out.exit_code = kExitUsage;
    return out;
  }

  const NoiseSchedule sched = NoiseSchedule::cosine(cfg.schedule_steps);
  const TrainStepConfig tcfg{cfg.cond_dropout};
  out.last_checkpoint = cfg.out_dir + "/checkpoint_last.bin";
  int64_t last_saved = -1;

  log << "training " << cfg.model.preset_name << " (" << model->param_count() << " params) from step "
      << start_step << " to " << cfg.train_steps << "\n";

  for (int64_t i = start_step; i < cfg.train_steps; ++i) {
    const double lr_i = scheduled_lr(cfg, i);
    opt->set_lr(lr_i);
    auto [x0, labels] = dataset_batch(cfg.dataset, cfg.batch, i);
    const Conditioning cond = batch_conditioning(cfg.model, labels);
    double loss = 0;
    try {
      loss = training_step(*model, *opt, *ema, sched, x0, cond, cfg.master_seed, i, tcfg);
    } catch (const std::exception& e) {
      log << "error at step " << i << ": " << e.what() << "\n";
      out.exit_code = kExitInternal;
      return out;
    }
    loss_log << i << '\t' << fmt17(loss) << '\t' << fmt17(lr_i) << '\n';
    out.final_loss = loss;
    ++out.steps_run;
    if ((i + 1) % cfg.checkpoint_every == 0) {
      save_train_state(cfg.out_dir, *model, i + 1, cfg.master_seed, *ema, *opt, true);
      last_saved = i + 1;
      log << "step " << (i + 1) << " loss " << fmt17(loss) << " lr " << fmt17(lr_i) << "\n";
    }
  }

  save_train_state(cfg.out_dir, *model, cfg.train_steps, cfg.master_seed, *ema, *opt,
                   last_saved != cfg.train_steps);
  loss_log.flush();
  if (!loss_log) {
    log << "error: write failed for " << loss_path << "\n";
    out.exit_code = kExitInternal;
    return out;
  }
  log << "done: " << out.steps_run << " steps, checkpoint " << out.last_checkpoint << "\n";
  return out;
}

int cmd_sample(const SampleArgs& args, std::ostream& log) {
  Checkpoint chk;
  try {
    chk = read_checkpoint(args.checkpoint);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  const ModelConfig& mcfg = chk.config;
  const bool class_mode = mcfg.conditioning == ConditioningMode::ClassLabel;
  if (class_mode) {
    if (args.label < 0 || !args.prompt.empty()) {
      log << "error: model is class-conditional; pass --label, not --prompt\n";
      return kExitUsage;
    }
    if (args.label >= mcfg.num_classes) {
      log << "error: label " << args.label << " out of range [0, " << mcfg.num_classes << ")\n";
      return kExitUsage;
    }
  } else if (args.prompt.empty() || args.label >= 0) {
    log << "error: model is text-conditional; pass --prompt, not --label\n";
    return kExitUsage;
  }
  if (args.steps < 1 || args.steps > args.schedule_steps) {
    log << "error: steps must lie in [1, " << args.schedule_steps << "]\n";
    return kExitUsage;
  }
  if (args.size < 1 || args.frames < 1) {
    log << "error: size and frames must be positive\n";
    return kExitUsage;
  }

  try {
    PtDit model(mcfg, 0);
    restore_weights(model, chk);
    if (args.use_ema) {
      if (!chk.has_ema) {
        log << "error: checkpoint has no EMA section\n";
        return kExitUsage;
      }
      Ema ema(model.params(), chk.ema_decay);
      ema.restore(chk.ema_shadow);
      ema.copy_to(model.params());
    }

    const Conditioning cond =
        class_mode ? Conditioning::for_class({args.label})
                   : Conditioning::for_text(
                         {tokenize_stub(args.prompt, mcfg.text_vocab, mcfg.text_token_len)});
    const NoiseSchedule sched = NoiseSchedule::cosine(args.schedule_steps);
    SamplerConfig scfg;
    scfg.steps = args.steps;
    scfg.guidance_scale = args.guidance_scale;
    scfg.conditional_only = args.conditional_only;
    const Shape shape{1, mcfg.in_channels, args.frames, args.size, args.size};

    const Tensor x = cfg_sample(model, sched, shape, cond, scfg, args.seed);

    const std::string tensor_path = args.out_prefix + ".tensor";
    save_tensor(tensor_path, x);
    const Tensor img = preview_image(x);
    const std::string image_path =
        args.out_prefix + (mcfg.in_channels == 3 ? ".ppm" : ".pgm");
    if (mcfg.in_channels == 3)
      write_ppm(image_path, img);
    else
      write_pgm(image_path, img);
    log << "wrote " << tensor_path << " and " << image_path << "\n";
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

int cmd_analyze(const AnalyzeArgs& args, std::ostream& os) {
  if (args.dim < 1) {
    os << "error: dim must be positive\n";
    return kExitUsage;
  }
  std::vector<FlopsReport> rows;
  std::vector<std::string> errors;
  int64_t cells = 0;

  auto add_cell = [&](int64_t n, CompressionRatio ratio, const std::string& origin) {
    ++cells;
    try {
      rows.push_back(ptdit_attention_flops(n, args.dim, ratio));
    } catch (const std::exception& e) {
      errors.push_back("error: " + origin + ": " + e.what());
    }
  };

  for (int64_t res : args.resolutions) {
    if (res < 16 || res % 16 != 0) {
      ++cells;
      errors.push_back("error: resolution " + std::to_string(res) +
                       ": must be a positive multiple of 16");
      continue;
    }
    CompressionRatio ratio;
    try {
      ratio = ratio_for_resolution(res, args.video);
    } catch (const std::exception& e) {
      ++cells;
      errors.push_back("error: resolution " + std::to_string(res) + ": " + std::string(e.what()));
      continue;
    }
    const int64_t side = res / 16;
    add_cell(args.frames * side * side, ratio, "resolution " + std::to_string(res));
  }
  for (const AnalyzeCell& cell : args.custom) {
    std::ostringstream origin;
    origin << "cell n=" << cell.n << " ratio=(" << cell.ratio.pf << "," << cell.ratio.ph << ","
           << cell.ratio.pw << ")";
    add_cell(cell.n, cell.ratio, origin.str());
  }

  std::ostringstream body;
  body << render_flops_table(rows);
  for (const std::string& e : errors) body << e << "\n";
  os << body.str();
  if (!args.out_path.empty()) {
    std::ofstream f(args.out_path);
    if (!f) {
      os << "error: cannot open " << args.out_path << " for writing\n";
      return kExitUsage;
    }
    f << body.str();
  }
  return (cells > 0 && rows.empty()) ? kExitUsage : kExitOk;
}

int cmd_profile(const ProfileArgs& args, std::ostream& os) {
  Checkpoint chk;
  try {
    chk = read_checkpoint(args.checkpoint);
  } catch (const std::exception& e) {
    os << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  const ModelConfig& mcfg = chk.config;
  if (!mcfg.global_attention_reference) {
    os << "error: profiling needs a dense-attention checkpoint "
          "(global_attention_reference: true)\n";
    return kExitUsage;
  }
  if (args.layer < 0 || args.layer >= mcfg.layers) {
    os << "error: layer " << args.layer << " out of range [0, " << mcfg.layers << ")\n";
    return kExitUsage;
  }
  if (args.size < mcfg.patch_size || args.size % mcfg.patch_size != 0) {
    os << "error: size must be a positive multiple of the patch size " << mcfg.patch_size << "\n";
    return kExitUsage;
  }
  if (args.timestep < 0) {
    os << "error: timestep must be nonnegative\n";
    return kExitUsage;
  }

  try {
    NoGradGuard ng;
    PtDit model(mcfg, 0);
    restore_weights(model, chk);

    DatasetConfig dcfg;
    dcfg.generator = DataGenerator::GaussianBlobs;
    dcfg.size = args.size;
    dcfg.channels = mcfg.in_channels;
    dcfg.num_classes = mcfg.num_classes;
    dcfg.seed = args.seed;
    const Tensor item = dataset_item(dcfg, 0).x0;  // [C, 1, S, S]
    Shape shape = item.shape();
    shape.insert(shape.begin(), 1);
    const Tensor probe = Tensor::from_data(std::move(shape), item.data());

    AttnCapture capture;
    model.forward(probe, {args.timestep}, null_conditioning(mcfg, 1), &capture, args.layer);
    const AttnCapture::Entry* entry = capture.find("global_sa");
    if (!entry) {
      os << "error: forward pass recorded no dense self-attention map\n";
      return kExitInternal;
    }

    const int64_t wh = args.window_h > 0 ? args.window_h : mcfg.ratio.ph;
    const int64_t ww = args.window_w > 0 ? args.window_w : mcfg.ratio.pw;
    const RedundancyReport rep = redundancy_profile(*entry, wh, ww, args.radius);
    os << "layer: " << args.layer << "\n"
       << "timestep: " << args.timestep << "\n"
       << render_redundancy_report(rep);
    if (!args.maps_out.empty()) {
      save_attention_maps(args.maps_out, capture);
      os << "maps: " << args.maps_out << "\n";
    }
  } catch (const std::exception& e) {
    os << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

int cmd_inspect(const std::string& path, std::ostream& os) {
  Checkpoint chk;
  try {
    chk = read_checkpoint(path);
  } catch (const std::exception& e) {
    os << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  int64_t elements = 0;
  for (const auto& [name, t] : chk.weights) elements += t.numel();
  os << "version: " << chk.version << "\n"
     << "step: " << chk.step << "\n"
     << "master_seed: " << chk.master_seed << "\n"
     << "params: " << chk.weights.size() << " tensors, " << elements << " elements\n"
     << "ema: " << (chk.has_ema ? "present (decay " + fmt17(chk.ema_decay) + ")" : "absent")
     << "\n"
     << "optimizer: " << (chk.has_opt ? "present (t " + std::to_string(chk.opt_t) + ")" : "absent")
     << "\n"
     << "config: " << nlohmann::json(chk.config).dump(2) << "\n";
  try {
    PtDit model(chk.config, 0);
    os << "layers:\n";
    for (const LayerInfo& info : model.layer_inventory())
      os << "  " << info.block << "\t" << info.sublayer << "\t" << info.detail << "\t"
         << info.param_elements << "\n";
  } catch (const std::exception& e) {
    os << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace ptdx
