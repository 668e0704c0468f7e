#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "ptdx/dataset.hpp"
#include "ptdx/model.hpp"

namespace ptdx {

// One self-contained run description: model, schedule, training loop,
// sampler defaults, dataset, and output directory. A run is reproducible
// from this file alone; every field serializes, unknown keys are rejected,
// and the version gate keeps old tools from misreading newer files.
struct RunConfig {
  int64_t version = 1;
  ModelConfig model;
  DatasetConfig dataset;

  int64_t schedule_steps = 1000;
  int64_t train_steps = 1000;
  int64_t batch = 32;
  double lr = 1e-4;
  // Fraction of the run after which the rate decays linearly to zero;
  // 1.0 keeps it constant for the whole run.
  double lr_decay_start = 1.0;
  double weight_decay = 0.0;
  double ema_decay = 0.999;
  double cond_dropout = 0.1;
  uint64_t master_seed = 1;
  uint64_t init_seed = 1;
  int64_t checkpoint_every = 1000;

  int64_t sample_steps = 50;
  double guidance_scale = 6.0;

  std::string out_dir = "out";

  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& cfg);
void from_json(const nlohmann::json& j, RunConfig& cfg);

void to_json(nlohmann::json& j, const DatasetConfig& cfg);
void from_json(const nlohmann::json& j, DatasetConfig& cfg);

RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& cfg);

}  // namespace ptdx
