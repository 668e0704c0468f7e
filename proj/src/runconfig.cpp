#include "ptdx/runconfig.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "ptdx/config_json.hpp"

namespace ptdx {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& what) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) throw std::invalid_argument("unknown " + what + " key: " + key);
  }
}

}  // namespace

void RunConfig::validate() const {
  if (version != 1)
    throw std::invalid_argument("unsupported run config version " + std::to_string(version));
  model.validate();
  dataset.validate();
  if (schedule_steps < 1) throw std::invalid_argument("schedule_steps must be at least 1");
  if (train_steps < 0) throw std::invalid_argument("train_steps must be nonnegative");
  if (batch < 1) throw std::invalid_argument("batch must be at least 1");
  if (lr <= 0) throw std::invalid_argument("lr must be positive");
  if (lr_decay_start <= 0 || lr_decay_start > 1)
    throw std::invalid_argument("lr_decay_start must lie in (0, 1]");
  if (weight_decay < 0) throw std::invalid_argument("weight_decay must be nonnegative");
  if (ema_decay < 0 || ema_decay > 1) throw std::invalid_argument("ema_decay must lie in [0, 1]");
  if (cond_dropout < 0 || cond_dropout > 1)
    throw std::invalid_argument("cond_dropout must lie in [0, 1]");
  if (checkpoint_every < 1) throw std::invalid_argument("checkpoint_every must be at least 1");
  if (sample_steps < 1) throw std::invalid_argument("sample_steps must be at least 1");
  if (guidance_scale < 0) throw std::invalid_argument("guidance_scale must be nonnegative");
  if (out_dir.empty()) throw std::invalid_argument("out_dir must not be empty");
  if (dataset.channels != model.in_channels)
    throw std::invalid_argument("dataset channels must match the model input channels");
  if (model.conditioning == ConditioningMode::ClassLabel &&
      dataset.num_classes > model.num_classes)
    throw std::invalid_argument("dataset has more classes than the model");
}

void to_json(nlohmann::json& j, const DatasetConfig& cfg) {
  j = nlohmann::json{{"generator", data_generator_name(cfg.generator)},
                     {"size", cfg.size},
                     {"channels", cfg.channels},
                     {"num_classes", cfg.num_classes},
                     {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, DatasetConfig& cfg) {
  reject_unknown(j, {"generator", "size", "channels", "num_classes", "seed"}, "dataset config");
  if (j.contains("generator"))
    cfg.generator = data_generator_from_name(j.at("generator").get<std::string>());
  if (j.contains("size")) cfg.size = j.at("size").get<int64_t>();
  if (j.contains("channels")) cfg.channels = j.at("channels").get<int64_t>();
  if (j.contains("num_classes")) cfg.num_classes = j.at("num_classes").get<int64_t>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
}

void to_json(nlohmann::json& j, const RunConfig& cfg) {
  j = nlohmann::json{{"version", cfg.version},
                     {"model", cfg.model},
                     {"dataset", cfg.dataset},
                     {"train",
                      {{"schedule_steps", cfg.schedule_steps},
                       {"steps", cfg.train_steps},
                       {"batch", cfg.batch},
                       {"lr", cfg.lr},
                       {"lr_decay_start", cfg.lr_decay_start},
                       {"weight_decay", cfg.weight_decay},
                       {"ema_decay", cfg.ema_decay},
                       {"cond_dropout", cfg.cond_dropout},
                       {"master_seed", cfg.master_seed},
                       {"init_seed", cfg.init_seed},
                       {"checkpoint_every", cfg.checkpoint_every}}},
                     {"sample", {{"steps", cfg.sample_steps}, {"guidance_scale", cfg.guidance_scale}}},
                     {"out_dir", cfg.out_dir}};
}

void from_json(const nlohmann::json& j, RunConfig& cfg) {
  reject_unknown(j, {"version", "model", "dataset", "train", "sample", "out_dir"}, "run config");
  if (j.contains("version")) cfg.version = j.at("version").get<int64_t>();
  if (j.contains("model")) cfg.model = j.at("model").get<ModelConfig>();
  if (j.contains("dataset")) cfg.dataset = j.at("dataset").get<DatasetConfig>();
  if (j.contains("train")) {
    const auto& t = j.at("train");
    reject_unknown(t,
                   {"schedule_steps", "steps", "batch", "lr", "lr_decay_start", "weight_decay",
                    "ema_decay", "cond_dropout", "master_seed", "init_seed", "checkpoint_every"},
                   "train config");
    if (t.contains("schedule_steps")) cfg.schedule_steps = t.at("schedule_steps").get<int64_t>();
    if (t.contains("steps")) cfg.train_steps = t.at("steps").get<int64_t>();
    if (t.contains("batch")) cfg.batch = t.at("batch").get<int64_t>();
    if (t.contains("lr")) cfg.lr = t.at("lr").get<double>();
    if (t.contains("lr_decay_start")) cfg.lr_decay_start = t.at("lr_decay_start").get<double>();
    if (t.contains("weight_decay")) cfg.weight_decay = t.at("weight_decay").get<double>();
    if (t.contains("ema_decay")) cfg.ema_decay = t.at("ema_decay").get<double>();
    if (t.contains("cond_dropout")) cfg.cond_dropout = t.at("cond_dropout").get<double>();
    if (t.contains("master_seed")) cfg.master_seed = t.at("master_seed").get<uint64_t>();
    if (t.contains("init_seed")) cfg.init_seed = t.at("init_seed").get<uint64_t>();
    if (t.contains("checkpoint_every"))
      cfg.checkpoint_every = t.at("checkpoint_every").get<int64_t>();
  }
  if (j.contains("sample")) {
    const auto& s = j.at("sample");
    reject_unknown(s, {"steps", "guidance_scale"}, "sample config");
    if (s.contains("steps")) cfg.sample_steps = s.at("steps").get<int64_t>();
    if (s.contains("guidance_scale")) cfg.guidance_scale = s.at("guidance_scale").get<double>();
  }
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open run config: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("run config " + path + " is not valid JSON: " + e.what());
  }
  RunConfig cfg = j.get<RunConfig>();
  cfg.validate();
  return cfg;
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << nlohmann::json(cfg).dump(2) << "\n";
  if (!os) throw std::runtime_error("write failed for " + path);
}

}  // namespace ptdx
