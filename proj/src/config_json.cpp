#include "ptdx/config_json.hpp"

#include <set>

namespace ptdx {

void to_json(nlohmann::json& j, const ModelConfig& cfg) {
  j = nlohmann::json{
      {"preset", cfg.preset_name},
      {"layers", cfg.layers},
      {"hidden_dim", cfg.hidden_dim},
      {"heads", cfg.heads},
      {"patch_size", cfg.patch_size},
      {"in_channels", cfg.in_channels},
      {"ratio", {cfg.ratio.pf, cfg.ratio.ph, cfg.ratio.pw}},
      {"proxy_strategy", proxy_strategy_name(cfg.proxy_strategy)},
      {"injection_strategy", injection_strategy_name(cfg.injection_strategy)},
      {"giim_enabled", cfg.giim_enabled},
      {"tcm_enabled", cfg.tcm_enabled},
      {"swsa_enabled", cfg.swsa_enabled},
      {"global_attention_reference", cfg.global_attention_reference},
      {"conditioning", conditioning_mode_name(cfg.conditioning)},
      {"num_classes", cfg.num_classes},
      {"text_vocab", cfg.text_vocab},
      {"text_token_len", cfg.text_token_len},
      {"text_dim", cfg.text_dim},
  };
}

void from_json(const nlohmann::json& j, ModelConfig& cfg) {
  static const std::set<std::string> known = {
      "preset",        "layers",       "hidden_dim",
      "heads",         "patch_size",   "in_channels",
      "ratio",         "proxy_strategy", "injection_strategy",
      "giim_enabled",  "tcm_enabled",  "swsa_enabled",
      "global_attention_reference",    "conditioning",
      "num_classes",   "text_vocab",   "text_token_len",
      "text_dim"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key))
      throw std::invalid_argument("unknown model config key: " + key);
  }

  // A named preset seeds every field; explicit keys then override.
  if (j.contains("preset")) {
    std::string name = j.at("preset").get<std::string>();
    if (name != "custom") cfg = ModelConfig::preset(name);
    cfg.preset_name = name;
  }
  if (j.contains("layers")) cfg.layers = j.at("layers").get<int64_t>();
  if (j.contains("hidden_dim")) cfg.hidden_dim = j.at("hidden_dim").get<int64_t>();
  if (j.contains("heads")) cfg.heads = j.at("heads").get<int64_t>();
  if (j.contains("patch_size")) cfg.patch_size = j.at("patch_size").get<int64_t>();
  if (j.contains("in_channels")) cfg.in_channels = j.at("in_channels").get<int64_t>();
  if (j.contains("ratio")) {
    const auto& r = j.at("ratio");
    if (!r.is_array() || r.size() != 3)
      throw std::invalid_argument("ratio must be a [pf, ph, pw] array");
    cfg.ratio = {r[0].get<int64_t>(), r[1].get<int64_t>(), r[2].get<int64_t>()};
  }
  if (j.contains("proxy_strategy"))
    cfg.proxy_strategy = proxy_strategy_from_name(j.at("proxy_strategy").get<std::string>());
  if (j.contains("injection_strategy"))
    cfg.injection_strategy =
        injection_strategy_from_name(j.at("injection_strategy").get<std::string>());
  if (j.contains("giim_enabled")) cfg.giim_enabled = j.at("giim_enabled").get<bool>();
  if (j.contains("tcm_enabled")) cfg.tcm_enabled = j.at("tcm_enabled").get<bool>();
  if (j.contains("swsa_enabled")) cfg.swsa_enabled = j.at("swsa_enabled").get<bool>();
  if (j.contains("global_attention_reference"))
    cfg.global_attention_reference = j.at("global_attention_reference").get<bool>();
  if (j.contains("conditioning"))
    cfg.conditioning = conditioning_mode_from_name(j.at("conditioning").get<std::string>());
  if (j.contains("num_classes")) cfg.num_classes = j.at("num_classes").get<int64_t>();
  if (j.contains("text_vocab")) cfg.text_vocab = j.at("text_vocab").get<int64_t>();
  if (j.contains("text_token_len")) cfg.text_token_len = j.at("text_token_len").get<int64_t>();
  if (j.contains("text_dim")) cfg.text_dim = j.at("text_dim").get<int64_t>();
}

}  // namespace ptdx
