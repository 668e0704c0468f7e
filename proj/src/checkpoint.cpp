#include "ptdx/checkpoint.hpp"

#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "ptdx/config_json.hpp"
#include "ptdx/io.hpp"

namespace ptdx {

namespace {

constexpr char kMagic[4] = {'P', 'T', 'D', 'X'};
constexpr uint32_t kVersion = 1;

void write_state_vectors(std::ostream& os, const std::vector<std::vector<double>>& vecs) {
  write_u64(os, vecs.size());
  for (const auto& v : vecs) {
    write_u64(os, v.size());
    write_f64v(os, v);
  }
}

std::vector<std::vector<double>> read_state_vectors(std::istream& is) {
  const uint64_t n = read_u64(is);
  std::vector<std::vector<double>> vecs;
  vecs.reserve(n);
  for (uint64_t i = 0; i < n; ++i) {
    const uint64_t count = read_u64(is);
    vecs.push_back(read_f64v(is, count));
  }
  return vecs;
}

}  // namespace

void save_checkpoint(const std::string& path, const PtDit& model, uint64_t step,
                     uint64_t master_seed, const Ema* ema, const AdamW* opt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint file for writing: " + path);

  os.write(kMagic, 4);
  write_u32(os, kVersion);
  write_str(os, nlohmann::json(model.config()).dump());
  write_u64(os, step);
  write_u64(os, master_seed);

  const auto& params = model.params().params();
  write_u32(os, static_cast<uint32_t>(params.size()));
  for (const auto& p : params) {
    write_str(os, p->name);
    const Shape& shape = p->tensor.shape();
    write_u32(os, static_cast<uint32_t>(shape.size()));
    for (int64_t d : shape) write_i64(os, d);
    write_f64v(os, p->tensor.data());
  }

  os.put(ema ? 1 : 0);
  if (ema) {
    write_f64(os, ema->decay());
    write_state_vectors(os, ema->shadow());
  }

  // Moment buffers are sized lazily on the first step; an untouched optimizer
  // has no state worth carrying.
  const bool save_opt = opt && !opt->m_state().empty();
  os.put(save_opt ? 1 : 0);
  if (save_opt) {
    write_i64(os, opt->step_count());
    write_state_vectors(os, opt->m_state());
    write_state_vectors(os, opt->v_state());
  }

  if (!os) throw std::runtime_error("write failed for checkpoint file: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint file: " + path);

  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != std::string(kMagic, 4))
    throw std::runtime_error("not a checkpoint file: " + path);

  Checkpoint chk;
  chk.version = read_u32(is);
  if (chk.version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(chk.version));

  chk.config = nlohmann::json::parse(read_str(is)).get<ModelConfig>();
  chk.step = read_u64(is);
  chk.master_seed = read_u64(is);

  const uint32_t n_params = read_u32(is);
  chk.weights.reserve(n_params);
  for (uint32_t i = 0; i < n_params; ++i) {
    std::string name = read_str(is);
    const uint32_t ndim = read_u32(is);
    if (ndim > 16) throw std::runtime_error("corrupt checkpoint: tensor rank " + std::to_string(ndim));
    Shape shape(ndim);
    int64_t numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      shape[d] = read_i64(is);
      if (shape[d] <= 0) throw std::runtime_error("corrupt checkpoint: non-positive dimension");
      numel *= shape[d];
    }
    Tensor t = Tensor::from_data(std::move(shape), read_f64v(is, static_cast<uint64_t>(numel)));
    chk.weights.emplace_back(std::move(name), std::move(t));
  }

  const int ema_flag = is.get();
  if (ema_flag == std::istream::traits_type::eof())
    throw std::runtime_error("truncated checkpoint file: " + path);
  chk.has_ema = ema_flag != 0;
  if (chk.has_ema) {
    chk.ema_decay = read_f64(is);
    chk.ema_shadow = read_state_vectors(is);
    if (chk.ema_shadow.size() != n_params)
      throw std::runtime_error("corrupt checkpoint: EMA entry count mismatch");
  }

  const int opt_flag = is.get();
  if (opt_flag == std::istream::traits_type::eof())
    throw std::runtime_error("truncated checkpoint file: " + path);
  chk.has_opt = opt_flag != 0;
  if (chk.has_opt) {
    chk.opt_t = read_i64(is);
    chk.opt_m = read_state_vectors(is);
    chk.opt_v = read_state_vectors(is);
    if (chk.opt_m.size() != n_params || chk.opt_v.size() != n_params)
      throw std::runtime_error("corrupt checkpoint: optimizer entry count mismatch");
  }

  if (!is) throw std::runtime_error("truncated checkpoint file: " + path);
  return chk;
}

void restore_weights(PtDit& model, const Checkpoint& chk) {
  const auto& params = model.params().params();
  if (params.size() != chk.weights.size())
    throw std::runtime_error("checkpoint parameter count does not match the model");
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& [name, tensor] = chk.weights[i];
    if (params[i]->name != name)
      throw std::runtime_error("checkpoint parameter name mismatch: expected " + params[i]->name +
                               ", found " + name);
    if (params[i]->tensor.shape() != tensor.shape())
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    params[i]->tensor.mutable_data() = tensor.data();
  }
}

}  // namespace ptdx
