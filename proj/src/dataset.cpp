#include "ptdx/dataset.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ptdx/common.hpp"

namespace ptdx {

namespace {

// Class k sits on a circle around the grid center; jitter keeps samples of a
// class close while giving them within-class variance.
void fill_blob(std::vector<double>& px, int64_t s, double cx, double cy, double radius) {
  for (int64_t y = 0; y < s; ++y) {
    for (int64_t x = 0; x < s; ++x) {
      const double dx = double(x) + 0.5 - cx;
      const double dy = double(y) + 0.5 - cy;
      const double d2 = dx * dx + dy * dy;
      px[size_t(y * s + x)] = 2.0 * std::exp(-d2 / (2.0 * radius * radius)) - 1.0;
    }
  }
}

}  // namespace

const char* data_generator_name(DataGenerator g) {
  switch (g) {
    case DataGenerator::GaussianBlobs: return "gaussian-blobs";
    case DataGenerator::StripedClasses: return "striped-classes";
    case DataGenerator::SingleImageMemorization: return "single-image-memorization";
  }
  throw std::logic_error("unhandled generator");
}

DataGenerator data_generator_from_name(const std::string& name) {
  if (name == "gaussian-blobs") return DataGenerator::GaussianBlobs;
  if (name == "striped-classes") return DataGenerator::StripedClasses;
  if (name == "single-image-memorization") return DataGenerator::SingleImageMemorization;
  throw std::invalid_argument("unknown dataset generator: " + name);
}

void DatasetConfig::validate() const {
  if (size < 4) throw std::invalid_argument("dataset size must be at least 4");
  if (channels < 1) throw std::invalid_argument("dataset channels must be at least 1");
  if (num_classes < 1) throw std::invalid_argument("dataset needs at least one class");
}

Tensor memorization_target(const DatasetConfig& cfg) {
  cfg.validate();
  const int64_t s = cfg.size;
  Tensor x0 = Tensor::zeros({cfg.channels, 1, s, s});
  std::vector<double> plane(size_t(s * s));
  fill_blob(plane, s, double(s) / 2.0, double(s) / 2.0, double(s) / 5.0);
  auto& data = x0.mutable_data();
  for (int64_t c = 0; c < cfg.channels; ++c)
    for (int64_t i = 0; i < s * s; ++i) data[size_t(c * s * s + i)] = plane[size_t(i)];
  return x0;
}

DatasetItem dataset_item(const DatasetConfig& cfg, int64_t index) {
  cfg.validate();
  if (index < 0) throw std::invalid_argument("item index must be nonnegative");

  DatasetItem item;
  if (cfg.generator == DataGenerator::SingleImageMemorization) {
    item.x0 = memorization_target(cfg);
    item.label = 0;
    return item;
  }

  const int64_t s = cfg.size;
  const int64_t k = index % cfg.num_classes;
  Rng rng(derive_seed(cfg.seed, uint64_t(index)));
  item.label = k;
  item.x0 = Tensor::zeros({cfg.channels, 1, s, s});
  auto& data = item.x0.mutable_data();
  std::vector<double> plane(size_t(s * s));

  for (int64_t c = 0; c < cfg.channels; ++c) {
    // Structural draws first, then the per-pixel noise, so the stream layout
    // stays stable if one generator changes.
    if (cfg.generator == DataGenerator::GaussianBlobs) {
      const double angle =
          2.0 * std::numbers::pi * double(k) / double(cfg.num_classes);
      const double cx = double(s) / 2.0 + double(s) / 4.0 * std::cos(angle) +
                        (rng.uniform() - 0.5);
      const double cy = double(s) / 2.0 + double(s) / 4.0 * std::sin(angle) +
                        (rng.uniform() - 0.5);
      fill_blob(plane, s, cx, cy, double(s) / 6.0);
    } else {
      // Stripes: orientation alternates with the class, the period widens
      // every two classes, and a small phase jitter varies the samples.
      const double period = double(2 + 2 * (k / 2));
      const double phase = 0.4 * (rng.uniform() - 0.5);
      const bool vertical = k % 2 == 0;
      for (int64_t y = 0; y < s; ++y)
        for (int64_t x = 0; x < s; ++x) {
          const double coord = double(vertical ? x : y) + 0.5;
          plane[size_t(y * s + x)] =
              0.9 * std::sin(2.0 * std::numbers::pi * coord / period + phase);
        }
    }
    for (int64_t i = 0; i < s * s; ++i)
      data[size_t(c * s * s + i)] = plane[size_t(i)] + 0.05 * rng.normal();
  }
  return item;
}

std::pair<Tensor, std::vector<int64_t>> dataset_batch(const DatasetConfig& cfg, int64_t batch,
                                                      int64_t step) {
  if (batch < 1) throw std::invalid_argument("batch must be at least 1");
  if (step < 0) throw std::invalid_argument("step must be nonnegative");
  const int64_t s = cfg.size;
  Tensor x = Tensor::zeros({batch, cfg.channels, 1, s, s});
  std::vector<int64_t> labels(static_cast<size_t>(batch));
  auto& data = x.mutable_data();
  const int64_t per = cfg.channels * s * s;
  for (int64_t b = 0; b < batch; ++b) {
    DatasetItem item = dataset_item(cfg, step * batch + b);
    labels[size_t(b)] = item.label;
    const auto& src = item.x0.data();
    for (int64_t i = 0; i < per; ++i) data[size_t(b * per + i)] = src[size_t(i)];
  }
  return {x, labels};
}

}  // namespace ptdx
