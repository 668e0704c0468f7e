#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ptdx/tensor.hpp"

namespace ptdx {

// Synthetic stand-ins for an image corpus at desk scale. Every generator is
// deterministic per (config seed, item index); classes are built to be
// separable (class-mean distance well above the within-class spread).
enum class DataGenerator { GaussianBlobs, StripedClasses, SingleImageMemorization };

const char* data_generator_name(DataGenerator g);
DataGenerator data_generator_from_name(const std::string& name);

struct DatasetConfig {
  DataGenerator generator = DataGenerator::GaussianBlobs;
  int64_t size = 8;      // square side of the latent grid
  int64_t channels = 1;
  int64_t num_classes = 4;
  uint64_t seed = 0;

  void validate() const;
};

struct DatasetItem {
  Tensor x0;  // [C, 1, size, size], roughly in [-1, 1]
  int64_t label = 0;
};

// Item `index` of the infinite stream. Labels cycle through the classes;
// the memorization generator always returns the fixed target with label 0.
DatasetItem dataset_item(const DatasetConfig& cfg, int64_t index);

// Stacks items step*batch .. step*batch+batch-1 into [B, C, 1, size, size].
std::pair<Tensor, std::vector<int64_t>> dataset_batch(const DatasetConfig& cfg, int64_t batch,
                                                      int64_t step);

// The single noiseless image the memorization generator repeats.
Tensor memorization_target(const DatasetConfig& cfg);

}  // namespace ptdx
