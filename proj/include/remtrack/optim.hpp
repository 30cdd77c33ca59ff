#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "remtrack/parameter_store.hpp"

namespace remtrack::ad {

/// Uniform samples in +-sqrt(6 / (rows + cols)); same seed, same tensor.
Tensor xavier_init(std::size_t rows, std::size_t cols, std::uint64_t seed);

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update on every parameter of the store. Every
/// parameter must carry a gradient; gradients are cleared afterwards.
void adam_step(ParameterStore& store, const AdamConfig& config = {});

/// Parameters for which `trainable(name)` is false are left untouched (their
/// moments and step counters too) and need no gradient.
using TrainableFilter = std::function<bool(const std::string& name)>;
void adam_step(ParameterStore& store, const AdamConfig& config, const TrainableFilter& trainable);

}  // namespace remtrack::ad
