#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "remtrack/parameter_store.hpp"
#include "remtrack/tape.hpp"

namespace remtrack::ad {

/// Builds a scalar loss on the given tape from the current store values.
using LossFn = std::function<Var(Tape&)>;

struct GradientCheckReport {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t entries_checked = 0;
};

/// Gradients smaller than this in magnitude are compared on an absolute scale:
/// with an O(1) loss, rounding leaves about 1e-10 of noise in a central
/// difference at epsilon 1e-5, which would swamp the relative error of tinier
/// entries.
inline constexpr double kGradCheckFloor = 1e-5;

/// Compares reverse-mode gradients against central differences
/// (f(t+e) - f(t-e)) / 2e for every entry of every parameter in `store`.
/// The relative error of one entry is |a - n| / max(|a|, |n|, kGradCheckFloor).
/// `store` is perturbed in place and restored bit for bit.
GradientCheckReport gradient_check(const LossFn& loss_fn, ParameterStore& store,
                                   double epsilon = 1e-5);

}  // namespace remtrack::ad
