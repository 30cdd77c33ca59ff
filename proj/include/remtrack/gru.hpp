#pragma once

#include <cstdint>
#include <string>

#include "remtrack/parameter_store.hpp"
#include "remtrack/tape.hpp"

namespace remtrack::ad {

/// Weights of one GRU cell with the gates stacked in [z; r; n] order:
/// `wx` is (3H x I), `wh` is (3H x H), `bias` is (3H).
struct GruCellParams {
    ParamRef wx;
    ParamRef wh;
    ParamRef bias;
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;

    /// Adds `<prefix>.wx`, `<prefix>.wh`, `<prefix>.b` to the store with
    /// per-gate Xavier weights and zero biases.
    static GruCellParams declare(ParameterStore& store, const std::string& prefix,
                                 std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed);
    /// Looks up an already declared cell and validates its shapes.
    static GruCellParams bind(const ParameterStore& store, const std::string& prefix);
};

/// Standard GRU update:
///   z = sigmoid(Wz x + Uz h + bz)
///   r = sigmoid(Wr x + Ur h + br)
///   n = tanh(Wn x + Un (r * h) + bn)
///   h' = (1 - z) * h + z * n
Var gru_cell(Tape& tape, const GruCellParams& p, Var x, Var h_prev);

}  // namespace remtrack::ad
