#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

#include "remtrack/parameter_store.hpp"

namespace remtrack::ad {

/// Handle to a value recorded on a Tape.
struct Var {
    static constexpr std::uint32_t kInvalid = std::numeric_limits<std::uint32_t>::max();
    std::uint32_t id = kInvalid;
    bool valid() const { return id != kInvalid; }
};

/// Reverse-mode tape over dense vectors of doubles.
///
/// Every op appends a node holding its forward value and, when recording, a
/// closure that propagates the node's gradient to its parents. Parameters are
/// never copied onto the tape: ops read them through ParamRef and, during
/// backward(), accumulate into the Gradients object handed to backward().
///
/// All reductions run in ascending index order, except the neighbor-set
/// reductions (softmax denominator, weighted_sum) which sum value-sorted terms
/// so the result does not depend on the order the caller lists the terms in.
class Tape {
public:
    static constexpr std::size_t kAll = std::numeric_limits<std::size_t>::max();

    /// `record == false` builds forward values only; backward() then throws.
    explicit Tape(bool record = true);

    bool recording() const { return record_; }
    std::size_t node_count() const { return nodes_.size(); }

    // Leaves.
    Var constant(std::vector<double> values);
    Var constant(std::span<const double> values);
    Var variable(std::vector<double> values);
    Var zeros(std::size_t n);
    /// The parameter tensor as a vector node (used for biases).
    Var param(const ParamRef& p);

    // Parameterised affine maps.
    /// W x + b.
    Var affine(const ParamRef& w, const ParamRef& b, Var x);
    /// W[rows, cols] x for a sub-block of W. `x` has `col_count` entries.
    Var matvec(const ParamRef& w, Var x, std::size_t row_begin = 0, std::size_t row_count = kAll,
               std::size_t col_begin = 0, std::size_t col_count = kAll);
    /// coeff * W[:, col] where coeff is data (no gradient to coeff).
    Var scaled_column(const ParamRef& w, std::size_t col, double coeff);

    // Elementwise.
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var one_minus(Var a);
    Var scale(Var a, double c);
    Var sigmoid(Var a);
    Var tanh(Var a);
    Var leaky_relu(Var a, double slope);
    Var softplus(Var a);
    Var exp(Var a);

    // Structure.
    Var concat(std::span<const Var> parts);
    Var concat(std::initializer_list<Var> parts);
    Var slice(Var a, std::size_t begin, std::size_t count);
    /// Packs scalar nodes into one vector.
    Var stack(std::span<const Var> scalars);

    // Reductions.
    Var dot(Var a, Var b);
    Var sum(Var a);
    /// Mean of scalar nodes; an empty span yields constant 0.
    Var mean(std::span<const Var> scalars);
    Var softmax(Var logits);
    /// sum_k weights[k] * items[k]; items share one length.
    Var weighted_sum(Var weights, std::span<const Var> items);

    /// Node with caller-computed value and backward rule. `backward` receives
    /// the node's gradient and must add into the parents' gradients through
    /// add_grad().
    using CustomBackward = std::function<void(Tape&, std::span<const double> out_grad)>;
    Var custom(std::vector<double> value, std::initializer_list<Var> parents, CustomBackward backward);

    std::span<const double> value(Var v) const;
    double scalar(Var v) const;
    std::size_t size(Var v) const { return nodes_[v.id].value.size(); }
    /// Gradient of the last backward() target with respect to v (empty span if
    /// v took no part).
    std::span<const double> grad(Var v) const;
    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

    /// Adds into v's gradient buffer; valid only from inside a backward rule.
    void add_grad(Var v, std::span<const double> g);
    /// Adds into a parameter gradient, if gradients are being collected.
    std::vector<double>* param_grad(const ParamRef& p);

    /// Propagates d(loss)/d(.) from a scalar node. Parameter gradients are
    /// accumulated into `param_grads` when non-null.
    void backward(Var loss, Gradients* param_grads);

private:
    using Backward = std::function<void(Tape&, std::uint32_t self)>;
    struct Node {
        std::vector<double> value;
        std::vector<double> grad;
        Backward backward;
        bool requires_grad = false;
    };

    Var push(std::vector<double> value, bool requires_grad, Backward backward);
    bool any_requires(std::initializer_list<Var> vs) const;
    void check_same_size(Var a, Var b, const char* op) const;
    std::vector<double>& grad_buffer(std::uint32_t id);

    bool record_;
    std::vector<Node> nodes_;
    Gradients* param_grads_ = nullptr;
};

/// Sum of values in a canonical (ascending value) order; the result is
/// independent of the order of `terms`.
double canonical_sum(std::vector<double>& terms);

}  // namespace remtrack::ad
