#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "remtrack/geometry.hpp"
#include "remtrack/gru.hpp"
#include "remtrack/parameter_store.hpp"
#include "remtrack/st_graph.hpp"
#include "remtrack/tape.hpp"

namespace remtrack::rem {

using ad::ParamRef;
using ad::Tape;
using ad::Var;

/// LeakyReLU slope for the generic non-linearity in node features, messages
/// and the spatial update.
inline constexpr double kSigmaSlope = 0.1;
/// LeakyReLU slope inside the attention logit.
inline constexpr double kAttentionSlope = 0.2;
/// Frames replayed when recomputing an embedding without one neighbor.
inline constexpr int kDefaultImportanceWindow = 10;

/// Affine map from scene units into the coordinates the network sees:
/// centers become (c - origin) * scale and sizes become size * scale.
struct CoordinateFrame {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double scale = 1.0;

    std::array<double, 4> to_model(const BoundingBox& b) const {
        return {(b.cx - origin_x) * scale, (b.cy - origin_y) * scale, b.w * scale, b.h * scale};
    }
    BoundingBox to_scene(std::span<const double> m) const {
        return {m[0] / scale + origin_x, m[1] / scale + origin_y, m[2] / scale, m[3] / scale};
    }
    bool operator==(const CoordinateFrame&) const = default;
};

/// Learnable weights of the relation encoder, all living in one ParameterStore
/// under the "rem." prefix.
struct RemParameters {
    std::size_t dim = 128;
    CoordinateFrame frame;

    ParamRef w_in, b_in;          // 8 -> F
    ad::GruCellParams gru_in;     // F -> F
    ParamRef w_m1, b_m1;          // 2F + 1 -> F
    ParamRef w_m2, b_m2;          // F -> F
    ParamRef w_a1, w_a2;          // F -> F
    ParamRef w_u, b_u;            // 2F -> F
    ad::GruCellParams gru_rel;    // F -> F

    /// Xavier weights, zero biases.
    static RemParameters declare(ad::ParameterStore& store, std::size_t dim, std::uint64_t seed,
                                 CoordinateFrame frame = {});
    static RemParameters bind(const ad::ParameterStore& store, CoordinateFrame frame = {});
};

/// Recurrent state of one live instance on a tape.
struct NodeVars {
    Var v;
    Var r;
    BoundingBox prev_box;
};
using TapeState = std::map<int, NodeVars>;

/// Recurrent state of one live instance as plain values.
struct NodeState {
    std::vector<double> v;
    std::vector<double> r;
    BoundingBox prev_box;
};
struct RemState {
    std::map<int, NodeState> nodes;
};

struct RelationEmbedding {
    int instance = 0;
    int t = 0;
    std::vector<double> r;
};

/// v = GRU_in(sigma(W_in [p || p - p_prev] + b_in), v_prev).
Var node_feature(Tape& tape, const RemParameters& params, const BoundingBox& p,
                 const BoundingBox& p_prev, Var v_prev);

/// Receiver/sender halves of the first message layer and the two attention
/// projections of one node; shared by all edges touching the node.
struct NodeProjections {
    Var recv;   // W_m1[:, 0:F] v
    Var send;   // W_m1[:, F:2F] v
    Var query;  // W_a1 v
    Var key;    // W_a2 v
};
NodeProjections project_node(Tape& tape, const RemParameters& params, Var v);

/// m_ij = sigma(W_m2 sigma(W_m1 [v_i || v_j || D_ij] + b_m1) + b_m2), receiver i.
Var message(Tape& tape, const RemParameters& params, Var v_i, Var v_j, double d_ij);
Var message(Tape& tape, const RemParameters& params, const NodeProjections& receiver,
            const NodeProjections& sender, double d_ij);

/// Softmax over neighbors of LeakyReLU([W_a1 v_i]^T [W_a2 v_j]).
Var attention_coefficients(Tape& tape, const RemParameters& params, Var v_i,
                           std::span<const Var> neighbor_features);
Var attention_coefficients(Tape& tape, const NodeProjections& receiver,
                           std::span<const NodeProjections> senders);

/// r = GRU_rel(sigma(W_u [v_i || aggregated] + b_u), r_prev).
Var spatiotemporal_update(Tape& tape, const RemParameters& params, Var v_i, Var aggregated,
                          Var r_prev);

struct StepOptions {
    /// (receiver, sender): the sender is left out of the receiver's neighbor set.
    std::optional<std::pair<int, int>> excluded_edge;
    /// Start every instance missing from the state with zero history instead
    /// of rejecting it (used when replaying a window that starts mid-sequence).
    bool fresh_start = false;
};

/// Advances the relation encoder to frame t of `graph`. Continuing instances
/// must be present in `state`; new or re-entering instances start from zero
/// hidden states; instances absent at t are dropped. Returns r per instance.
std::map<int, Var> rem_step(Tape& tape, const RemParameters& params,
                            const SpatioTemporalGraph& graph, int t, TapeState& state,
                            const StepOptions& options = {});

/// Value-level wrapper of rem_step (forward only).
std::vector<RelationEmbedding> rem_step(const RemParameters& params,
                                        const SpatioTemporalGraph& graph, int t, RemState& state);

/// 1 - cos^2(a, b); 0 when either vector has norm below 1e-12.
double one_minus_cos2(std::span<const double> a, std::span<const double> b);

/// Zero-state replay of the encoder over frames [t0, t1] of a graph. Node
/// features do not depend on the graph's edges, so they are computed on demand
/// and shared by every receiver chain evaluated on the same encoder.
class WindowEncoder {
public:
    WindowEncoder(Tape& tape, const RemParameters& params, const SpatioTemporalGraph& graph,
                  int t0, int t1);

    /// r of `instance` at each frame of the window (index f - t0); invalid
    /// Vars where the instance is absent. `excluded` is dropped from the
    /// instance's neighbor set at every frame.
    std::vector<Var> receiver_chain(int instance, std::optional<int> excluded = std::nullopt);

    int first_frame() const { return t0_; }
    int last_frame() const { return t1_; }

private:
    Var feature(int f, std::size_t k);
    const NodeProjections& projection(int f, std::size_t k);

    Tape& tape_;
    const RemParameters& params_;
    const SpatioTemporalGraph& graph_;
    int t0_;
    int t1_;
    std::vector<std::vector<Var>> v_;
    std::vector<std::vector<std::optional<NodeProjections>>> proj_;
};

struct RelationImportance {
    int t = 0;
    int i = 0;
    int j = 0;
    double value = 0.0;
};

/// R_ij at frame t: 1[D_ij <= d_th] * (1 - cos^2(r_i, r_i without j)). Both
/// embeddings come from replaying the last `window` frames from zero state;
/// the second replay drops j from i's neighbor set at every step.
double relation_importance(const RemParameters& params, const SpatioTemporalGraph& graph, int t,
                           int i, int j, int window = kDefaultImportanceWindow);

/// R_ij for every ordered pair (i, j) adjacent at frame t, sorted by (i, j).
std::vector<RelationImportance> relation_importances(const RemParameters& params,
                                                     const SpatioTemporalGraph& graph, int t,
                                                     int window = kDefaultImportanceWindow);

}  // namespace remtrack::rem
