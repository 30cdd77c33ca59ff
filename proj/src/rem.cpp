#include "remtrack/rem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "remtrack/optim.hpp"

namespace remtrack::rem {

RemParameters RemParameters::declare(ad::ParameterStore& store, std::size_t dim,
                                     std::uint64_t seed, CoordinateFrame frame) {
    if (dim == 0) {
        throw std::invalid_argument("RemParameters: dim must be >= 1");
    }
    const std::size_t F = dim;
    store.add("rem.w_in", ad::xavier_init(F, 8, seed + 1));
    store.add("rem.b_in", ad::Tensor::vector(F));
    ad::GruCellParams::declare(store, "rem.gru_in", F, F, seed + 10);
    store.add("rem.w_m1", ad::xavier_init(F, 2 * F + 1, seed + 2));
    store.add("rem.b_m1", ad::Tensor::vector(F));
    store.add("rem.w_m2", ad::xavier_init(F, F, seed + 3));
    store.add("rem.b_m2", ad::Tensor::vector(F));
    store.add("rem.w_a1", ad::xavier_init(F, F, seed + 4));
    store.add("rem.w_a2", ad::xavier_init(F, F, seed + 5));
    store.add("rem.w_u", ad::xavier_init(F, 2 * F, seed + 6));
    store.add("rem.b_u", ad::Tensor::vector(F));
    ad::GruCellParams::declare(store, "rem.gru_rel", F, F, seed + 20);
    return bind(store, frame);
}

RemParameters RemParameters::bind(const ad::ParameterStore& store, CoordinateFrame frame) {
    RemParameters p;
    p.frame = frame;
    p.w_in = store.ref("rem.w_in");
    p.dim = p.w_in->rows();
    const std::size_t F = p.dim;
    p.b_in = store.ref("rem.b_in");
    p.gru_in = ad::GruCellParams::bind(store, "rem.gru_in");
    p.w_m1 = store.ref("rem.w_m1");
    p.b_m1 = store.ref("rem.b_m1");
    p.w_m2 = store.ref("rem.w_m2");
    p.b_m2 = store.ref("rem.b_m2");
    p.w_a1 = store.ref("rem.w_a1");
    p.w_a2 = store.ref("rem.w_a2");
    p.w_u = store.ref("rem.w_u");
    p.b_u = store.ref("rem.b_u");
    p.gru_rel = ad::GruCellParams::bind(store, "rem.gru_rel");

    auto expect = [](const ParamRef& r, std::vector<std::size_t> shape, const char* name) {
        if (r->shape != shape) {
            throw std::invalid_argument(std::string("RemParameters: ") + name + " has shape " +
                                        ad::shape_to_string(r->shape) + ", expected " +
                                        ad::shape_to_string(shape));
        }
    };
    expect(p.w_in, {F, 8}, "w_in");
    expect(p.b_in, {F}, "b_in");
    expect(p.w_m1, {F, 2 * F + 1}, "w_m1");
    expect(p.b_m1, {F}, "b_m1");
    expect(p.w_m2, {F, F}, "w_m2");
    expect(p.b_m2, {F}, "b_m2");
    expect(p.w_a1, {F, F}, "w_a1");
    expect(p.w_a2, {F, F}, "w_a2");
    expect(p.w_u, {F, 2 * F}, "w_u");
    expect(p.b_u, {F}, "b_u");
    if (p.gru_in.input_dim != F || p.gru_in.hidden_dim != F || p.gru_rel.input_dim != F ||
        p.gru_rel.hidden_dim != F) {
        throw std::invalid_argument("RemParameters: GRU cells must be F -> F");
    }
    return p;
}

Var node_feature(Tape& tape, const RemParameters& params, const BoundingBox& p,
                 const BoundingBox& p_prev, Var v_prev) {
    const auto cur = params.frame.to_model(p);
    const auto prev = params.frame.to_model(p_prev);
    std::vector<double> input(8);
    for (std::size_t k = 0; k < 4; ++k) {
        input[k] = cur[k];
        input[4 + k] = cur[k] - prev[k];
    }
    const Var x = tape.constant(std::move(input));
    const Var p_tilde = tape.leaky_relu(tape.affine(params.w_in, params.b_in, x), kSigmaSlope);
    return ad::gru_cell(tape, params.gru_in, p_tilde, v_prev);
}

NodeProjections project_node(Tape& tape, const RemParameters& params, Var v) {
    const std::size_t F = params.dim;
    NodeProjections out;
    out.recv = tape.matvec(params.w_m1, v, 0, Tape::kAll, 0, F);
    out.send = tape.matvec(params.w_m1, v, 0, Tape::kAll, F, F);
    out.query = tape.matvec(params.w_a1, v);
    out.key = tape.matvec(params.w_a2, v);
    return out;
}

namespace {

Var message_from_halves(Tape& tape, const RemParameters& params, Var recv, Var send, double d_ij) {
    const std::size_t F = params.dim;
    Var pre = tape.add(recv, send);
    pre = tape.add(pre, tape.scaled_column(params.w_m1, 2 * F, d_ij));
    pre = tape.add(pre, tape.param(params.b_m1));
    const Var hidden = tape.leaky_relu(pre, kSigmaSlope);
    return tape.leaky_relu(tape.affine(params.w_m2, params.b_m2, hidden), kSigmaSlope);
}

Var attention_from_logits(Tape& tape, std::vector<Var>& logits) {
    for (Var& e : logits) {
        e = tape.leaky_relu(e, kAttentionSlope);
    }
    return tape.softmax(tape.stack(logits));
}

}  // namespace

Var message(Tape& tape, const RemParameters& params, const NodeProjections& receiver,
            const NodeProjections& sender, double d_ij) {
    return message_from_halves(tape, params, receiver.recv, sender.send, d_ij);
}

Var message(Tape& tape, const RemParameters& params, Var v_i, Var v_j, double d_ij) {
    const std::size_t F = params.dim;
    if (tape.size(v_i) != F || tape.size(v_j) != F) {
        throw std::invalid_argument("message: node features must have length F");
    }
    const Var recv = tape.matvec(params.w_m1, v_i, 0, Tape::kAll, 0, F);
    const Var send = tape.matvec(params.w_m1, v_j, 0, Tape::kAll, F, F);
    return message_from_halves(tape, params, recv, send, d_ij);
}

Var attention_coefficients(Tape& tape, const NodeProjections& receiver,
                           std::span<const NodeProjections> senders) {
    if (senders.empty()) {
        throw std::invalid_argument("attention_coefficients: empty neighbor set");
    }
    std::vector<Var> logits;
    logits.reserve(senders.size());
    for (const auto& s : senders) {
        logits.push_back(tape.dot(receiver.query, s.key));
    }
    return attention_from_logits(tape, logits);
}

Var attention_coefficients(Tape& tape, const RemParameters& params, Var v_i,
                           std::span<const Var> neighbor_features) {
    if (neighbor_features.empty()) {
        throw std::invalid_argument("attention_coefficients: empty neighbor set");
    }
    const Var query = tape.matvec(params.w_a1, v_i);
    std::vector<Var> logits;
    logits.reserve(neighbor_features.size());
    for (Var v_j : neighbor_features) {
        logits.push_back(tape.dot(query, tape.matvec(params.w_a2, v_j)));
    }
    return attention_from_logits(tape, logits);
}

Var spatiotemporal_update(Tape& tape, const RemParameters& params, Var v_i, Var aggregated,
                          Var r_prev) {
    const Var spatial =
        tape.leaky_relu(tape.affine(params.w_u, params.b_u, tape.concat({v_i, aggregated})),
                        kSigmaSlope);
    return ad::gru_cell(tape, params.gru_rel, spatial, r_prev);
}

std::map<int, Var> rem_step(Tape& tape, const RemParameters& params,
                            const SpatioTemporalGraph& graph, int t, TapeState& state,
                            const StepOptions& options) {
    if (t < 0 || static_cast<std::size_t>(t) >= graph.frame_count()) {
        throw std::out_of_range("rem_step: frame " + std::to_string(t) + " not in graph");
    }
    const GraphFrame& frame = graph.frames[static_cast<std::size_t>(t)];
    const std::size_t n = frame.size();
    const std::size_t F = params.dim;

    std::vector<Var> v(n);
    std::vector<Var> r_prev(n);
    for (std::size_t k = 0; k < n; ++k) {
        const int id = frame.instances[k];
        const auto it = state.find(id);
        const bool continuing = graph.continues(t, id);
        if (continuing && it == state.end() && !options.fresh_start) {
            throw std::invalid_argument("rem_step: continuing instance " + std::to_string(id) +
                                        " has no recurrent state at frame " + std::to_string(t));
        }
        if (continuing && it != state.end()) {
            v[k] = node_feature(tape, params, frame.boxes[k], it->second.prev_box, it->second.v);
            r_prev[k] = it->second.r;
        } else {
            v[k] = node_feature(tape, params, frame.boxes[k], frame.boxes[k], tape.zeros(F));
            r_prev[k] = tape.zeros(F);
        }
    }

    std::vector<std::optional<NodeProjections>> proj(n);
    auto projection = [&](std::size_t k) -> const NodeProjections& {
        if (!proj[k]) {
            proj[k] = project_node(tape, params, v[k]);
        }
        return *proj[k];
    };

    TapeState next;
    std::map<int, Var> out;
    for (std::size_t i = 0; i < n; ++i) {
        const int id = frame.instances[i];
        std::vector<std::size_t> senders;
        for (std::size_t j : frame.neighbors[i]) {
            if (options.excluded_edge && options.excluded_edge->first == id &&
                options.excluded_edge->second == frame.instances[j]) {
                continue;
            }
            senders.push_back(j);
        }
        Var aggregated;
        if (senders.empty()) {
            aggregated = tape.zeros(F);
        } else {
            std::vector<Var> messages;
            std::vector<NodeProjections> sender_proj;
            messages.reserve(senders.size());
            sender_proj.reserve(senders.size());
            for (std::size_t j : senders) {
                messages.push_back(message(tape, params, projection(i), projection(j),
                                           frame.distance(i, j)));
                sender_proj.push_back(projection(j));
            }
            const Var alpha = attention_coefficients(tape, projection(i), sender_proj);
            aggregated = tape.weighted_sum(alpha, messages);
        }
        const Var r = spatiotemporal_update(tape, params, v[i], aggregated, r_prev[i]);
        next[id] = NodeVars{v[i], r, frame.boxes[i]};
        out[id] = r;
    }
    state = std::move(next);
    return out;
}

std::vector<RelationEmbedding> rem_step(const RemParameters& params,
                                        const SpatioTemporalGraph& graph, int t, RemState& state) {
    Tape tape(false);
    TapeState vars;
    for (const auto& [id, s] : state.nodes) {
        vars[id] = NodeVars{tape.constant(s.v), tape.constant(s.r), s.prev_box};
    }
    const auto rs = rem_step(tape, params, graph, t, vars);
    RemState next;
    std::vector<RelationEmbedding> out;
    for (const auto& [id, nv] : vars) {
        const auto v = tape.value(nv.v);
        const auto r = tape.value(nv.r);
        next.nodes[id] = NodeState{{v.begin(), v.end()}, {r.begin(), r.end()}, nv.prev_box};
        out.push_back(RelationEmbedding{id, t, {r.begin(), r.end()}});
    }
    state = std::move(next);
    return out;
}

double one_minus_cos2(std::span<const double> a, std::span<const double> b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        ab += a[k] * b[k];
        aa += a[k] * a[k];
        bb += b[k] * b[k];
    }
    const double na = std::sqrt(aa);
    const double nb = std::sqrt(bb);
    if (na < 1e-12 || nb < 1e-12) {
        return 0.0;
    }
    const double c = ab / (na * nb);
    return std::clamp(1.0 - c * c, 0.0, 1.0);
}

WindowEncoder::WindowEncoder(Tape& tape, const RemParameters& params,
                             const SpatioTemporalGraph& graph, int t0, int t1)
    : tape_(tape), params_(params), graph_(graph), t0_(t0), t1_(t1) {
    if (t0 < 0 || t1 < t0 || static_cast<std::size_t>(t1) >= graph.frame_count()) {
        throw std::out_of_range("WindowEncoder: frames [" + std::to_string(t0) + ", " +
                                std::to_string(t1) + "] not in graph");
    }
    for (int f = t0_; f <= t1_; ++f) {
        const std::size_t n = graph.frames[static_cast<std::size_t>(f)].size();
        v_.emplace_back(n);
        proj_.emplace_back(n);
    }
}

Var WindowEncoder::feature(int f, std::size_t k) {
    const std::size_t fi = static_cast<std::size_t>(f - t0_);
    if (v_[fi][k].valid()) {
        return v_[fi][k];
    }
    const GraphFrame& frame = graph_.frames[static_cast<std::size_t>(f)];
    const int id = frame.instances[k];
    Var v;
    if (f > t0_ && graph_.continues(f, id)) {
        const GraphFrame& pf = graph_.frames[static_cast<std::size_t>(f - 1)];
        const std::size_t pk = *pf.index_of(id);
        v = node_feature(tape_, params_, frame.boxes[k], pf.boxes[pk], feature(f - 1, pk));
    } else {
        v = node_feature(tape_, params_, frame.boxes[k], frame.boxes[k], tape_.zeros(params_.dim));
    }
    v_[fi][k] = v;
    return v;
}

const NodeProjections& WindowEncoder::projection(int f, std::size_t k) {
    auto& slot = proj_[static_cast<std::size_t>(f - t0_)][k];
    if (!slot) {
        slot = project_node(tape_, params_, feature(f, k));
    }
    return *slot;
}

std::vector<Var> WindowEncoder::receiver_chain(int instance, std::optional<int> excluded) {
    const std::size_t F = params_.dim;
    std::vector<Var> out(static_cast<std::size_t>(t1_ - t0_ + 1));
    Var r;
    for (int f = t0_; f <= t1_; ++f) {
        const GraphFrame& frame = graph_.frames[static_cast<std::size_t>(f)];
        const auto idx = frame.index_of(instance);
        if (!idx) {
            r = Var{};
            continue;
        }
        if (!r.valid() || !(f > t0_ && graph_.continues(f, instance))) {
            r = tape_.zeros(F);
        }
        const std::size_t i = *idx;
        std::vector<Var> messages;
        std::vector<NodeProjections> senders;
        for (std::size_t j : frame.neighbors[i]) {
            if (excluded && frame.instances[j] == *excluded) {
                continue;
            }
            messages.push_back(
                message(tape_, params_, projection(f, i), projection(f, j), frame.distance(i, j)));
            senders.push_back(projection(f, j));
        }
        Var aggregated;
        if (senders.empty()) {
            aggregated = tape_.zeros(F);
        } else {
            const Var alpha = attention_coefficients(tape_, projection(f, i), senders);
            aggregated = tape_.weighted_sum(alpha, messages);
        }
        r = spatiotemporal_update(tape_, params_, feature(f, i), aggregated, r);
        out[static_cast<std::size_t>(f - t0_)] = r;
    }
    return out;
}

namespace {

/// r_i at the last frame of a zero-state replay, optionally without one sender.
std::vector<double> replayed_embedding(Tape& tape, WindowEncoder& enc, int instance,
                                       std::optional<int> excluded) {
    const Var r = enc.receiver_chain(instance, excluded).back();
    const auto rv = tape.value(r);
    return {rv.begin(), rv.end()};
}

void check_frame(const SpatioTemporalGraph& graph, int t) {
    if (t < 0 || static_cast<std::size_t>(t) >= graph.frame_count()) {
        throw std::out_of_range("relation importance: frame " + std::to_string(t) +
                                " not in graph");
    }
}

}  // namespace

double relation_importance(const RemParameters& params, const SpatioTemporalGraph& graph, int t,
                           int i, int j, int window) {
    check_frame(graph, t);
    if (i == j) {
        throw std::invalid_argument("relation_importance: i and j must differ");
    }
    const GraphFrame& frame = graph.frames[static_cast<std::size_t>(t)];
    const auto ii = frame.index_of(i);
    const auto jj = frame.index_of(j);
    if (!ii || !jj) {
        throw std::invalid_argument("relation_importance: both instances must be alive at t");
    }
    if (!(frame.distance(*ii, *jj) <= graph.d_th)) {
        return 0.0;
    }
    if (window < 1) {
        throw std::invalid_argument("relation importance: window must be >= 1");
    }
    Tape tape(false);
    WindowEncoder enc(tape, params, graph, std::max(0, t - window + 1), t);
    const auto full = replayed_embedding(tape, enc, i, std::nullopt);
    const auto without = replayed_embedding(tape, enc, i, j);
    return one_minus_cos2(full, without);
}

std::vector<RelationImportance> relation_importances(const RemParameters& params,
                                                     const SpatioTemporalGraph& graph, int t,
                                                     int window) {
    check_frame(graph, t);
    const GraphFrame& frame = graph.frames[static_cast<std::size_t>(t)];
    std::vector<RelationImportance> out;
    if (frame.spatial_edge_count() == 0) {
        return out;
    }
    if (window < 1) {
        throw std::invalid_argument("relation importance: window must be >= 1");
    }
    Tape tape(false);
    WindowEncoder enc(tape, params, graph, std::max(0, t - window + 1), t);
    for (std::size_t i = 0; i < frame.size(); ++i) {
        if (frame.neighbors[i].empty()) {
            continue;
        }
        const int id_i = frame.instances[i];
        const auto full = replayed_embedding(tape, enc, id_i, std::nullopt);
        for (std::size_t j : frame.neighbors[i]) {
            const int id_j = frame.instances[j];
            const auto without = replayed_embedding(tape, enc, id_i, id_j);
            out.push_back(RelationImportance{t, id_i, id_j, one_minus_cos2(full, without)});
        }
    }
    return out;
}

}  // namespace remtrack::rem
