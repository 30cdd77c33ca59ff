#include "remtrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

#include "remtrack/checkpoint.hpp"
#include "remtrack/optim.hpp"
#include "remtrack/st_graph.hpp"

namespace remtrack::track {

Mlp Mlp::declare(ad::ParameterStore& store, const std::string& prefix, std::size_t in,
                 std::size_t hidden, std::size_t out, std::uint64_t seed) {
    store.add(prefix + ".w1", ad::xavier_init(hidden, in, seed));
    store.add(prefix + ".b1", ad::Tensor::vector(hidden));
    store.add(prefix + ".w2", ad::xavier_init(out, hidden, seed + 1));
    store.add(prefix + ".b2", ad::Tensor::vector(out));
    return bind(store, prefix);
}

Mlp Mlp::bind(const ad::ParameterStore& store, const std::string& prefix) {
    Mlp m;
    m.w1 = store.ref(prefix + ".w1");
    m.b1 = store.ref(prefix + ".b1");
    m.w2 = store.ref(prefix + ".w2");
    m.b2 = store.ref(prefix + ".b2");
    const std::size_t hidden = m.w1->rows();
    if (m.b1->shape != std::vector<std::size_t>{hidden} || m.w2->cols() != hidden ||
        m.b2->shape != std::vector<std::size_t>{m.w2->rows()}) {
        throw std::invalid_argument("inconsistent layer shapes under '" + prefix + "'");
    }
    return m;
}

Var mlp_forward(Tape& tape, const Mlp& mlp, Var x) {
    const Var hidden = tape.leaky_relu(tape.affine(mlp.w1, mlp.b1, x), rem::kSigmaSlope);
    return tape.affine(mlp.w2, mlp.b2, hidden);
}

TrackerParameters TrackerParameters::declare(ad::ParameterStore& store, std::size_t appearance_dim,
                                             std::size_t relation_dim, std::size_t hidden,
                                             std::uint64_t seed) {
    store.add("trk.app.w", ad::xavier_init(appearance_dim, kAppearanceInputs, seed + 101));
    store.add("trk.app.b", ad::Tensor::vector(appearance_dim));
    Mlp::declare(store, "trk.base", appearance_dim, hidden, 4, seed + 110);
    Mlp::declare(store, "trk.rel", appearance_dim + relation_dim, hidden, 4, seed + 120);
    Mlp::declare(store, "trk.occ", relation_dim, hidden, 4, seed + 130);
    return bind(store);
}

TrackerParameters TrackerParameters::bind(const ad::ParameterStore& store) {
    TrackerParameters p;
    p.app_w = store.ref("trk.app.w");
    p.app_b = store.ref("trk.app.b");
    p.base = Mlp::bind(store, "trk.base");
    p.rel = Mlp::bind(store, "trk.rel");
    p.occ = Mlp::bind(store, "trk.occ");
    const std::size_t fa = p.app_w->rows();
    if (p.app_w->cols() != kAppearanceInputs || p.base.input_dim() != fa ||
        p.rel.input_dim() <= fa || p.base.w2->rows() != 4 || p.rel.w2->rows() != 4 ||
        p.occ.w2->rows() != 4 || p.occ.input_dim() != p.rel.input_dim() - fa) {
        throw std::invalid_argument("tracker heads have inconsistent dimensions");
    }
    return p;
}

std::array<double, kAppearanceInputs> appearance_input(const std::optional<BoundingBox>& detection,
                                                       const BoundingBox& prev_in, bool visible,
                                                       const rem::CoordinateFrame& frame) {
    const BoundingBox prev = prev_in.clamped();
    std::array<double, kAppearanceInputs> x{};
    if (detection) {
        const BoundingBox d = detection->clamped();
        x[0] = kRelativeInputScale * (d.cx - prev.cx) / prev.w;
        x[1] = kRelativeInputScale * (d.cy - prev.cy) / prev.h;
        x[2] = kRelativeInputScale * std::log(d.w / prev.w);
        x[3] = kRelativeInputScale * std::log(d.h / prev.h);
    }
    const auto m = frame.to_model(prev);
    std::copy(m.begin(), m.end(), x.begin() + 4);
    x[8] = visible ? 1.0 : 0.0;
    return x;
}

Var appearance_feature(Tape& tape, const TrackerParameters& p,
                       std::span<const double, kAppearanceInputs> input) {
    return tape.affine(p.app_w, p.app_b, tape.constant(std::span<const double>(input)));
}

Var regress_baseline(Tape& tape, const TrackerParameters& p, Var appearance) {
    return mlp_forward(tape, p.base, appearance);
}

Var regress_relation_aware(Tape& tape, const TrackerParameters& p, Var appearance, Var relation) {
    return mlp_forward(tape, p.rel, tape.concat({appearance, relation}));
}

Var regress_from_relations(Tape& tape, const TrackerParameters& p, Var relation) {
    const Var out = mlp_forward(tape, p.occ, relation);
    return tape.concat({tape.slice(out, 0, 2), tape.softplus(tape.slice(out, 2, 2))});
}

Var apply_offset(Tape& tape, const BoundingBox& prev_in, Var offset) {
    const BoundingBox prev = prev_in.clamped();
    const Var size = tape.constant(std::vector<double>{prev.w, prev.h});
    const Var center = tape.add(tape.constant(std::vector<double>{prev.cx, prev.cy}),
                                tape.mul(tape.slice(offset, 0, 2), size));
    return tape.concat({center, tape.mul(tape.exp(tape.slice(offset, 2, 2)), size)});
}

BoundingBox apply_offset(const BoundingBox& prev_in, std::span<const double> o) {
    const BoundingBox prev = prev_in.clamped();
    return {prev.cx + o[0] * prev.w, prev.cy + o[1] * prev.h, prev.w * std::exp(o[2]),
            prev.h * std::exp(o[3])};
}

Model Model::create(const ModelConfig& config, std::uint64_t seed) {
    Model m;
    m.config = config;
    m.rem = rem::RemParameters::declare(m.store, config.dim, seed, config.frame);
    m.trk = TrackerParameters::declare(m.store, config.appearance_dim, config.dim, config.hidden,
                                       seed);
    return m;
}

Model Model::clone() const {
    Model m;
    m.config = config;
    m.store = store.clone();
    m.rem = rem::RemParameters::bind(m.store, config.frame);
    m.trk = TrackerParameters::bind(m.store);
    return m;
}

bool Model::trainable(const std::string& name) { return name.rfind("trk.app.", 0) != 0; }

namespace {

nlohmann::json dims_json(const ModelConfig& c) {
    return {{"F", c.dim}, {"F_a", c.appearance_dim}, {"hidden", c.hidden}};
}

}  // namespace

nlohmann::json Model::to_json() const {
    nlohmann::json doc = ad::checkpoint_to_json(store, dims_json(config));
    doc["model"] = {{"d_th", config.d_th},
                    {"window", config.window},
                    {"frame",
                     {{"origin_x", config.frame.origin_x},
                      {"origin_y", config.frame.origin_y},
                      {"scale", config.frame.scale}}}};
    return doc;
}

Model Model::from_json(const nlohmann::json& doc) {
    const nlohmann::json dims = ad::checkpoint_dims(doc);
    ModelConfig c;
    try {
        c.dim = dims.at("F").get<std::size_t>();
        c.appearance_dim = dims.at("F_a").get<std::size_t>();
        c.hidden = dims.at("hidden").get<std::size_t>();
        if (doc.contains("model")) {
            const auto& m = doc.at("model");
            c.d_th = m.value("d_th", c.d_th);
            c.window = m.value("window", c.window);
            if (m.contains("frame")) {
                const auto& f = m.at("frame");
                c.frame.origin_x = f.at("origin_x").get<double>();
                c.frame.origin_y = f.at("origin_y").get<double>();
                c.frame.scale = f.at("scale").get<double>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("checkpoint: malformed dims or model block: ") +
                                    e.what());
    }
    if (c.dim == 0 || c.appearance_dim == 0 || c.hidden == 0 || !(c.frame.scale > 0.0) ||
        c.window < 1) {
        throw std::invalid_argument("checkpoint: dims, window and frame scale must be positive");
    }
    Model m = create(c, 0);
    ad::load_checkpoint(doc, dims_json(c), m.store);
    return m;
}

BoundingBox group_reckoned(const BoundingBox& last,
                           std::span<const std::pair<BoundingBox, BoundingBox>> moves, double vx,
                           double vy, int steps) {
    if (moves.empty()) return {last.cx + vx * steps, last.cy + vy * steps, last.w, last.h};
    double dx = 0.0, dy = 0.0;
    for (const auto& [before, after] : moves) {
        dx += after.cx - before.cx;
        dy += after.cy - before.cy;
    }
    const auto n = static_cast<double>(moves.size());
    return {last.cx + dx / n, last.cy + dy / n, last.w, last.h};
}

rem::RemParameters anchored(const rem::RemParameters& params, const BoundingBox& anchor) {
    rem::RemParameters p = params;
    p.frame.origin_x = anchor.cx;
    p.frame.origin_y = anchor.cy;
    return p;
}

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::baseline: return "baseline";
        case Mode::relation_aware: return "relation_aware";
        case Mode::relations_for_occluded: return "relations_for_occluded";
    }
    return "unknown";
}

Mode parse_mode(const std::string& name) {
    if (name == "baseline") return Mode::baseline;
    if (name == "relation_aware") return Mode::relation_aware;
    if (name == "relations_for_occluded") return Mode::relations_for_occluded;
    throw std::invalid_argument("unknown mode '" + name +
                                "' (expected baseline, relation_aware or relations_for_occluded)");
}

namespace {

struct Track {
    int id = 0;
    BoundingBox box;           // current estimate
    BoundingBox last_visible;  // estimate at the last matched frame
    double vx = 0.0;           // last observed per-frame center motion
    double vy = 0.0;
    int age = 0;               // frames since the last matched detection
    BoxSource source = BoxSource::spawned;

    bool occluded() const { return age > 0; }
    BoundingBox predicted() const { return {box.cx + vx, box.cy + vy, box.w, box.h}; }
    /// Box fed to the relation encoder: occluded tracks hold their last
    /// observed box so the encoder sees the same input as during training.
    const BoundingBox& encoder_box() const { return occluded() ? last_visible : box; }
};

std::vector<BoundingBox> canonical_detections(const std::vector<sim::Detection>& frame) {
    std::vector<BoundingBox> out;
    for (const auto& d : frame) {
        if (d.visible && d.box) out.push_back(d.box->clamped());
    }
    std::sort(out.begin(), out.end(), [](const BoundingBox& a, const BoundingBox& b) {
        return std::tie(a.cx, a.cy, a.w, a.h) < std::tie(b.cx, b.cy, b.w, b.h);
    });
    return out;
}

/// Greedy matching by descending IoU; ties resolved by (track order, detection order).
std::vector<int> associate(const std::vector<Track>& tracks, const std::vector<BoundingBox>& dets,
                           double threshold) {
    struct Pair {
        double iou;
        std::size_t track;
        std::size_t det;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        const BoundingBox pred = tracks[i].predicted().clamped();
        for (std::size_t j = 0; j < dets.size(); ++j) {
            const double o = iou(pred, dets[j]);
            if (o >= threshold) pairs.push_back({o, i, j});
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const Pair& a, const Pair& b) { return a.iou > b.iou; });
    std::vector<int> match(tracks.size(), -1);
    std::vector<bool> used(dets.size(), false);
    for (const auto& p : pairs) {
        if (match[p.track] >= 0 || used[p.det]) continue;
        match[p.track] = static_cast<int>(p.det);
        used[p.det] = true;
    }
    return match;
}

FrameInput encoder_frame(const std::vector<Track>& tracks) {
    FrameInput out;
    for (const auto& t : tracks) out.push_back(InstanceBox{t.id, t.encoder_box()});
    return out;
}

BoundingBox recover_from_relations(const Model& model, const SpatioTemporalGraph& graph, int t,
                                   const Track& track, const std::set<int>& occluded) {
    const rem::RemParameters params = anchored(model.rem, track.last_visible);
    Tape tape(false);
    rem::WindowEncoder enc(tape, params, graph, std::max(0, t - model.config.window + 1), t);
    const Var r = enc.receiver_chain(track.id).back();
    const Var box = regress_from_relations(tape, model.trk, r);
    const BoundingBox rel = params.frame.to_scene(tape.value(box));

    // Visible neighbors that were also in the graph when the track was last seen.
    std::vector<std::pair<BoundingBox, BoundingBox>> moves;
    const GraphFrame& now = graph.frames[static_cast<std::size_t>(t)];
    const GraphFrame& then = graph.frames[static_cast<std::size_t>(t - track.age)];
    const std::size_t i = *now.index_of(track.id);
    for (std::size_t j : now.neighbors[i]) {
        const int other = now.instances[j];
        if (occluded.contains(other)) continue;
        if (const auto k = then.index_of(other)) moves.emplace_back(then.boxes[*k], now.boxes[j]);
    }
    return group_reckoned(rel, moves, track.vx, track.vy, track.age).clamped();
}

}  // namespace

TrackOutput track_sequence(const Model& model, std::span<const std::vector<sim::Detection>> detections,
                           const TrackerConfig& config) {
    if (detections.empty() || canonical_detections(detections[0]).empty()) {
        throw std::invalid_argument("track_sequence: the first frame has no detections");
    }
    const bool use_relations = config.mode != Mode::baseline;
    std::vector<Track> tracks;
    int next_id = 1;
    SpatioTemporalGraph graph;
    graph.d_th = model.config.d_th;
    TrackOutput output;

    for (std::size_t ti = 0; ti < detections.size(); ++ti) {
        const int t = static_cast<int>(ti);
        const auto dets = canonical_detections(detections[ti]);
        std::set<int> before;
        for (const auto& tr : tracks) before.insert(tr.id);

        const auto match = associate(tracks, dets, config.match_threshold);
        // r^{t-1} of every live track, replayed from zero state over the last
        // `window` encoder frames exactly as in a training window.
        Tape rel_tape(false);
        std::map<int, Var> relation;
        if (use_relations && t > 0) {
            rem::WindowEncoder enc(rel_tape, model.rem, graph,
                                   std::max(0, t - model.config.window), t - 1);
            for (std::size_t i = 0; i < tracks.size(); ++i) {
                if (match[i] >= 0) relation[tracks[i].id] = enc.receiver_chain(tracks[i].id).back();
            }
        }
        std::vector<bool> det_used(dets.size(), false);
        std::vector<Track> kept;
        for (std::size_t i = 0; i < tracks.size(); ++i) {
            Track tr = tracks[i];
            if (match[i] >= 0) {
                const BoundingBox& det = dets[static_cast<std::size_t>(match[i])];
                det_used[static_cast<std::size_t>(match[i])] = true;
                Tape tape(false);
                const auto input = appearance_input(det, tr.box, true, model.config.frame);
                const Var app = appearance_feature(tape, model.trk, input);
                Var offset;
                if (use_relations) {
                    const auto r = rel_tape.value(relation.at(tr.id));
                    offset = regress_relation_aware(tape, model.trk, app, tape.constant(r));
                    tr.source = BoxSource::relation_head;
                } else {
                    offset = regress_baseline(tape, model.trk, app);
                    tr.source = BoxSource::baseline_head;
                }
                const BoundingBox next = apply_offset(tr.box, tape.value(offset)).clamped();
                tr.vx = next.cx - tr.box.cx;
                tr.vy = next.cy - tr.box.cy;
                tr.box = next;
                tr.last_visible = next;
                tr.age = 0;
            } else {
                tr.age += 1;
                if (tr.age > config.max_age) continue;
                tr.box = tr.predicted();
                tr.source = BoxSource::coasted;
            }
            kept.push_back(tr);
        }
        for (std::size_t j = 0; j < dets.size(); ++j) {
            if (det_used[j]) continue;
            Track tr;
            tr.id = next_id++;
            tr.box = dets[j];
            tr.last_visible = dets[j];
            kept.push_back(tr);
        }
        tracks = std::move(kept);

        std::set<int> after;
        for (const auto& tr : tracks) after.insert(tr.id);
        std::set<int> entered, left;
        std::set_difference(after.begin(), after.end(), before.begin(), before.end(),
                            std::inserter(entered, entered.end()));
        std::set_difference(before.begin(), before.end(), after.begin(), after.end(),
                            std::inserter(left, left.end()));
        update_graph(graph, t, entered, left, encoder_frame(tracks));

        if (config.mode == Mode::relations_for_occluded) {
            std::set<int> occluded;
            for (const auto& tr : tracks) {
                if (tr.occluded()) occluded.insert(tr.id);
            }
            for (auto& tr : tracks) {
                if (!tr.occluded()) continue;
                tr.box = recover_from_relations(model, graph, t, tr, occluded);
                tr.source = BoxSource::relations;
            }
        }

        std::vector<TrackedBox> frame_out;
        for (const auto& tr : tracks) {
            frame_out.push_back(TrackedBox{tr.id, tr.box, tr.source, tr.occluded()});
        }
        std::sort(frame_out.begin(), frame_out.end(),
                  [](const TrackedBox& a, const TrackedBox& b) { return a.id < b.id; });
        output.push_back(std::move(frame_out));
    }
    return output;
}

BoxSequence to_box_sequence(const TrackOutput& output) {
    BoxSequence seq;
    for (const auto& frame : output) {
        std::vector<InstanceBox> f;
        for (const auto& tb : frame) f.push_back(InstanceBox{tb.id, tb.box});
        seq.push_back(std::move(f));
    }
    return seq;
}

}  // namespace remtrack::track
