#include "remtrack/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>

#include "remtrack/geometry.hpp"
#include "remtrack/optim.hpp"
#include "remtrack/rem.hpp"
#include "remtrack/st_graph.hpp"

namespace remtrack::train {

using ad::Tape;
using ad::Var;

namespace {

std::optional<BoundingBox> detection_of(const std::vector<sim::Detection>& frame, int id) {
    for (const auto& d : frame) {
        if (d.id == id && d.visible && d.box) return d.box->clamped();
    }
    return std::nullopt;
}

const sim::GtObject* gt_of(const std::vector<sim::GtObject>& frame, int id) {
    for (const auto& o : frame) {
        if (o.id == id) return &o;
    }
    return nullptr;
}

BoundingBox as_box(const std::array<double, 4>& m) { return {m[0], m[1], m[2], m[3]}; }

Var mean_or_zero(Tape& tape, const std::vector<Var>& terms) {
    return terms.empty() ? tape.constant(std::vector<double>{0.0}) : tape.mean(terms);
}

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// The tracker regresses from its own previous estimate, which is never exactly
// the previous detection. Perturbing the regression prior during training
// shows the heads boxes that are off in position and size, so they learn to
// pull them back instead of compounding the error frame after frame. The
// perturbation depends only on (start, id), keeping the loss a pure function.
BoundingBox perturbed_prior(const BoundingBox& box, int start, int id) {
    std::mt19937_64 rng(mix((static_cast<std::uint64_t>(start) << 32) ^ static_cast<std::uint32_t>(id)));
    std::normal_distribution<double> n(0.0, kPriorJitter);
    BoundingBox out = box;
    out.cx += n(rng) * box.w;
    out.cy += n(rng) * box.h;
    out.w *= std::exp(n(rng));
    out.h *= std::exp(n(rng));
    return out.clamped();
}

bool usable(const TrainingSequence& seq, int window) {
    return seq.gt.frame_count() >= window + 1 &&
           seq.detections.size() == static_cast<std::size_t>(seq.gt.frame_count());
}

}  // namespace

Var window_loss(Tape& tape, const track::Model& model, const TrainingSequence& seq, int start,
                LossParts* parts) {
    const int T = model.config.window;
    if (start < 0 || start + T >= seq.gt.frame_count()) {
        throw std::out_of_range("window_loss: window does not fit the sequence");
    }

    // Encoder inputs and the per-frame occlusion flags of every object.
    std::vector<FrameInput> inputs(static_cast<std::size_t>(T));
    std::map<int, std::vector<int>> occluded_frames;
    std::map<int, BoundingBox> last_seen;
    for (int k = 0; k < T; ++k) {
        const auto f = static_cast<std::size_t>(start + k);
        for (const auto& obj : seq.gt.frames[f]) {
            const auto det = detection_of(seq.detections[f], obj.id);
            BoundingBox box;
            if (det) {
                box = *det;
                last_seen[obj.id] = box;
                if (k == T - 1) box = perturbed_prior(box, start, obj.id);
            } else {
                auto it = last_seen.find(obj.id);
                if (it == last_seen.end()) it = last_seen.emplace(obj.id, obj.box).first;
                box = it->second;
                occluded_frames[obj.id].push_back(k);
            }
            inputs[static_cast<std::size_t>(k)].push_back(InstanceBox{obj.id, box});
        }
    }
    const SpatioTemporalGraph graph = build_graph(inputs, model.config.d_th);
    rem::WindowEncoder encoder(tape, model.rem, graph, 0, T - 1);

    // Regression at the frame after the window.
    std::vector<Var> rel_terms, base_terms, occ_terms;
    const auto target_f = static_cast<std::size_t>(start + T);
    const GraphFrame& last = graph.frames.back();
    for (const auto& obj : seq.gt.frames[target_f]) {
        const auto det = detection_of(seq.detections[target_f], obj.id);
        const auto idx = last.index_of(obj.id);
        if (!det || !idx) continue;
        const BoundingBox& prev = last.boxes[*idx];
        const auto input = track::appearance_input(det, prev, true, model.config.frame);
        const Var app = track::appearance_feature(tape, model.trk, input);
        const Var r = encoder.receiver_chain(obj.id).back();
        rel_terms.push_back(giou_loss(
            tape, track::apply_offset(tape, prev, track::regress_relation_aware(tape, model.trk, app, r)),
            obj.box));
        base_terms.push_back(giou_loss(
            tape, track::apply_offset(tape, prev, track::regress_baseline(tape, model.trk, app)),
            obj.box));
    }

    // Recovery of occluded objects, one anchored replay per occlusion episode.
    for (const auto& [id, frames] : occluded_frames) {
        std::size_t a = 0;
        while (a < frames.size()) {
            std::size_t b = a;
            while (b + 1 < frames.size() && frames[b + 1] == frames[b] + 1) ++b;
            const int k0 = frames[a];
            const int k1 = frames[b];
            const GraphFrame& fk = graph.frames[static_cast<std::size_t>(k0)];
            const BoundingBox anchor = fk.boxes[*fk.index_of(id)];
            // Frame the anchor comes from, and the motion between the last two
            // sightings as the tracker would have measured it (zero when the
            // window opens inside the occlusion).
            const int kr = std::max(k0 - 1, 0);
            double vx = 0.0, vy = 0.0;
            if (k0 >= 1 && start + k0 >= 2) {
                const auto before = detection_of(seq.detections[static_cast<std::size_t>(start + k0 - 2)], id);
                if (before) {
                    vx = anchor.cx - before->cx;
                    vy = anchor.cy - before->cy;
                }
            }
            const rem::RemParameters params = track::anchored(model.rem, anchor);
            rem::WindowEncoder enc(tape, params, graph, 0, k1);
            const auto chain = enc.receiver_chain(id);
            for (int k = k0; k <= k1; ++k) {
                const auto* obj = gt_of(seq.gt.frames[static_cast<std::size_t>(start + k)], id);
                const Var box =
                    track::regress_from_relations(tape, model.trk, chain[static_cast<std::size_t>(k)]);
                // The head predicts a correction to the group-reckoned box, so its
                // target is the true box moved back by the same shift.
                const GraphFrame& gk = graph.frames[static_cast<std::size_t>(k)];
                const std::size_t i = *gk.index_of(id);
                std::vector<std::pair<BoundingBox, BoundingBox>> moves;
                for (std::size_t j : gk.neighbors[i]) {
                    const int other = gk.instances[j];
                    const auto before = detection_of(seq.detections[static_cast<std::size_t>(start + kr)], other);
                    const auto after = detection_of(seq.detections[static_cast<std::size_t>(start + k)], other);
                    if (before && after) moves.emplace_back(*before, *after);
                }
                const BoundingBox shifted = track::group_reckoned(anchor, moves, vx, vy, k - kr);
                BoundingBox target = obj->box;
                target.cx -= shifted.cx - anchor.cx;
                target.cy -= shifted.cy - anchor.cy;
                occ_terms.push_back(giou_loss(tape, box, as_box(params.frame.to_model(target))));
            }
            a = b + 1;
        }
    }

    const Var rel = mean_or_zero(tape, rel_terms);
    const Var base = mean_or_zero(tape, base_terms);
    const Var occ = mean_or_zero(tape, occ_terms);
    if (parts) {
        parts->relation = tape.scalar(rel);
        parts->baseline = tape.scalar(base);
        parts->occlusion = tape.scalar(occ);
        parts->relation_terms = static_cast<int>(rel_terms.size());
        parts->occlusion_terms = static_cast<int>(occ_terms.size());
    }
    return tape.add(tape.add(rel, base), occ);
}

std::vector<WindowRef> fixed_windows(const std::vector<TrainingSequence>& data, int window,
                                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<WindowRef> out;
    for (std::size_t s = 0; s < data.size(); ++s) {
        if (!usable(data[s], window)) continue;
        std::uniform_int_distribution<int> pick(0, data[s].gt.frame_count() - window - 1);
        out.push_back(WindowRef{s, pick(rng)});
    }
    return out;
}

double evaluate_loss(const track::Model& model, const std::vector<TrainingSequence>& data,
                     const std::vector<WindowRef>& windows) {
    if (windows.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& w : windows) {
        Tape tape(false);
        sum += tape.scalar(window_loss(tape, model, data[w.sequence], w.start));
    }
    return sum / static_cast<double>(windows.size());
}

TrainResult train(track::Model& model, const std::vector<TrainingSequence>& data,
                  const TrainConfig& config) {
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    if (config.window < 1 || config.epochs < 0 || config.windows_per_sequence < 1) {
        throw std::invalid_argument("train: window and windows_per_sequence must be >= 1, epochs >= 0");
    }
    model.config.window = config.window;

    TrainResult result;
    std::vector<std::size_t> usable_ids;
    for (std::size_t s = 0; s < data.size(); ++s) {
        if (usable(data[s], config.window)) {
            usable_ids.push_back(s);
        } else {
            result.warnings.push_back("sequence " + std::to_string(s) +
                                      " is shorter than window + 1 frames; skipped");
        }
    }
    if (usable_ids.empty()) throw std::invalid_argument("train: every sequence was skipped");

    const auto eval_windows = fixed_windows(data, config.window, config.seed ^ 0x9e3779b97f4a7c15ULL);
    result.initial_loss = evaluate_loss(model, data, eval_windows);

    std::mt19937_64 rng(config.seed);
    const ad::AdamConfig adam{config.lr, 0.9, 0.999, 1e-8};
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<WindowRef> windows;
        for (std::size_t s : usable_ids) {
            std::uniform_int_distribution<int> pick(0, data[s].gt.frame_count() - config.window - 1);
            for (int k = 0; k < config.windows_per_sequence; ++k) windows.push_back({s, pick(rng)});
        }
        std::shuffle(windows.begin(), windows.end(), rng);
        double sum = 0.0;
        for (const auto& w : windows) {
            Tape tape(true);
            const Var loss = window_loss(tape, model, data[w.sequence], w.start);
            sum += tape.scalar(loss);
            ad::Gradients grads = model.store.make_gradients();
            tape.backward(loss, &grads);
            model.store.accumulate(grads);
            ad::adam_step(model.store, adam, track::Model::trainable);
        }
        const double mean = sum / static_cast<double>(windows.size());
        result.epoch_loss.push_back(mean);
        if (config.on_epoch) config.on_epoch(epoch, mean);
    }
    result.final_loss = evaluate_loss(model, data, eval_windows);
    return result;
}

}  // namespace remtrack::train
