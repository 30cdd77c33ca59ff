#include "remtrack/pipeline.hpp"

#include <map>
#include <stdexcept>

#include "remtrack/io.hpp"
#include "remtrack/parallel.hpp"
#include "remtrack/st_graph.hpp"

namespace remtrack::pipeline {
namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Concatenates sequences in time, offsetting ids so they stay distinct.
void append(BoxSequence& into, const BoxSequence& part, int id_offset) {
    for (const auto& frame : part) {
        std::vector<InstanceBox> f;
        for (const auto& ib : frame) f.push_back(InstanceBox{ib.instance + id_offset, ib.box});
        into.push_back(std::move(f));
    }
}

}  // namespace

rem::CoordinateFrame default_frame(const sim::ScenarioConfig& s) {
    return rem::CoordinateFrame{0.5 * s.width, 0.5 * s.height, 0.01};
}

track::ModelConfig default_model_config(const sim::ScenarioConfig& s) {
    track::ModelConfig c;
    c.frame = default_frame(s);
    return c;
}

std::uint64_t detection_seed(std::uint64_t scenario_seed) { return mix(scenario_seed ^ 0xd7ecULL); }

train::TrainingSequence make_sequence(const sim::ScenarioConfig& scenario) {
    train::TrainingSequence seq;
    seq.gt = sim::generate(scenario);
    seq.detections = sim::detect_sequence(seq.gt, scenario, detection_seed(scenario.seed));
    return seq;
}

std::vector<train::TrainingSequence> make_dataset(const sim::ScenarioConfig& base, int count,
                                                  std::uint64_t seed) {
    if (count < 0) throw std::invalid_argument("make_dataset: count must be >= 0");
    std::vector<train::TrainingSequence> out(static_cast<std::size_t>(count));
    parallel_for(out.size(), [&](std::size_t i) {
        sim::ScenarioConfig c = base;
        c.seed = mix(seed * 1000003ULL + i);
        out[i] = make_sequence(c);
    });
    return out;
}

track::TrackOutput run_tracking(const track::Model& model, const train::TrainingSequence& seq,
                                track::Mode mode) {
    track::TrackerConfig config;
    config.mode = mode;
    return track::track_sequence(model, seq.detections, config);
}

metrics::MetricsReport evaluate(const sim::GroundTruthSequence& gt, const track::TrackOutput& out,
                                std::span<const double> alphas) {
    return metrics::evaluate(io::gt_boxes(gt), track::to_box_sequence(out), alphas);
}

std::vector<rem::RelationImportance> gt_relations(const track::Model& model,
                                                  const sim::GroundTruthSequence& gt, int stride) {
    if (stride < 1) throw std::invalid_argument("gt_relations: stride must be >= 1");
    const BoxSequence boxes = io::gt_boxes(gt);
    const SpatioTemporalGraph graph = build_graph(boxes, model.config.d_th);
    std::vector<rem::RelationImportance> out;
    for (int t = std::max(0, model.config.window - 1); t < gt.frame_count(); t += stride) {
        auto part = rem::relation_importances(model.rem, graph, t, model.config.window);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

void summarize_relations(const sim::GroundTruthSequence& gt,
                         const std::vector<rem::RelationImportance>& values, RelationSummary& into) {
    double intra_sum = into.intra_mean * into.intra_pairs;
    double inter_sum = into.inter_mean * into.inter_pairs;
    for (const auto& v : values) {
        const auto& frame = gt.frames.at(static_cast<std::size_t>(v.t));
        int gi = -1, gj = -1;
        for (const auto& o : frame) {
            if (o.id == v.i) gi = o.group;
            if (o.id == v.j) gj = o.group;
        }
        if (gi == gj) {
            intra_sum += v.value;
            ++into.intra_pairs;
        } else {
            inter_sum += v.value;
            ++into.inter_pairs;
        }
    }
    into.intra_mean = into.intra_pairs ? intra_sum / into.intra_pairs : 0.0;
    into.inter_mean = into.inter_pairs ? inter_sum / into.inter_pairs : 0.0;
}

sim::ScenarioConfig occluded_group_scenario(std::uint64_t seed, int start, int duration) {
    sim::ScenarioConfig c;
    c.frames = start + duration + 10;
    c.groups = 1;
    c.group_size_min = 3;
    c.group_size_max = 3;
    c.singletons = 0;
    c.jitter_std = 0.0;
    c.turn_rate_std = 0.05;
    c.occlusion_prob = 0.0;
    c.forced_occlusions = {sim::ForcedOcclusion{1, start, duration}};
    c.seed = seed;
    return c;
}

OcclusionComparison compare_occlusion_recovery(const track::Model& model,
                                               const train::TrainingSequence& seq, int instance) {
    const auto recovered = run_tracking(model, seq, track::Mode::relations_for_occluded);
    const auto coasted = run_tracking(model, seq, track::Mode::relation_aware);
    OcclusionComparison out;
    for (std::size_t t = 0; t < seq.gt.frames.size(); ++t) {
        const sim::GtObject* obj = nullptr;
        for (const auto& o : seq.gt.frames[t]) {
            if (o.id == instance) obj = &o;
        }
        if (!obj || obj->visibility >= 0.3) continue;
        // Score the best-overlapping occluded track of each run.
        auto best = [&](const track::TrackOutput& run) {
            double b = 0.0;
            if (t < run.size()) {
                for (const auto& tb : run[t]) {
                    if (tb.occluded) b = std::max(b, iou(tb.box, obj->box));
                }
            }
            return b;
        };
        out.relations_iou += best(recovered);
        out.coasting_iou += best(coasted);
        ++out.frames;
    }
    if (out.frames > 0) {
        out.relations_iou /= out.frames;
        out.coasting_iou /= out.frames;
    }
    return out;
}

ad::GradientCheckReport model_gradient_check(std::uint64_t seed, std::size_t dim, double epsilon) {
    sim::ScenarioConfig scenario;
    scenario.frames = 5;
    scenario.groups = 1;
    scenario.group_size_min = 3;
    scenario.group_size_max = 3;
    scenario.singletons = 0;
    scenario.occlusion_prob = 0.0;
    scenario.forced_occlusions = {sim::ForcedOcclusion{1, 2, 1}};
    scenario.seed = seed;
    const train::TrainingSequence seq = make_sequence(scenario);

    track::ModelConfig mc = default_model_config(scenario);
    mc.dim = dim;
    mc.window = 4;
    track::Model model = track::Model::create(mc, seed);
    return ad::gradient_check(
        [&](ad::Tape& tape) { return train::window_loss(tape, model, seq, 0); }, model.store,
        epsilon);
}

std::vector<AblationRow> ablate(const AblationConfig& config) {
    const auto train_data = make_dataset(config.scenario, config.train_sequences,
                                         config.training.seed);
    const auto eval_data = make_dataset(config.scenario, config.eval_sequences,
                                        config.training.seed + 7919);
    std::vector<AblationRow> rows(config.d_th_grid.size());
    parallel_for(rows.size(), [&](std::size_t k) {
        track::ModelConfig mc = config.model;
        mc.d_th = config.d_th_grid[k];
        track::Model model = track::Model::create(mc, config.training.seed);
        train::TrainConfig tc = config.training;
        tc.on_epoch = nullptr;
        const auto result = train::train(model, train_data, tc);

        BoxSequence gt_all, pred_all;
        int offset = 0;
        for (const auto& seq : eval_data) {
            const auto out = run_tracking(model, seq, track::Mode::relation_aware);
            append(gt_all, io::gt_boxes(seq.gt), offset);
            BoxSequence pred = track::to_box_sequence(out);
            append(pred_all, pred, offset);
            offset += 100000;
        }
        rows[k].d_th = mc.d_th;
        rows[k].initial_loss = result.initial_loss;
        rows[k].final_loss = result.final_loss;
        rows[k].report = metrics::evaluate(gt_all, pred_all, config.alphas);
    });
    return rows;
}

}  // namespace remtrack::pipeline
