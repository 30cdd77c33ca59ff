#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "remtrack/gradient_check.hpp"
#include "remtrack/metrics.hpp"
#include "remtrack/rem.hpp"
#include "remtrack/simulator.hpp"
#include "remtrack/tracker.hpp"
#include "remtrack/training.hpp"

namespace remtrack::pipeline {

/// Scene centre as origin, 0.01 model units per scene unit.
rem::CoordinateFrame default_frame(const sim::ScenarioConfig& scenario);

track::ModelConfig default_model_config(const sim::ScenarioConfig& scenario);

/// Seed used for the detections of a scenario with the given seed.
std::uint64_t detection_seed(std::uint64_t scenario_seed);

/// Ground truth plus detections of one scenario.
train::TrainingSequence make_sequence(const sim::ScenarioConfig& scenario);

/// `count` scenarios sharing `base` except for their seeds, derived from `seed`.
std::vector<train::TrainingSequence> make_dataset(const sim::ScenarioConfig& base, int count,
                                                  std::uint64_t seed);

track::TrackOutput run_tracking(const track::Model& model, const train::TrainingSequence& seq,
                                track::Mode mode);

metrics::MetricsReport evaluate(const sim::GroundTruthSequence& gt, const track::TrackOutput& out,
                                std::span<const double> alphas);

/// Relation importance over ground-truth tracks: the graph is built from the
/// true boxes and R is computed for every adjacent ordered pair at frames
/// window - 1, window - 1 + stride, ...
std::vector<rem::RelationImportance> gt_relations(const track::Model& model,
                                                  const sim::GroundTruthSequence& gt, int stride);

struct RelationSummary {
    double intra_mean = 0.0;  // pairs from the same group
    double inter_mean = 0.0;  // pairs from different groups
    int intra_pairs = 0;
    int inter_pairs = 0;
};
/// Accumulates into `into` (means are running over all added pairs).
void summarize_relations(const sim::GroundTruthSequence& gt,
                         const std::vector<rem::RelationImportance>& values,
                         RelationSummary& into);

/// A rigid three-member group on a curved path whose middle member is
/// hidden for `duration` frames starting at `start`.
sim::ScenarioConfig occluded_group_scenario(std::uint64_t seed, int start = 15, int duration = 10);

struct OcclusionComparison {
    double relations_iou = 0.0;  // mean IoU of relation-recovered boxes
    double coasting_iou = 0.0;   // mean IoU of coasted boxes, same frames
    int frames = 0;
};
/// Tracks `seq` in modes relations_for_occluded and relation_aware and
/// scores the boxes of ground-truth object `instance` over the frames where
/// it is occluded. A frame whose object has no overlapping track scores 0.
OcclusionComparison compare_occlusion_recovery(const track::Model& model,
                                               const train::TrainingSequence& seq, int instance);

/// Finite-difference check of every model parameter through the window loss
/// of a three-object group: four encoder frames (the middle member hidden in
/// the third), then the regression target frame.
ad::GradientCheckReport model_gradient_check(std::uint64_t seed, std::size_t dim,
                                             double epsilon = 1e-5);

struct AblationRow {
    double d_th = 0.0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    metrics::MetricsReport report;  // relation-aware tracking on held-out scenarios
};

struct AblationConfig {
    std::vector<double> d_th_grid = {5.0, 10.0, 20.0, 30.0, 40.0};
    sim::ScenarioConfig scenario;
    int train_sequences = 64;
    int eval_sequences = 4;
    track::ModelConfig model;
    train::TrainConfig training;
    std::vector<double> alphas = metrics::default_alpha_grid();
};

/// Trains one model per d_th and evaluates it; the evaluation concatenates
/// the held-out sequences into one metrics report per setting.
std::vector<AblationRow> ablate(const AblationConfig& config);

}  // namespace remtrack::pipeline
