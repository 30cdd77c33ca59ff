#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "remtrack/simulator.hpp"
#include "remtrack/tape.hpp"
#include "remtrack/tracker.hpp"

namespace remtrack::train {

/// Relative std of the perturbation applied to regression priors (the boxes
/// of visible objects in the last encoder frame): centers move by
/// N(0, s) box sizes, sizes scale by exp(N(0, s)).
inline constexpr double kPriorJitter = 0.1;

struct TrainingSequence {
    sim::GroundTruthSequence gt;
    std::vector<std::vector<sim::Detection>> detections;  // aligned with gt.frames
};

struct TrainConfig {
    int epochs = 50;
    int window = 10;
    double lr = 1e-4;
    int windows_per_sequence = 1;  // windows drawn from each sequence per epoch
    std::uint64_t seed = 0;
    /// Called after every epoch with (epoch index, mean window loss).
    std::function<void(int, double)> on_epoch;
};

/// Terms of one window loss, each the mean GIoU loss over its targets.
struct LossParts {
    double relation = 0.0;
    double baseline = 0.0;
    double occlusion = 0.0;
    int relation_terms = 0;
    int occlusion_terms = 0;
    double total() const { return relation + baseline + occlusion; }
};

/// Window starting at frame `start` of sequence `sequence`: the encoder runs
/// over `window` frames and the regression target is the frame after them.
struct WindowRef {
    std::size_t sequence = 0;
    int start = 0;
};

/// Loss of one window:
///  - the relation-aware and baseline heads regress every object visible in
///    the target frame from its (perturbed) box in the last encoder frame;
///  - the occlusion head recovers every occluded object at each of its
///    occluded encoder frames, from an encoder replay centred on the box the
///    object was last seen with. Its output corrects the box given by
///    track::group_reckoned().
/// Occluded objects enter the encoder with that last-seen box (or the true
/// box when the window starts inside an occlusion).
ad::Var window_loss(ad::Tape& tape, const track::Model& model, const TrainingSequence& seq,
                    int start, LossParts* parts = nullptr);

/// One window per usable sequence, drawn from `seed`; used to compare losses
/// before and after training on identical data.
std::vector<WindowRef> fixed_windows(const std::vector<TrainingSequence>& data, int window,
                                     std::uint64_t seed);

/// Mean window loss over `windows` (forward only).
double evaluate_loss(const track::Model& model, const std::vector<TrainingSequence>& data,
                     const std::vector<WindowRef>& windows);

struct TrainResult {
    std::vector<double> epoch_loss;  // mean training-window loss per epoch
    double initial_loss = 0.0;       // evaluate_loss on fixed windows before training
    double final_loss = 0.0;         // ... and after training
    std::vector<std::string> warnings;
};

/// Adam on every trainable parameter, one step per window. Sequences shorter
/// than window + 1 frames are skipped with a warning; if all are, throws.
TrainResult train(track::Model& model, const std::vector<TrainingSequence>& data,
                  const TrainConfig& config);

}  // namespace remtrack::train
