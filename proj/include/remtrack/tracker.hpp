#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "remtrack/geometry.hpp"
#include "remtrack/parameter_store.hpp"
#include "remtrack/rem.hpp"
#include "remtrack/simulator.hpp"
#include "remtrack/tape.hpp"

namespace remtrack::track {

using ad::ParamRef;
using ad::Tape;
using ad::Var;

inline constexpr std::size_t kAppearanceInputs = 9;
/// The relative detection enters the encoder in tenths of the box size, which
/// puts a typical frame-to-frame displacement near unit scale.
inline constexpr double kRelativeInputScale = 10.0;

/// Two-layer perceptron: w2 * leaky_relu(w1 x + b1) + b2.
struct Mlp {
    ParamRef w1, b1, w2, b2;

    static Mlp declare(ad::ParameterStore& store, const std::string& prefix, std::size_t in,
                       std::size_t hidden, std::size_t out, std::uint64_t seed);
    static Mlp bind(const ad::ParameterStore& store, const std::string& prefix);
    std::size_t input_dim() const { return w1->cols(); }
};
Var mlp_forward(Tape& tape, const Mlp& mlp, Var x);

/// Appearance encoder plus the three heads, stored under "trk.".
struct TrackerParameters {
    ParamRef app_w, app_b;  // 9 -> F_a
    Mlp base;               // F_a -> hidden -> 4
    Mlp rel;                // F_a + F -> hidden -> 4
    Mlp occ;                // F -> hidden -> 4

    std::size_t appearance_dim() const { return app_w->rows(); }

    static TrackerParameters declare(ad::ParameterStore& store, std::size_t appearance_dim,
                                     std::size_t relation_dim, std::size_t hidden,
                                     std::uint64_t seed);
    static TrackerParameters bind(const ad::ParameterStore& store);
};

/// The 9 encoder inputs: the detection relative to the previous box
/// ((dcx / w, dcy / h, log w ratio, log h ratio) times kRelativeInputScale,
/// zeros without a detection),
/// the previous box in model coordinates, and the visible flag.
std::array<double, kAppearanceInputs> appearance_input(const std::optional<BoundingBox>& detection,
                                                       const BoundingBox& prev, bool visible,
                                                       const rem::CoordinateFrame& frame);

/// Affine encoding of appearance_input().
Var appearance_feature(Tape& tape, const TrackerParameters& p,
                       std::span<const double, kAppearanceInputs> input);

/// Box offset (dx, dy, dw, dh) from appearance alone.
Var regress_baseline(Tape& tape, const TrackerParameters& p, Var appearance);
/// Box offset from [appearance || relation embedding].
Var regress_relation_aware(Tape& tape, const TrackerParameters& p, Var appearance, Var relation);
/// Absolute box (cx, cy, softplus(w), softplus(h)) in model coordinates.
Var regress_from_relations(Tape& tape, const TrackerParameters& p, Var relation);

/// (cx + dx w, cy + dy h, w e^dw, h e^dh) as a scene-unit 4-vector node.
Var apply_offset(Tape& tape, const BoundingBox& prev, Var offset);
BoundingBox apply_offset(const BoundingBox& prev, std::span<const double> offset);

struct ModelConfig {
    std::size_t dim = 128;
    std::size_t appearance_dim = 32;
    std::size_t hidden = 64;
    double d_th = 15.0;
    int window = 10;
    rem::CoordinateFrame frame;
};

/// Relation encoder and tracker heads sharing one parameter store.
struct Model {
    ModelConfig config;
    ad::ParameterStore store;
    rem::RemParameters rem;
    TrackerParameters trk;

    static Model create(const ModelConfig& config, std::uint64_t seed);
    Model clone() const;

    /// The appearance encoder stands in for a pretrained backbone and stays fixed.
    static bool trainable(const std::string& name);

    nlohmann::json to_json() const;
    static Model from_json(const nlohmann::json& doc);
};

/// Where an occluded object is expected to be before the occlusion head
/// corrects it: `last` moved by the mean displacement of its visible graph
/// neighbors since it was last seen (`moves` holds their boxes then and now),
/// or by `steps` times its own last motion (vx, vy) when it has none.
BoundingBox group_reckoned(const BoundingBox& last,
                           std::span<const std::pair<BoundingBox, BoundingBox>> moves, double vx,
                           double vy, int steps);

/// `rem` re-expressed in a frame centred on `anchor`, same scale.
rem::RemParameters anchored(const rem::RemParameters& params, const BoundingBox& anchor);

enum class Mode { baseline, relation_aware, relations_for_occluded };
std::string to_string(Mode mode);
/// Throws std::invalid_argument on unknown names.
Mode parse_mode(const std::string& name);

struct TrackerConfig {
    Mode mode = Mode::relation_aware;
    int max_age = 15;             // frames without detection before termination
    double match_threshold = 0.3; // IoU for greedy association
};

/// How a reported box was produced.
enum class BoxSource { spawned, baseline_head, relation_head, coasted, relations };

struct TrackedBox {
    int id = 0;
    BoundingBox box;
    BoxSource source = BoxSource::spawned;
    bool occluded = false;
};
using TrackOutput = std::vector<std::vector<TrackedBox>>;

/// Tracks one sequence of detections. Ground-truth ids carried by the
/// detections are ignored; track ids are assigned here, starting at 1.
TrackOutput track_sequence(const Model& model, std::span<const std::vector<sim::Detection>> detections,
                           const TrackerConfig& config);

BoxSequence to_box_sequence(const TrackOutput& output);

}  // namespace remtrack::track
