#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "json.hpp"
#include "remtrack/geometry.hpp"

namespace remtrack::sim {

/// Occlusion window pinned by the caller instead of drawn at random.
struct ForcedOcclusion {
    int instance = 0;
    int start = 0;
    int duration = 1;
};

struct ScenarioConfig {
    int frames = 60;
    double width = 640.0;
    double height = 480.0;

    int groups = 3;
    int group_size_min = 2;
    int group_size_max = 4;
    int singletons = 3;

    double speed = 3.0;           // scene units per frame
    double speed_std = 0.5;
    double turn_rate_std = 0.03;  // rad per frame, drawn once per group
    double jitter_std = 0.5;      // independent per object and frame
    double member_spacing = 1.4;  // member offset step, in box widths

    double box_width_min = 18.0;
    double box_width_max = 28.0;
    double aspect_min = 2.2;      // h / w
    double aspect_max = 2.8;

    double occlusion_prob = 0.3;
    int occlusion_min = 3;
    int occlusion_max = 10;
    std::vector<ForcedOcclusion> forced_occlusions;

    double entry_prob = 0.0;      // singletons born after frame 0

    double det_center_std = 1.0;
    double det_size_std = 0.5;
    double occlusion_cutoff = 0.3;

    std::uint64_t seed = 0;

    /// Throws std::invalid_argument on negative counts/stds or bad durations.
    void validate() const;
};

nlohmann::json to_json(const ScenarioConfig& c);
ScenarioConfig scenario_from_json(const nlohmann::json& j);

struct GtObject {
    int id = 0;
    BoundingBox box;
    double visibility = 1.0;
    int group = 0;
    bool operator==(const GtObject&) const = default;
};

struct GroundTruthSequence {
    std::vector<std::vector<GtObject>> frames;  // each frame sorted by id

    int frame_count() const { return static_cast<int>(frames.size()); }
    /// First and last frame of every instance.
    std::map<int, std::pair<int, int>> lifespans() const;
    bool operator==(const GroundTruthSequence&) const = default;
};

GroundTruthSequence generate(const ScenarioConfig& config);

struct Detection {
    int id = 0;  // ground-truth id; trackers must not rely on it
    std::optional<BoundingBox> box;
    bool visible = false;
};

/// Noisy detections for one frame. Objects with visibility below the
/// occlusion cutoff come back with visible == false and no box.
std::vector<Detection> detect(const std::vector<GtObject>& frame, const ScenarioConfig& config,
                              std::mt19937_64& rng);

/// detect() over every frame with a generator seeded from `seed`.
std::vector<std::vector<Detection>> detect_sequence(const GroundTruthSequence& seq,
                                                    const ScenarioConfig& config,
                                                    std::uint64_t seed);

}  // namespace remtrack::sim
