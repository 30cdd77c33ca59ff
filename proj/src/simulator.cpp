#include "remtrack/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace remtrack::sim {

using nlohmann::json;

void ScenarioConfig::validate() const {
    auto fail = [](const std::string& what) {
        throw std::invalid_argument("scenario config: " + what);
    };
    if (frames < 1) fail("frames must be >= 1");
    if (!(width > 0.0) || !(height > 0.0)) fail("scene size must be positive");
    if (groups < 0 || singletons < 0) fail("counts must be >= 0");
    if (group_size_min < 1 || group_size_max < group_size_min) fail("bad group size range");
    if (speed < 0.0 || speed_std < 0.0 || turn_rate_std < 0.0 || jitter_std < 0.0) {
        fail("speeds and stds must be >= 0");
    }
    if (!(box_width_min > 0.0) || box_width_max < box_width_min) fail("bad box width range");
    if (!(aspect_min > 0.0) || aspect_max < aspect_min) fail("bad aspect range");
    if (occlusion_prob < 0.0 || occlusion_prob > 1.0) fail("occlusion_prob must lie in [0, 1]");
    if (occlusion_min < 1 || occlusion_max < occlusion_min) fail("occlusion durations must be >= 1");
    for (const auto& f : forced_occlusions) {
        if (f.duration < 1 || f.start < 0) fail("forced occlusion needs start >= 0, duration >= 1");
    }
    if (entry_prob < 0.0 || entry_prob > 1.0) fail("entry_prob must lie in [0, 1]");
    if (det_center_std < 0.0 || det_size_std < 0.0) fail("detection stds must be >= 0");
    if (occlusion_cutoff < 0.0 || occlusion_cutoff > 1.0) fail("occlusion_cutoff must lie in [0, 1]");
}

json to_json(const ScenarioConfig& c) {
    json forced = json::array();
    for (const auto& f : c.forced_occlusions) {
        forced.push_back({{"instance", f.instance}, {"start", f.start}, {"duration", f.duration}});
    }
    return {{"frames", c.frames},
            {"width", c.width},
            {"height", c.height},
            {"groups", c.groups},
            {"group_size_min", c.group_size_min},
            {"group_size_max", c.group_size_max},
            {"singletons", c.singletons},
            {"speed", c.speed},
            {"speed_std", c.speed_std},
            {"turn_rate_std", c.turn_rate_std},
            {"jitter_std", c.jitter_std},
            {"member_spacing", c.member_spacing},
            {"box_width_min", c.box_width_min},
            {"box_width_max", c.box_width_max},
            {"aspect_min", c.aspect_min},
            {"aspect_max", c.aspect_max},
            {"occlusion_prob", c.occlusion_prob},
            {"occlusion_min", c.occlusion_min},
            {"occlusion_max", c.occlusion_max},
            {"forced_occlusions", forced},
            {"entry_prob", c.entry_prob},
            {"det_center_std", c.det_center_std},
            {"det_size_std", c.det_size_std},
            {"occlusion_cutoff", c.occlusion_cutoff},
            {"seed", c.seed}};
}

ScenarioConfig scenario_from_json(const json& j) {
    if (!j.is_object()) {
        throw std::invalid_argument("scenario config: expected a JSON object");
    }
    ScenarioConfig c;
    auto get = [&j](const char* key, auto& field) {
        if (j.contains(key)) {
            field = j.at(key).get<std::decay_t<decltype(field)>>();
        }
    };
    try {
        get("frames", c.frames);
        get("width", c.width);
        get("height", c.height);
        get("groups", c.groups);
        get("group_size_min", c.group_size_min);
        get("group_size_max", c.group_size_max);
        get("singletons", c.singletons);
        get("speed", c.speed);
        get("speed_std", c.speed_std);
        get("turn_rate_std", c.turn_rate_std);
        get("jitter_std", c.jitter_std);
        get("member_spacing", c.member_spacing);
        get("box_width_min", c.box_width_min);
        get("box_width_max", c.box_width_max);
        get("aspect_min", c.aspect_min);
        get("aspect_max", c.aspect_max);
        get("occlusion_prob", c.occlusion_prob);
        get("occlusion_min", c.occlusion_min);
        get("occlusion_max", c.occlusion_max);
        get("entry_prob", c.entry_prob);
        get("det_center_std", c.det_center_std);
        get("det_size_std", c.det_size_std);
        get("occlusion_cutoff", c.occlusion_cutoff);
        get("seed", c.seed);
        if (j.contains("forced_occlusions")) {
            for (const auto& f : j.at("forced_occlusions")) {
                c.forced_occlusions.push_back(ForcedOcclusion{
                    f.at("instance").get<int>(), f.at("start").get<int>(), f.at("duration").get<int>()});
            }
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("scenario config: ") + e.what());
    }
    c.validate();
    return c;
}

std::map<int, std::pair<int, int>> GroundTruthSequence::lifespans() const {
    std::map<int, std::pair<int, int>> out;
    for (int t = 0; t < frame_count(); ++t) {
        for (const auto& o : frames[static_cast<std::size_t>(t)]) {
            auto it = out.find(o.id);
            if (it == out.end()) {
                out.emplace(o.id, std::make_pair(t, t));
            } else {
                it->second.second = t;
            }
        }
    }
    return out;
}

namespace {

// Base trajectories live on a 2^-16 grid so that sums of centers and member
// offsets are exact and rigid groups stay bitwise rigid.
double quantize(double x) { return std::round(x * 65536.0) / 65536.0; }

struct Member {
    int id = 0;
    double dx = 0.0;
    double dy = 0.0;
    double w = 1.0;
    double h = 1.0;
    int birth = 0;
};

struct Group {
    int id = 0;
    double cx = 0.0;
    double cy = 0.0;
    double heading = 0.0;
    double speed = 0.0;
    double turn = 0.0;
    double radius = 0.0;
    std::vector<Member> members;
};

}  // namespace

GroundTruthSequence generate(const ScenarioConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    std::normal_distribution<double> normal(0.0, 1.0);

    // Group layout: regular groups first, then singletons as groups of one.
    std::vector<Group> groups;
    int next_id = 0;
    const int total_groups = config.groups + config.singletons;
    double occupied_area = 0.0;
    for (int g = 0; g < total_groups; ++g) {
        Group grp;
        grp.id = g;
        const bool singleton = g >= config.groups;
        const int size =
            singleton ? 1
                      : config.group_size_min +
                            static_cast<int>(unit(rng) * (config.group_size_max - config.group_size_min + 1));
        const int n = std::min(size, config.group_size_max);
        const double ref_w = config.box_width_max;
        for (int k = 0; k < n; ++k) {
            Member m;
            m.id = next_id++;
            m.w = quantize(uniform(config.box_width_min, config.box_width_max));
            m.h = quantize(m.w * uniform(config.aspect_min, config.aspect_max));
            m.dx = quantize((k - 0.5 * (n - 1)) * config.member_spacing * ref_w + uniform(-3.0, 3.0));
            m.dy = quantize(uniform(-0.25, 0.25) * ref_w);
            if (singleton && config.entry_prob > 0.0 && unit(rng) < config.entry_prob) {
                m.birth = 1 + static_cast<int>(unit(rng) * std::max(1, config.frames / 2));
            }
            occupied_area += m.w * m.h;
            grp.radius = std::max(grp.radius, std::hypot(m.dx, m.dy) + 0.5 * m.h);
            grp.members.push_back(m);
        }
        grp.heading = uniform(0.0, 2.0 * std::numbers::pi);
        grp.speed = std::max(0.2, config.speed + config.speed_std * normal(rng));
        grp.turn = config.turn_rate_std * normal(rng);
        groups.push_back(std::move(grp));
    }
    if (occupied_area > 0.5 * config.width * config.height) {
        throw std::invalid_argument("generate: objects cover more than half of the scene");
    }

    // Rejection-sample group centers so that groups start apart.
    for (std::size_t g = 0; g < groups.size(); ++g) {
        Group& grp = groups[g];
        bool placed = false;
        for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
            const double mx = std::min(grp.radius + 5.0, 0.45 * config.width);
            const double my = std::min(grp.radius + 5.0, 0.45 * config.height);
            grp.cx = uniform(mx, config.width - mx);
            grp.cy = uniform(my, config.height - my);
            placed = true;
            for (std::size_t o = 0; o < g; ++o) {
                const double gap = std::hypot(grp.cx - groups[o].cx, grp.cy - groups[o].cy);
                if (gap < grp.radius + groups[o].radius + 10.0) {
                    placed = false;
                    break;
                }
            }
        }
        if (!placed) {
            throw std::invalid_argument("generate: cannot place " + std::to_string(groups.size()) +
                                        " groups without overlap in a " +
                                        std::to_string(config.width) + " x " +
                                        std::to_string(config.height) + " scene");
        }
        grp.cx = quantize(grp.cx);
        grp.cy = quantize(grp.cy);
    }

    // Visibility schedules.
    std::map<int, std::vector<double>> visibility;
    for (const auto& grp : groups) {
        for (const auto& m : grp.members) {
            auto& vis = visibility[m.id];
            vis.assign(static_cast<std::size_t>(config.frames), 1.0);
            if (unit(rng) < config.occlusion_prob && config.frames > 2) {
                const int dur = std::min(
                    config.occlusion_min +
                        static_cast<int>(unit(rng) * (config.occlusion_max - config.occlusion_min + 1)),
                    config.occlusion_max);
                const int span = std::max(1, config.frames - dur - 1);
                const int start = 1 + static_cast<int>(unit(rng) * span);
                for (int t = start; t < std::min(config.frames, start + dur); ++t) {
                    vis[static_cast<std::size_t>(t)] = uniform(0.0, 0.3);
                }
            }
        }
    }
    for (const auto& f : config.forced_occlusions) {
        auto it = visibility.find(f.instance);
        if (it == visibility.end()) {
            throw std::invalid_argument("generate: forced occlusion for unknown instance " +
                                        std::to_string(f.instance));
        }
        for (int t = f.start; t < std::min(config.frames, f.start + f.duration); ++t) {
            it->second[static_cast<std::size_t>(t)] = uniform(0.0, 0.3);
        }
    }

    GroundTruthSequence seq;
    seq.frames.resize(static_cast<std::size_t>(config.frames));
    const double margin_x = 0.1 * config.width;
    const double margin_y = 0.1 * config.height;
    for (int t = 0; t < config.frames; ++t) {
        auto& frame = seq.frames[static_cast<std::size_t>(t)];
        for (auto& grp : groups) {
            for (const auto& m : grp.members) {
                if (t < m.birth) {
                    continue;
                }
                double x = grp.cx + m.dx;
                double y = grp.cy + m.dy;
                if (config.jitter_std > 0.0) {
                    x += config.jitter_std * normal(rng);
                    y += config.jitter_std * normal(rng);
                }
                frame.push_back(GtObject{m.id, BoundingBox{x, y, m.w, m.h},
                                         visibility[m.id][static_cast<std::size_t>(t)], grp.id});
            }
            // Advance the group; reflect the heading off the scene border.
            const double vx = grp.speed * std::cos(grp.heading);
            const double vy = grp.speed * std::sin(grp.heading);
            double heading = grp.heading;
            if ((grp.cx + vx < margin_x && vx < 0) || (grp.cx + vx > config.width - margin_x && vx > 0)) {
                heading = std::numbers::pi - heading;
            }
            if ((grp.cy + vy < margin_y && vy < 0) || (grp.cy + vy > config.height - margin_y && vy > 0)) {
                heading = -heading;
            }
            grp.cx = quantize(grp.cx + quantize(grp.speed * std::cos(heading)));
            grp.cy = quantize(grp.cy + quantize(grp.speed * std::sin(heading)));
            grp.heading = heading + grp.turn;
        }
        std::sort(frame.begin(), frame.end(),
                  [](const GtObject& a, const GtObject& b) { return a.id < b.id; });
    }
    return seq;
}

std::vector<Detection> detect(const std::vector<GtObject>& frame, const ScenarioConfig& config,
                              std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Detection> out;
    out.reserve(frame.size());
    for (const auto& o : frame) {
        Detection d;
        d.id = o.id;
        if (o.visibility < config.occlusion_cutoff) {
            out.push_back(d);
            continue;
        }
        BoundingBox b = o.box;
        if (config.det_center_std > 0.0) {
            b.cx += config.det_center_std * normal(rng);
            b.cy += config.det_center_std * normal(rng);
        }
        if (config.det_size_std > 0.0) {
            b.w = std::max(1.0, b.w + config.det_size_std * normal(rng));
            b.h = std::max(1.0, b.h + config.det_size_std * normal(rng));
        }
        d.box = b;
        d.visible = true;
        out.push_back(d);
    }
    return out;
}

std::vector<std::vector<Detection>> detect_sequence(const GroundTruthSequence& seq,
                                                    const ScenarioConfig& config,
                                                    std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<Detection>> out;
    out.reserve(seq.frames.size());
    for (const auto& frame : seq.frames) {
        out.push_back(detect(frame, config, rng));
    }
    return out;
}

}  // namespace remtrack::sim
