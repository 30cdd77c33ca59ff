#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"
#include "remtrack/geometry.hpp"

namespace remtrack::metrics {

/// One-to-one matching of one frame at overlap threshold alpha.
struct FrameMatching {
    std::vector<std::pair<int, int>> matches;  // (gt id, pred id), ascending gt id
    std::vector<double> ious;                  // aligned with matches
    int tp = 0;
    int fp = 0;
    int fn = 0;
};

/// Maximum-cardinality matching among pairs with IoU >= alpha; among those,
/// the one with maximum total IoU.
FrameMatching match_frame(std::span<const InstanceBox> gt, std::span<const InstanceBox> pred,
                          double alpha);

struct ClearMot {
    double mota = 0.0;
    std::optional<double> motp;  // mean IoU of matches; absent without matches
    int id_switches = 0;
    int tp = 0;
    int fp = 0;
    int fn = 0;
    int gt_count = 0;
};

/// Throws std::invalid_argument when the ground truth holds no boxes.
ClearMot clear_mot(const BoxSequence& gt, const BoxSequence& pred, double alpha = 0.5);

double idf1(const BoxSequence& gt, const BoxSequence& pred, double alpha = 0.5);

struct HotaCurve {
    std::vector<double> alphas;
    std::vector<double> det_a;
    std::vector<double> ass_a;
    std::vector<double> hota_alpha;
    double hota = 0.0;  // mean of hota_alpha
};

/// 0.05, 0.10, ..., 0.95.
std::vector<double> default_alpha_grid();

HotaCurve hota(const BoxSequence& gt, const BoxSequence& pred,
               std::span<const double> alphas);

struct TrackCoverage {
    double mostly_tracked = 0.0;  // fraction of gt ids covered >= 80%
    double mostly_lost = 0.0;     // fraction of gt ids covered <= 20%
};
TrackCoverage mt_ml(const BoxSequence& gt, const BoxSequence& pred, double alpha = 0.5);

struct MetricsReport {
    ClearMot clear;
    double idf1 = 0.0;
    TrackCoverage coverage;
    HotaCurve hota;
};

MetricsReport evaluate(const BoxSequence& gt, const BoxSequence& pred,
                       std::span<const double> alphas);

nlohmann::json to_json(const MetricsReport& report);
/// "alpha,DetA,AssA,HOTA" header plus one row per alpha.
std::string hota_curve_csv(const HotaCurve& curve);

}  // namespace remtrack::metrics
