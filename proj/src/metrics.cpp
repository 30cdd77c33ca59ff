#include "remtrack/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "remtrack/hungarian.hpp"

namespace remtrack::metrics {
namespace {

std::vector<InstanceBox> sorted_by_id(std::span<const InstanceBox> boxes) {
    std::vector<InstanceBox> out(boxes.begin(), boxes.end());
    std::sort(out.begin(), out.end(),
              [](const InstanceBox& a, const InstanceBox& b) { return a.instance < b.instance; });
    return out;
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("overlap threshold must lie in (0, 1), got " +
                                    std::to_string(alpha));
    }
}

std::size_t frame_count(const BoxSequence& gt, const BoxSequence& pred) {
    return std::max(gt.size(), pred.size());
}

std::span<const InstanceBox> frame_at(const BoxSequence& seq, std::size_t t) {
    if (t >= seq.size()) return {};
    return seq[t];
}

std::size_t total_boxes(const BoxSequence& seq) {
    std::size_t n = 0;
    for (const auto& f : seq) n += f.size();
    return n;
}

void require_ground_truth(const BoxSequence& gt) {
    if (total_boxes(gt) == 0) {
        throw std::invalid_argument("ground truth holds no boxes; metric is undefined");
    }
}

std::vector<FrameMatching> match_all(const BoxSequence& gt, const BoxSequence& pred,
                                     double alpha) {
    std::vector<FrameMatching> out;
    const std::size_t frames = frame_count(gt, pred);
    out.reserve(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        out.push_back(match_frame(frame_at(gt, t), frame_at(pred, t), alpha));
    }
    return out;
}

std::string fixed6(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 6);
    return std::string(buf, res.ptr);
}

}  // namespace

FrameMatching match_frame(std::span<const InstanceBox> gt_in, std::span<const InstanceBox> pred_in,
                          double alpha) {
    check_alpha(alpha);
    const auto gt = sorted_by_id(gt_in);
    const auto pred = sorted_by_id(pred_in);
    const std::size_t n = gt.size();
    const std::size_t m = pred.size();

    FrameMatching result;
    if (n > 0 && m > 0) {
        // Every admissible pair is worth `big` plus its IoU, so one extra match
        // always outweighs any IoU gain; inadmissible pairs cost nothing and
        // are dropped after solving.
        const double big = static_cast<double>(n + m + 1);
        std::vector<double> cost(n * m, 0.0);
        std::vector<double> overlap(n * m, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                const double o = iou(gt[i].box.clamped(), pred[j].box.clamped());
                overlap[i * m + j] = o;
                if (o >= alpha) cost[i * m + j] = -(big + o);
            }
        }
        const auto assignment = solve_assignment(cost, n, m);
        for (std::size_t i = 0; i < n; ++i) {
            const int j = assignment[i];
            if (j < 0) continue;
            const double o = overlap[i * m + static_cast<std::size_t>(j)];
            if (o < alpha) continue;
            result.matches.emplace_back(gt[i].instance, pred[static_cast<std::size_t>(j)].instance);
            result.ious.push_back(o);
        }
    }
    result.tp = static_cast<int>(result.matches.size());
    result.fn = static_cast<int>(n) - result.tp;
    result.fp = static_cast<int>(m) - result.tp;
    return result;
}

ClearMot clear_mot(const BoxSequence& gt, const BoxSequence& pred, double alpha) {
    require_ground_truth(gt);
    ClearMot out;
    std::map<int, int> last_match;  // gt id -> pred id at its previous matched frame
    double iou_sum = 0.0;
    for (const auto& fm : match_all(gt, pred, alpha)) {
        out.tp += fm.tp;
        out.fp += fm.fp;
        out.fn += fm.fn;
        for (std::size_t k = 0; k < fm.matches.size(); ++k) {
            const auto [g, p] = fm.matches[k];
            auto it = last_match.find(g);
            if (it != last_match.end() && it->second != p) ++out.id_switches;
            last_match[g] = p;
            iou_sum += fm.ious[k];
        }
    }
    out.gt_count = static_cast<int>(total_boxes(gt));
    out.mota = 1.0 - static_cast<double>(out.fn + out.fp + out.id_switches) / out.gt_count;
    if (out.tp > 0) out.motp = iou_sum / out.tp;
    return out;
}

double idf1(const BoxSequence& gt, const BoxSequence& pred, double alpha) {
    check_alpha(alpha);
    require_ground_truth(gt);
    std::map<int, std::size_t> gt_index;
    std::map<int, std::size_t> pred_index;
    for (const auto& f : gt)
        for (const auto& b : f) gt_index.emplace(b.instance, 0);
    for (const auto& f : pred)
        for (const auto& b : f) pred_index.emplace(b.instance, 0);
    std::size_t k = 0;
    for (auto& [id, idx] : gt_index) idx = k++;
    k = 0;
    for (auto& [id, idx] : pred_index) idx = k++;

    const std::size_t n = gt_index.size();
    const std::size_t m = pred_index.size();
    const double total = static_cast<double>(total_boxes(gt) + total_boxes(pred));
    if (m == 0) return 0.0;

    // overlap[g][p]: frames where both are present with IoU >= alpha.
    std::vector<double> overlap(n * m, 0.0);
    const std::size_t frames = frame_count(gt, pred);
    for (std::size_t t = 0; t < frames; ++t) {
        for (const auto& g : frame_at(gt, t)) {
            for (const auto& p : frame_at(pred, t)) {
                if (iou(g.box.clamped(), p.box.clamped()) >= alpha) {
                    overlap[gt_index[g.instance] * m + pred_index[p.instance]] += 1.0;
                }
            }
        }
    }
    std::vector<double> cost(overlap.size());
    std::transform(overlap.begin(), overlap.end(), cost.begin(), [](double c) { return -c; });
    const auto assignment = solve_assignment(cost, n, m);
    double idtp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (assignment[i] >= 0) idtp += overlap[i * m + static_cast<std::size_t>(assignment[i])];
    }
    return 2.0 * idtp / total;
}

std::vector<double> default_alpha_grid() {
    std::vector<double> grid;
    for (int k = 1; k <= 19; ++k) grid.push_back(k / 20.0);
    return grid;
}

HotaCurve hota(const BoxSequence& gt, const BoxSequence& pred, std::span<const double> alphas) {
    require_ground_truth(gt);
    for (double a : alphas) check_alpha(a);

    std::map<int, int> gt_frames;
    std::map<int, int> pred_frames;
    for (const auto& f : gt)
        for (const auto& b : f) ++gt_frames[b.instance];
    for (const auto& f : pred)
        for (const auto& b : f) ++pred_frames[b.instance];

    HotaCurve curve;
    for (double alpha : alphas) {
        int tp = 0;
        int fp = 0;
        int fn = 0;
        std::map<std::pair<int, int>, int> pair_tp;
        for (const auto& fm : match_all(gt, pred, alpha)) {
            tp += fm.tp;
            fp += fm.fp;
            fn += fm.fn;
            for (const auto& pr : fm.matches) ++pair_tp[pr];
        }
        const double det_a = static_cast<double>(tp) / (tp + fn + fp);
        // Each of the TPA(g, p) matches of a pair contributes TPA / (TPA + FNA + FPA)
        // with FNA = |g| - TPA and FPA = |p| - TPA.
        double ass_sum = 0.0;
        for (const auto& [pr, c] : pair_tp) {
            const double denom = gt_frames[pr.first] + pred_frames[pr.second] - c;
            ass_sum += static_cast<double>(c) * c / denom;
        }
        const double ass_a = tp > 0 ? ass_sum / tp : 0.0;
        curve.alphas.push_back(alpha);
        curve.det_a.push_back(det_a);
        curve.ass_a.push_back(ass_a);
        curve.hota_alpha.push_back(std::sqrt(det_a * ass_a));
    }
    if (!curve.hota_alpha.empty()) {
        double s = 0.0;
        for (double h : curve.hota_alpha) s += h;
        curve.hota = s / static_cast<double>(curve.hota_alpha.size());
    }
    return curve;
}

TrackCoverage mt_ml(const BoxSequence& gt, const BoxSequence& pred, double alpha) {
    std::map<int, int> present;
    std::map<int, int> matched;
    for (const auto& f : gt)
        for (const auto& b : f) ++present[b.instance];
    for (const auto& fm : match_all(gt, pred, alpha))
        for (const auto& pr : fm.matches) ++matched[pr.first];

    TrackCoverage out;
    if (present.empty()) return out;
    int mt = 0;
    int ml = 0;
    for (const auto& [id, n] : present) {
        const double coverage = static_cast<double>(matched[id]) / n;
        if (coverage >= 0.8) ++mt;
        if (coverage <= 0.2) ++ml;
    }
    out.mostly_tracked = static_cast<double>(mt) / present.size();
    out.mostly_lost = static_cast<double>(ml) / present.size();
    return out;
}

MetricsReport evaluate(const BoxSequence& gt, const BoxSequence& pred,
                       std::span<const double> alphas) {
    MetricsReport r;
    r.clear = clear_mot(gt, pred, 0.5);
    r.idf1 = idf1(gt, pred, 0.5);
    r.coverage = mt_ml(gt, pred, 0.5);
    r.hota = hota(gt, pred, alphas);
    return r;
}

nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["MOTA"] = r.clear.mota;
    j["MOTP"] = r.clear.motp ? nlohmann::json(*r.clear.motp) : nlohmann::json(nullptr);
    j["IDSW"] = r.clear.id_switches;
    j["TP"] = r.clear.tp;
    j["FP"] = r.clear.fp;
    j["FN"] = r.clear.fn;
    j["GT"] = r.clear.gt_count;
    j["IDF1"] = r.idf1;
    j["MT"] = r.coverage.mostly_tracked;
    j["ML"] = r.coverage.mostly_lost;
    j["HOTA"] = r.hota.hota;
    j["alpha"] = r.hota.alphas;
    j["DetA"] = r.hota.det_a;
    j["AssA"] = r.hota.ass_a;
    j["HOTA_alpha"] = r.hota.hota_alpha;
    return j;
}

std::string hota_curve_csv(const HotaCurve& c) {
    std::string out = "alpha,DetA,AssA,HOTA\n";
    for (std::size_t k = 0; k < c.alphas.size(); ++k) {
        out += fixed6(c.alphas[k]) + ',' + fixed6(c.det_a[k]) + ',' + fixed6(c.ass_a[k]) + ',' +
               fixed6(c.hota_alpha[k]) + '\n';
    }
    return out;
}

}  // namespace remtrack::metrics
