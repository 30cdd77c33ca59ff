#pragma once

// Exhaustive reference implementations of the tracking metrics. They
// enumerate every candidate matching instead of solving an assignment
// problem, so they are only usable on tiny scenes (a handful of objects and
// frames), which is exactly where they serve as oracles.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "remtrack/geometry.hpp"

namespace oracle {

using remtrack::BoundingBox;
using remtrack::BoxSequence;
using remtrack::InstanceBox;

struct Matching {
    std::vector<std::pair<int, int>> pairs;  // (gt id, pred id), ascending gt id
    double total_iou = 0.0;
    int tp = 0, fp = 0, fn = 0;
};

inline std::vector<InstanceBox> by_id(std::vector<InstanceBox> v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.instance < b.instance; });
    return v;
}

/// Tries every partial injection gt -> pred restricted to pairs with
/// IoU >= alpha; keeps the largest, then highest total IoU, then the
/// lexicographically smallest pair list.
inline Matching match(const std::vector<InstanceBox>& gt_in, const std::vector<InstanceBox>& pred_in,
                      double alpha) {
    const auto gt = by_id(gt_in);
    const auto pred = by_id(pred_in);
    Matching best;
    bool have = false;
    std::vector<int> choice(gt.size(), -1);
    std::vector<bool> used(pred.size(), false);

    auto consider = [&] {
        Matching m;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (choice[i] < 0) continue;
            m.pairs.emplace_back(gt[i].instance, pred[static_cast<std::size_t>(choice[i])].instance);
            m.total_iou += remtrack::iou(gt[i].box.clamped(), pred[static_cast<std::size_t>(choice[i])].box.clamped());
        }
        const bool better =
            !have || m.pairs.size() > best.pairs.size() ||
            (m.pairs.size() == best.pairs.size() &&
             (m.total_iou > best.total_iou ||
              (m.total_iou == best.total_iou && m.pairs < best.pairs)));
        if (better) {
            best = m;
            have = true;
        }
    };

    auto recurse = [&](auto&& self, std::size_t i) -> void {
        if (i == gt.size()) {
            consider();
            return;
        }
        choice[i] = -1;
        self(self, i + 1);
        for (std::size_t j = 0; j < pred.size(); ++j) {
            if (used[j]) continue;
            if (remtrack::iou(gt[i].box.clamped(), pred[j].box.clamped()) < alpha) continue;
            used[j] = true;
            choice[i] = static_cast<int>(j);
            self(self, i + 1);
            used[j] = false;
        }
        choice[i] = -1;
    };
    recurse(recurse, 0);

    best.tp = static_cast<int>(best.pairs.size());
    best.fn = static_cast<int>(gt.size()) - best.tp;
    best.fp = static_cast<int>(pred.size()) - best.tp;
    return best;
}

inline std::vector<InstanceBox> frame(const BoxSequence& s, std::size_t t) {
    return t < s.size() ? s[t] : std::vector<InstanceBox>{};
}

inline std::size_t frames(const BoxSequence& a, const BoxSequence& b) { return std::max(a.size(), b.size()); }

struct Mot {
    double mota = 0.0;
    int idsw = 0, tp = 0, fp = 0, fn = 0, gt = 0;
};

inline Mot mota(const BoxSequence& gt, const BoxSequence& pred, double alpha) {
    Mot out;
    // Per gt id, the sequence of pred ids it was matched to (in frame order).
    std::map<int, std::vector<int>> history;
    for (std::size_t t = 0; t < frames(gt, pred); ++t) {
        const auto m = match(frame(gt, t), frame(pred, t), alpha);
        out.tp += m.tp;
        out.fp += m.fp;
        out.fn += m.fn;
        out.gt += m.tp + m.fn;
        for (const auto& [g, p] : m.pairs) history[g].push_back(p);
    }
    for (const auto& [g, ps] : history) {
        for (std::size_t k = 1; k < ps.size(); ++k) out.idsw += ps[k] != ps[k - 1];
    }
    out.mota = 1.0 - static_cast<double>(out.fn + out.fp + out.idsw) / out.gt;
    return out;
}

/// Best IDTP over every injective map from gt ids into pred ids (or nothing).
inline double idf1(const BoxSequence& gt, const BoxSequence& pred, double alpha) {
    std::set<int> gids, pids;
    std::size_t total = 0;
    for (const auto& f : gt) {
        for (const auto& b : f) gids.insert(b.instance);
        total += f.size();
    }
    for (const auto& f : pred) {
        for (const auto& b : f) pids.insert(b.instance);
        total += f.size();
    }
    const std::vector<int> g(gids.begin(), gids.end());
    const std::vector<int> p(pids.begin(), pids.end());

    auto overlap = [&](int gi, int pi) {
        int c = 0;
        for (std::size_t t = 0; t < frames(gt, pred); ++t) {
            for (const auto& a : frame(gt, t)) {
                for (const auto& b : frame(pred, t)) {
                    if (a.instance == gi && b.instance == pi &&
                        remtrack::iou(a.box.clamped(), b.box.clamped()) >= alpha) {
                        ++c;
                    }
                }
            }
        }
        return c;
    };

    int best = 0;
    std::vector<bool> used(p.size(), false);
    auto recurse = [&](auto&& self, std::size_t i, int acc) -> void {
        if (i == g.size()) {
            best = std::max(best, acc);
            return;
        }
        self(self, i + 1, acc);
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (used[j]) continue;
            used[j] = true;
            self(self, i + 1, acc + overlap(g[i], p[j]));
            used[j] = false;
        }
    };
    recurse(recurse, 0, 0);
    return 2.0 * best / static_cast<double>(total);
}

struct HotaPoint {
    double det_a = 0.0;
    double ass_a = 0.0;
    double hota = 0.0;
};

/// Direct reading of the definitions: every true positive is scored by
/// its own TPA / (TPA + FNA + FPA), then averaged.
inline HotaPoint hota(const BoxSequence& gt, const BoxSequence& pred, double alpha) {
    std::vector<std::vector<std::pair<int, int>>> per_frame;
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t t = 0; t < frames(gt, pred); ++t) {
        const auto m = match(frame(gt, t), frame(pred, t), alpha);
        per_frame.push_back(m.pairs);
        tp += m.tp;
        fp += m.fp;
        fn += m.fn;
    }
    HotaPoint out;
    const int denom = tp + fp + fn;
    out.det_a = denom == 0 ? 0.0 : static_cast<double>(tp) / denom;
    if (tp == 0) return out;

    double sum = 0.0;
    for (std::size_t t = 0; t < per_frame.size(); ++t) {
        for (const auto& [g, p] : per_frame[t]) {
            int tpa = 0, fna = 0, fpa = 0;
            for (std::size_t u = 0; u < frames(gt, pred); ++u) {
                bool g_present = false, p_present = false, together = false;
                for (const auto& b : frame(gt, u)) g_present |= b.instance == g;
                for (const auto& b : frame(pred, u)) p_present |= b.instance == p;
                for (const auto& pr : per_frame[u]) together |= pr == std::make_pair(g, p);
                if (together) {
                    ++tpa;
                } else {
                    fna += g_present;
                    fpa += p_present;
                }
            }
            sum += static_cast<double>(tpa) / (tpa + fna + fpa);
        }
    }
    out.ass_a = sum / tp;
    out.hota = std::sqrt(out.det_a * out.ass_a);
    return out;
}

/// A small ground-truth scene plus a corrupted prediction of it: jittered
/// boxes, dropped boxes, spurious boxes, and identity swaps.
inline std::pair<BoxSequence, BoxSequence> random_scene(std::mt19937_64& rng, int max_objects = 4,
                                                         int max_frames = 6) {
    std::uniform_int_distribution<int> n_obj(1, max_objects), n_frames(1, max_frames);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    const int objects = n_obj(rng);
    const int frames = n_frames(rng);

    std::vector<BoundingBox> start;
    std::vector<std::pair<double, double>> vel;
    for (int i = 0; i < objects; ++i) {
        start.push_back({unit(rng) * 40.0, unit(rng) * 40.0, 8.0 + unit(rng) * 6.0, 8.0 + unit(rng) * 6.0});
        vel.emplace_back(noise(rng) * 2.0, noise(rng) * 2.0);
    }
    std::vector<int> relabel(static_cast<std::size_t>(objects));
    for (int i = 0; i < objects; ++i) relabel[static_cast<std::size_t>(i)] = 10 + i;

    BoxSequence gt(static_cast<std::size_t>(frames)), pred(static_cast<std::size_t>(frames));
    for (int t = 0; t < frames; ++t) {
        if (objects > 1 && unit(rng) < 0.2) {
            const auto a = static_cast<std::size_t>(rng() % static_cast<unsigned>(objects));
            const auto b = static_cast<std::size_t>(rng() % static_cast<unsigned>(objects));
            std::swap(relabel[a], relabel[b]);
        }
        for (int i = 0; i < objects; ++i) {
            if (unit(rng) < 0.1) continue;  // object absent this frame
            const auto ui = static_cast<std::size_t>(i);
            BoundingBox b = start[ui];
            b.cx += vel[ui].first * t;
            b.cy += vel[ui].second * t;
            gt[static_cast<std::size_t>(t)].push_back({i, b});
            if (unit(rng) < 0.15) continue;  // missed
            BoundingBox p = b;
            p.cx += noise(rng) * 2.0;
            p.cy += noise(rng) * 2.0;
            p.w = std::max(1.0, p.w + noise(rng));
            p.h = std::max(1.0, p.h + noise(rng));
            pred[static_cast<std::size_t>(t)].push_back({relabel[ui], p});
        }
        if (unit(rng) < 0.2) {
            pred[static_cast<std::size_t>(t)].push_back(
                {99, {unit(rng) * 40.0, unit(rng) * 40.0, 10.0, 10.0}});
        }
    }
    if (gt.front().empty()) gt.front().push_back({0, start[0]});
    return {gt, pred};
}

}  // namespace oracle
