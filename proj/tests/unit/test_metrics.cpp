#include <cmath>
#include <random>

#include "common/metric_oracles.hpp"
#include "doctest.h"
#include "remtrack/metrics.hpp"

using namespace remtrack;
using namespace remtrack::metrics;

namespace {

BoxSequence straight(int objects, int frames) {
    BoxSequence s(static_cast<std::size_t>(frames));
    for (int t = 0; t < frames; ++t) {
        for (int i = 0; i < objects; ++i) {
            s[static_cast<std::size_t>(t)].push_back({i, {30.0 * i + t, 5.0, 10.0, 20.0}});
        }
    }
    return s;
}

BoxSequence relabeled(const BoxSequence& s, int offset) {
    BoxSequence out = s;
    for (auto& f : out)
        for (auto& b : f) b.instance = offset - b.instance;
    return out;
}

}  // namespace

TEST_CASE("match_frame on identical and disjoint sets") {
    const auto gt = straight(3, 1)[0];
    auto m = match_frame(gt, gt, 0.5);
    CHECK(m.tp == 3);
    CHECK(m.fp == 0);
    CHECK(m.fn == 0);
    std::vector<InstanceBox> far;
    for (auto b : gt) {
        b.box.cx += 1000;
        far.push_back(b);
    }
    m = match_frame(gt, far, 0.5);
    CHECK(m.tp == 0);
    CHECK(m.fp == 3);
    CHECK(m.fn == 3);
    CHECK_THROWS_AS(match_frame(gt, gt, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(match_frame(gt, gt, 1.0), std::invalid_argument);
}

TEST_CASE("match_frame prefers cardinality over total IoU") {
    // gt 0 overlaps both preds well; gt 1 only overlaps pred 0, weakly. The
    // greedy best-IoU choice would leave gt 1 unmatched.
    const std::vector<InstanceBox> gt = {{0, {0, 0, 10, 10}}, {1, {6, 0, 10, 10}}};
    const std::vector<InstanceBox> pred = {{0, {1, 0, 10, 10}}, {1, {-1, 0, 10, 10}}};
    const auto m = match_frame(gt, pred, 0.3);
    CHECK(m.tp == 2);
    const auto o = oracle::match(gt, pred, 0.3);
    CHECK(m.matches == o.pairs);
}

TEST_CASE("match_frame equals permutation brute force on ambiguous 3x3 overlaps") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0, 8);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<InstanceBox> gt, pred;
        for (int i = 0; i < 3; ++i) gt.push_back({i, {u(rng), u(rng), 10, 10}});
        for (int j = 0; j < 3; ++j) pred.push_back({5 + j, {u(rng), u(rng), 10, 10}});
        for (double alpha : {0.2, 0.5, 0.7}) {
            const auto m = match_frame(gt, pred, alpha);
            const auto o = oracle::match(gt, pred, alpha);
            CHECK(m.tp == o.tp);
            double total = 0.0;
            for (double v : m.ious) total += v;
            CHECK(total == doctest::Approx(o.total_iou).epsilon(1e-12));
            CHECK(m.matches == o.pairs);
        }
    }
}

TEST_CASE("perfect tracking scores one everywhere") {
    const auto gt = straight(3, 5);
    const auto r = evaluate(gt, gt, default_alpha_grid());
    CHECK(r.clear.mota == 1.0);
    CHECK(r.clear.id_switches == 0);
    CHECK(*r.clear.motp == 1.0);
    CHECK(r.idf1 == 1.0);
    CHECK(r.coverage.mostly_tracked == 1.0);
    CHECK(r.coverage.mostly_lost == 0.0);
    for (std::size_t k = 0; k < r.hota.alphas.size(); ++k) {
        CHECK(r.hota.det_a[k] == 1.0);
        CHECK(r.hota.ass_a[k] == 1.0);
        CHECK(r.hota.hota_alpha[k] == 1.0);
    }
    CHECK(r.hota.hota == 1.0);
}

TEST_CASE("ten gt boxes with one miss gives MOTA 0.9") {
    auto gt = straight(2, 5);
    auto pred = gt;
    pred[2].erase(pred[2].begin());
    const auto c = clear_mot(gt, pred);
    CHECK(c.gt_count == 10);
    CHECK(c.fn == 1);
    CHECK(c.fp == 0);
    CHECK(c.id_switches == 0);
    CHECK(std::abs(c.mota - 0.9) < 1e-12);
}

TEST_CASE("no predictions") {
    const auto gt = straight(2, 4);
    const BoxSequence empty(4);
    const auto c = clear_mot(gt, empty);
    CHECK(c.mota == 0.0);
    CHECK_FALSE(c.motp.has_value());
    CHECK(idf1(gt, empty) == 0.0);
    const auto cov = mt_ml(gt, empty);
    CHECK(cov.mostly_tracked == 0.0);
    CHECK(cov.mostly_lost == 1.0);
}

TEST_CASE("metrics reject ground truth without boxes") {
    const BoxSequence empty(3);
    const auto pred = straight(1, 3);
    CHECK_THROWS_AS(clear_mot(empty, pred), std::invalid_argument);
    CHECK_THROWS_AS(idf1(empty, pred), std::invalid_argument);
    const auto grid = default_alpha_grid();
    CHECK_THROWS_AS(hota(empty, pred, grid), std::invalid_argument);
}

TEST_CASE("ids swapped for half the frames give IDF1 0.5 and two switches") {
    const auto gt = straight(2, 4);
    auto pred = gt;
    for (std::size_t t = 2; t < 4; ++t) {
        for (auto& b : pred[t]) b.instance = 1 - b.instance;
    }
    CHECK(std::abs(idf1(gt, pred) - 0.5) < 1e-12);
    CHECK(std::abs(oracle::idf1(gt, pred, 0.5) - 0.5) < 1e-12);
    const auto c = clear_mot(gt, pred);
    CHECK(c.id_switches == 2);
    CHECK(std::abs(c.mota - (1.0 - 2.0 / 8.0)) < 1e-12);
}

TEST_CASE("identity switch counted across an unmatched gap") {
    const auto gt = straight(1, 3);
    BoxSequence pred(3);
    pred[0].push_back({7, gt[0][0].box});
    pred[2].push_back({8, gt[2][0].box});
    const auto c = clear_mot(gt, pred);
    CHECK(c.id_switches == 1);
    CHECK(c.fn == 1);
}

TEST_CASE("HOTA of DetA 0.64 and AssA 0.25 is 0.4") {
    CHECK(std::abs(std::sqrt(0.64 * 0.25) - 0.4) < 1e-12);
}

TEST_CASE("hand-built identity swap scenario matches the brute-force oracle") {
    // Three objects over five frames; the tracker swaps ids 0 and 1 at frame 3
    // and misses object 2 at frame 1.
    const auto gt = straight(3, 5);
    auto pred = gt;
    for (std::size_t t = 3; t < 5; ++t) {
        pred[t][0].instance = 1;
        pred[t][1].instance = 0;
    }
    pred[1].pop_back();
    const auto grid = default_alpha_grid();
    const auto curve = hota(gt, pred, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto o = oracle::hota(gt, pred, grid[k]);
        CHECK(curve.det_a[k] == doctest::Approx(o.det_a).epsilon(1e-12));
        CHECK(curve.ass_a[k] == doctest::Approx(o.ass_a).epsilon(1e-12));
        CHECK(curve.hota_alpha[k] == doctest::Approx(o.hota).epsilon(1e-12));
    }
    // 14 of 15 gt boxes detected; every pair is exact so DetA = 14/15.
    CHECK(std::abs(curve.det_a[0] - 14.0 / 15.0) < 1e-12);
    // Objects 0 and 1: each TP scores its pair count over 5 + 5 - count.
    // Object 2: four TPs pairing (2, 2), gt present 5 frames, pred 4.
    const double ab = (3.0 * (3.0 / 7.0) + 2.0 * (2.0 / 8.0)) * 2.0;
    const double c2 = 4.0 * (4.0 / 5.0);
    CHECK(std::abs(curve.ass_a[0] - (ab + c2) / 14.0) < 1e-12);
}

TEST_CASE("metrics agree with exhaustive oracles on small random scenes") {
    std::mt19937_64 rng(2024);
    const auto grid = default_alpha_grid();
    for (int trial = 0; trial < 300; ++trial) {
        const auto [gt, pred] = oracle::random_scene(rng);
        const auto c = clear_mot(gt, pred);
        const auto oc = oracle::mota(gt, pred, 0.5);
        CHECK(c.tp == oc.tp);
        CHECK(c.fp == oc.fp);
        CHECK(c.fn == oc.fn);
        CHECK(c.id_switches == oc.idsw);
        CHECK(c.mota == oc.mota);
        CHECK(idf1(gt, pred) == oracle::idf1(gt, pred, 0.5));
        const auto curve = hota(gt, pred, grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const auto o = oracle::hota(gt, pred, grid[k]);
            CHECK(curve.det_a[k] == o.det_a);
            CHECK(std::abs(curve.ass_a[k] - o.ass_a) <= 1e-12);
        }
    }
}

TEST_CASE("DetA is non-increasing in alpha and HOTA_alpha is the geometric mean") {
    std::mt19937_64 rng(77);
    const auto grid = default_alpha_grid();
    for (int trial = 0; trial < 100; ++trial) {
        const auto [gt, pred] = oracle::random_scene(rng, 6, 10);
        const auto curve = hota(gt, pred, grid);
        double sum = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            if (k > 0) CHECK(curve.det_a[k] <= curve.det_a[k - 1]);
            CHECK(std::abs(curve.hota_alpha[k] - std::sqrt(curve.det_a[k] * curve.ass_a[k])) <= 1e-12);
            CHECK(curve.det_a[k] >= 0.0);
            CHECK(curve.ass_a[k] <= 1.0);
            sum += curve.hota_alpha[k];
        }
        CHECK(std::abs(curve.hota - sum / 19.0) < 1e-12);
    }
}

TEST_CASE("metrics are invariant under relabeling prediction ids") {
    std::mt19937_64 rng(91);
    const auto grid = default_alpha_grid();
    for (int trial = 0; trial < 100; ++trial) {
        const auto [gt, pred] = oracle::random_scene(rng);
        const auto a = evaluate(gt, pred, grid);
        const auto b = evaluate(gt, relabeled(pred, 1000), grid);
        CHECK(a.clear.mota == b.clear.mota);
        CHECK(a.clear.id_switches == b.clear.id_switches);
        CHECK(a.idf1 == b.idf1);
        CHECK(a.coverage.mostly_tracked == b.coverage.mostly_tracked);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            CHECK(a.hota.det_a[k] == b.hota.det_a[k]);
            CHECK(std::abs(a.hota.ass_a[k] - b.hota.ass_a[k]) <= 1e-12);
        }
    }
}

TEST_CASE("MT and ML thresholds") {
    // Object 0 tracked 5/5, object 1 tracked 2/4 (50%), object 2 tracked 0/5.
    const auto gt5 = straight(3, 5);
    BoxSequence gt = gt5;
    gt[4].erase(gt[4].begin() + 1);  // object 1 present four frames
    BoxSequence pred(5);
    for (std::size_t t = 0; t < 5; ++t) {
        pred[t].push_back(gt5[t][0]);
        if (t < 2) pred[t].push_back(gt5[t][1]);
    }
    const auto cov = mt_ml(gt, pred);
    CHECK(std::abs(cov.mostly_tracked - 1.0 / 3.0) < 1e-12);
    CHECK(std::abs(cov.mostly_lost - 1.0 / 3.0) < 1e-12);
}

TEST_CASE("report serialization") {
    const auto gt = straight(2, 3);
    const auto grid = default_alpha_grid();
    const auto r = evaluate(gt, gt, grid);
    const auto j = to_json(r);
    for (const char* key : {"MOTA", "MOTP", "IDSW", "IDF1", "MT", "ML", "HOTA", "DetA", "AssA", "HOTA_alpha"}) {
        CHECK(j.contains(key));
    }
    CHECK(j["AssA"].size() == 19);
    const auto csv = hota_curve_csv(r.hota);
    CHECK(csv.rfind("alpha,DetA,AssA,HOTA\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 20);
}
