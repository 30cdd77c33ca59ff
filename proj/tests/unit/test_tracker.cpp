#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "remtrack/gradient_check.hpp"
#include "remtrack/pipeline.hpp"
#include "remtrack/tracker.hpp"

using namespace remtrack;
using namespace remtrack::track;

namespace {

ModelConfig small_config() {
    ModelConfig c;
    c.dim = 6;
    c.appearance_dim = 10;
    c.hidden = 8;
    c.window = 4;
    c.frame = {320.0, 240.0, 0.01};
    return c;
}

void zero(ad::ParameterStore& store, const std::string& prefix) {
    for (std::size_t s = 0; s < store.size(); ++s) {
        if (store.name(s).rfind(prefix, 0) == 0) {
            std::fill(store.tensor(s).data.begin(), store.tensor(s).data.end(), 0.0);
        }
    }
}

/// Hand-set weights that make the baseline head reproduce the detection: the
/// encoder passes the four relative inputs through, the hidden layer splits
/// each into a +/- pair, and the output layer undoes the LeakyReLU.
void make_copy_head(Model& m) {
    auto& s = m.store;
    zero(s, "trk.");
    auto& app = s.tensor("trk.app.w");
    for (std::size_t k = 0; k < 4; ++k) app.at(k, k) = 1.0;
    auto& w1 = s.tensor("trk.base.w1");
    auto& w2 = s.tensor("trk.base.w2");
    for (std::size_t k = 0; k < 4; ++k) {
        w1.at(k, k) = 1.0;
        w1.at(4 + k, k) = -1.0;
        const double gain = 1.0 / ((1.0 + 0.1) * kRelativeInputScale);
        w2.at(k, k) = gain;
        w2.at(k, 4 + k) = -gain;
    }
}

sim::ScenarioConfig busy_scene(std::uint64_t seed) {
    sim::ScenarioConfig c;
    c.frames = 20;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("appearance encoder basics") {
    auto m = Model::create(small_config(), 1);
    const BoundingBox prev{100, 100, 20, 50};
    const BoundingBox det{104, 98, 22, 50};
    const auto on = appearance_input(det, prev, true, m.config.frame);
    const auto off = appearance_input(det, prev, false, m.config.frame);
    int differing = 0;
    for (std::size_t k = 0; k < kAppearanceInputs; ++k) differing += on[k] != off[k];
    CHECK(differing == 1);
    CHECK(on[8] == 1.0);
    CHECK(std::abs(on[0] - kRelativeInputScale * 4.0 / 20.0) < 1e-12);
    const auto none = appearance_input(std::nullopt, prev, false, m.config.frame);
    CHECK(none[0] == 0.0);
    CHECK(none[3] == 0.0);

    zero(m.store, "trk.app.");
    ad::Tape tape(false);
    const auto f = tape.value(appearance_feature(tape, m.trk, on));
    CHECK(std::all_of(f.begin(), f.end(), [](double x) { return x == 0.0; }));
}

TEST_CASE("zero head weights give a zero offset and the box stays put") {
    auto m = Model::create(small_config(), 2);
    zero(m.store, "trk.rel.");
    zero(m.store, "trk.base.");
    ad::Tape tape(false);
    const auto in = appearance_input(BoundingBox{5, 5, 2, 2}, BoundingBox{4, 4, 2, 2}, true, m.config.frame);
    const Var app = appearance_feature(tape, m.trk, in);
    const auto off = tape.value(regress_relation_aware(tape, m.trk, app, tape.constant(std::vector<double>(6, 0.3))));
    CHECK(std::all_of(off.begin(), off.end(), [](double x) { return x == 0.0; }));
    const BoundingBox prev{10, 20, 3, 4};
    CHECK(apply_offset(prev, off) == prev);
    CHECK(apply_offset(prev, std::vector<double>{0.5, -1, std::log(2.0), 0}) == BoundingBox{11.5, 16, 6, 4});
}

TEST_CASE("relation-aware head with zero relation equals a baseline head of matching weights") {
    auto m = Model::create(small_config(), 3);
    auto& s = m.store;
    const auto& bw1 = s.tensor("trk.base.w1");
    auto& rw1 = s.tensor("trk.rel.w1");
    for (std::size_t r = 0; r < bw1.rows(); ++r)
        for (std::size_t c = 0; c < bw1.cols(); ++c) rw1.at(r, c) = bw1.data[r * bw1.cols() + c];
    s.tensor("trk.rel.b1") = s.tensor("trk.base.b1");
    s.tensor("trk.rel.w2") = s.tensor("trk.base.w2");
    s.tensor("trk.rel.b2") = s.tensor("trk.base.b2");

    ad::Tape tape(false);
    const auto in = appearance_input(BoundingBox{5, 5, 2, 2}, BoundingBox{4, 4.5, 2.5, 2}, true, m.config.frame);
    const Var app = appearance_feature(tape, m.trk, in);
    const auto a = tape.value(regress_relation_aware(tape, m.trk, app, tape.zeros(6)));
    const auto b = tape.value(regress_baseline(tape, m.trk, app));
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
}

TEST_CASE("occlusion head with zero weights outputs softplus(0) sizes at the origin") {
    auto m = Model::create(small_config(), 4);
    zero(m.store, "trk.occ.");
    ad::Tape tape(false);
    const auto box = tape.value(regress_from_relations(tape, m.trk, tape.constant(std::vector<double>(6, 1.0))));
    CHECK(box[0] == 0.0);
    CHECK(box[1] == 0.0);
    CHECK(std::abs(box[2] - std::log(2.0)) < 1e-12);
    CHECK(std::abs(box[3] - std::log(2.0)) < 1e-12);
}

TEST_CASE("occlusion head sizes stay positive") {
    auto m = Model::create(small_config(), 5);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 20.0);
    for (int k = 0; k < 100; ++k) {
        std::vector<double> r(6);
        for (double& x : r) x = n(rng);
        ad::Tape tape(false);
        const auto box = tape.value(regress_from_relations(tape, m.trk, tape.constant(r)));
        CHECK(box[2] > 0.0);
        CHECK(box[3] > 0.0);
    }
}

TEST_CASE("head gradients match finite differences") {
    auto m = Model::create(small_config(), 6);
    const BoundingBox prev{300, 250, 22, 55};
    const BoundingBox det{303, 249, 23, 54};
    const BoundingBox target{302.5, 249.5, 22.5, 54.5};
    const std::vector<double> r = {0.1, -0.3, 0.2, 0.5, -0.1, 0.05};
    auto loss = [&](ad::Tape& tape) {
        const auto in = appearance_input(det, prev, true, m.config.frame);
        const Var app = appearance_feature(tape, m.trk, in);
        const Var rv = tape.constant(r);
        const Var a = giou_loss(tape, apply_offset(tape, prev, regress_relation_aware(tape, m.trk, app, rv)), target);
        const Var b = giou_loss(tape, apply_offset(tape, prev, regress_baseline(tape, m.trk, app)), target);
        const auto t = m.config.frame.to_model(target);
        const Var c = giou_loss(tape, regress_from_relations(tape, m.trk, rv), BoundingBox{t[0], t[1], t[2], t[3]});
        return tape.add(tape.add(a, b), c);
    };
    const auto report = ad::gradient_check(loss, m.store);
    CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("end-to-end gradient reaches the attention weights of the encoder") {
    const auto report = pipeline::model_gradient_check(7, 4);
    CHECK(report.max_relative_error < 1e-4);
    CHECK(report.entries_checked > 0);

    auto model = Model::create(small_config(), 7);
    auto seq = pipeline::make_sequence(pipeline::occluded_group_scenario(3, 2, 2));
    ad::Tape tape(true);
    const Var loss = train::window_loss(tape, model, seq, 0);
    ad::Gradients g = model.store.make_gradients();
    tape.backward(loss, &g);
    const auto slot = model.store.ref("rem.w_a1").slot;
    CHECK(std::any_of(g[slot].begin(), g[slot].end(), [](double x) { return x != 0.0; }));
}

TEST_CASE("a copy head on noise-free detections reproduces ground truth") {
    auto m = Model::create(small_config(), 8);
    make_copy_head(m);
    auto scenario = busy_scene(11);
    scenario.det_center_std = 0.0;
    scenario.det_size_std = 0.0;
    scenario.occlusion_prob = 0.0;
    const auto seq = pipeline::make_sequence(scenario);
    const auto out = track_sequence(m, seq.detections, TrackerConfig{Mode::baseline});
    for (std::size_t t = 0; t < out.size(); ++t) {
        REQUIRE(out[t].size() == seq.gt.frames[t].size());
        for (const auto& g : seq.gt.frames[t]) {
            double best = 0.0;
            for (const auto& o : out[t]) best = std::max(best, iou(g.box, o.box));
            CHECK(best > 1.0 - 1e-9);
        }
    }
    const auto report = pipeline::evaluate(seq.gt, out, metrics::default_alpha_grid());
    CHECK(report.clear.mota == 1.0);
    CHECK(report.clear.id_switches == 0);
}

TEST_CASE("permuting detections within frames leaves every output unchanged") {
    auto m = Model::create(small_config(), 9);
    auto seq = pipeline::make_sequence(busy_scene(13));
    std::mt19937_64 rng(1);
    auto shuffled = seq.detections;
    for (auto& f : shuffled) {
        std::shuffle(f.begin(), f.end(), rng);
        for (auto& d : f) d.id = -1;  // ground-truth ids must not matter either
    }
    for (Mode mode : {Mode::baseline, Mode::relation_aware, Mode::relations_for_occluded}) {
        const auto a = track_sequence(m, seq.detections, TrackerConfig{mode});
        const auto b = track_sequence(m, shuffled, TrackerConfig{mode});
        REQUIRE(a.size() == b.size());
        for (std::size_t t = 0; t < a.size(); ++t) {
            REQUIRE(a[t].size() == b[t].size());
            for (std::size_t k = 0; k < a[t].size(); ++k) {
                CHECK(a[t][k].id == b[t][k].id);
                CHECK(a[t][k].box == b[t][k].box);
                CHECK(a[t][k].source == b[t][k].source);
            }
        }
    }
}

TEST_CASE("group reckoning follows the mean neighbor motion, else the own velocity") {
    const BoundingBox last{10.0, 20.0, 4.0, 8.0};
    const std::vector<std::pair<BoundingBox, BoundingBox>> moves = {
        {{0.0, 0.0, 5.0, 5.0}, {3.0, -1.0, 6.0, 6.0}},
        {{50.0, 50.0, 5.0, 5.0}, {55.0, 47.0, 5.0, 5.0}}};
    const BoundingBox g = group_reckoned(last, moves, 100.0, 100.0, 3);
    CHECK(g.cx == 14.0);
    CHECK(g.cy == 18.0);
    CHECK(g.w == 4.0);
    CHECK(g.h == 8.0);
    const BoundingBox own = group_reckoned(last, {}, 1.5, -2.0, 3);
    CHECK(own.cx == 14.5);
    CHECK(own.cy == 14.0);
}

TEST_CASE("occluded tracks use the relation branch only in the third mode") {
    auto m = Model::create(small_config(), 10);
    make_copy_head(m);
    auto scenario = pipeline::occluded_group_scenario(5, 6, 4);
    scenario.det_center_std = 0.0;
    scenario.det_size_std = 0.0;
    const auto seq = pipeline::make_sequence(scenario);
    auto count = [&](Mode mode, BoxSource source) {
        int n = 0;
        for (const auto& f : track_sequence(m, seq.detections, TrackerConfig{mode}))
            for (const auto& b : f) n += b.source == source;
        return n;
    };
    CHECK(count(Mode::relations_for_occluded, BoxSource::relations) > 0);
    CHECK(count(Mode::relations_for_occluded, BoxSource::coasted) == 0);
    CHECK(count(Mode::relation_aware, BoxSource::relations) == 0);
    CHECK(count(Mode::relation_aware, BoxSource::coasted) > 0);
    CHECK(count(Mode::relation_aware, BoxSource::relation_head) > 0);
    CHECK(count(Mode::baseline, BoxSource::baseline_head) > 0);
    CHECK(count(Mode::baseline, BoxSource::relation_head) == 0);
}

TEST_CASE("tracks without detections terminate after max_age frames") {
    auto m = Model::create(small_config(), 11);
    std::vector<std::vector<sim::Detection>> dets(30);
    dets[0].push_back({0, BoundingBox{100, 100, 20, 50}, true});
    for (Mode mode : {Mode::baseline, Mode::relation_aware, Mode::relations_for_occluded}) {
        TrackerConfig cfg{mode};
        cfg.max_age = 5;
        const auto out = track_sequence(m, dets, cfg);
        for (int t = 0; t < 30; ++t) {
            CHECK(out[static_cast<std::size_t>(t)].size() == (t <= 5 ? 1u : 0u));
        }
        CHECK(out[3][0].occluded);
    }
}

TEST_CASE("tracking rejects an empty first frame") {
    auto m = Model::create(small_config(), 12);
    std::vector<std::vector<sim::Detection>> dets(3);
    CHECK_THROWS_AS(track_sequence(m, dets, TrackerConfig{}), std::invalid_argument);
    dets[0].push_back({0, std::nullopt, false});
    CHECK_THROWS_AS(track_sequence(m, dets, TrackerConfig{}), std::invalid_argument);
}

TEST_CASE("modes parse and print") {
    for (Mode mode : {Mode::baseline, Mode::relation_aware, Mode::relations_for_occluded}) {
        CHECK(parse_mode(to_string(mode)) == mode);
    }
    CHECK_THROWS_AS(parse_mode("fancy"), std::invalid_argument);
}

TEST_CASE("model checkpoints round trip") {
    auto m = Model::create(small_config(), 13);
    const auto back = Model::from_json(m.to_json());
    CHECK(back.config.dim == 6);
    CHECK(back.config.window == 4);
    CHECK(back.config.frame == m.config.frame);
    for (std::size_t s = 0; s < m.store.size(); ++s) {
        CHECK(back.store.name(s) == m.store.name(s));
        CHECK(back.store.tensor(s).data == m.store.tensor(s).data);
    }
    auto doc = m.to_json();
    doc["model"]["frame"]["scale"] = -1.0;
    CHECK_THROWS_AS(Model::from_json(doc), std::invalid_argument);
    doc.erase("model");
    CHECK(Model::from_json(doc).config.window == ModelConfig{}.window);
    CHECK(Model::trainable("rem.w_in"));
    CHECK(Model::trainable("trk.rel.w1"));
    CHECK_FALSE(Model::trainable("trk.app.w"));
}
