#include <doctest.h>

#include <cmath>
#include <set>

#include "cueing/metrics.hpp"
#include "cueing/synth.hpp"
#include "cueing/train.hpp"

#include "test_util.hpp"

using namespace cueing;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.tokens = 16;
    cfg.width = 64;
    cfg.height = 64;
    return cfg;
}

std::vector<Frame> tiny_frames(int count, uint64_t seed) {
    std::vector<Frame> frames;
    for (int i = 0; i < count; ++i) {
        Frame f;
        f.id = "t" + std::to_string(i);
        f.image = testutil::random_image(64, 64, seed + static_cast<uint64_t>(i));
        f.gaze = testutil::random_gaze(64, 64, seed + 100 + static_cast<uint64_t>(i));
        f.boxes = {{ObjectClass::Car, 8, 8, 40, 40}};
        frames.push_back(std::move(f));
    }
    return frames;
}

std::vector<std::vector<float>> snapshot(const CueingModel& model) {
    std::vector<std::vector<float>> out;
    for (size_t i = 0; i < model.registry().size(); ++i)
        out.push_back(model.registry()[i].value.data);
    return out;
}

}  // namespace

TEST_CASE("training basics") {
    SUBCASE("lr = 0 leaves parameters identical") {
        CueingModel model(tiny_config(), 3);
        auto before = snapshot(model);
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.batch_size = 2;
        cfg.adam.lr = 0.0;
        cfg.seed = 1;
        train_frames(model, tiny_frames(4, 10), cfg);
        CHECK(snapshot(model) == before);
    }
    SUBCASE("freeze all_except_linear trains only the head") {
        CueingModel model(tiny_config(), 4);
        auto before = snapshot(model);
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.batch_size = 4;
        cfg.seed = 2;
        cfg.freeze = FreezeMask::AllExceptLinear;
        train_frames(model, tiny_frames(4, 20), cfg);
        auto after = snapshot(model);
        for (size_t i = 0; i < model.registry().size(); ++i) {
            const auto& name = model.registry()[i].name;
            if (is_head_param(name))
                CHECK(before[i] != after[i]);
            else
                CHECK(before[i] == after[i]);
        }
    }
    SUBCASE("freeze attention leaves encoder parameters bit-identical over 50 steps") {
        CueingModel model(tiny_config(), 5);
        auto before = snapshot(model);
        TrainConfig cfg;
        cfg.epochs = 50;  // 1 batch per epoch -> 50 steps
        cfg.batch_size = 4;
        cfg.seed = 3;
        cfg.freeze = FreezeMask::Attention;
        auto result = train_frames(model, tiny_frames(4, 30), cfg);
        CHECK(result.steps == 50);
        auto after = snapshot(model);
        for (size_t i = 0; i < model.registry().size(); ++i) {
            const auto& name = model.registry()[i].name;
            if (is_attention_param(name))
                CHECK(before[i] == after[i]);
            else
                CHECK(before[i] != after[i]);
        }
    }
    SUBCASE("empty dataset raises") {
        CueingModel model(tiny_config(), 6);
        TrainConfig cfg;
        CHECK_THROWS_AS(train_frames(model, {}, cfg), std::invalid_argument);
    }
    SUBCASE("dimension mismatch raises") {
        CueingModel model(tiny_config(), 7);
        std::vector<Frame> frames(1);
        frames[0].image = testutil::random_image(32, 32, 1);
        frames[0].gaze = testutil::random_gaze(32, 32, 2);
        TrainConfig cfg;
        CHECK_THROWS_AS(train_frames(model, frames, cfg), std::invalid_argument);
    }
}

TEST_CASE("freeze masks partition the registry") {
    CueingModel model(tiny_config(), 8);
    auto& reg = model.registry();
    for (size_t i = 0; i < reg.size(); ++i) {
        const auto& name = reg[i].name;
        int membership = (is_attention_param(name) ? 1 : 0) + (is_head_param(name) ? 1 : 0);
        CHECK(membership <= 1);  // disjoint
    }
    // Exhaustive: the three masks cover every parameter.
    std::set<std::string> all, covered;
    for (size_t i = 0; i < reg.size(); ++i) all.insert(reg[i].name);
    for (size_t i = 0; i < reg.size(); ++i) {
        const auto& name = reg[i].name;
        if (is_attention_param(name) || is_head_param(name) ||
            (!is_attention_param(name) && !is_head_param(name)))
            covered.insert(name);
    }
    CHECK(all == covered);
}

TEST_CASE("sample_finetune_subset") {
    DatasetManifest m;
    m.root = ".";
    for (int i = 0; i < 100; ++i) {
        ManifestEntry e;
        e.image_path = "i" + std::to_string(i) + ".png";
        e.gaze_path = "g" + std::to_string(i) + ".png";
        m.entries.push_back(e);
    }

    SUBCASE("2 percent of 100 is exactly 2 entries") {
        auto s = sample_finetune_subset(m, 0.02, 7);
        CHECK(s.entries.size() == 2);
    }
    SUBCASE("ceiling applies: 2 percent of 30 is 1 entry") {
        DatasetManifest m30 = m;
        m30.entries.resize(30);
        auto s = sample_finetune_subset(m30, 0.02, 7);
        CHECK(s.entries.size() == 1);
    }
    SUBCASE("same seed gives the same subset, different seeds usually differ") {
        auto a = sample_finetune_subset(m, 0.1, 9);
        auto b = sample_finetune_subset(m, 0.1, 9);
        auto c = sample_finetune_subset(m, 0.1, 10);
        REQUIRE(a.entries.size() == b.entries.size());
        for (size_t i = 0; i < a.entries.size(); ++i)
            CHECK(a.entries[i].image_path == b.entries[i].image_path);
        bool all_same = true;
        for (size_t i = 0; i < a.entries.size(); ++i)
            all_same &= a.entries[i].image_path == c.entries[i].image_path;
        CHECK_FALSE(all_same);
    }
    SUBCASE("subset preserves manifest order") {
        auto s = sample_finetune_subset(m, 0.2, 11);
        for (size_t i = 1; i < s.entries.size(); ++i) {
            int prev = std::stoi(s.entries[i - 1].image_path.substr(1));
            int cur = std::stoi(s.entries[i].image_path.substr(1));
            CHECK(prev < cur);
        }
    }
    SUBCASE("empty manifest raises") {
        DatasetManifest empty;
        CHECK_THROWS_AS(sample_finetune_subset(empty, 0.02, 1), std::invalid_argument);
    }
}

TEST_CASE("focus_decision") {
    GazeMap m(10, 10);
    BBox box{ObjectClass::Car, 2, 2, 8, 8};

    SUBCASE("max 0.6 inside the box is focused") {
        m.at(4, 4) = 0.6f;
        CHECK(focus_decision(m, box));
    }
    SUBCASE("max exactly 0.5 is not focused (strict inequality)") {
        m.at(4, 4) = 0.5f;
        CHECK_FALSE(focus_decision(m, box));
    }
    SUBCASE("all-zero map is not focused") { CHECK_FALSE(focus_decision(m, box)); }
    SUBCASE("gaze outside the box does not count") {
        m.at(0, 0) = 1.0f;
        CHECK_FALSE(focus_decision(m, box));
    }
    SUBCASE("degenerate box raises") {
        BBox degenerate{ObjectClass::Car, 12, 12, 20, 20};  // outside a 10x10 map
        CHECK_THROWS_AS(focus_decision(m, degenerate), std::invalid_argument);
    }
}

TEST_CASE("object_level_metrics") {
    SUBCASE("perfect predictor scores 100 everywhere with AUC 1") {
        std::vector<ObjectScore> objs;
        for (int i = 0; i < 10; ++i) {
            ObjectScore s;
            s.gt_focused = i < 4;
            s.pred_focused = s.gt_focused;
            s.score = s.gt_focused ? 0.9 : 0.1;
            objs.push_back(s);
        }
        auto m = object_level_metrics(objs);
        CHECK(m.accuracy == doctest::Approx(100.0));
        CHECK(m.f1 == doctest::Approx(100.0));
        REQUIRE(m.auc.has_value());
        CHECK(*m.auc == doctest::Approx(1.0));
    }
    SUBCASE("all predicted focused with half truly focused: recall 100, precision 50") {
        std::vector<ObjectScore> objs;
        for (int i = 0; i < 8; ++i) {
            ObjectScore s;
            s.gt_focused = i < 4;
            s.pred_focused = true;
            s.score = 0.8;
            objs.push_back(s);
        }
        auto m = object_level_metrics(objs);
        CHECK(m.recall == doctest::Approx(100.0));
        CHECK(m.precision == doctest::Approx(50.0));
    }
    SUBCASE("matches a brute-force confusion-matrix oracle on 100 random objects") {
        Rng rng(91);
        std::vector<ObjectScore> objs(100);
        for (auto& s : objs) {
            s.score = rng.uniform();
            s.gt_focused = rng.bernoulli(0.4);
            s.pred_focused = s.score > 0.5;
        }
        auto m = object_level_metrics(objs);

        // Independent scalar loop.
        int64_t tp = 0, fp = 0, tn = 0, fn = 0;
        for (const auto& s : objs) {
            if (s.gt_focused && s.pred_focused) tp++;
            if (!s.gt_focused && s.pred_focused) fp++;
            if (!s.gt_focused && !s.pred_focused) tn++;
            if (s.gt_focused && !s.pred_focused) fn++;
        }
        CHECK(m.tp == tp);
        CHECK(m.fp == fp);
        CHECK(m.tn == tn);
        CHECK(m.fn == fn);
        CHECK(m.accuracy == doctest::Approx(100.0 * (tp + tn) / 100.0));
        CHECK(m.precision == doctest::Approx(100.0 * tp / double(tp + fp)));
        CHECK(m.recall == doctest::Approx(100.0 * tp / double(tp + fn)));

        // Pairwise Mann-Whitney oracle with ties counting one half.
        double wins = 0.0;
        int64_t pairs = 0;
        for (const auto& a : objs)
            for (const auto& b : objs) {
                if (!a.gt_focused || b.gt_focused) continue;
                ++pairs;
                if (a.score > b.score)
                    wins += 1.0;
                else if (a.score == b.score)
                    wins += 0.5;
            }
        REQUIRE(m.auc.has_value());
        CHECK(*m.auc == doctest::Approx(wins / static_cast<double>(pairs)).epsilon(1e-12));
    }
    SUBCASE("AUC is invariant under strictly increasing transforms") {
        Rng rng(92);
        std::vector<ObjectScore> objs(40);
        for (auto& s : objs) {
            s.score = rng.uniform();
            s.gt_focused = rng.bernoulli(0.5);
            s.pred_focused = s.score > 0.5;
        }
        auto base = object_level_metrics(objs);
        for (auto& s : objs) s.score = std::exp(3.0 * s.score) + 7.0;
        auto mapped = object_level_metrics(objs);
        REQUIRE(base.auc.has_value());
        REQUIRE(mapped.auc.has_value());
        CHECK(*base.auc == doctest::Approx(*mapped.auc).epsilon(1e-12));
    }
    SUBCASE("single-class ground truth leaves AUC absent") {
        std::vector<ObjectScore> objs(5);
        for (auto& s : objs) {
            s.gt_focused = true;
            s.pred_focused = true;
            s.score = 0.9;
        }
        auto m = object_level_metrics(objs);
        CHECK_FALSE(m.auc.has_value());
    }
    SUBCASE("zero objects raises") {
        CHECK_THROWS_AS(object_level_metrics({}), std::invalid_argument);
    }
}

TEST_CASE("pixel_level_metrics") {
    SUBCASE("self comparison: KL at most 1e-6 and CC = 1") {
        GazeMap m = testutil::random_gaze(24, 24, 93);
        auto r = pixel_level_metrics(m, m);
        CHECK(r.kl <= 1e-6);
        REQUIRE(r.cc.has_value());
        CHECK(*r.cc == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("uniform prediction against a concentrated blob has positive KL") {
        GazeMap pred(16, 16);
        std::fill(pred.data.begin(), pred.data.end(), 0.5f);
        GazeMap gt(16, 16);
        gt.at(8, 8) = 1.0f;
        auto r = pixel_level_metrics(pred, gt);
        CHECK(r.kl > 0.0);
    }
    SUBCASE("matches an independently coded scalar reference within 1e-10") {
        GazeMap pred = testutil::random_gaze(12, 18, 94);
        GazeMap gt = testutil::random_gaze(12, 18, 95);
        auto r = pixel_level_metrics(pred, gt);

        // Scalar-loop reference with its own accumulation order.
        const double eps = 1e-7;
        double ps = 0.0, qs = 0.0;
        for (size_t i = 0; i < pred.data.size(); ++i) ps += pred.data[i] + eps;
        for (size_t i = 0; i < gt.data.size(); ++i) qs += gt.data[i] + eps;
        double kl = 0.0;
        for (size_t i = 0; i < pred.data.size(); ++i) {
            double q = (gt.data[i] + eps) / qs;
            double p = (pred.data[i] + eps) / ps;
            kl += q * (std::log(q) - std::log(p));
        }
        CHECK(std::fabs(r.kl - kl) < 1e-10);

        double mp = 0, mq = 0;
        size_t n = pred.data.size();
        for (size_t i = 0; i < n; ++i) mp += pred.data[i];
        for (size_t i = 0; i < n; ++i) mq += gt.data[i];
        mp /= double(n);
        mq /= double(n);
        double num = 0, dp2 = 0, dq2 = 0;
        for (size_t i = 0; i < n; ++i) {
            num += (pred.data[i] - mp) * (gt.data[i] - mq);
            dp2 += (pred.data[i] - mp) * (pred.data[i] - mp);
            dq2 += (gt.data[i] - mq) * (gt.data[i] - mq);
        }
        REQUIRE(r.cc.has_value());
        CHECK(std::fabs(*r.cc - num / std::sqrt(dp2 * dq2)) < 1e-10);
    }
    SUBCASE("CC is invariant under positive affine transforms") {
        GazeMap pred = testutil::random_gaze(10, 10, 96);
        GazeMap gt = testutil::random_gaze(10, 10, 97);
        auto base = pixel_level_metrics(pred, gt);
        GazeMap scaled = pred;
        for (float& v : scaled.data) v = 0.25f + 0.5f * v;
        auto moved = pixel_level_metrics(scaled, gt);
        REQUIRE(base.cc.has_value());
        REQUIRE(moved.cc.has_value());
        CHECK(*base.cc == doctest::Approx(*moved.cc).epsilon(1e-6));
    }
    SUBCASE("constant map leaves CC absent") {
        GazeMap pred(8, 8);
        std::fill(pred.data.begin(), pred.data.end(), 0.3f);
        GazeMap gt = testutil::random_gaze(8, 8, 98);
        auto r = pixel_level_metrics(pred, gt);
        CHECK_FALSE(r.cc.has_value());
    }
    SUBCASE("scaling a focused prediction never un-focuses an object") {
        GazeMap m = testutil::random_gaze(16, 16, 99);
        BBox box{ObjectClass::Car, 2, 2, 14, 14};
        if (focus_decision(m, box)) {
            GazeMap scaled = m;
            for (float& v : scaled.data) v = std::min(1.0f, v * 1.7f);
            CHECK(focus_decision(scaled, box));
        }
    }
}

TEST_CASE("evaluate") {
    testutil::TempDir dir("eval");
    SynthSpec spec;
    spec.n_frames = 2;
    spec.width = 64;
    spec.height = 64;
    spec.objects_min = 1;
    spec.objects_max = 2;
    spec.seed = 17;
    auto manifest = synth_dataset(spec, dir.str());
    CueingModel model(tiny_config(), 12);

    SUBCASE("single-frame aggregate equals the per-frame record") {
        DatasetManifest one = manifest;
        one.entries.resize(1);
        auto rep = evaluate(model, one);
        REQUIRE(rep.per_frame.size() == 1);
        CHECK(rep.kl_mean == rep.per_frame[0].pixel.kl);
        CHECK(rep.frames == 1);
    }
    SUBCASE("deterministic across runs") {
        auto a = evaluate(model, manifest);
        auto b = evaluate(model, manifest);
        CHECK(format_report(a) == format_report(b));
        CHECK(format_frame_records(a) == format_frame_records(b));
    }
    SUBCASE("parallel evaluation matches single-threaded") {
        EvalParams par;
        par.threads = 4;
        auto a = evaluate(model, manifest);
        auto b = evaluate(model, manifest, par);
        CHECK(format_report(a) == format_report(b));
    }
    SUBCASE("matches a hand-computed two-frame fixture") {
        // Hand-built frames: box A focused in GT and prediction, box B
        // focused in neither, box C focused only in the prediction.
        std::vector<Frame> frames(2);
        std::vector<GazeMap> preds(2);

        frames[0].id = "fix0";
        frames[0].image = Image(16, 16);
        frames[0].gaze = GazeMap(16, 16);
        frames[0].gaze.at(4, 4) = 1.0f;  // inside A
        frames[0].boxes = {{ObjectClass::Car, 2, 2, 7, 7}, {ObjectClass::Bus, 10, 10, 15, 15}};
        preds[0] = GazeMap(16, 16);
        preds[0].at(4, 4) = 0.9f;  // A predicted focused

        frames[1].id = "fix1";
        frames[1].image = Image(16, 16);
        frames[1].gaze = GazeMap(16, 16);
        frames[1].boxes = {{ObjectClass::Rider, 1, 1, 8, 8}};
        preds[1] = GazeMap(16, 16);
        preds[1].at(3, 3) = 0.7f;  // C predicted focused, GT empty

        auto rep = evaluate_maps(frames, preds);
        // Objects: A -> TP, B -> TN, C -> FP.
        CHECK(rep.objects == 3);
        CHECK(rep.object_level.tp == 1);
        CHECK(rep.object_level.tn == 1);
        CHECK(rep.object_level.fp == 1);
        CHECK(rep.object_level.fn == 0);
        CHECK(rep.object_level.accuracy == doctest::Approx(100.0 * 2.0 / 3.0));
        CHECK(rep.object_level.precision == doctest::Approx(50.0));
        CHECK(rep.object_level.recall == doctest::Approx(100.0));
        // AUC: positive {A: 0.9}, negatives {B: 0.0, C: 0.7} -> both pairs won.
        REQUIRE(rep.object_level.auc.has_value());
        CHECK(*rep.object_level.auc == doctest::Approx(1.0));
        CHECK(rep.frames == 2);
    }
}
