#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ahocda/error.hpp"
#include "ahocda/spectrum.hpp"
#include "ahocda/synthdata.hpp"
#include "ahocda/trainer.hpp"

using namespace ahocda;
using namespace ahocda::trainer;

namespace {

TrainConfig tiny_config() {
    TrainConfig c;
    c.model.input_h = 8;
    c.model.input_w = 8;
    c.model.encoder_channels = {4, 6, 8};
    c.model.projection_dim = 4;
    c.model.memory_init_gain = 3.0;
    c.model.disc_channels = {4};
    c.memory_size = 5;
    c.lr_seg = 2e-3;
    c.lr_disc = 1e-3;
    c.iters_pretrain = 12;
    c.iters_per_stage = 4;
    c.k = 3;
    c.seed = 7;
    return c;
}

/// 6 labeled source and 9 unlabeled compound samples at model resolution.
TrainingData tiny_data(const TrainConfig& cfg) {
    synth::BenchmarkPlan plan = synth::BenchmarkPlan::defaults();
    plan.scene.height = plan.scene.width = 16;
    plan.scene.min_size = 3;
    plan.scene.max_size = 6;
    plan.n_source = 6;
    plan.compound = {{synth::ShiftKind::brightness, 0.1, 0.9, 9}};
    plan.open = {{synth::ShiftKind::gaussian_noise, 0.1, 0.2, 1}};
    const auto bench = synth::gen_benchmark(plan);
    const auto mc = cfg.resolved_model();
    TrainingData data;
    std::vector<Image> src;
    for (const auto& r : bench.records)
        if (r.split == synth::Split::source) src.push_back(r.image);
    const auto profile = spectrum::source_profile(src, cfg.beta);
    std::vector<curriculum::RankedImage> ranked;
    for (const auto& r : bench.records) {
        if (r.split == synth::Split::source) data.source.push_back(prepare(r.id, r.image, mc, true));
        if (r.split == synth::Split::compound) {
            data.compound.push_back(prepare(r.id, r.image, mc, false));
            ranked.push_back({r.id, spectrum::domain_distance(r.image, profile)});
        }
    }
    data.curriculum = curriculum::build_curriculum(ranked, cfg.k);
    return data;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("ahocda_trainer_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

const Matrix& param(const model::SegModel& m, const std::string& name) {
    for (const auto& p : m.params())
        if (p.name == name) return *p.value;
    throw std::logic_error("no parameter " + name);
}

}  // namespace

TEST_SUITE("trainer") {
    TEST_CASE("defaults") {
        const TrainConfig c;
        CHECK(c.lambda_adv == 0.001);
        CHECK(c.beta == 0.09);
        CHECK(c.k == 3);
        CHECK(c.tau == 1.0);
        CHECK(c.memory_size == 64);
        CHECK(c.lr_seg == 0.00025);
        CHECK(c.lr_disc == 0.0001);
        CHECK(c.poly_power == 0.9);
        CHECK(c.momentum == 0.9);
        CHECK(c.weight_decay == 0.0);
        CHECK_NOTHROW(c.validate());
    }

    TEST_CASE("validation") {
        TrainConfig c;
        c.lr_seg = 0;
        CHECK_THROWS_AS(c.validate(), ParameterError);
        c = TrainConfig{};
        c.k = 0;
        CHECK_THROWS_AS(c.validate(), ParameterError);
        c = TrainConfig{};
        c.beta = 1.5;
        CHECK_THROWS_AS(c.validate(), ParameterError);
        c = TrainConfig{};
        c.tau = -1;
        CHECK_THROWS_AS(c.validate(), ParameterError);
    }

    TEST_CASE("config JSON round trip") {
        TrainConfig c = tiny_config();
        c.freeze_memory = false;
        const nlohmann::json j = c;
        const TrainConfig back = j.get<TrainConfig>();
        CHECK(nlohmann::json(back) == j);
    }

    TEST_CASE("poly learning rate") {
        CHECK(poly_lr(0.1, 0, 100, 0.9) == 0.1);
        CHECK(poly_lr(0.1, 100, 100, 0.9) == 0.0);
        CHECK(poly_lr(0.1, 50, 100, 0.9) == doctest::Approx(0.1 * std::pow(0.5, 0.9)));
        double prev = INFINITY;
        for (long i = 0; i <= 100; ++i) {
            const double lr = poly_lr(2.5e-4, i, 100, 0.9);
            CHECK(lr <= prev);
            if (i < 100) CHECK(lr > 0.0);
            prev = lr;
        }
    }

    TEST_CASE("zero pretraining iterations returns the initialization") {
        TrainConfig c = tiny_config();
        c.iters_pretrain = 0;
        const auto data = tiny_data(c);
        CHECK(pretrain(c, data.source) == initial_state(c).seg);
    }

    TEST_CASE("pretraining is deterministic") {
        const TrainConfig c = tiny_config();
        const auto data = tiny_data(c);
        const auto a = pretrain(c, data.source);
        const auto b = pretrain(c, data.source);
        CHECK(a == b);
        CHECK_FALSE(a == initial_state(c).seg);
    }

    TEST_CASE("pretraining needs labeled source data") {
        const TrainConfig c = tiny_config();
        CHECK_THROWS_AS(pretrain(c, {}), ParameterError);
        auto data = tiny_data(c);
        data.source[0].labels.reset();
        CHECK_THROWS_AS(pretrain(c, data.source), InvalidInput);
    }

    TEST_CASE("compound labels never reach the trainer") {
        const TrainConfig c = tiny_config();
        auto data = tiny_data(c);
        data.compound[0].labels = LabelMap(8, 8, 0);
        RunState st = initial_state(c);
        CHECK_THROWS_AS(run(st, data), InvalidInput);
    }

    TEST_CASE("divergence raises a numeric error naming the phase") {
        TrainConfig c = tiny_config();
        c.lr_seg = 1e300;
        const auto data = tiny_data(c);
        RunState st = initial_state(c);
        try {
            run(st, data);
            FAIL("expected divergence");
        } catch (const NumericError& e) {
            CHECK(std::string(e.what()).find("pretrain") != std::string::npos);
        }
    }

    TEST_CASE("adaptation keeps M, W_k, W_v bitwise frozen") {
        const TrainConfig c = tiny_config();
        const auto data = tiny_data(c);
        const auto pre = pretrain(c, data.source);
        const auto res = adapt(c, pre, data);
        CHECK(param(res.seg, "hopfield.memory") == param(pre, "hopfield.memory"));
        CHECK(param(res.seg, "hopfield.w_k") == param(pre, "hopfield.w_k"));
        CHECK(param(res.seg, "hopfield.w_v") == param(pre, "hopfield.w_v"));
        CHECK_FALSE(param(res.seg, "hopfield.w_q") == param(pre, "hopfield.w_q"));
        CHECK(res.seg.memory()->frozen);
    }

    TEST_CASE("no-freeze lets the memory move") {
        TrainConfig c = tiny_config();
        c.freeze_memory = false;
        const auto data = tiny_data(c);
        const auto pre = pretrain(c, data.source);
        const auto res = adapt(c, pre, data);
        CHECK_FALSE(param(res.seg, "hopfield.memory") == param(pre, "hopfield.memory"));
        CHECK_FALSE(res.seg.memory()->frozen);
    }

    TEST_CASE("fake-source pool sizes follow the stage schedule") {
        const TrainConfig c = tiny_config();
        const auto data = tiny_data(c);
        const auto res = adapt(c, pretrain(c, data.source), data);
        REQUIRE(res.stages.size() == 3);
        const std::size_t expected[] = {0, 1, 3};
        for (int j = 0; j < 3; ++j) {
            CHECK(res.stages[j].stage == j + 1);
            CHECK(res.stages[j].target_images == 3);
            CHECK(res.stages[j].fake_source_images == expected[j]);
        }
    }

    TEST_CASE("disabling the curriculum collapses to one stage") {
        TrainConfig c = tiny_config();
        c.use_curriculum = false;
        const auto data = tiny_data(c);
        const auto res = adapt(c, pretrain(c, data.source), data);
        REQUIRE(res.stages.size() == 1);
        CHECK(res.stages[0].target_images == 9);
        CHECK(res.stages[0].fake_source_images == 0);
    }

    TEST_CASE("identity layer when the Hopfield memory is disabled") {
        TrainConfig c = tiny_config();
        c.use_hopfield = false;
        const auto data = tiny_data(c);
        const auto seg = pretrain(c, data.source);
        CHECK(seg.memory() == nullptr);
        CHECK_NOTHROW(adapt(c, seg, data));
    }

    TEST_CASE("metrics stream covers every iteration with the documented fields") {
        const TrainConfig c = tiny_config();
        const auto data = tiny_data(c);
        std::vector<MetricRecord> recs;
        RunState st = initial_state(c);
        RunOptions opt;
        opt.on_metric = [&](const MetricRecord& r) { recs.push_back(r); };
        CHECK(run(st, data, opt));
        CHECK(st.phase == Phase::done);
        REQUIRE(recs.size() == static_cast<std::size_t>(c.iters_pretrain + 3 * c.iters_per_stage));
        const auto j = to_json(recs.back(), false);
        for (const char* key : {"phase", "stage", "iter", "l_ce", "l_adv_seg", "l_adv_d", "lr"}) CHECK(j.contains(key));
        CHECK(j.at("phase") == "adapt");
        CHECK(j.at("stage") == 3);
        double prev = INFINITY;
        for (int i = 0; i < c.iters_pretrain; ++i) {
            CHECK(recs[i].lr <= prev);
            prev = recs[i].lr;
        }
        const auto mean = to_json(recs.back(), true);
        CHECK(mean.contains("l_ce_mean"));
    }

    TEST_CASE("reruns are bitwise identical and resume equals an uninterrupted run") {
        const TrainConfig c = tiny_config();
        const auto data = tiny_data(c);
        const auto dir = scratch("resume");

        auto full_run = [&](const std::filesystem::path& out) {
            RunState st = initial_state(c);
            std::string log;
            RunOptions opt;
            opt.on_metric = [&](const MetricRecord& r) { log += to_json(r, false).dump() + "\n"; };
            run(st, data, opt);
            save_checkpoint(st, out);
            return log;
        };
        const std::string log_a = full_run(dir / "a.ckpt");
        const std::string log_b = full_run(dir / "b.ckpt");
        CHECK(log_a == log_b);
        CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));

        // Interrupt at several points, including inside each phase and at a
        // stage boundary, then resume from the saved checkpoint.
        for (long stop : {5L, 12L, 14L, 16L, 21L}) {
            CAPTURE(stop);
            RunState st = initial_state(c);
            std::string log;
            RunOptions opt;
            opt.on_metric = [&](const MetricRecord& r) { log += to_json(r, false).dump() + "\n"; };
            opt.stop_after = stop;
            CHECK_FALSE(run(st, data, opt));
            save_checkpoint(st, dir / "mid.ckpt");

            RunState resumed = load_checkpoint(dir / "mid.ckpt");
            RunOptions rest;
            rest.on_metric = opt.on_metric;
            CHECK(run(resumed, data, rest));
            save_checkpoint(resumed, dir / "resumed.ckpt");
            CHECK(slurp(dir / "resumed.ckpt") == slurp(dir / "a.ckpt"));
            CHECK(log == log_a);
        }
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("checkpoint round trip preserves the state") {
        const TrainConfig c = tiny_config();
        const auto data = tiny_data(c);
        const auto dir = scratch("ckpt");
        RunState st = initial_state(c);
        RunOptions opt;
        opt.stop_after = 15;
        run(st, data, opt);
        save_checkpoint(st, dir / "x.ckpt");
        const RunState back = load_checkpoint(dir / "x.ckpt");
        CHECK(back.seg == st.seg);
        CHECK(back.disc == st.disc);
        CHECK(back.iter == st.iter);
        CHECK(back.stage == st.stage);
        CHECK(back.phase == st.phase);
        CHECK(back.rng.state() == st.rng.state());
        CHECK(back.fake_source.members.size() == st.fake_source.members.size());
        CHECK(back.checkpoint_id == st.checkpoint_id);
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("ablation suite emits one row per configuration and domain") {
        TrainConfig c = tiny_config();
        const auto data = tiny_data(c);
        std::vector<Sample> labeled;
        synth::SceneSpec spec;
        spec.height = spec.width = 16;
        spec.seed = 99;
        int i = 0;
        for (const Image& img : synth::gen_source(spec, 3))
            labeled.push_back(prepare("held" + std::to_string(i++), img, c.resolved_model(), true));
        const std::vector<EvalDomain> domains = {{"a", labeled}, {"b", labeled}};
        std::vector<std::string> seen;
        const auto rows = ablation_suite(c, data, domains, [&](const std::string& n) { seen.push_back(n); });
        CHECK(seen == ablation_configurations());
        REQUIRE(rows.size() == ablation_configurations().size() * 2);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            CHECK(rows[r].configuration == ablation_configurations()[r / 2]);
            CHECK(rows[r].domain == (r % 2 == 0 ? "a" : "b"));
            CHECK(rows[r].miou >= 0.0);
            CHECK(rows[r].miou <= 1.0);
        }
    }
}

TEST_SUITE("trainer-slow") {
    TEST_CASE("pretrained model beats the untrained baseline on held-out source scenes") {
        TrainConfig c;
        c.model.input_h = c.model.input_w = 16;
        c.model.memory_init_gain = 3.0;
        c.lr_seg = 2e-4;
        c.iters_pretrain = 300;
        c.seed = 3;
        synth::SceneSpec spec;
        const auto mc = c.resolved_model();
        std::vector<Sample> train, held;
        int i = 0;
        for (const Image& img : synth::gen_source(spec, 30)) train.push_back(prepare(std::to_string(i++), img, mc, true));
        spec.seed = 1000;
        for (const Image& img : synth::gen_source(spec, 10)) held.push_back(prepare(std::to_string(i++), img, mc, true));
        const double untrained = evaluate(initial_state(c).seg, held, 4).mean;
        const double trained = evaluate(pretrain(c, train), held, 4).mean;
        MESSAGE("untrained " << untrained << " pretrained " << trained);
        CHECK(trained > untrained);
    }
}
