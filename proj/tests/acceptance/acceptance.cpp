// Acceptance run: one PASS/FAIL line per criterion, with the measured value,
// the tolerance and the runtime against its budget.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "ahocda/curriculum.hpp"
#include "ahocda/hopfield.hpp"
#include "ahocda/model.hpp"
#include "ahocda/pipeline.hpp"
#include "ahocda/spectrum.hpp"
#include "ahocda/synthdata.hpp"
#include "ahocda/trainer.hpp"
#include "cli.hpp"
#include "../oracles.hpp"

using namespace ahocda;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool passed = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        passed = passed && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [violated]");
    }
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

// ---- 1: FFT oracle ---------------------------------------------------------------

Outcome fft_oracle() {
    Outcome out;
    Rng rng(derive_seed(1, "acceptance-fft"));
    double worst = 0.0, parseval = 0.0;
    for (int i = 0; i < 50; ++i) {
        int h = 4 + static_cast<int>(rng.below(30));
        int w = 4 + static_cast<int>(rng.below(44));
        if (i == 0) h = w = 4;
        if (i == 49) h = 33, w = 47;
        const Tensor t = oracle::random_tensor(h, w, 3, rng.next());
        const auto f = spectrum::fft2(t);
        for (int ch = 0; ch < 3; ++ch) {
            const auto ref = oracle::naive_dft_shifted(t, ch);
            double energy = 0.0, spec = 0.0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    worst = std::max(worst, std::abs(f.at(y, x, ch) - ref[static_cast<std::size_t>(y) * w + x]));
                    energy += t.at(y, x, ch) * t.at(y, x, ch);
                    spec += std::norm(f.at(y, x, ch));
                }
            parseval = std::max(parseval, std::abs(spec / (static_cast<double>(h) * w) - energy) / energy);
        }
    }
    out.require(worst <= 1e-9, "50 images 4x4..33x47, max abs error " + sci(worst) + " <= 1e-9");
    out.require(parseval <= 1e-9, "Parseval relative error " + sci(parseval) + " <= 1e-9");
    return out;
}

// ---- 2: crop and distance pipeline -----------------------------------------------

Outcome distance_pipeline() {
    Outcome out;
    bool identity = true;
    for (int n : {4, 7, 16, 33}) {
        const Tensor t = oracle::random_tensor(n, n + 3, 3, static_cast<std::uint64_t>(n));
        const auto f = spectrum::fft2(t);
        identity = identity && spectrum::amplitude_crop(f, 1.0).values == spectrum::amplitude(f);
    }
    out.require(identity, "beta = 1 crop equals the full amplitude");

    const auto crop = spectrum::amplitude_crop(spectrum::fft2(oracle::random_tensor(100, 100, 3, 5)), 0.09);
    out.require(crop.values.h == 9 && crop.values.w == 9,
                "beta = 0.09 on 100x100 gives " + std::to_string(crop.values.h) + "x" + std::to_string(crop.values.w));

    synth::SceneSpec spec;
    spec.seed = 2;
    const auto scenes = synth::gen_source(spec, 20);
    double self_max = 0.0;
    int increasing = 0;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const std::vector<Image> one = {scenes[i]};
        const auto profile = spectrum::source_profile(one, 0.09);
        self_max = std::max(self_max, spectrum::domain_distance(scenes[i], profile));
        double prev = -1.0;
        bool up = true;
        for (double sigma : {0.02, 0.05, 0.1}) {
            Image noisy = scenes[i];
            Rng rng(derive_seed(100 + i, "acceptance-noise"));
            for (double& v : noisy.pixels.data) v += sigma * rng.normal();
            const double d = spectrum::domain_distance(noisy, profile);
            up = up && d > prev;
            prev = d;
        }
        increasing += up;
    }
    out.require(self_max == 0.0, "delta(x, profile({x})) = " + sci(self_max));
    out.require(increasing == 20, "delta strictly increasing over sigma 0.02/0.05/0.1 on " + std::to_string(increasing) +
                                      "/20 scenes");
    return out;
}

// ---- 3: curriculum cardinalities ---------------------------------------------------

Outcome curriculum_cardinalities() {
    Outcome out;
    std::vector<curriculum::RankedImage> nine;
    for (int i = 0; i < 9; ++i) nine.push_back({"g" + std::to_string(i), 0.1 * i});
    const auto c9 = curriculum::build_curriculum(nine, 3);
    std::string sizes, pools;
    for (const auto& s : c9.stages) sizes += (sizes.empty() ? "" : "/") + std::to_string(s.size());
    for (int j = 1; j <= 3; ++j)
        pools += (pools.empty() ? "" : "/") + std::to_string(curriculum::fake_source_ids(c9, j).size());
    out.require(sizes == "3/3/3", "|G| = 9, K = 3 stages " + sizes);
    out.require(pools == "0/1/3", "fake-source sizes " + pools);

    Rng rng(derive_seed(3, "acceptance-curriculum"));
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(80));
        const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        std::vector<curriculum::RankedImage> d;
        for (int i = 0; i < n; ++i) d.push_back({"g" + std::to_string(i), std::floor(rng.uniform() * 20.0)});
        const auto c = curriculum::build_curriculum(d, k);
        // Partition: every staged id exactly once, stage sizes equal, order kept.
        std::set<std::string> seen;
        std::size_t pos = 0;
        bool ok = static_cast<int>(c.stages.size()) == k && c.dropped.size() == static_cast<std::size_t>(n % k);
        for (const auto& stage : c.stages) {
            ok = ok && stage.size() == static_cast<std::size_t>(n / k);
            for (const auto& id : stage) {
                ok = ok && seen.insert(id).second && pos < c.ordered.size() && c.ordered[pos].id == id;
                ++pos;
            }
        }
        for (std::size_t i = 1; i < c.ordered.size(); ++i) ok = ok && c.ordered[i - 1].delta <= c.ordered[i].delta;
        for (const auto& r : c.dropped) ok = ok && (c.ordered.empty() || r.delta >= c.ordered.back().delta);
        // Pools: nested prefixes growing with the stage, never above half.
        std::vector<std::string> prev;
        for (int j = 1; j <= k; ++j) {
            const auto pool = curriculum::fake_source_ids(c, j);
            ok = ok && pool.size() >= prev.size() && std::equal(prev.begin(), prev.end(), pool.begin());
            ok = ok && pool.size() == static_cast<std::size_t>(c.size()) * (j - 1) / (2 * k);
            prev = pool;
        }
        ok = ok && curriculum::fake_source_ids(c, 1).empty();
        violations += !ok;
    }
    out.require(violations == 0, "1000 random (|G|, K): " + std::to_string(violations) + " invariant violations");
    return out;
}

// ---- 4: Hopfield numerics ------------------------------------------------------------

Outcome hopfield_numerics() {
    Outcome out;
    hopfield::HopfieldMemory two;
    two.memory = Matrix::identity(2);
    two.w_q = two.w_k = two.w_v = Matrix::identity(2);
    const auto z = hopfield::retrieve(two, std::vector<double>{1.0, 0.0});
    const double err = std::max(std::abs(z[0] - 0.73106), std::abs(z[1] - 0.26894));
    out.require(err < 1e-5, "two-pattern retrieval error " + sci(err) + " < 1e-5");

    double sum_err = 0.0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto mem = hopfield::make_memory(1 + static_cast<int>(seed % 12), 8, 4, 0.25 + 0.1 * (seed % 40), seed, 3.0);
        const auto q = oracle::random_tensor(1, 1, 8, 1000 + seed, -5, 5).data;
        const auto sim = hopfield::similarity(mem, q);
        double s = 0.0;
        for (double v : sim) s += v;
        sum_err = std::max(sum_err, std::abs(s - 1.0));
    }
    out.require(sum_err <= 1e-12, "similarity sums to 1 within " + sci(sum_err));

    double worst = 0.0;
    int max_iters = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto mem = hopfield::make_memory(4, 16, 16, 8.0, 70 + seed);
        Rng signs(71 + seed);
        for (double& v : mem.memory.data) v = signs.uniform() < 0.5 ? -1.0 : 1.0;
        Rng noise(seed);
        for (int target = 0; target < 4; ++target) {
            std::vector<double> q(mem.memory.row(target).begin(), mem.memory.row(target).end());
            for (double& v : q) v += noise.uniform(-0.05, 0.05);
            const auto r = hopfield::mchn_iterate(mem, q, 5, 1e-9);
            max_iters = std::max(max_iters, r.iterations);
            for (int i = 0; i < 16; ++i) worst = std::max(worst, std::abs(r.state[i] - mem.memory(target, i)));
        }
    }
    out.require(worst < 0.01 && max_iters <= 5, "mchn recovery max error " + sci(worst) + " < 0.01 in " +
                                                    std::to_string(max_iters) + " <= 5 iterations (40 queries)");
    return out;
}

// ---- 5: gradients ----------------------------------------------------------------------

model::ModelConfig fd_config(bool hopfield) {
    model::ModelConfig c;
    c.input_h = 6;
    c.input_w = 6;
    c.encoder_channels = {4, 5, 6};
    c.memory_size = 4;
    c.projection_dim = 3;
    c.memory_init_gain = 3.0;
    c.disc_channels = {3, 3};
    c.use_hopfield = hopfield;
    return c;
}

Outcome gradients() {
    Outcome out;
    double worst = 0.0, frozen_abs = 0.0;
    int tensors = 0;
    int variant = 0;
    for (const auto& [hop, frozen] : {std::pair{true, false}, std::pair{true, true}, std::pair{false, false}}) {
        ++variant;
        auto seg = model::SegModel::create(fd_config(hop), 10 + variant);
        auto disc = model::Discriminator::create(fd_config(hop), 20 + variant);
        if (frozen) seg.freeze_memory();
        const Tensor xs = oracle::random_tensor(6, 6, 3, 30 + variant);
        const Tensor xt = oracle::random_tensor(6, 6, 3, 40 + variant);
        LabelMap ys(6, 6);
        Rng rng(50 + variant);
        for (int& v : ys.data) v = static_cast<int>(rng.below(4));
        model::JointGradients g;
        model::joint_loss(seg, disc, xs, ys, xt, 0.5, &g);
        auto loss = [&] { return model::joint_loss(seg, disc, xs, ys, xt, 0.5).total; };
        auto compare = [&](std::vector<model::ParamRef> params, const std::vector<Matrix>& grads) {
            for (std::size_t i = 0; i < params.size(); ++i) {
                if (!params[i].trainable) {
                    for (double v : grads[i].data) frozen_abs = std::max(frozen_abs, std::abs(v));
                    continue;
                }
                std::vector<double> fd(params[i].value->data.size());
                for (std::size_t e = 0; e < fd.size(); ++e)
                    fd[e] = oracle::central_difference(loss, &params[i].value->data[e], 1e-5);
                worst = std::max(worst, oracle::relative_error(grads[i].data, fd));
                ++tensors;
            }
        };
        compare(seg.params(), g.seg);
        compare(disc.params(), g.disc);
    }
    out.require(worst < 1e-5, std::to_string(tensors) + " trainable tensors, worst relative error " + sci(worst) +
                                  " < 1e-5 (6x6, free, frozen, identity layer)");
    out.require(frozen_abs == 0.0, "frozen M, W_k, W_v gradients exactly " + sci(frozen_abs));
    return out;
}

// ---- 6: loss identities ----------------------------------------------------------------

Outcome loss_identities() {
    Outcome out;
    Tensor half(1, 1, 2, 0.5);
    const double ce = model::ce_loss(half, LabelMap(1, 1, 1));
    out.require(std::abs(ce - std::numbers::ln2) <= 1e-12, "ce at p = 0.5 off ln 2 by " + sci(std::abs(ce - std::numbers::ln2)));

    bool exact = true;
    for (int h : {1, 2, 5, 6, 16, 32})
        for (int w : {1, 3, 6, 32}) {
            const Tensor d(h, w, 2, 0.5);
            const double n = static_cast<double>(h) * w;
            exact = exact && model::adv_loss_seg(d) == n * std::numbers::ln2;
            exact = exact && model::adv_loss_disc(d, d) == 2.0 * n * std::numbers::ln2;
        }
    out.require(exact, "D = 0.5: l_adv_seg == N ln 2 and l_adv_d == 2N ln 2 bitwise, 24 map sizes");

    Rng rng(6);
    bool consistent = true;
    for (int i = 0; i < 1000; ++i) {
        const double a = rng.uniform(0, 100), b = rng.uniform(0, 100), c = rng.uniform(0, 100), lam = rng.uniform(0, 1);
        const auto r = model::total_loss(a, b, c, lam);
        consistent = consistent && r.total == a + lam * (b + c);
    }
    auto seg = model::SegModel::create(fd_config(true), 1);
    auto disc = model::Discriminator::create(fd_config(true), 2);
    LabelMap ys(6, 6, 1);
    const auto j = model::joint_loss(seg, disc, oracle::random_tensor(6, 6, 3, 3), ys, oracle::random_tensor(6, 6, 3, 4), 0.001);
    consistent = consistent && j.total == j.l_ce + 0.001 * (j.l_adv_seg + j.l_adv_d);
    out.require(consistent, "total == l_ce + lambda (l_adv_seg + l_adv_d) bitwise");
    return out;
}

// ---- 7: ranking validity ------------------------------------------------------------------

Outcome ranking_validity() {
    Outcome out;
    const auto bench = synth::gen_benchmark(synth::BenchmarkPlan::defaults());
    std::vector<Image> src;
    for (const auto& r : bench.records)
        if (r.split == synth::Split::source) src.push_back(r.image);
    const auto profile = spectrum::source_profile(src, 0.09);
    std::map<std::pair<synth::Split, std::string>, std::pair<std::vector<double>, std::vector<double>>> xs;
    for (const auto& r : bench.records) {
        if (!r.shift) continue;
        auto& [d, m] = xs[{r.split, synth::to_string(r.shift->kind)}];
        d.push_back(spectrum::domain_distance(r.image, profile));
        m.push_back(r.shift->magnitude);
    }
    for (const auto& [key, v] : xs) {
        const double rho = oracle::spearman(v.first, v.second);
        if (key.first == synth::Split::compound) {
            out.require(rho >= 0.9, "compound " + key.second + " rho " + sci(rho) + " >= 0.9");
        } else {
            // The held-out open kind is never ranked; its value is reported only.
            out.detail += "; open " + key.second + " rho " + sci(rho) + " (not ranked, informational)";
        }
    }
    return out;
}

// ---- 8 and 9: ablations --------------------------------------------------------------------

struct AblationRun {
    std::vector<trainer::AblationRow> rows;
    double seconds = 0.0;
};

double miou_of(const std::vector<trainer::AblationRow>& rows, const std::string& cfg, const std::string& domain) {
    for (const auto& r : rows)
        if (r.configuration == cfg && r.domain == domain) return r.miou;
    return NAN;
}

AblationRun run_ablation(const trainer::TrainConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto bench = synth::gen_benchmark(synth::BenchmarkPlan::defaults());
    const auto splits = pipeline::from_benchmark(bench, true);
    const auto data = pipeline::training_data(config, splits);
    const auto k_stage = curriculum::build_curriculum(pipeline::rank(splits.source, splits.compound, config.beta), config.k);
    const auto domains = pipeline::eval_domains(config, splits, k_stage);
    AblationRun run;
    run.rows = trainer::ablation_suite(config, data, domains, [](const std::string& name) {
        std::fprintf(stderr, "  ablation: %s\n", name.c_str());
    });
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& r : run.rows)
        std::fprintf(stderr, "  %-12s %-13s %.4f\n", r.configuration.c_str(), r.domain.c_str(), r.miou);
    return run;
}

std::string table(const std::vector<trainer::AblationRow>& rows, const std::string& domain) {
    std::string s;
    for (const auto& name : trainer::ablation_configurations())
        s += (s.empty() ? "" : ", ") + name + " " + sci(miou_of(rows, name, domain));
    return s;
}

Outcome component_ablation(const AblationRun& run, const trainer::TrainConfig& config) {
    Outcome out;
    const long budget = config.iters_pretrain + static_cast<long>(config.k) * config.iters_per_stage;
    out.require(budget <= 2000, "iteration budget " + std::to_string(budget) + " <= 2000");
    const auto& r = run.rows;
    const double full = miou_of(r, "full", "far_compound");
    for (const char* other : {"source-only", "w/o-curr", "w/o-hopf"})
        out.require(full >= miou_of(r, other, "far_compound"), std::string("far: full >= ") + other);
    const double base = miou_of(r, "source-only", "far_compound");
    for (const char* adapted : {"w/o-curr", "w/o-hopf", "no-freeze"})
        out.require(miou_of(r, adapted, "far_compound") >= base, std::string("far: ") + adapted + " >= source-only");
    out.detail += "; far mIoU: " + table(r, "far_compound");
    return out;
}

Outcome freeze_ablation(const AblationRun& run) {
    Outcome out;
    const auto& r = run.rows;
    out.require(miou_of(r, "full", "far_compound") >= miou_of(r, "no-freeze", "far_compound"),
                "far: freeze " + sci(miou_of(r, "full", "far_compound")) + " >= no-freeze " +
                    sci(miou_of(r, "no-freeze", "far_compound")));
    for (const char* d : {"compound", "open"})
        out.detail += std::string("; ") + d + " (informational): freeze " + sci(miou_of(r, "full", d)) + ", no-freeze " +
                      sci(miou_of(r, "no-freeze", d));
    return out;
}

// ---- 10: determinism and resume -----------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism(trainer::TrainConfig config) {
    Outcome out;
    config.iters_pretrain = 60;
    config.iters_per_stage = 20;
    const auto bench = synth::gen_benchmark(synth::BenchmarkPlan::defaults());
    const auto data = pipeline::training_data(config, pipeline::from_benchmark(bench, false));
    const fs::path dir = fs::temp_directory_path() / "ahocda_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);

    auto full_run = [&](const std::string& name) {
        std::string metrics;
        trainer::RunOptions opt;
        opt.on_metric = [&](const trainer::MetricRecord& r) { metrics += trainer::to_json(r, false).dump() + "\n"; };
        opt.on_stage_end = [&](const trainer::RunState& st) {
            trainer::save_checkpoint(st, dir / (name + "_stage" + std::to_string(st.stage) + ".ckpt"));
        };
        trainer::RunState st = trainer::initial_state(config);
        trainer::run(st, data, opt);
        trainer::save_checkpoint(st, dir / (name + "_final.ckpt"));
        return metrics;
    };
    const std::string m1 = full_run("a");
    const std::string m2 = full_run("b");
    bool same = m1 == m2;
    for (const char* f : {"_stage1.ckpt", "_stage2.ckpt", "_stage3.ckpt", "_final.ckpt"})
        same = same && slurp(dir / (std::string("a") + f)) == slurp(dir / (std::string("b") + f));
    out.require(same, "two identical runs: bitwise-equal stage/final checkpoints and metrics");

    // Interrupt in pretraining, mid-stage and at a stage boundary, resuming
    // from a freshly loaded checkpoint each time.
    std::string metrics;
    trainer::RunOptions opt;
    opt.on_metric = [&](const trainer::MetricRecord& r) { metrics += trainer::to_json(r, false).dump() + "\n"; };
    trainer::RunState st = trainer::initial_state(config);
    int resumes = 0;
    for (long chunk : {37L, 30L, 13L}) {
        opt.stop_after = chunk;
        if (!trainer::run(st, data, opt)) {
            trainer::save_checkpoint(st, dir / "interrupted.ckpt");
            st = trainer::load_checkpoint(dir / "interrupted.ckpt");
            ++resumes;
        }
    }
    opt.stop_after.reset();
    trainer::run(st, data, opt);
    trainer::save_checkpoint(st, dir / "resumed_final.ckpt");
    const bool resumed = resumes == 3 && metrics == m1 && slurp(dir / "resumed_final.ckpt") == slurp(dir / "a_final.ckpt");
    out.require(resumed, "3 interrupt/resume cycles: final checkpoint and metrics bitwise equal to the uninterrupted run");
    fs::remove_all(dir);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app("Acceptance criteria");
    std::string preset;
    std::vector<int> only;
    app.add_option("--preset", preset, "Config file for the training criteria")->required();
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);

    trainer::TrainConfig config;
    try {
        config = cli::load_config(preset).train;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "cannot load preset: %s\n", e.what());
        return 2;
    }
    auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };

    AblationRun ablation;
    const std::vector<std::tuple<int, double, std::function<Outcome()>>> criteria = {
        {1, 5.0, fft_oracle},
        {2, 10.0, distance_pipeline},
        {3, 5.0, curriculum_cardinalities},
        {4, 5.0, hopfield_numerics},
        {5, 60.0, gradients},
        {6, 1.0, loss_identities},
        {7, 30.0, ranking_validity},
        {8, 600.0, [&] {
             ablation = run_ablation(config);
             return component_ablation(ablation, config);
         }},
        {9, 600.0, [&] {
             if (ablation.rows.empty()) ablation = run_ablation(config);
             return freeze_ablation(ablation);
         }},
        {10, 120.0, [&] { return determinism(config); }},
    };

    int failed = 0;
    for (const auto& [n, limit, fn] : criteria) {
        if (!wanted(n)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        // Criterion 9 shares the ablation run; its budget is the shared one.
        if (n == 9 && secs < ablation.seconds) secs = ablation.seconds;
        o.require(secs < limit, "runtime " + sci(secs) + " s < " + sci(limit) + " s");
        failed += !o.passed;
        std::printf("criterion %2d %s  %s\n", n, o.passed ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%s\n", failed == 0 ? "all selected criteria passed" : (std::to_string(failed) + " criteria failed").c_str());
    return failed == 0 ? 0 : 1;
}
