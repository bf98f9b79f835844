#include "ahocda/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ahocda/curriculum.hpp"
#include "ahocda/hopfield.hpp"
#include "ahocda/model.hpp"
#include "ahocda/rng.hpp"
#include "ahocda/spectrum.hpp"

namespace ahocda::selfcheck {

namespace {

using spectrum::cplx;

Tensor random_tensor(int h, int w, int c, Rng& rng) {
    Tensor t(h, w, c);
    for (double& v : t.data) v = rng.uniform();
    return t;
}

// Direct O(N^2) transform of one channel, rotated like fft2.
std::vector<cplx> direct_dft(const Tensor& t, int ch) {
    std::vector<cplx> out(static_cast<std::size_t>(t.h) * t.w);
    for (int u = 0; u < t.h; ++u)
        for (int v = 0; v < t.w; ++v) {
            cplx acc = 0.0;
            for (int y = 0; y < t.h; ++y)
                for (int x = 0; x < t.w; ++x) {
                    const double ang = -2.0 * std::numbers::pi *
                                       (static_cast<double>(u) * y / t.h + static_cast<double>(v) * x / t.w);
                    acc += t.at(y, x, ch) * cplx(std::cos(ang), std::sin(ang));
                }
            out[static_cast<std::size_t>((u + t.h / 2) % t.h) * t.w + (v + t.w / 2) % t.w] = acc;
        }
    return out;
}

CheckResult verdict(std::string name, double measured, double tolerance, std::string detail) {
    return {std::move(name), measured, tolerance, measured <= tolerance, std::move(detail)};
}

std::pair<CheckResult, CheckResult> spectrum_checks(Rng& rng) {
    const int sizes[][2] = {{4, 4}, {8, 8}, {5, 7}, {16, 12}, {9, 13}, {33, 47}};
    double dft_err = 0.0, parseval_err = 0.0;
    for (const auto& s : sizes) {
        const Tensor t = random_tensor(s[0], s[1], 3, rng);
        const auto f = spectrum::fft2(t);
        for (int ch = 0; ch < 3; ++ch) {
            const auto ref = direct_dft(t, ch);
            double energy = 0.0, spec_energy = 0.0;
            for (int y = 0; y < t.h; ++y)
                for (int x = 0; x < t.w; ++x) {
                    dft_err = std::max(dft_err, std::abs(f.at(y, x, ch) - ref[static_cast<std::size_t>(y) * t.w + x]));
                    energy += t.at(y, x, ch) * t.at(y, x, ch);
                    spec_energy += std::norm(f.at(y, x, ch));
                }
            const double n = static_cast<double>(t.h) * t.w;
            parseval_err = std::max(parseval_err, std::abs(spec_energy / n - energy) / energy);
        }
    }
    return {verdict("dft_oracle", dft_err, 1e-9, "max abs error vs direct DFT, sizes 4x4 to 33x47"),
            verdict("parseval", parseval_err, 1e-9, "relative energy error")};
}

CheckResult retrieval_check() {
    hopfield::HopfieldMemory mem;
    mem.memory = Matrix::identity(2);
    mem.w_q = Matrix::identity(2);
    mem.w_k = Matrix::identity(2);
    mem.w_v = Matrix::identity(2);
    const std::vector<double> z = {1.0, 0.0};
    const double e = std::exp(1.0);
    const double expected[2] = {e / (e + 1.0), 1.0 / (e + 1.0)};
    const auto sim = hopfield::similarity(mem, z);
    const auto out = hopfield::retrieve(mem, z);
    double err = std::abs(sim[0] + sim[1] - 1.0);
    for (int i = 0; i < 2; ++i) err = std::max({err, std::abs(sim[i] - expected[i]), std::abs(out[i] - expected[i])});
    return verdict("softmax_retrieval", err, 1e-12, "two-pattern similarity and retrieval vs e/(e+1), 1/(e+1)");
}

model::ModelConfig tiny_model() {
    model::ModelConfig c;
    c.input_h = 6;
    c.input_w = 6;
    c.encoder_channels = {4, 5, 6};
    c.memory_size = 4;
    c.projection_dim = 3;
    c.memory_init_gain = 3.0;
    c.disc_channels = {3, 3};
    return c;
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

// Worst per-tensor relative error between analytic and central-difference
// gradients; frozen tensors must have exactly zero analytic gradient.
std::pair<double, double> gradient_errors(bool frozen, bool inject, Rng& rng) {
    auto seg = model::SegModel::create(tiny_model(), rng.next());
    auto disc = model::Discriminator::create(tiny_model(), rng.next());
    if (frozen) seg.freeze_memory();
    const Tensor xs = random_tensor(6, 6, 3, rng);
    const Tensor xt = random_tensor(6, 6, 3, rng);
    LabelMap ys(6, 6);
    for (int& v : ys.data) v = static_cast<int>(rng.below(4));
    const double lambda = 0.5;

    model::JointGradients g;
    model::joint_loss(seg, disc, xs, ys, xt, lambda, &g);
    if (inject) {
        double& entry = g.seg.front().data.front();
        entry += 1e-3 + 1e-2 * std::abs(entry);
    }
    auto loss = [&] { return model::joint_loss(seg, disc, xs, ys, xt, lambda).total; };

    double worst = 0.0, frozen_abs = 0.0;
    auto compare = [&](std::vector<model::ParamRef> params, const std::vector<Matrix>& grads) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!params[i].trainable) {
                for (double v : grads[i].data) frozen_abs = std::max(frozen_abs, std::abs(v));
                continue;
            }
            auto& values = params[i].value->data;
            std::vector<double> fd(values.size());
            for (std::size_t e = 0; e < values.size(); ++e) {
                const double keep = values[e];
                const double h = 1e-5;
                values[e] = keep + h;
                const double up = loss();
                values[e] = keep - h;
                const double down = loss();
                values[e] = keep;
                fd[e] = (up - down) / (2.0 * h);
            }
            worst = std::max(worst, relative_error(grads[i].data, fd));
        }
    };
    compare(seg.params(), g.seg);
    compare(disc.params(), g.disc);
    return {worst, frozen_abs};
}

CheckResult cardinality_check(Rng& rng) {
    long violations = 0;
    {
        std::vector<curriculum::RankedImage> d;
        for (int i = 0; i < 9; ++i) d.push_back({"g" + std::to_string(i), static_cast<double>(i)});
        const auto c = curriculum::build_curriculum(d, 3);
        for (const auto& s : c.stages) violations += s.size() != 3;
        const std::size_t expected[] = {0, 1, 3};
        for (int j = 1; j <= 3; ++j) violations += curriculum::fake_source_count(9, 3, j) != expected[j - 1];
    }
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(60));
        const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        std::vector<curriculum::RankedImage> d;
        for (int i = 0; i < n; ++i) d.push_back({"g" + std::to_string(i), rng.uniform()});
        const auto c = curriculum::build_curriculum(d, k);
        const std::size_t per = static_cast<std::size_t>(n / k);
        std::size_t staged = 0;
        for (const auto& s : c.stages) {
            violations += s.size() != per;
            staged += s.size();
        }
        violations += staged + c.dropped.size() != static_cast<std::size_t>(n);
        violations += c.dropped.size() != static_cast<std::size_t>(n % k);
        std::size_t prev = 0;
        for (int j = 1; j <= k; ++j) {
            const std::size_t pool = curriculum::fake_source_count(c.size(), k, j);
            violations += pool < prev || pool > c.size() / 2;
            prev = pool;
        }
        violations += curriculum::fake_source_count(c.size(), k, 1) != 0;
    }
    return verdict("split_cardinality", static_cast<double>(violations), 0.0,
                   "invariant violations: |G|=9, K=3 stages 3/3/3, pools 0/1/3, 1000 random (|G|, K)");
}

}  // namespace

std::vector<CheckResult> run(const Options& options) {
    Rng rng(derive_seed(options.seed, "selfcheck"));
    std::vector<CheckResult> out;
    auto [dft, parseval] = spectrum_checks(rng);
    out.push_back(std::move(dft));
    out.push_back(std::move(parseval));
    out.push_back(retrieval_check());

    const double free_err = gradient_errors(false, options.inject_gradient_fault, rng).first;
    out.push_back(verdict("gradient_check", free_err, 1e-5,
                          options.inject_gradient_fault ? "per-tensor relative error vs central differences (fault injected)"
                                                        : "per-tensor relative error vs central differences"));
    const auto [frozen_err, frozen_abs] = gradient_errors(true, false, rng);
    out.push_back(verdict("gradient_check_frozen", frozen_err, 1e-5, "trainable tensors with frozen memory"));
    out.push_back(verdict("frozen_gradients_zero", frozen_abs, 0.0, "max |gradient| over M, W_k, W_v"));
    out.push_back(cardinality_check(rng));
    return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
    return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
}

}  // namespace ahocda::selfcheck
