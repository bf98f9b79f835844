#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <set>

#include "ahocda/error.hpp"
#include "ahocda/image_io.hpp"
#include "ahocda/spectrum.hpp"
#include "ahocda/synthdata.hpp"
#include "oracles.hpp"

using namespace ahocda;
using namespace ahocda::synth;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("ahocda_synth_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

std::map<ShiftKind, double> spearman_per_kind(const Benchmark& b) {
    std::vector<Image> src;
    for (const auto& r : b.records)
        if (r.split == Split::source) src.push_back(r.image);
    const auto profile = spectrum::source_profile(src, 0.09);
    std::map<ShiftKind, std::pair<std::vector<double>, std::vector<double>>> xs;
    for (const auto& r : b.records) {
        if (r.split != Split::compound) continue;
        xs[r.shift->kind].first.push_back(spectrum::domain_distance(r.image, profile));
        xs[r.shift->kind].second.push_back(r.shift->magnitude);
    }
    std::map<ShiftKind, double> out;
    for (const auto& [k, v] : xs) out[k] = oracle::spearman(v.first, v.second);
    return out;
}

}  // namespace

TEST_SUITE("synthdata") {
    TEST_CASE("generation is deterministic") {
        SceneSpec spec;
        spec.seed = 42;
        const auto a = gen_source(spec, 1);
        const auto b = gen_source(spec, 1);
        REQUIRE(a.size() == 1);
        CHECK(a[0].pixels == b[0].pixels);
        CHECK(*a[0].labels == *b[0].labels);
        spec.seed = 43;
        CHECK_FALSE(gen_source(spec, 1)[0].pixels == a[0].pixels);
    }

    TEST_CASE("every pixel gets one valid class and values stay in [0, 1]") {
        SceneSpec spec;
        for (const Image& img : gen_source(spec, 10)) {
            validate(img, spec.num_classes);
            for (double v : img.pixels.data) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    }

    TEST_CASE("zero objects leaves only sky and ground") {
        SceneSpec spec;
        spec.min_objects = spec.max_objects = 0;
        for (const Image& img : gen_source(spec, 5)) {
            for (int v : img.labels->data) CHECK((v == kBackground || v == kGround));
        }
    }

    TEST_CASE("disc labels match an independent rasterization") {
        SceneSpec spec;
        spec.height = 40;
        spec.width = 48;
        SceneLayout layout;
        layout.horizon = 15;
        SceneObject disc;
        disc.kind = ObjectKind::disc;
        disc.cx = 20.3;
        disc.cy = 22.7;
        disc.r = 7.4;
        disc.color[0] = 0.9;
        layout.objects.push_back(disc);
        const Image img = render_scene(spec, layout);
        int count = 0;
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                const double dx = x + 0.5 - 20.3, dy = y + 0.5 - 22.7;
                const bool inside = dx * dx + dy * dy <= 7.4 * 7.4;
                CHECK((img.labels->at(y, x) == kDisc) == inside);
                count += inside;
            }
        }
        // Area is close to pi r^2.
        CHECK(std::abs(count - std::numbers::pi * 7.4 * 7.4) < 2 * std::numbers::pi * 7.4);
    }

    TEST_CASE("zero magnitude is the identity for every kind") {
        const Image img = gen_source(SceneSpec{}, 1)[0];
        for (auto kind : {ShiftKind::brightness, ShiftKind::color_cast, ShiftKind::gaussian_noise, ShiftKind::blur,
                          ShiftKind::gamma}) {
            const Image out = apply_shift(img, {kind, 0.0, 5});
            CHECK(out.pixels == img.pixels);
            CHECK(*out.labels == *img.labels);
        }
    }

    TEST_CASE("labels are invariant and pixels stay in [0, 1] under every shift") {
        const Image img = gen_source(SceneSpec{}, 1)[0];
        for (auto kind : {ShiftKind::brightness, ShiftKind::color_cast, ShiftKind::gaussian_noise, ShiftKind::blur,
                          ShiftKind::gamma}) {
            for (double m : {0.1, 0.7, 2.0}) {
                const Image out = apply_shift(img, {kind, m, 9});
                CHECK(*out.labels == *img.labels);
                for (double v : out.pixels.data) CHECK((v >= 0.0 && v <= 1.0));
            }
        }
    }

    TEST_CASE("brightness definition") {
        const Image img = gen_source(SceneSpec{}, 1)[0];
        const Image out = apply_shift(img, {ShiftKind::brightness, 0.4, 0});
        for (std::size_t i = 0; i < img.pixels.data.size(); ++i) {
            CHECK(out.pixels.data[i] == std::clamp(img.pixels.data[i] * 1.4, 0.0, 1.0));
        }
    }

    TEST_CASE("gaussian noise matches a reference noise stream") {
        const Image img = gen_source(SceneSpec{}, 1)[0];
        const Image out = apply_shift(img, {ShiftKind::gaussian_noise, 0.1, 1234});
        Rng rng(1234);
        for (std::size_t i = 0; i < img.pixels.data.size(); ++i) {
            const double u1 = std::max(rng.uniform(), 1e-300), u2 = rng.uniform();
            const double n = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
            CHECK(out.pixels.data[i] == std::clamp(img.pixels.data[i] + 0.1 * n, 0.0, 1.0));
        }
    }

    TEST_CASE("shift kinds parse and reject unknown names") {
        for (auto kind : {ShiftKind::brightness, ShiftKind::color_cast, ShiftKind::gaussian_noise, ShiftKind::blur,
                          ShiftKind::gamma}) {
            CHECK(parse_shift_kind(to_string(kind)) == kind);
        }
        CHECK_THROWS_AS(parse_shift_kind("fog"), ParameterError);
        const Image img = gen_source(SceneSpec{}, 1)[0];
        CHECK_THROWS_AS(apply_shift(img, {ShiftKind::gamma, -0.5, 0}), ParameterError);
    }

    TEST_CASE("default plan counts") {
        const auto b = gen_benchmark(BenchmarkPlan::defaults());
        std::map<Split, int> counts;
        for (const auto& r : b.records) ++counts[r.split];
        CHECK(counts[Split::source] == 40);
        CHECK(counts[Split::compound] == 36);
        CHECK(counts[Split::open] == 12);
    }

    TEST_CASE("open kinds are held out of the compound set") {
        const auto b = gen_benchmark(BenchmarkPlan::defaults());
        std::set<ShiftKind> compound, open;
        for (const auto& r : b.records) {
            if (r.split == Split::compound) compound.insert(r.shift->kind);
            if (r.split == Split::open) open.insert(r.shift->kind);
        }
        for (auto k : open) CHECK(compound.count(k) == 0);

        BenchmarkPlan bad = BenchmarkPlan::defaults();
        bad.open = {{ShiftKind::gamma, 0.1, 0.5, 3}};
        CHECK_THROWS_AS(gen_benchmark(bad), ParameterError);
        bad = BenchmarkPlan::defaults();
        bad.compound.clear();
        CHECK_THROWS_AS(gen_benchmark(bad), ParameterError);
    }

    TEST_CASE("amplitude distance ranks magnitudes within each compound kind (n = 30)") {
        BenchmarkPlan plan = BenchmarkPlan::defaults();
        for (auto& s : plan.compound) s.count = 30;
        for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
            plan.scene.seed = seed;
            for (const auto& [kind, rho] : spearman_per_kind(gen_benchmark(plan))) {
                CAPTURE(to_string(kind));
                CAPTURE(seed);
                CHECK(rho >= 0.9);
            }
        }
    }

    TEST_CASE("written benchmark round trips through the manifest") {
        BenchmarkPlan plan = BenchmarkPlan::defaults();
        plan.n_source = 3;
        for (auto& s : plan.compound) s.count = 2;
        plan.open[0].count = 2;
        const auto b = gen_benchmark(plan);
        const auto dir = scratch_dir("manifest");
        write_benchmark(b, dir);
        const Manifest m = read_manifest(dir);
        CHECK(m.entries.size() == b.records.size());
        CHECK(m.split(Split::source).size() == 3);
        CHECK(m.split(Split::compound).size() == 6);
        CHECK(m.split(Split::open).size() == 2);

        const auto unlabeled = load_split(m, Split::compound, false);
        for (const auto& [id, img] : unlabeled) CHECK_FALSE(img.labels.has_value());
        const auto labeled = load_split(m, Split::source, true);
        REQUIRE(labeled.size() == 3);
        CHECK(*labeled[0].second.labels == *b.records[0].image.labels);
        // PNG stores 8-bit values.
        for (std::size_t i = 0; i < labeled[0].second.pixels.data.size(); ++i) {
            CHECK(std::abs(labeled[0].second.pixels.data[i] - b.records[0].image.pixels.data[i]) <= 0.5 / 255 + 1e-12);
        }

        const auto side = read_sidecar(dir);
        CHECK(side.size() == 8);
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("unwritable output directory leaves no manifest") {
        const auto dir = scratch_dir("blocked");
        std::filesystem::create_directories(dir);
        // A regular file where the images directory should go.
        io::write_png(dir / "images", Tensor(2, 2, 3));
        BenchmarkPlan plan = BenchmarkPlan::defaults();
        plan.n_source = 1;
        CHECK_THROWS_AS(write_benchmark(gen_benchmark(plan), dir), IoError);
        CHECK_FALSE(std::filesystem::exists(dir / "manifest.json"));
        std::filesystem::remove_all(dir);
    }
}
