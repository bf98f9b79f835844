#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ahocda/image.hpp"

namespace ahocda::synth {

enum Class : int { kBackground = 0, kGround = 1, kBlock = 2, kDisc = 3 };

struct SceneSpec {
    int height = 64;
    int width = 64;
    int num_classes = 4;
    std::uint64_t seed = 0;
    int min_objects = 2;
    int max_objects = 5;
    /// Object extent range in pixels (block side / disc diameter).
    int min_size = 8;
    int max_size = 20;
    /// Standard deviation of the per-pixel texture added to every surface.
    double texture = 0.02;
};

enum class ObjectKind { block, disc };

struct SceneObject {
    ObjectKind kind = ObjectKind::block;
    /// Block: [x0, x1) x [y0, y1). Disc: center (cx, cy), radius r, covering
    /// pixels whose centers satisfy (x+0.5-cx)^2 + (y+0.5-cy)^2 <= r^2.
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double cx = 0, cy = 0, r = 0;
    double color[3] = {0, 0, 0};
};

/// Everything needed to render one scene deterministically.
struct SceneLayout {
    int horizon = 0;  // rows [0, horizon) are sky, the rest ground
    double sky[3] = {0, 0, 0};
    double ground[3] = {0, 0, 0};
    std::vector<SceneObject> objects;
    std::uint64_t texture_seed = 0;
};

SceneLayout sample_layout(const SceneSpec& spec, std::uint64_t scene_seed);
/// Draws sky, ground, then objects in order; later objects cover earlier ones.
Image render_scene(const SceneSpec& spec, const SceneLayout& layout);

/// n labeled scenes. Scene i uses a seed derived from (spec.seed, "source", i).
std::vector<Image> gen_source(const SceneSpec& spec, int n);

enum class ShiftKind { brightness, color_cast, gaussian_noise, blur, gamma };

std::string to_string(ShiftKind kind);
/// Throws ParameterError for unknown names.
ShiftKind parse_shift_kind(const std::string& name);

struct DomainShift {
    ShiftKind kind = ShiftKind::brightness;
    double magnitude = 0.0;
    std::uint64_t seed = 0;
};

/// Appearance-only transform; labels pass through untouched and magnitude 0
/// returns the input unchanged.
///   brightness      clip(p * (1 + m))
///   color_cast      clip(p + m * (1, 0.5, -1)) per RGB channel
///   gaussian_noise  clip(p + m * n), n ~ N(0, 1) from Rng(seed) in buffer order
///   blur            separable Gaussian, sigma = m pixels, edge-clamped
///   gamma           p^(1 + m)
Image apply_shift(const Image& image, const DomainShift& shift);

/// magnitudes: `count` points evenly spaced over [min_magnitude, max_magnitude].
struct ShiftPlan {
    ShiftKind kind = ShiftKind::brightness;
    double min_magnitude = 0.0;
    double max_magnitude = 0.0;
    int count = 0;

    std::vector<double> magnitudes() const;
};

struct BenchmarkPlan {
    SceneSpec scene;
    int n_source = 40;
    std::vector<ShiftPlan> compound;
    std::vector<ShiftPlan> open;

    /// 40 source; brightness, color cast and gamma x 12 magnitudes as the
    /// compound domain; 12 held-out gaussian-noise images as the open domain.
    static BenchmarkPlan defaults();
};

void to_json(nlohmann::json& j, const BenchmarkPlan& p);
void from_json(const nlohmann::json& j, BenchmarkPlan& p);

enum class Split { source, compound, open };
std::string to_string(Split split);
Split parse_split(const std::string& name);

struct Record {
    std::string id;
    Split split = Split::source;
    Image image;  // labels always rendered; loaders decide who may see them
    std::optional<DomainShift> shift;
};

struct Benchmark {
    BenchmarkPlan plan;
    std::vector<Record> records;
};

/// Throws ParameterError when the source count or a plan is empty, or when an
/// open kind also appears in the compound plan.
Benchmark gen_benchmark(const BenchmarkPlan& plan);

/// Writes images/<id>.png, labels/<id>.png, manifest.json and the hidden
/// shifts.json sidecar. The manifest is written last so a failed run never
/// leaves one behind.
void write_benchmark(const Benchmark& bench, const std::filesystem::path& dir);

struct ManifestEntry {
    std::string id;
    Split split = Split::source;
    std::filesystem::path image;
    std::filesystem::path label;
};

struct Manifest {
    std::filesystem::path root;
    BenchmarkPlan plan;
    std::vector<ManifestEntry> entries;

    std::vector<ManifestEntry> split(Split s) const;
};

Manifest read_manifest(const std::filesystem::path& dir);

/// Loads one split. Labels are attached only when with_labels is set.
std::vector<std::pair<std::string, Image>> load_split(const Manifest& m, Split s, bool with_labels);

/// Reads the sidecar: id -> shift.
std::vector<std::pair<std::string, DomainShift>> read_sidecar(const std::filesystem::path& dir);

}  // namespace ahocda::synth
