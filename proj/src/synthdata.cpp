#include "ahocda/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "ahocda/blob.hpp"
#include "ahocda/error.hpp"
#include "ahocda/image_io.hpp"
#include "ahocda/rng.hpp"

namespace ahocda::synth {
namespace {

constexpr double kSkyColor[3] = {0.45, 0.62, 0.85};
constexpr double kGroundColor[3] = {0.42, 0.36, 0.22};
constexpr double kBlockColor[3] = {0.78, 0.22, 0.20};
constexpr double kDiscColor[3] = {0.92, 0.82, 0.22};
constexpr double kCastDirection[3] = {1.0, 0.5, -1.0};

void jitter(const double (&base)[3], double amount, Rng& rng, double (&out)[3]) {
    for (int ch = 0; ch < 3; ++ch) out[ch] = std::clamp(base[ch] + rng.uniform(-amount, amount), 0.0, 1.0);
}

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

Tensor gaussian_blur(const Tensor& src, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    Tensor tmp(src.h, src.w, src.c), out(src.h, src.w, src.c);
    for (int y = 0; y < src.h; ++y) {
        for (int x = 0; x < src.w; ++x) {
            for (int ch = 0; ch < src.c; ++ch) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    acc += kernel[i + radius] * src.at(y, std::clamp(x + i, 0, src.w - 1), ch);
                }
                tmp.at(y, x, ch) = acc;
            }
        }
    }
    for (int y = 0; y < src.h; ++y) {
        for (int x = 0; x < src.w; ++x) {
            for (int ch = 0; ch < src.c; ++ch) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    acc += kernel[i + radius] * tmp.at(std::clamp(y + i, 0, src.h - 1), x, ch);
                }
                out.at(y, x, ch) = clip01(acc);
            }
        }
    }
    return out;
}

std::string make_id(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%04d", prefix, i);
    return buf;
}

}  // namespace

SceneLayout sample_layout(const SceneSpec& spec, std::uint64_t scene_seed) {
    if (spec.min_objects < 0 || spec.max_objects < spec.min_objects) throw ParameterError("invalid object count range");
    if (spec.min_size < 2 || spec.max_size < spec.min_size) throw ParameterError("invalid object size range");
    Rng rng(scene_seed);
    SceneLayout l;
    l.horizon = rng.uniform_int(static_cast<int>(0.35 * spec.height), static_cast<int>(0.5 * spec.height));
    jitter(kSkyColor, 0.05, rng, l.sky);
    jitter(kGroundColor, 0.05, rng, l.ground);
    const int n = rng.uniform_int(spec.min_objects, spec.max_objects);
    for (int i = 0; i < n; ++i) {
        SceneObject o;
        const int size = std::min(rng.uniform_int(spec.min_size, spec.max_size), std::min(spec.width, spec.height));
        if (rng.uniform() < 0.5) {
            o.kind = ObjectKind::block;
            const int bh = std::min(rng.uniform_int(spec.min_size, spec.max_size), spec.height);
            o.x0 = rng.uniform_int(0, spec.width - size);
            o.x1 = o.x0 + size;
            const int top_min = std::clamp(l.horizon - bh / 2, 0, spec.height - bh);
            o.y0 = rng.uniform_int(top_min, spec.height - bh);
            o.y1 = o.y0 + bh;
            jitter(kBlockColor, 0.06, rng, o.color);
        } else {
            o.kind = ObjectKind::disc;
            o.r = size / 2.0;
            o.cx = rng.uniform(o.r, spec.width - o.r);
            o.cy = rng.uniform(o.r, spec.height - o.r);
            jitter(kDiscColor, 0.06, rng, o.color);
        }
        l.objects.push_back(o);
    }
    l.texture_seed = rng.next();
    return l;
}

Image render_scene(const SceneSpec& spec, const SceneLayout& layout) {
    Image img;
    img.pixels = Tensor(spec.height, spec.width, 3);
    img.labels = LabelMap(spec.height, spec.width);
    LabelMap& lab = *img.labels;
    for (int y = 0; y < spec.height; ++y) {
        const bool sky = y < layout.horizon;
        for (int x = 0; x < spec.width; ++x) {
            for (int ch = 0; ch < 3; ++ch) img.pixels.at(y, x, ch) = sky ? layout.sky[ch] : layout.ground[ch];
            lab.at(y, x) = sky ? kBackground : kGround;
        }
    }
    for (const SceneObject& o : layout.objects) {
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                bool inside;
                if (o.kind == ObjectKind::block) {
                    inside = x >= o.x0 && x < o.x1 && y >= o.y0 && y < o.y1;
                } else {
                    const double dx = x + 0.5 - o.cx, dy = y + 0.5 - o.cy;
                    inside = dx * dx + dy * dy <= o.r * o.r;
                }
                if (!inside) continue;
                for (int ch = 0; ch < 3; ++ch) img.pixels.at(y, x, ch) = o.color[ch];
                lab.at(y, x) = o.kind == ObjectKind::block ? kBlock : kDisc;
            }
        }
    }
    if (spec.texture > 0.0) {
        Rng rng(layout.texture_seed);
        for (double& v : img.pixels.data) v = clip01(v + spec.texture * rng.normal());
    }
    return img;
}

std::vector<Image> gen_source(const SceneSpec& spec, int n) {
    if (n < 1) throw ParameterError("gen_source needs n >= 1");
    std::vector<Image> out;
    out.reserve(n);
    const std::uint64_t base = derive_seed(spec.seed, "source");
    for (int i = 0; i < n; ++i) {
        Image img = render_scene(spec, sample_layout(spec, derive_seed(base, static_cast<std::uint64_t>(i))));
        img.domain_tag = "source";
        out.push_back(std::move(img));
    }
    return out;
}

std::string to_string(ShiftKind kind) {
    switch (kind) {
        case ShiftKind::brightness: return "brightness";
        case ShiftKind::color_cast: return "color_cast";
        case ShiftKind::gaussian_noise: return "gaussian_noise";
        case ShiftKind::blur: return "blur";
        case ShiftKind::gamma: return "gamma";
    }
    return "unknown";
}

ShiftKind parse_shift_kind(const std::string& name) {
    for (ShiftKind k : {ShiftKind::brightness, ShiftKind::color_cast, ShiftKind::gaussian_noise, ShiftKind::blur,
                        ShiftKind::gamma}) {
        if (to_string(k) == name) return k;
    }
    throw ParameterError("unknown shift kind '" + name + "'");
}

Image apply_shift(const Image& image, const DomainShift& shift) {
    if (!(shift.magnitude >= 0.0) || !std::isfinite(shift.magnitude)) {
        throw ParameterError("shift magnitude must be finite and non-negative");
    }
    Image out = image;
    if (shift.magnitude == 0.0) return out;
    const double m = shift.magnitude;
    Tensor& p = out.pixels;
    switch (shift.kind) {
        case ShiftKind::brightness:
            for (double& v : p.data) v = clip01(v * (1.0 + m));
            break;
        case ShiftKind::color_cast:
            for (std::size_t i = 0; i < p.data.size(); ++i) {
                const int ch = static_cast<int>(i % p.c);
                p.data[i] = clip01(p.data[i] + m * kCastDirection[ch % 3]);
            }
            break;
        case ShiftKind::gaussian_noise: {
            Rng rng(shift.seed);
            for (double& v : p.data) v = clip01(v + m * rng.normal());
            break;
        }
        case ShiftKind::blur:
            p = gaussian_blur(image.pixels, m);
            break;
        case ShiftKind::gamma:
            for (double& v : p.data) v = std::pow(v, 1.0 + m);
            break;
    }
    return out;
}

std::vector<double> ShiftPlan::magnitudes() const {
    std::vector<double> out;
    for (int i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        out.push_back(min_magnitude + t * (max_magnitude - min_magnitude));
    }
    return out;
}

BenchmarkPlan BenchmarkPlan::defaults() {
    BenchmarkPlan p;
    p.n_source = 40;
    p.compound = {{ShiftKind::brightness, 0.08, 1.0, 12},
                  {ShiftKind::color_cast, 0.04, 0.5, 12},
                  {ShiftKind::gamma, 0.2, 2.5, 12}};
    p.open = {{ShiftKind::gaussian_noise, 0.03, 0.3, 12}};
    return p;
}

namespace {

nlohmann::json plans_to_json(const std::vector<ShiftPlan>& plans) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& s : plans) {
        a.push_back({{"kind", to_string(s.kind)}, {"min", s.min_magnitude}, {"max", s.max_magnitude}, {"count", s.count}});
    }
    return a;
}

std::vector<ShiftPlan> plans_from_json(const nlohmann::json& a) {
    std::vector<ShiftPlan> out;
    for (const auto& s : a) out.push_back({parse_shift_kind(s.at("kind")), s.at("min"), s.at("max"), s.at("count")});
    return out;
}

}  // namespace

void to_json(nlohmann::json& j, const BenchmarkPlan& p) {
    const SceneSpec& s = p.scene;
    j = {{"scene",
          {{"height", s.height},
           {"width", s.width},
           {"num_classes", s.num_classes},
           {"seed", s.seed},
           {"min_objects", s.min_objects},
           {"max_objects", s.max_objects},
           {"min_size", s.min_size},
           {"max_size", s.max_size},
           {"texture", s.texture}}},
         {"n_source", p.n_source},
         {"compound", plans_to_json(p.compound)},
         {"open", plans_to_json(p.open)}};
}

void from_json(const nlohmann::json& j, BenchmarkPlan& p) {
    const auto& s = j.at("scene");
    s.at("height").get_to(p.scene.height);
    s.at("width").get_to(p.scene.width);
    s.at("num_classes").get_to(p.scene.num_classes);
    s.at("seed").get_to(p.scene.seed);
    s.at("min_objects").get_to(p.scene.min_objects);
    s.at("max_objects").get_to(p.scene.max_objects);
    s.at("min_size").get_to(p.scene.min_size);
    s.at("max_size").get_to(p.scene.max_size);
    s.at("texture").get_to(p.scene.texture);
    j.at("n_source").get_to(p.n_source);
    p.compound = plans_from_json(j.at("compound"));
    p.open = plans_from_json(j.at("open"));
}

std::string to_string(Split split) {
    switch (split) {
        case Split::source: return "source";
        case Split::compound: return "compound";
        case Split::open: return "open";
    }
    return "unknown";
}

Split parse_split(const std::string& name) {
    if (name == "source") return Split::source;
    if (name == "compound") return Split::compound;
    if (name == "open") return Split::open;
    throw ParameterError("unknown split '" + name + "'");
}

Benchmark gen_benchmark(const BenchmarkPlan& plan) {
    if (plan.n_source < 1) throw ParameterError("benchmark needs at least one source image");
    if (plan.compound.empty()) throw ParameterError("compound plan is empty");
    if (plan.open.empty()) throw ParameterError("open plan is empty");
    std::set<ShiftKind> compound_kinds;
    for (const auto& s : plan.compound) compound_kinds.insert(s.kind);
    for (const auto& s : plan.open) {
        if (compound_kinds.count(s.kind)) {
            throw ParameterError("open-domain kind " + to_string(s.kind) + " must be held out of the compound plan");
        }
    }

    Benchmark b;
    b.plan = plan;
    int i = 0;
    for (Image& img : gen_source(plan.scene, plan.n_source)) {
        b.records.push_back({make_id("src", i++), Split::source, std::move(img), std::nullopt});
    }

    auto add_shifted = [&](const std::vector<ShiftPlan>& plans, Split split, const char* prefix, const char* stream) {
        const std::uint64_t base = derive_seed(plan.scene.seed, stream);
        int idx = 0;
        for (const ShiftPlan& sp : plans) {
            for (double mag : sp.magnitudes()) {
                const std::uint64_t scene_seed = derive_seed(base, static_cast<std::uint64_t>(idx));
                Image clean = render_scene(plan.scene, sample_layout(plan.scene, scene_seed));
                DomainShift shift{sp.kind, mag, derive_seed(scene_seed, "shift")};
                Image img = apply_shift(clean, shift);
                img.domain_tag = to_string(split);
                b.records.push_back({make_id(prefix, idx), split, std::move(img), shift});
                ++idx;
            }
        }
    };
    add_shifted(plan.compound, Split::compound, "cmp", "compound");
    add_shifted(plan.open, Split::open, "open", "open");
    return b;
}

void write_benchmark(const Benchmark& bench, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "images", ec);
    if (ec) throw IoError("cannot create " + (dir / "images").string() + ": " + ec.message());
    std::filesystem::create_directories(dir / "labels", ec);
    if (ec) throw IoError("cannot create " + (dir / "labels").string() + ": " + ec.message());

    nlohmann::json entries = nlohmann::json::array();
    nlohmann::json sidecar = nlohmann::json::object();
    for (const Record& r : bench.records) {
        const std::string img_rel = "images/" + r.id + ".png";
        const std::string lab_rel = "labels/" + r.id + ".png";
        io::write_png(dir / img_rel, r.image.pixels);
        io::write_label_png(dir / lab_rel, *r.image.labels);
        entries.push_back({{"id", r.id}, {"split", to_string(r.split)}, {"image", img_rel}, {"label", lab_rel}});
        if (r.shift) {
            sidecar[r.id] = {{"kind", to_string(r.shift->kind)}, {"magnitude", r.shift->magnitude}, {"seed", r.shift->seed}};
        }
    }
    blob::write_text(dir / "shifts.json", sidecar.dump(2) + "\n");
    nlohmann::json manifest = {{"format", "ahocda-manifest/1"}, {"plan", bench.plan}, {"images", entries}};
    blob::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<ManifestEntry> Manifest::split(Split s) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries) {
        if (e.split == s) out.push_back(e);
    }
    return out;
}

Manifest read_manifest(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.json";
    std::ifstream in(path);
    if (!in) throw IoError("missing manifest " + path.string());
    Manifest m;
    m.root = dir;
    try {
        nlohmann::json j = nlohmann::json::parse(in);
        m.plan = j.at("plan").get<BenchmarkPlan>();
        for (const auto& e : j.at("images")) {
            m.entries.push_back({e.at("id"), parse_split(e.at("split")), e.at("image").get<std::string>(),
                                 e.at("label").get<std::string>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest " + path.string() + ": " + e.what());
    }
    return m;
}

std::vector<std::pair<std::string, Image>> load_split(const Manifest& m, Split s, bool with_labels) {
    std::vector<std::pair<std::string, Image>> out;
    for (const auto& e : m.split(s)) {
        Image img;
        img.pixels = io::read_image(m.root / e.image);
        if (with_labels) img.labels = io::read_label_png(m.root / e.label);
        img.domain_tag = to_string(s);
        validate(img, m.plan.scene.num_classes);
        out.emplace_back(e.id, std::move(img));
    }
    return out;
}

std::vector<std::pair<std::string, DomainShift>> read_sidecar(const std::filesystem::path& dir) {
    const auto path = dir / "shifts.json";
    std::ifstream in(path);
    if (!in) throw IoError("missing sidecar " + path.string());
    std::vector<std::pair<std::string, DomainShift>> out;
    try {
        nlohmann::json j = nlohmann::json::parse(in);
        for (auto it = j.begin(); it != j.end(); ++it) {
            out.emplace_back(it.key(), DomainShift{parse_shift_kind(it->at("kind")), it->at("magnitude"), it->at("seed")});
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed sidecar " + path.string() + ": " + e.what());
    }
    return out;
}

}  // namespace ahocda::synth
