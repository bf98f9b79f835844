#include "ahocda/pipeline.hpp"

#include <unordered_map>

#include "ahocda/error.hpp"
#include "ahocda/spectrum.hpp"

namespace ahocda::pipeline {

namespace {

std::pair<std::string, Image> entry(const synth::Record& r, bool keep_labels) {
    Image img = r.image;
    if (!keep_labels) img.labels.reset();
    return {r.id, std::move(img)};
}

}  // namespace

Splits from_benchmark(const synth::Benchmark& bench, bool eval_labels) {
    Splits s;
    for (const auto& r : bench.records) {
        switch (r.split) {
            case synth::Split::source: s.source.push_back(entry(r, true)); break;
            case synth::Split::compound: s.compound.push_back(entry(r, eval_labels)); break;
            case synth::Split::open: s.open.push_back(entry(r, eval_labels)); break;
        }
    }
    return s;
}

Splits load(const synth::Manifest& manifest, bool eval_labels) {
    Splits s;
    s.source = synth::load_split(manifest, synth::Split::source, true);
    s.compound = synth::load_split(manifest, synth::Split::compound, eval_labels);
    s.open = synth::load_split(manifest, synth::Split::open, eval_labels);
    return s;
}

std::vector<curriculum::RankedImage> rank(const NamedImages& source, const NamedImages& compound, double beta) {
    if (source.empty()) throw InvalidInput("ranking needs at least one source image");
    std::vector<Image> src;
    src.reserve(source.size());
    for (const auto& [id, img] : source) {
        Image plain;
        plain.pixels = img.pixels;
        src.push_back(std::move(plain));
    }
    const auto profile = spectrum::source_profile(src, beta);
    std::vector<curriculum::RankedImage> out;
    out.reserve(compound.size());
    for (const auto& [id, img] : compound) out.push_back({id, spectrum::domain_distance(img, profile)});
    return out;
}

trainer::TrainingData training_data(const trainer::TrainConfig& config, const Splits& splits) {
    const auto mc = config.resolved_model();
    trainer::TrainingData data;
    for (const auto& [id, img] : splits.source) data.source.push_back(trainer::prepare(id, img, mc, true));
    for (const auto& [id, img] : splits.compound) data.compound.push_back(trainer::prepare(id, img, mc, false));
    data.curriculum = curriculum::build_curriculum(rank(splits.source, splits.compound, config.beta), config.effective_k());
    return data;
}

std::vector<trainer::EvalDomain> eval_domains(const trainer::TrainConfig& config, const Splits& splits,
                                              const curriculum::Curriculum& k_stage_curriculum) {
    const auto mc = config.resolved_model();
    trainer::EvalDomain compound{"compound", {}}, far{"far_compound", {}}, open{"open", {}};
    std::unordered_map<std::string, const Image*> by_id;
    for (const auto& [id, img] : splits.compound) {
        compound.samples.push_back(trainer::prepare(id, img, mc, true));
        by_id[id] = &img;
    }
    for (const auto& id : k_stage_curriculum.stages.back()) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw InvalidInput("curriculum id " + id + " is not in the compound split");
        far.samples.push_back(trainer::prepare(id, *it->second, mc, true));
    }
    for (const auto& [id, img] : splits.open) open.samples.push_back(trainer::prepare(id, img, mc, true));
    std::vector<trainer::EvalDomain> out;
    out.push_back(std::move(compound));
    out.push_back(std::move(far));
    if (!open.samples.empty()) out.push_back(std::move(open));
    return out;
}

}  // namespace ahocda::pipeline
