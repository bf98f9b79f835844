#include "ahocda/curriculum.hpp"

#include <algorithm>
#include <cmath>

#include "ahocda/error.hpp"

namespace ahocda::curriculum {

Curriculum build_curriculum(std::vector<RankedImage> distances, int k) {
    if (distances.empty()) throw ParameterError("build_curriculum: empty distance list");
    if (k < 1) throw ParameterError("build_curriculum: K must be at least 1");
    if (static_cast<std::size_t>(k) > distances.size()) {
        throw ParameterError("build_curriculum: K = " + std::to_string(k) + " exceeds the " +
                             std::to_string(distances.size()) + " available images");
    }
    for (const auto& d : distances) {
        if (!std::isfinite(d.delta)) throw InvalidInput("build_curriculum: non-finite delta for " + d.id);
    }
    std::sort(distances.begin(), distances.end(), [](const RankedImage& a, const RankedImage& b) {
        if (a.delta != b.delta) return a.delta < b.delta;
        return a.id < b.id;
    });

    Curriculum c;
    c.k = k;
    const std::size_t keep = distances.size() - distances.size() % static_cast<std::size_t>(k);
    c.dropped.assign(distances.begin() + static_cast<std::ptrdiff_t>(keep), distances.end());
    distances.resize(keep);
    c.ordered = std::move(distances);

    const std::size_t per = c.stage_size();
    c.stages.resize(k);
    for (int j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < per; ++i) c.stages[j].push_back(c.ordered[j * per + i].id);
    }
    return c;
}

std::size_t fake_source_count(std::size_t curriculum_size, int k, int stage) {
    if (k < 1) throw ParameterError("K must be at least 1");
    if (stage < 1 || stage > k) {
        throw ParameterError("stage " + std::to_string(stage) + " outside [1, " + std::to_string(k) + "]");
    }
    return curriculum_size * static_cast<std::size_t>(stage - 1) / (2 * static_cast<std::size_t>(k));
}

std::vector<std::string> fake_source_ids(const Curriculum& curriculum, int stage) {
    const std::size_t n = fake_source_count(curriculum.size(), curriculum.k, stage);
    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ids.push_back(curriculum.ordered[i].id);
    return ids;
}

FakeSourceSet materialize_fake_source(int stage, std::span<const std::string> ids, const ImageLookup& lookup,
                                      const model::SegModel& model, std::string provenance) {
    if (!model.initialized()) throw StateError("materialize_fake_source: model is not initialized");
    FakeSourceSet set;
    set.stage = stage;
    set.provenance = std::move(provenance);
    set.members.reserve(ids.size());
    for (const auto& id : ids) set.members.push_back({id, model.predict(lookup(id))});
    return set;
}

nlohmann::json to_json(const Curriculum& c, double beta) {
    nlohmann::json ordered = nlohmann::json::array();
    for (const auto& r : c.ordered) ordered.push_back({{"id", r.id}, {"delta", r.delta}});
    nlohmann::json dropped = nlohmann::json::array();
    for (const auto& r : c.dropped) dropped.push_back({{"id", r.id}, {"delta", r.delta}});
    nlohmann::json fake = nlohmann::json::array();
    for (int j = 1; j <= c.k; ++j) fake.push_back(fake_source_ids(c, j));
    return {{"beta", beta},       {"K", c.k},
            {"ordered", ordered}, {"stages", c.stages},
            {"fake_source_per_stage", fake}, {"dropped", dropped}};
}

Curriculum curriculum_from_json(const nlohmann::json& j) {
    Curriculum c;
    try {
        c.k = j.at("K");
        for (const auto& r : j.at("ordered")) c.ordered.push_back({r.at("id"), r.at("delta")});
        j.at("stages").get_to(c.stages);
        if (j.contains("dropped")) {
            for (const auto& r : j.at("dropped")) c.dropped.push_back({r.at("id"), r.at("delta")});
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed curriculum JSON: ") + e.what());
    }
    if (c.k < 1 || c.stages.size() != static_cast<std::size_t>(c.k) || c.ordered.size() % c.k != 0) {
        throw InvalidInput("curriculum JSON is inconsistent with K");
    }
    return c;
}

}  // namespace ahocda::curriculum
