#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ahocda/image.hpp"
#include "ahocda/model.hpp"

namespace ahocda::curriculum {

struct RankedImage {
    std::string id;
    double delta = 0.0;
    friend bool operator==(const RankedImage&, const RankedImage&) = default;
};

/// Compound images sorted by domain distance and cut into K equal stages.
struct Curriculum {
    /// Staged images, ascending by delta (ties by id).
    std::vector<RankedImage> ordered;
    int k = 1;
    std::vector<std::vector<std::string>> stages;
    /// Largest-delta items left out so that K divides the staged count.
    std::vector<RankedImage> dropped;

    std::size_t size() const { return ordered.size(); }
    std::size_t stage_size() const { return ordered.size() / static_cast<std::size_t>(k); }
};

/// Throws ParameterError for an empty list, K < 1 or K > list length. When K
/// does not divide the list length the (N mod K) farthest items are moved to
/// Curriculum::dropped.
Curriculum build_curriculum(std::vector<RankedImage> distances, int k);

/// floor(|G| * (j - 1) / (2K)), the fake-source pool size at stage j.
std::size_t fake_source_count(std::size_t curriculum_size, int k, int stage);

/// The first fake_source_count(...) ids of the ordering. Stages are 1-based.
std::vector<std::string> fake_source_ids(const Curriculum& curriculum, int stage);

struct FakeSourceMember {
    std::string id;
    LabelMap pseudo_label;
};

/// Pseudo-labeled near-source compound images for one stage.
struct FakeSourceSet {
    int stage = 1;
    std::vector<FakeSourceMember> members;
    /// Identifier of the model state that produced every pseudo-label.
    std::string provenance;
};

using ImageLookup = std::function<const Tensor&(const std::string& id)>;

/// Labels each image with the per-pixel argmax of the model's softmax output.
/// Throws StateError if the model was never initialized.
FakeSourceSet materialize_fake_source(int stage, std::span<const std::string> ids, const ImageLookup& lookup,
                                      const model::SegModel& model, std::string provenance);

/// {beta, K, ordered: [{id, delta}], stages: [[id]], fake_source_per_stage: [[id]]}.
nlohmann::json to_json(const Curriculum& curriculum, double beta);
Curriculum curriculum_from_json(const nlohmann::json& j);

}  // namespace ahocda::curriculum
