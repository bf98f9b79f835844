#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ahocda/curriculum.hpp"
#include "ahocda/synthdata.hpp"
#include "ahocda/trainer.hpp"

namespace ahocda::pipeline {

using NamedImages = std::vector<std::pair<std::string, Image>>;

/// The three splits of a benchmark. Compound and open images carry labels
/// only when loaded for evaluation.
struct Splits {
    NamedImages source;
    NamedImages compound;
    NamedImages open;
};

/// In-memory splits of a generated benchmark; compound/open labels are kept
/// only when `eval_labels` is set.
Splits from_benchmark(const synth::Benchmark& bench, bool eval_labels);
/// Reads the splits listed in a manifest.
Splits load(const synth::Manifest& manifest, bool eval_labels);

/// Domain distance of every compound image to the source amplitude profile.
/// Labels are never read.
std::vector<curriculum::RankedImage> rank(const NamedImages& source, const NamedImages& compound, double beta);

/// Training inputs at model resolution: labeled source, unlabeled compound,
/// and the curriculum built with the config's effective K.
trainer::TrainingData training_data(const trainer::TrainConfig& config, const Splits& splits);

/// Labeled evaluation domains: "compound", "far_compound" (the last stage of
/// the `k`-stage curriculum) and "open". Needs eval labels on compound/open.
std::vector<trainer::EvalDomain> eval_domains(const trainer::TrainConfig& config, const Splits& splits,
                                              const curriculum::Curriculum& k_stage_curriculum);

}  // namespace ahocda::pipeline
