#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ahocda/curriculum.hpp"
#include "ahocda/model.hpp"
#include "ahocda/rng.hpp"

namespace ahocda::trainer {

struct TrainConfig {
    double lambda_adv = 0.001;
    double beta = 0.09;
    int k = 3;
    double tau = 1.0;
    int memory_size = 64;

    double lr_seg = 0.00025;
    double lr_disc = 0.0001;
    double poly_power = 0.9;
    double momentum = 0.9;
    double weight_decay = 0.0;

    int iters_pretrain = 800;
    int iters_per_stage = 200;
    int batch_size = 1;
    std::uint64_t seed = 0;

    bool use_hopfield = true;
    bool use_curriculum = true;  // false collapses adaptation to a single stage
    bool freeze_memory = true;
    /// Adds per-location loss means to the metrics stream; training is unaffected.
    bool mean_reduce = false;

    /// Encoder / discriminator shape. memory_size, tau and use_hopfield above
    /// override the matching fields here.
    model::ModelConfig model;

    /// Effective model config after applying the overrides.
    model::ModelConfig resolved_model() const;
    /// K actually used for staging (1 when the curriculum is disabled).
    int effective_k() const { return use_curriculum ? k : 1; }
    /// Throws ParameterError on non-positive rates, K < 1, etc.
    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// base * (1 - iter / total)^power, for iter in [0, total]; 0 at iter == total.
double poly_lr(double base, long iter, long total, double power);

/// Plain SGD with heavy-ball momentum: v = mu v + g + wd w; w -= lr v.
/// Parameters marked untrainable are left bitwise untouched.
class Sgd {
public:
    Sgd() = default;
    Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}
    void step(std::span<model::ParamRef> params, std::span<const Matrix> grads, double lr);
    std::vector<Matrix>& velocity() { return velocity_; }
    const std::vector<Matrix>& velocity() const { return velocity_; }

private:
    double momentum_ = 0.9;
    double weight_decay_ = 0.0;
    std::vector<Matrix> velocity_;
};

/// A model-resolution training sample.
struct Sample {
    std::string id;
    Tensor pixels;
    std::optional<LabelMap> labels;
};

/// Resizes to the model's input resolution (bilinear pixels, nearest labels).
Sample prepare(const std::string& id, const Image& image, const model::ModelConfig& config, bool keep_labels);

enum class Phase { pretrain, adapt, done };
std::string to_string(Phase p);

/// One metrics record; serialized as a JSON line.
struct MetricRecord {
    Phase phase = Phase::pretrain;
    int stage = 0;
    long iter = 0;
    model::LossReport loss;
    double lr = 0.0;
    double lr_disc = 0.0;
    int locations = 0;
};

nlohmann::json to_json(const MetricRecord& r, bool mean_reduce);

using MetricSink = std::function<void(const MetricRecord&)>;

struct StageSummary {
    int stage = 0;
    std::size_t target_images = 0;
    std::size_t fake_source_images = 0;
    double mean_l_ce = 0.0;
    double mean_l_adv_seg = 0.0;
    double mean_l_adv_d = 0.0;
};

/// Everything needed to continue a run bit-exactly.
struct RunState {
    TrainConfig config;
    Phase phase = Phase::pretrain;
    int stage = 0;   // 1-based during adaptation
    long iter = 0;   // iterations completed in the current phase
    Rng rng;
    model::SegModel seg;
    model::Discriminator disc;
    Sgd seg_opt;
    Sgd disc_opt;
    curriculum::FakeSourceSet fake_source;
    std::vector<StageSummary> stages;
    std::string checkpoint_id;
};

/// Fresh state: initialized model and discriminator, phase = pretrain.
RunState initial_state(const TrainConfig& config);

/// Full checkpoint: JSON header (configs, seed, phase, stage, iteration, RNG,
/// parameter table) then f64 arrays for Seg, D, both momentum buffers and the
/// current fake-source pseudo-labels.
void save_checkpoint(const RunState& state, const std::filesystem::path& path);
RunState load_checkpoint(const std::filesystem::path& path);

struct TrainingData {
    /// Labeled source samples at model resolution.
    std::vector<Sample> source;
    /// Unlabeled compound samples at model resolution. Labels are rejected.
    std::vector<Sample> compound;
    curriculum::Curriculum curriculum;
};

struct RunOptions {
    MetricSink on_metric;
    /// Stop (with state intact) after this many further iterations.
    std::optional<long> stop_after;
    /// Called once with the state after the last pretraining iteration.
    std::function<void(const RunState&)> on_pretrain_end;
    /// Called with the state at the end of each adaptation stage.
    std::function<void(const RunState&)> on_stage_end;
};

/// Continues `state` through pretraining and adaptation. Returns true when
/// the run reached Phase::done, false when stopped early by stop_after.
/// Throws NumericError (with phase, stage, iteration) on a non-finite loss.
bool run(RunState& state, const TrainingData& data, const RunOptions& options = {});

/// Source-only pretraining with cross-entropy; every parameter is trainable.
model::SegModel pretrain(const TrainConfig& config, const std::vector<Sample>& source, const MetricSink& sink = {});

struct AdaptResult {
    model::SegModel seg;
    model::Discriminator disc;
    std::vector<StageSummary> stages;
};

/// Frozen-memory adversarial curriculum adaptation starting from `pretrained`.
AdaptResult adapt(const TrainConfig& config, const model::SegModel& pretrained, const TrainingData& data,
                  const MetricSink& sink = {});

/// mIoU of the model over labeled samples.
model::IouResult evaluate(const model::SegModel& seg, const std::vector<Sample>& labeled, int num_classes);

/// A labeled evaluation split, e.g. "compound", "far_compound" or "open".
struct EvalDomain {
    std::string name;
    std::vector<Sample> samples;
};

struct AblationRow {
    std::string configuration;
    std::string domain;
    double miou = 0.0;
};

/// Configuration names in the order ablation_suite runs them.
std::vector<std::string> ablation_configurations();

/// Runs source-only, w/o-curr (K = 1), w/o-hopf (identity layer, pretrained
/// separately with the same seed), full and no-freeze, and evaluates each on
/// every domain. Everything except the ablated switch comes from `config`.
/// `progress` receives each configuration name before it starts.
std::vector<AblationRow> ablation_suite(const TrainConfig& config, const TrainingData& data,
                                        const std::vector<EvalDomain>& domains,
                                        const std::function<void(const std::string&)>& progress = {});

}  // namespace ahocda::trainer
