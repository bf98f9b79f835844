#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ahocda/hopfield.hpp"
#include "ahocda/layers.hpp"
#include "ahocda/tensor.hpp"

namespace ahocda::model {

/// Architecture of the segmentation stack and its discriminator.
struct ModelConfig {
    int input_h = 32;
    int input_w = 32;
    int in_channels = 3;
    int num_classes = 4;
    /// Encoder widths; the last entry is the feature dimension C_l.
    std::vector<int> encoder_channels = {16, 32, 64};
    double leaky_slope = 0.1;
    bool use_hopfield = true;
    int memory_size = 64;     // M_N
    int projection_dim = 32;  // C_s
    double tau = 1.0;
    /// Multiplier on the Hopfield init bound 1/sqrt(C_l).
    double memory_init_gain = 1.0;
    /// Hidden widths of the discriminator's 3x3 conv stack.
    std::vector<int> disc_channels = {16, 16};

    int feature_dim() const { return encoder_channels.back(); }
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Named non-owning view of one parameter matrix.
struct ParamRef {
    std::string name;
    Matrix* value;
    bool trainable;
};

struct ConstParamRef {
    std::string name;
    const Matrix* value;
    bool trainable;
};

/// Zero matrices shaped like each parameter.
std::vector<Matrix> zeros_like(std::span<const ConstParamRef> params);

struct SegCache {
    Tensor input;
    std::vector<layers::ConvCache> conv;
    std::vector<Tensor> pre_activation;
    Tensor features;
    hopfield::BatchCache hop;
    Tensor retrieved;
    Tensor probs;
};

/// Encoder f -> Hopfield layer H (or identity) -> per-location classifier g.
class SegModel {
public:
    SegModel() = default;
    static SegModel create(const ModelConfig& config, std::uint64_t seed);

    bool initialized() const { return initialized_; }
    const ModelConfig& config() const { return config_; }

    /// H x W x cls probabilities. Throws InvalidInput if the input size does
    /// not match the configured resolution.
    Tensor forward(const Tensor& image, SegCache* cache = nullptr) const;

    /// Accumulates parameter gradients (aligned with params()) given dL/dprobs.
    /// Frozen Hopfield parameters receive zero. Returns dL/dinput when asked.
    Tensor backward(const SegCache& cache, const Tensor& d_probs, std::span<Matrix> grads,
                    bool want_input_grad = false) const;

    std::vector<ParamRef> params();
    std::vector<ConstParamRef> params() const;

    hopfield::HopfieldMemory* memory() { return hopfield_ ? &*hopfield_ : nullptr; }
    const hopfield::HopfieldMemory* memory() const { return hopfield_ ? &*hopfield_ : nullptr; }
    void freeze_memory();

    /// Per-pixel argmax of forward().
    LabelMap predict(const Tensor& image) const;

    friend bool operator==(const SegModel&, const SegModel&) = default;

private:
    ModelConfig config_;
    std::vector<layers::Conv3x3> encoder_;
    std::optional<hopfield::HopfieldMemory> hopfield_;
    layers::Linear classifier_;
    bool initialized_ = false;
};

struct DiscCache {
    std::vector<layers::ConvCache> conv;
    std::vector<Tensor> pre_activation;
    Tensor probs;
};

/// Fully convolutional per-location source/target classifier. Output channel
/// 1 is the source probability, channel 0 the target probability.
class Discriminator {
public:
    Discriminator() = default;
    static Discriminator create(const ModelConfig& config, std::uint64_t seed);

    Tensor forward(const Tensor& seg_probs, DiscCache* cache = nullptr) const;
    Tensor backward(const DiscCache& cache, const Tensor& d_probs, std::span<Matrix> grads,
                    bool want_input_grad) const;

    std::vector<ParamRef> params();
    std::vector<ConstParamRef> params() const;

    friend bool operator==(const Discriminator&, const Discriminator&) = default;

private:
    double slope_ = 0.1;
    std::vector<layers::Conv3x3> convs_;
};

// ---- losses -------------------------------------------------------------

inline constexpr double kLogClamp = 1e-12;

/// -sum_{h,w} log max(pred[label], 1e-12).
double ce_loss(const Tensor& pred, const LabelMap& labels);
Tensor ce_loss_grad(const Tensor& pred, const LabelMap& labels);

/// -sum_{h,w} log D^(h,w,1) on target predictions.
double adv_loss_seg(const Tensor& d_out);
Tensor adv_loss_seg_grad(const Tensor& d_out);

/// -sum_{h,w} [log D_target^(h,w,0) + log D_fake_source^(h,w,1)].
double adv_loss_disc(const Tensor& d_target, const Tensor& d_fake_source);
/// Gradients with respect to d_target and d_fake_source.
std::pair<Tensor, Tensor> adv_loss_disc_grad(const Tensor& d_target, const Tensor& d_fake_source);

struct LossReport {
    double l_ce = 0.0;
    double l_adv_seg = 0.0;
    double l_adv_d = 0.0;
    double total = 0.0;
    double lambda_adv = 0.001;
};

/// total = l_ce + lambda_adv * (l_adv_seg + l_adv_d). Throws NumericError on
/// non-finite inputs.
LossReport total_loss(double l_ce, double l_adv_seg, double l_adv_d, double lambda_adv = 0.001);

struct IouResult {
    /// NaN for classes absent from both maps.
    std::vector<double> per_class;
    double mean = 0.0;
    /// Number of classes that entered the mean.
    int present = 0;
};

IouResult miou(const LabelMap& pred, const LabelMap& truth, int num_classes);

/// Confusion-matrix accumulator so mIoU can be computed over many images.
class IouAccumulator {
public:
    explicit IouAccumulator(int num_classes);
    void add(const LabelMap& pred, const LabelMap& truth);
    IouResult result() const;

private:
    int classes_;
    std::vector<long long> intersection_;
    std::vector<long long> union_;
};

/// Full objective L(S_hat, T) for one labeled image and one target image,
/// with gradients of L for every Seg and D parameter (frozen ones are zero).
struct JointGradients {
    std::vector<Matrix> seg;
    std::vector<Matrix> disc;
};

LossReport joint_loss(const SegModel& seg, const Discriminator& disc, const Tensor& labeled, const LabelMap& labels,
                      const Tensor& target, double lambda_adv, JointGradients* grads = nullptr);

}  // namespace ahocda::model
