#include "ahocda/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ahocda/error.hpp"
#include "ahocda/linalg.hpp"
#include "ahocda/rng.hpp"

namespace ahocda::model {

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"input_h", c.input_h},
                       {"input_w", c.input_w},
                       {"in_channels", c.in_channels},
                       {"num_classes", c.num_classes},
                       {"encoder_channels", c.encoder_channels},
                       {"leaky_slope", c.leaky_slope},
                       {"use_hopfield", c.use_hopfield},
                       {"memory_size", c.memory_size},
                       {"projection_dim", c.projection_dim},
                       {"tau", c.tau},
                       {"memory_init_gain", c.memory_init_gain},
                       {"disc_channels", c.disc_channels}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    j.at("input_h").get_to(c.input_h);
    j.at("input_w").get_to(c.input_w);
    j.at("in_channels").get_to(c.in_channels);
    j.at("num_classes").get_to(c.num_classes);
    j.at("encoder_channels").get_to(c.encoder_channels);
    j.at("leaky_slope").get_to(c.leaky_slope);
    j.at("use_hopfield").get_to(c.use_hopfield);
    j.at("memory_size").get_to(c.memory_size);
    j.at("projection_dim").get_to(c.projection_dim);
    j.at("tau").get_to(c.tau);
    j.at("memory_init_gain").get_to(c.memory_init_gain);
    j.at("disc_channels").get_to(c.disc_channels);
}

std::vector<Matrix> zeros_like(std::span<const ConstParamRef> params) {
    std::vector<Matrix> out;
    out.reserve(params.size());
    for (const auto& p : params) out.emplace_back(p.value->rows, p.value->cols);
    return out;
}

namespace {

Matrix to_rows(const Tensor& t) {
    Matrix m(t.h * t.w, t.c);
    m.data = t.data;
    return m;
}

Tensor to_tensor(Matrix&& m, int h, int w) {
    Tensor t;
    t.h = h;
    t.w = w;
    t.c = m.cols;
    t.data = std::move(m.data);
    return t;
}

void add_into(Matrix& dst, const Matrix& src) {
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

void check_simplex(const Tensor& t, const char* what) {
    if (t.c != 2) throw InvalidInput(std::string(what) + ": discriminator map must have 2 channels");
    for (std::size_t i = 0; i < t.data.size(); i += 2) {
        const double a = t.data[i], b = t.data[i + 1];
        if (!(a >= 0.0 && b >= 0.0) || std::abs(a + b - 1.0) > 1e-9) {
            throw InvalidInput(std::string(what) + ": discriminator map is not a per-location probability simplex");
        }
    }
}

double safe_log(double p) { return std::log(std::max(p, kLogClamp)); }
// Derivative of -log(max(p, clamp)).
double neg_log_grad(double p) { return p >= kLogClamp ? -1.0 / p : 0.0; }

// Neumaier-compensated sum of -log terms, so a map of N identical terms sums
// to N times the term.
class NegLogSum {
public:
    void add(double p) {
        const double x = -safe_log(p);
        const double t = sum_ + x;
        comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace

// ---- SegModel ---------------------------------------------------------------

SegModel SegModel::create(const ModelConfig& config, std::uint64_t seed) {
    if (config.encoder_channels.empty()) throw ParameterError("encoder needs at least one layer");
    if (config.num_classes < 2) throw ParameterError("need at least two classes");
    if (config.input_h < 2 || config.input_w < 2) throw ParameterError("input size must be at least 2x2");
    SegModel m;
    m.config_ = config;
    Rng enc_rng(derive_seed(seed, "encoder"));
    int in = config.in_channels;
    for (int out : config.encoder_channels) {
        m.encoder_.push_back(layers::Conv3x3::create(in, out, enc_rng));
        in = out;
    }
    if (config.use_hopfield) {
        m.hopfield_ = hopfield::make_memory(config.memory_size, config.feature_dim(), config.projection_dim, config.tau,
                                            derive_seed(seed, "hopfield"), config.memory_init_gain);
    }
    Rng cls_rng(derive_seed(seed, "classifier"));
    const double bound = 1.0 / std::sqrt(static_cast<double>(config.feature_dim()));
    m.classifier_.weight = Matrix(config.feature_dim(), config.num_classes);
    m.classifier_.bias = Matrix(1, config.num_classes);
    for (double& v : m.classifier_.weight.data) v = cls_rng.uniform(-bound, bound);
    for (double& v : m.classifier_.bias.data) v = cls_rng.uniform(-bound, bound);
    m.initialized_ = true;
    return m;
}

Tensor SegModel::forward(const Tensor& image, SegCache* cache) const {
    if (!initialized_) throw StateError("segmentation model is not initialized");
    if (image.h != config_.input_h || image.w != config_.input_w || image.c != config_.in_channels) {
        throw InvalidInput("input is " + std::to_string(image.h) + "x" + std::to_string(image.w) + "x" +
                           std::to_string(image.c) + ", model expects " + std::to_string(config_.input_h) + "x" +
                           std::to_string(config_.input_w) + "x" + std::to_string(config_.in_channels));
    }
    SegCache local;
    SegCache& c = cache ? *cache : local;
    c.conv.resize(encoder_.size());
    c.pre_activation.resize(encoder_.size());

    Tensor h = layers::forward(encoder_[0], image, &c.conv[0]);
    for (std::size_t i = 0;; ++i) {
        if (cache) c.pre_activation[i] = h;
        layers::leaky_relu_inplace(h, config_.leaky_slope);
        if (i + 1 == encoder_.size()) break;
        h = layers::forward(encoder_[i + 1], h, &c.conv[i + 1]);
    }

    const Tensor* retrieved = &h;
    if (hopfield_) {
        c.retrieved = to_tensor(hopfield::retrieve_batch(*hopfield_, to_rows(h), cache ? &c.hop : nullptr), h.h, h.w);
        retrieved = &c.retrieved;
    }
    Tensor probs = layers::softmax_channels(layers::forward(classifier_, *retrieved));
    if (cache) {
        c.features = std::move(h);
        if (!hopfield_) c.retrieved = c.features;
        c.probs = probs;
    }
    return probs;
}

Tensor SegModel::backward(const SegCache& c, const Tensor& d_probs, std::span<Matrix> grads, bool want_input_grad) const {
    const std::size_t n_enc = encoder_.size();
    const std::size_t cls_idx = 2 * n_enc + (hopfield_ ? 4 : 0);
    if (grads.size() != cls_idx + 2) throw InvalidInput("gradient buffer does not match the model parameters");

    Tensor d_logits = layers::softmax_channels_backward(c.probs, d_probs);
    Tensor d = layers::backward(classifier_, c.retrieved, d_logits, grads[cls_idx], grads[cls_idx + 1]);

    if (hopfield_) {
        hopfield::Gradients g = hopfield::backward_batch(*hopfield_, c.hop, to_rows(d));
        const std::size_t base = 2 * n_enc;
        add_into(grads[base + 0], g.d_memory);
        add_into(grads[base + 1], g.d_w_q);
        add_into(grads[base + 2], g.d_w_k);
        add_into(grads[base + 3], g.d_w_v);
        d = to_tensor(std::move(g.d_z), d.h, d.w);
    }
    for (std::size_t i = n_enc; i-- > 0;) {
        layers::leaky_relu_backward_inplace(c.pre_activation[i], d, config_.leaky_slope);
        d = layers::backward(encoder_[i], c.conv[i], d, grads[2 * i], grads[2 * i + 1], i > 0 || want_input_grad);
    }
    return d;
}

std::vector<ParamRef> SegModel::params() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < encoder_.size(); ++i) {
        out.push_back({"encoder." + std::to_string(i) + ".weight", &encoder_[i].weight, true});
        out.push_back({"encoder." + std::to_string(i) + ".bias", &encoder_[i].bias, true});
    }
    if (hopfield_) {
        const bool open = !hopfield_->frozen;
        out.push_back({"hopfield.memory", &hopfield_->memory, open});
        out.push_back({"hopfield.w_q", &hopfield_->w_q, true});
        out.push_back({"hopfield.w_k", &hopfield_->w_k, open});
        out.push_back({"hopfield.w_v", &hopfield_->w_v, open});
    }
    out.push_back({"classifier.weight", &classifier_.weight, true});
    out.push_back({"classifier.bias", &classifier_.bias, true});
    return out;
}

std::vector<ConstParamRef> SegModel::params() const {
    std::vector<ConstParamRef> out;
    for (auto& p : const_cast<SegModel*>(this)->params()) out.push_back({p.name, p.value, p.trainable});
    return out;
}

void SegModel::freeze_memory() {
    if (hopfield_) hopfield_->freeze();
}

LabelMap SegModel::predict(const Tensor& image) const {
    Tensor p = forward(image);
    LabelMap out(p.h, p.w);
    for (int i = 0; i < p.h * p.w; ++i) {
        const double* v = p.data.data() + static_cast<std::size_t>(i) * p.c;
        out.data[i] = static_cast<int>(std::max_element(v, v + p.c) - v);
    }
    return out;
}

// ---- Discriminator ----------------------------------------------------------

Discriminator Discriminator::create(const ModelConfig& config, std::uint64_t seed) {
    Discriminator d;
    d.slope_ = config.leaky_slope;
    Rng rng(derive_seed(seed, "discriminator"));
    int in = config.num_classes;
    for (int out : config.disc_channels) {
        d.convs_.push_back(layers::Conv3x3::create(in, out, rng));
        in = out;
    }
    d.convs_.push_back(layers::Conv3x3::create(in, 2, rng));
    return d;
}

Tensor Discriminator::forward(const Tensor& seg_probs, DiscCache* cache) const {
    DiscCache local;
    DiscCache& c = cache ? *cache : local;
    c.conv.resize(convs_.size());
    c.pre_activation.resize(convs_.size());
    Tensor h = seg_probs;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        h = layers::forward(convs_[i], h, &c.conv[i]);
        if (i + 1 < convs_.size()) {
            if (cache) c.pre_activation[i] = h;
            layers::leaky_relu_inplace(h, slope_);
        }
    }
    Tensor probs = layers::softmax_channels(h);
    if (cache) c.probs = probs;
    return probs;
}

Tensor Discriminator::backward(const DiscCache& c, const Tensor& d_probs, std::span<Matrix> grads,
                               bool want_input_grad) const {
    if (grads.size() != 2 * convs_.size()) throw InvalidInput("gradient buffer does not match the discriminator");
    Tensor d = layers::softmax_channels_backward(c.probs, d_probs);
    for (std::size_t i = convs_.size(); i-- > 0;) {
        if (i + 1 < convs_.size()) layers::leaky_relu_backward_inplace(c.pre_activation[i], d, slope_);
        d = layers::backward(convs_[i], c.conv[i], d, grads[2 * i], grads[2 * i + 1], i > 0 || want_input_grad);
    }
    return d;
}

std::vector<ParamRef> Discriminator::params() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        out.push_back({"disc." + std::to_string(i) + ".weight", &convs_[i].weight, true});
        out.push_back({"disc." + std::to_string(i) + ".bias", &convs_[i].bias, true});
    }
    return out;
}

std::vector<ConstParamRef> Discriminator::params() const {
    std::vector<ConstParamRef> out;
    for (auto& p : const_cast<Discriminator*>(this)->params()) out.push_back({p.name, p.value, p.trainable});
    return out;
}

// ---- losses -----------------------------------------------------------------

namespace {

void check_labels(const Tensor& pred, const LabelMap& labels) {
    if (pred.h != labels.h || pred.w != labels.w) throw InvalidInput("prediction and label map sizes differ");
    for (int id : labels.data) {
        if (id < 0 || id >= pred.c) throw InvalidInput("label id " + std::to_string(id) + " out of range");
    }
}

}  // namespace

double ce_loss(const Tensor& pred, const LabelMap& labels) {
    check_labels(pred, labels);
    NegLogSum loss;
    for (std::size_t i = 0; i < labels.data.size(); ++i) loss.add(pred.data[i * pred.c + labels.data[i]]);
    return loss.value();
}

Tensor ce_loss_grad(const Tensor& pred, const LabelMap& labels) {
    check_labels(pred, labels);
    Tensor g(pred.h, pred.w, pred.c);
    for (std::size_t i = 0; i < labels.data.size(); ++i) {
        const std::size_t k = i * pred.c + labels.data[i];
        g.data[k] = neg_log_grad(pred.data[k]);
    }
    return g;
}

double adv_loss_seg(const Tensor& d_out) {
    check_simplex(d_out, "adv_loss_seg");
    NegLogSum loss;
    for (std::size_t i = 1; i < d_out.data.size(); i += 2) loss.add(d_out.data[i]);
    return loss.value();
}

Tensor adv_loss_seg_grad(const Tensor& d_out) {
    check_simplex(d_out, "adv_loss_seg");
    Tensor g(d_out.h, d_out.w, 2);
    for (std::size_t i = 1; i < d_out.data.size(); i += 2) g.data[i] = neg_log_grad(d_out.data[i]);
    return g;
}

double adv_loss_disc(const Tensor& d_target, const Tensor& d_fake_source) {
    check_simplex(d_target, "adv_loss_disc");
    check_simplex(d_fake_source, "adv_loss_disc");
    if (d_target.h * d_target.w != d_fake_source.h * d_fake_source.w) {
        throw InvalidInput("adv_loss_disc: target and fake-source maps differ in size");
    }
    NegLogSum loss;
    for (std::size_t i = 0; i < d_target.data.size(); i += 2) {
        loss.add(d_target.data[i]);
        loss.add(d_fake_source.data[i + 1]);
    }
    return loss.value();
}

std::pair<Tensor, Tensor> adv_loss_disc_grad(const Tensor& d_target, const Tensor& d_fake_source) {
    check_simplex(d_target, "adv_loss_disc");
    check_simplex(d_fake_source, "adv_loss_disc");
    Tensor gt(d_target.h, d_target.w, 2), gs(d_fake_source.h, d_fake_source.w, 2);
    for (std::size_t i = 0; i < d_target.data.size(); i += 2) gt.data[i] = neg_log_grad(d_target.data[i]);
    for (std::size_t i = 1; i < d_fake_source.data.size(); i += 2) gs.data[i] = neg_log_grad(d_fake_source.data[i]);
    return {std::move(gt), std::move(gs)};
}

LossReport total_loss(double l_ce, double l_adv_seg, double l_adv_d, double lambda_adv) {
    if (!std::isfinite(l_ce) || !std::isfinite(l_adv_seg) || !std::isfinite(l_adv_d) || !std::isfinite(lambda_adv)) {
        throw NumericError("total_loss: non-finite loss component");
    }
    return {l_ce, l_adv_seg, l_adv_d, l_ce + lambda_adv * (l_adv_seg + l_adv_d), lambda_adv};
}

// ---- mIoU -------------------------------------------------------------------

IouAccumulator::IouAccumulator(int num_classes)
    : classes_(num_classes), intersection_(num_classes, 0), union_(num_classes, 0) {
    if (num_classes < 1) throw ParameterError("num_classes must be positive");
}

void IouAccumulator::add(const LabelMap& pred, const LabelMap& truth) {
    if (pred.h != truth.h || pred.w != truth.w) throw InvalidInput("miou: label maps differ in size");
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const int p = pred.data[i], t = truth.data[i];
        if (p < 0 || p >= classes_ || t < 0 || t >= classes_) throw InvalidInput("miou: label id out of range");
        if (p == t) {
            ++intersection_[p];
            ++union_[p];
        } else {
            ++union_[p];
            ++union_[t];
        }
    }
}

IouResult IouAccumulator::result() const {
    IouResult r;
    r.per_class.assign(classes_, std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0;
    for (int k = 0; k < classes_; ++k) {
        if (union_[k] == 0) continue;
        r.per_class[k] = static_cast<double>(intersection_[k]) / static_cast<double>(union_[k]);
        sum += r.per_class[k];
        ++r.present;
    }
    r.mean = r.present > 0 ? sum / r.present : 0.0;
    return r;
}

IouResult miou(const LabelMap& pred, const LabelMap& truth, int num_classes) {
    IouAccumulator acc(num_classes);
    acc.add(pred, truth);
    return acc.result();
}

// ---- joint objective --------------------------------------------------------

LossReport joint_loss(const SegModel& seg, const Discriminator& disc, const Tensor& labeled, const LabelMap& labels,
                      const Tensor& target, double lambda_adv, JointGradients* grads) {
    SegCache cs, ct;
    DiscCache ds, dt;
    const Tensor ps = seg.forward(labeled, grads ? &cs : nullptr);
    const Tensor pt = seg.forward(target, grads ? &ct : nullptr);
    const Tensor d_src = disc.forward(ps, grads ? &ds : nullptr);
    const Tensor d_tgt = disc.forward(pt, grads ? &dt : nullptr);

    LossReport r = total_loss(ce_loss(ps, labels), adv_loss_seg(d_tgt), adv_loss_disc(d_tgt, d_src), lambda_adv);
    if (!grads) return r;

    const auto seg_params = seg.params();
    const auto disc_params = disc.params();
    grads->seg = zeros_like(seg_params);
    grads->disc = zeros_like(disc_params);

    Tensor g_tgt = adv_loss_seg_grad(d_tgt);
    auto [g_tgt_d, g_src_d] = adv_loss_disc_grad(d_tgt, d_src);
    for (std::size_t i = 0; i < g_tgt.data.size(); ++i) g_tgt.data[i] = lambda_adv * (g_tgt.data[i] + g_tgt_d.data[i]);
    for (double& v : g_src_d.data) v *= lambda_adv;

    Tensor d_pt = disc.backward(dt, g_tgt, grads->disc, true);
    Tensor d_ps = disc.backward(ds, g_src_d, grads->disc, true);
    const Tensor g_ce = ce_loss_grad(ps, labels);
    for (std::size_t i = 0; i < d_ps.data.size(); ++i) d_ps.data[i] += g_ce.data[i];

    seg.backward(cs, d_ps, grads->seg);
    seg.backward(ct, d_pt, grads->seg);
    return r;
}

}  // namespace ahocda::model
