#include "ahocda/trainer.hpp"

#include <cmath>
#include <unordered_map>

#include "ahocda/blob.hpp"
#include "ahocda/error.hpp"

namespace ahocda::trainer {

// ---- configuration ------------------------------------------------------------

model::ModelConfig TrainConfig::resolved_model() const {
    model::ModelConfig m = model;
    m.memory_size = memory_size;
    m.tau = tau;
    m.use_hopfield = use_hopfield;
    return m;
}

void TrainConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ParameterError(std::string(name) + " must be positive");
    };
    positive(lr_seg, "lr_seg");
    positive(lr_disc, "lr_disc");
    positive(poly_power, "poly_power");
    positive(tau, "tau");
    if (!(beta > 0.0 && beta <= 1.0)) throw ParameterError("beta must lie in (0, 1]");
    if (k < 1) throw ParameterError("K must be at least 1");
    if (memory_size < 1) throw ParameterError("memory_size must be at least 1");
    if (lambda_adv < 0.0 || !std::isfinite(lambda_adv)) throw ParameterError("lambda_adv must be non-negative");
    if (momentum < 0.0 || momentum >= 1.0) throw ParameterError("momentum must lie in [0, 1)");
    if (weight_decay < 0.0) throw ParameterError("weight_decay must be non-negative");
    if (iters_pretrain < 0 || iters_per_stage < 0) throw ParameterError("iteration budgets must be non-negative");
    if (batch_size < 1) throw ParameterError("batch_size must be at least 1");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"lambda_adv", c.lambda_adv},
         {"beta", c.beta},
         {"k", c.k},
         {"tau", c.tau},
         {"memory_size", c.memory_size},
         {"lr_seg", c.lr_seg},
         {"lr_disc", c.lr_disc},
         {"poly_power", c.poly_power},
         {"momentum", c.momentum},
         {"weight_decay", c.weight_decay},
         {"iters_pretrain", c.iters_pretrain},
         {"iters_per_stage", c.iters_per_stage},
         {"batch_size", c.batch_size},
         {"seed", c.seed},
         {"use_hopfield", c.use_hopfield},
         {"use_curriculum", c.use_curriculum},
         {"freeze_memory", c.freeze_memory},
         {"mean_reduce", c.mean_reduce},
         {"model", c.model}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    j.at("lambda_adv").get_to(c.lambda_adv);
    j.at("beta").get_to(c.beta);
    j.at("k").get_to(c.k);
    j.at("tau").get_to(c.tau);
    j.at("memory_size").get_to(c.memory_size);
    j.at("lr_seg").get_to(c.lr_seg);
    j.at("lr_disc").get_to(c.lr_disc);
    j.at("poly_power").get_to(c.poly_power);
    j.at("momentum").get_to(c.momentum);
    j.at("weight_decay").get_to(c.weight_decay);
    j.at("iters_pretrain").get_to(c.iters_pretrain);
    j.at("iters_per_stage").get_to(c.iters_per_stage);
    j.at("batch_size").get_to(c.batch_size);
    j.at("seed").get_to(c.seed);
    j.at("use_hopfield").get_to(c.use_hopfield);
    j.at("use_curriculum").get_to(c.use_curriculum);
    j.at("freeze_memory").get_to(c.freeze_memory);
    j.at("mean_reduce").get_to(c.mean_reduce);
    j.at("model").get_to(c.model);
}

double poly_lr(double base, long iter, long total, double power) {
    if (total <= 0) return 0.0;
    const double frac = std::clamp(1.0 - static_cast<double>(iter) / static_cast<double>(total), 0.0, 1.0);
    return base * std::pow(frac, power);
}

void Sgd::step(std::span<model::ParamRef> params, std::span<const Matrix> grads, double lr) {
    if (velocity_.empty()) {
        for (const auto& p : params) velocity_.emplace_back(p.value->rows, p.value->cols);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].trainable) continue;
        std::vector<double>& w = params[i].value->data;
        std::vector<double>& v = velocity_[i].data;
        const std::vector<double>& g = grads[i].data;
        for (std::size_t e = 0; e < w.size(); ++e) {
            v[e] = momentum_ * v[e] + g[e] + weight_decay_ * w[e];
            w[e] -= lr * v[e];
        }
    }
}

Sample prepare(const std::string& id, const Image& image, const model::ModelConfig& config, bool keep_labels) {
    Sample s;
    s.id = id;
    s.pixels = resize_bilinear(image.pixels, config.input_h, config.input_w);
    if (keep_labels) {
        if (!image.labels) throw InvalidInput("sample " + id + " has no labels");
        s.labels = resize_nearest(*image.labels, config.input_h, config.input_w);
    }
    return s;
}

std::string to_string(Phase p) {
    switch (p) {
        case Phase::pretrain: return "pretrain";
        case Phase::adapt: return "adapt";
        case Phase::done: return "done";
    }
    return "unknown";
}

namespace {

Phase parse_phase(const std::string& s) {
    if (s == "pretrain") return Phase::pretrain;
    if (s == "adapt") return Phase::adapt;
    if (s == "done") return Phase::done;
    throw IoError("unknown phase '" + s + "' in checkpoint");
}

}  // namespace

nlohmann::json to_json(const MetricRecord& r, bool mean_reduce) {
    nlohmann::json j = {{"phase", to_string(r.phase)},
                        {"stage", r.stage},
                        {"iter", r.iter},
                        {"l_ce", r.loss.l_ce},
                        {"l_adv_seg", r.loss.l_adv_seg},
                        {"l_adv_d", r.loss.l_adv_d},
                        {"total", r.loss.total},
                        {"lr", r.lr},
                        {"lr_disc", r.lr_disc}};
    if (mean_reduce && r.locations > 0) {
        j["l_ce_mean"] = r.loss.l_ce / r.locations;
        j["l_adv_seg_mean"] = r.loss.l_adv_seg / r.locations;
        j["l_adv_d_mean"] = r.loss.l_adv_d / r.locations;
    }
    return j;
}

RunState initial_state(const TrainConfig& config) {
    config.validate();
    RunState s;
    s.config = config;
    const model::ModelConfig mc = config.resolved_model();
    s.seg = model::SegModel::create(mc, derive_seed(config.seed, "model"));
    s.disc = model::Discriminator::create(mc, derive_seed(config.seed, "discriminator"));
    s.rng = Rng(derive_seed(config.seed, "trainer"));
    s.seg_opt = Sgd(config.momentum, config.weight_decay);
    s.disc_opt = Sgd(config.momentum, config.weight_decay);
    s.checkpoint_id = "seed" + std::to_string(config.seed) + "-init";
    return s;
}

// ---- checkpoints -----------------------------------------------------------------

namespace {

nlohmann::json param_table(std::span<const model::ConstParamRef> params) {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& p : params) t.push_back({{"name", p.name}, {"rows", p.value->rows}, {"cols", p.value->cols}});
    return t;
}

void check_table(const nlohmann::json& table, std::span<const model::ConstParamRef> params) {
    if (table.size() != params.size()) throw IoError("checkpoint parameter table does not match the architecture");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (table[i].at("name") != params[i].name || table[i].at("rows") != params[i].value->rows ||
            table[i].at("cols") != params[i].value->cols) {
            throw IoError("checkpoint parameter " + params[i].name + " has an unexpected shape");
        }
    }
}

nlohmann::json summaries_to_json(const std::vector<StageSummary>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& s : v) {
        a.push_back({{"stage", s.stage},
                     {"target_images", s.target_images},
                     {"fake_source_images", s.fake_source_images},
                     {"mean_l_ce", s.mean_l_ce},
                     {"mean_l_adv_seg", s.mean_l_adv_seg},
                     {"mean_l_adv_d", s.mean_l_adv_d}});
    }
    return a;
}

}  // namespace

void save_checkpoint(const RunState& st, const std::filesystem::path& path) {
    const auto seg_params = st.seg.params();
    const auto disc_params = st.disc.params();
    nlohmann::json fake_ids = nlohmann::json::array();
    int fh = 0, fw = 0;
    for (const auto& m : st.fake_source.members) {
        fake_ids.push_back(m.id);
        fh = m.pseudo_label.h;
        fw = m.pseudo_label.w;
    }
    const model::ModelConfig mc = st.seg.config();
    nlohmann::json header = {
        {"format", "ahocda-checkpoint/1"},
        {"model", mc},
        {"train", st.config},
        {"seed", st.config.seed},
        {"phase", to_string(st.phase)},
        {"stage", st.stage},
        {"iter", st.iter},
        {"rng_state", st.rng.state()},
        {"checkpoint_id", st.checkpoint_id},
        {"memory_frozen", st.seg.memory() ? st.seg.memory()->frozen : false},
        {"seg_params", param_table(seg_params)},
        {"disc_params", param_table(disc_params)},
        {"seg_velocity", !st.seg_opt.velocity().empty()},
        {"disc_velocity", !st.disc_opt.velocity().empty()},
        {"fake_source", {{"stage", st.fake_source.stage}, {"provenance", st.fake_source.provenance}, {"ids", fake_ids},
                         {"h", fh}, {"w", fw}}},
        {"stages", summaries_to_json(st.stages)}};

    std::vector<std::span<const double>> arrays;
    for (const auto& p : seg_params) arrays.emplace_back(p.value->data);
    for (const auto& p : disc_params) arrays.emplace_back(p.value->data);
    for (const auto& v : st.seg_opt.velocity()) arrays.emplace_back(v.data);
    for (const auto& v : st.disc_opt.velocity()) arrays.emplace_back(v.data);
    std::vector<double> labels;
    for (const auto& m : st.fake_source.members) labels.insert(labels.end(), m.pseudo_label.data.begin(), m.pseudo_label.data.end());
    arrays.emplace_back(labels);
    blob::write(path, header, arrays);
}

RunState load_checkpoint(const std::filesystem::path& path) {
    blob::Blob b = blob::read(path);
    RunState st;
    try {
        const auto& h = b.header;
        if (h.at("format") != "ahocda-checkpoint/1") throw IoError("unsupported checkpoint format in " + path.string());
        TrainConfig cfg = h.at("train").get<TrainConfig>();
        st = initial_state(cfg);
        const model::ModelConfig mc = h.at("model").get<model::ModelConfig>();
        if (!(mc == cfg.resolved_model())) {
            // Adaptation may run on a model whose architecture differs from the
            // train config (e.g. an ablation reusing a checkpoint).
            st.seg = model::SegModel::create(mc, 0);
            st.disc = model::Discriminator::create(mc, 0);
        }
        if (h.at("memory_frozen").get<bool>()) st.seg.freeze_memory();
        st.phase = parse_phase(h.at("phase"));
        st.stage = h.at("stage");
        st.iter = h.at("iter");
        st.rng.set_state(h.at("rng_state").get<std::uint64_t>());
        st.checkpoint_id = h.at("checkpoint_id");

        auto seg_params = st.seg.params();
        auto disc_params = st.disc.params();
        const auto seg_c = std::as_const(st.seg).params();
        const auto disc_c = std::as_const(st.disc).params();
        check_table(h.at("seg_params"), seg_c);
        check_table(h.at("disc_params"), disc_c);

        blob::PayloadReader r(b.payload);
        for (auto& p : seg_params) r.take(p.value->data);
        for (auto& p : disc_params) r.take(p.value->data);
        if (h.at("seg_velocity").get<bool>()) {
            st.seg_opt.velocity() = model::zeros_like(seg_c);
            for (auto& v : st.seg_opt.velocity()) r.take(v.data);
        }
        if (h.at("disc_velocity").get<bool>()) {
            st.disc_opt.velocity() = model::zeros_like(disc_c);
            for (auto& v : st.disc_opt.velocity()) r.take(v.data);
        }
        const auto& fs = h.at("fake_source");
        st.fake_source.stage = fs.at("stage");
        st.fake_source.provenance = fs.at("provenance");
        const int fh = fs.at("h"), fw = fs.at("w");
        for (const auto& id : fs.at("ids")) {
            curriculum::FakeSourceMember m{id.get<std::string>(), LabelMap(fh, fw)};
            std::vector<double> tmp(m.pseudo_label.data.size());
            r.take(tmp);
            for (std::size_t i = 0; i < tmp.size(); ++i) m.pseudo_label.data[i] = static_cast<int>(tmp[i]);
            st.fake_source.members.push_back(std::move(m));
        }
        if (!r.exhausted()) throw IoError("checkpoint has trailing data: " + path.string());
        for (const auto& s : h.at("stages")) {
            st.stages.push_back({s.at("stage"), s.at("target_images"), s.at("fake_source_images"), s.at("mean_l_ce"),
                                 s.at("mean_l_adv_seg"), s.at("mean_l_adv_d")});
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed checkpoint header in " + path.string() + ": " + e.what());
    }
    return st;
}

// ---- training loop ---------------------------------------------------------------

namespace {

void check_finite(double v, const RunState& st, const char* what) {
    if (!std::isfinite(v)) {
        throw NumericError(std::string("divergence: non-finite ") + what + " in phase " + to_string(st.phase) +
                           ", stage " + std::to_string(st.stage) + ", iteration " + std::to_string(st.iter));
    }
}

double squared_norm(const std::vector<Matrix>& grads) {
    double sum = 0.0;
    for (const auto& g : grads)
        for (double v : g.data) sum += v * v;
    return sum;
}

void pretrain_step(RunState& st, const std::vector<Sample>& source, const RunOptions& opt) {
    auto params = st.seg.params();
    auto grads = model::zeros_like(std::as_const(st.seg).params());
    double l_ce = 0.0;
    int locations = 0;
    for (int b = 0; b < st.config.batch_size; ++b) {
        const Sample& s = source[st.rng.below(source.size())];
        model::SegCache cache;
        const Tensor probs = st.seg.forward(s.pixels, &cache);
        l_ce += model::ce_loss(probs, *s.labels);
        st.seg.backward(cache, model::ce_loss_grad(probs, *s.labels), grads);
        locations += probs.h * probs.w;
    }
    check_finite(l_ce, st, "cross-entropy");
    check_finite(squared_norm(grads), st, "gradient");
    const double lr = poly_lr(st.config.lr_seg, st.iter, st.config.iters_pretrain, st.config.poly_power);
    st.seg_opt.step(params, grads, lr);
    if (opt.on_metric) {
        opt.on_metric({Phase::pretrain, 0, st.iter, model::total_loss(l_ce, 0.0, 0.0, st.config.lambda_adv), lr, 0.0,
                       locations});
    }
}

struct AdaptContext {
    curriculum::Curriculum curriculum;
    std::unordered_map<std::string, const Sample*> compound;
    long total = 0;
};

AdaptContext make_context(const RunState& st, const TrainingData& data) {
    AdaptContext ctx;
    const int k = st.config.effective_k();
    if (data.curriculum.k == k) {
        ctx.curriculum = data.curriculum;
    } else {
        std::vector<curriculum::RankedImage> all = data.curriculum.ordered;
        all.insert(all.end(), data.curriculum.dropped.begin(), data.curriculum.dropped.end());
        ctx.curriculum = curriculum::build_curriculum(std::move(all), k);
    }
    for (const Sample& s : data.compound) {
        if (s.labels) throw InvalidInput("compound sample " + s.id + " carries labels into the trainer");
        ctx.compound.emplace(s.id, &s);
    }
    for (const auto& r : ctx.curriculum.ordered) {
        if (!ctx.compound.count(r.id)) throw InvalidInput("curriculum image " + r.id + " is not in the compound set");
    }
    ctx.total = static_cast<long>(k) * st.config.iters_per_stage;
    return ctx;
}

void enter_stage(RunState& st, const AdaptContext& ctx) {
    const auto ids = curriculum::fake_source_ids(ctx.curriculum, st.stage);
    st.checkpoint_id = "seed" + std::to_string(st.config.seed) + "-adapt-s" + std::to_string(st.stage) + "-i" +
                       std::to_string(st.iter);
    auto lookup = [&](const std::string& id) -> const Tensor& { return ctx.compound.at(id)->pixels; };
    st.fake_source = curriculum::materialize_fake_source(st.stage, ids, lookup, st.seg, st.checkpoint_id);
    st.stages.push_back({st.stage, ctx.curriculum.stages[st.stage - 1].size(), ids.size(), 0.0, 0.0, 0.0});
}

void adapt_step(RunState& st, const TrainingData& data, const AdaptContext& ctx, const RunOptions& opt) {
    const TrainConfig& cfg = st.config;
    const auto& stage_ids = ctx.curriculum.stages[st.stage - 1];
    auto seg_params = st.seg.params();
    auto disc_params = st.disc.params();
    auto seg_grads = model::zeros_like(std::as_const(st.seg).params());
    auto disc_grads = model::zeros_like(std::as_const(st.disc).params());
    auto scratch = model::zeros_like(std::as_const(st.disc).params());

    double l_ce = 0.0, l_adv_seg = 0.0, l_adv_d = 0.0;
    int locations = 0;
    std::vector<std::pair<Tensor, Tensor>> detached;  // (labeled probs, target probs)
    for (int b = 0; b < cfg.batch_size; ++b) {
        const std::size_t pool = data.source.size() + st.fake_source.members.size();
        const std::size_t li = st.rng.below(pool);
        const Tensor* lx;
        const LabelMap* ly;
        if (li < data.source.size()) {
            lx = &data.source[li].pixels;
            ly = &*data.source[li].labels;
        } else {
            const auto& m = st.fake_source.members[li - data.source.size()];
            lx = &ctx.compound.at(m.id)->pixels;
            ly = &m.pseudo_label;
        }
        const Tensor& tx = ctx.compound.at(stage_ids[st.rng.below(stage_ids.size())])->pixels;

        // Segmentation step: l_ce(S_hat) + lambda * l_adv_seg(T), D held fixed.
        model::SegCache cs, ct;
        model::DiscCache dt;
        const Tensor ps = st.seg.forward(*lx, &cs);
        const Tensor pt = st.seg.forward(tx, &ct);
        const Tensor d_tgt = st.disc.forward(pt, &dt);
        l_ce += model::ce_loss(ps, *ly);
        l_adv_seg += model::adv_loss_seg(d_tgt);
        st.seg.backward(cs, model::ce_loss_grad(ps, *ly), seg_grads);
        Tensor g = model::adv_loss_seg_grad(d_tgt);
        for (double& v : g.data) v *= cfg.lambda_adv;
        const Tensor d_pt = st.disc.backward(dt, g, scratch, true);
        st.seg.backward(ct, d_pt, seg_grads);
        locations += ps.h * ps.w;
        detached.emplace_back(ps, pt);
    }
    check_finite(l_ce + l_adv_seg, st, "segmentation loss");
    check_finite(squared_norm(seg_grads), st, "segmentation gradient");
    const double lr = poly_lr(cfg.lr_seg, st.iter, ctx.total, cfg.poly_power);
    st.seg_opt.step(seg_params, seg_grads, lr);

    // Discriminator step on the detached predictions.
    for (const auto& [ps, pt] : detached) {
        model::DiscCache ds, dt;
        const Tensor d_src = st.disc.forward(ps, &ds);
        const Tensor d_tgt = st.disc.forward(pt, &dt);
        l_adv_d += model::adv_loss_disc(d_tgt, d_src);
        auto [g_t, g_s] = model::adv_loss_disc_grad(d_tgt, d_src);
        st.disc.backward(dt, g_t, disc_grads, false);
        st.disc.backward(ds, g_s, disc_grads, false);
    }
    check_finite(l_adv_d, st, "discriminator loss");
    check_finite(squared_norm(disc_grads), st, "discriminator gradient");
    const double lr_d = poly_lr(cfg.lr_disc, st.iter, ctx.total, cfg.poly_power);
    st.disc_opt.step(disc_params, disc_grads, lr_d);

    StageSummary& sum = st.stages.back();
    const double n = static_cast<double>(st.iter % cfg.iters_per_stage + 1);
    sum.mean_l_ce += (l_ce - sum.mean_l_ce) / n;
    sum.mean_l_adv_seg += (l_adv_seg - sum.mean_l_adv_seg) / n;
    sum.mean_l_adv_d += (l_adv_d - sum.mean_l_adv_d) / n;

    if (opt.on_metric) {
        opt.on_metric({Phase::adapt, st.stage, st.iter, model::total_loss(l_ce, l_adv_seg, l_adv_d, cfg.lambda_adv), lr,
                       lr_d, locations});
    }
}

void begin_adapt(RunState& st) {
    st.phase = Phase::adapt;
    st.stage = 0;
    st.iter = 0;
    if (st.config.freeze_memory) st.seg.freeze_memory();
    st.seg_opt = Sgd(st.config.momentum, st.config.weight_decay);
    st.disc_opt = Sgd(st.config.momentum, st.config.weight_decay);
    st.fake_source = {};
    st.stages.clear();
    st.checkpoint_id = "seed" + std::to_string(st.config.seed) + "-pretrained";
}

}  // namespace

bool run(RunState& st, const TrainingData& data, const RunOptions& opt) {
    long budget = opt.stop_after.value_or(-1);
    auto spend = [&]() {
        if (budget == 0) return false;
        if (budget > 0) --budget;
        return true;
    };

    if (st.phase == Phase::pretrain) {
        if (st.config.iters_pretrain > 0 && data.source.empty()) throw ParameterError("pretraining needs source images");
        for (const Sample& s : data.source) {
            if (!s.labels) throw InvalidInput("source sample " + s.id + " has no labels");
        }
        while (st.iter < st.config.iters_pretrain) {
            if (!spend()) return false;
            pretrain_step(st, data.source, opt);
            ++st.iter;
        }
        if (opt.on_pretrain_end) opt.on_pretrain_end(st);
        begin_adapt(st);
    }

    if (st.phase == Phase::adapt) {
        const AdaptContext ctx = make_context(st, data);
        const int per = st.config.iters_per_stage;
        while (st.iter < ctx.total) {
            if (!spend()) return false;
            const int stage = static_cast<int>(st.iter / per) + 1;
            if (st.stage != stage || st.fake_source.stage != stage) {
                st.stage = stage;
                enter_stage(st, ctx);
            }
            adapt_step(st, data, ctx, opt);
            ++st.iter;
            if (st.iter % per == 0 && opt.on_stage_end) opt.on_stage_end(st);
        }
        st.phase = Phase::done;
        st.checkpoint_id = "seed" + std::to_string(st.config.seed) + "-done";
    }
    return true;
}

model::SegModel pretrain(const TrainConfig& config, const std::vector<Sample>& source, const MetricSink& sink) {
    RunState st = initial_state(config);
    if (source.empty()) throw ParameterError("pretraining needs a non-empty labeled source set");
    for (const Sample& s : source) {
        if (!s.labels) throw InvalidInput("source sample " + s.id + " has no labels");
    }
    RunOptions opt;
    opt.on_metric = sink;
    while (st.iter < config.iters_pretrain) {
        pretrain_step(st, source, opt);
        ++st.iter;
    }
    return st.seg;
}

AdaptResult adapt(const TrainConfig& config, const model::SegModel& pretrained, const TrainingData& data,
                  const MetricSink& sink) {
    if (!pretrained.initialized()) throw StateError("adapt needs an initialized pretrained model");
    RunState st = initial_state(config);
    st.seg = pretrained;
    if (!(pretrained.config() == config.resolved_model())) {
        st.disc = model::Discriminator::create(pretrained.config(), derive_seed(config.seed, "discriminator"));
    }
    begin_adapt(st);
    RunOptions opt;
    opt.on_metric = sink;
    run(st, data, opt);
    return {std::move(st.seg), std::move(st.disc), std::move(st.stages)};
}

model::IouResult evaluate(const model::SegModel& seg, const std::vector<Sample>& labeled, int num_classes) {
    model::IouAccumulator acc(num_classes);
    for (const Sample& s : labeled) {
        if (!s.labels) throw InvalidInput("evaluation sample " + s.id + " has no labels");
        acc.add(seg.predict(s.pixels), *s.labels);
    }
    return acc.result();
}

std::vector<std::string> ablation_configurations() {
    return {"source-only", "w/o-curr", "w/o-hopf", "full", "no-freeze"};
}

std::vector<AblationRow> ablation_suite(const TrainConfig& config, const TrainingData& data,
                                        const std::vector<EvalDomain>& domains,
                                        const std::function<void(const std::string&)>& progress) {
    config.validate();
    TrainConfig base = config;
    base.use_hopfield = true;
    base.use_curriculum = true;
    base.freeze_memory = true;

    std::vector<AblationRow> rows;
    auto record = [&](const std::string& name, const model::SegModel& seg) {
        for (const EvalDomain& d : domains) {
            rows.push_back({name, d.name, evaluate(seg, d.samples, seg.config().num_classes).mean});
        }
    };
    auto announce = [&](const std::string& name) {
        if (progress) progress(name);
    };

    announce("source-only");
    const model::SegModel pretrained = pretrain(base, data.source);
    record("source-only", pretrained);

    announce("w/o-curr");
    TrainConfig no_curr = base;
    no_curr.use_curriculum = false;
    record("w/o-curr", adapt(no_curr, pretrained, data).seg);

    announce("w/o-hopf");
    TrainConfig no_hopf = base;
    no_hopf.use_hopfield = false;
    record("w/o-hopf", adapt(no_hopf, pretrain(no_hopf, data.source), data).seg);

    announce("full");
    record("full", adapt(base, pretrained, data).seg);

    announce("no-freeze");
    TrainConfig no_freeze = base;
    no_freeze.freeze_memory = false;
    record("no-freeze", adapt(no_freeze, pretrained, data).seg);
    return rows;
}

}  // namespace ahocda::trainer
