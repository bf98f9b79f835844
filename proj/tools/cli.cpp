#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "ahocda/error.hpp"
#include "ahocda/pipeline.hpp"
#include "ahocda/selfcheck.hpp"
#include "ahocda/synthdata.hpp"

namespace ahocda::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* const kCommands[] = {"gen", "rank", "train", "eval", "ablate", "selfcheck"};

/// Values that only exist on the command line and are folded into Settings
/// after parsing.
struct Switches {
    bool no_hopfield = false;
    bool no_curriculum = false;
    bool no_freeze = false;
    int input_size = 32;
    std::string resume, checkpoint, curriculum;
    long stop_after = -1;
};

std::unique_ptr<CLI::App> build_app(Settings& s, Switches& sw) {
    auto app = std::make_unique<CLI::App>("Open compound domain adaptation on a synthetic benchmark", "ahocda");
    app->set_config("--config", "", "Key-value config file; flags override its values");
    app->allow_config_extras(CLI::config_extras_mode::error);
    app->require_subcommand(1);

    auto& t = s.train;
    auto& m = t.model;
    app->add_option("--data", s.data_dir, "Dataset directory")->capture_default_str();
    app->add_option("--out", s.out_dir, "Output directory")->capture_default_str();
    app->add_option("--seed", t.seed, "Root seed")->capture_default_str();
    app->add_option("--beta", t.beta, "Low-frequency crop ratio in (0, 1]")->capture_default_str();
    app->add_option("--k", t.k, "Number of curriculum stages")->capture_default_str();
    app->add_option("--lambda-adv", t.lambda_adv, "Adversarial loss weight")->capture_default_str();
    app->add_option("--tau", t.tau, "Hopfield inverse temperature")->capture_default_str();
    app->add_option("--memory-size", t.memory_size, "Number of stored patterns")->capture_default_str();
    app->add_option("--resume", sw.resume, "Continue training from a checkpoint");
    app->add_flag("--no-hopfield", sw.no_hopfield, "Replace the Hopfield layer with identity");
    app->add_flag("--no-curriculum", sw.no_curriculum, "Adapt on all compound images in one stage");
    app->add_flag("--no-freeze", sw.no_freeze, "Keep the memory trainable during adaptation");
    app->add_flag("--mean-reduce", t.mean_reduce, "Add per-location loss means to the metrics stream");

    app->add_option("--lr-seg", t.lr_seg, "Segmentation learning rate")->capture_default_str()->group("Training");
    app->add_option("--lr-disc", t.lr_disc, "Discriminator learning rate")->capture_default_str()->group("Training");
    app->add_option("--poly-power", t.poly_power, "Polynomial decay power")->capture_default_str()->group("Training");
    app->add_option("--momentum", t.momentum, "SGD momentum")->capture_default_str()->group("Training");
    app->add_option("--weight-decay", t.weight_decay, "SGD weight decay")->capture_default_str()->group("Training");
    app->add_option("--iters-pretrain", t.iters_pretrain, "Source pretraining iterations")
        ->capture_default_str()
        ->group("Training");
    app->add_option("--iters-per-stage", t.iters_per_stage, "Adaptation iterations per stage")
        ->capture_default_str()
        ->group("Training");
    app->add_option("--batch-size", t.batch_size, "Image pairs per iteration")->capture_default_str()->group("Training");
    app->add_option("--stop-after", sw.stop_after, "Stop after this many iterations and checkpoint")->group("Training");
    app->add_option("--curriculum", sw.curriculum, "Curriculum JSON written by rank")->group("Training");

    app->add_option("--input-size", sw.input_size, "Model working resolution (square)")
        ->capture_default_str()
        ->group("Model");
    app->add_option("--encoder-channels", m.encoder_channels, "Encoder widths")->capture_default_str()->group("Model");
    app->add_option("--disc-channels", m.disc_channels, "Discriminator widths")->capture_default_str()->group("Model");
    app->add_option("--projection-dim", m.projection_dim, "Hopfield projection width")
        ->capture_default_str()
        ->group("Model");
    app->add_option("--memory-init-gain", m.memory_init_gain, "Hopfield init gain")->capture_default_str()->group("Model");
    app->add_option("--leaky-slope", m.leaky_slope, "Leaky ReLU slope")->capture_default_str()->group("Model");

    app->add_option("--image-size", s.image_size, "Side of generated scenes")->capture_default_str()->group("Data");
    app->add_option("--checkpoint", sw.checkpoint, "Checkpoint to evaluate")->group("Evaluation");
    app->add_flag("--inject-gradient-fault", s.inject_gradient_fault)->group("");

    const std::map<std::string, std::string> help = {
        {"gen", "Generate the synthetic benchmark into --out"},
        {"rank", "Rank compound images by amplitude distance and build the curriculum"},
        {"train", "Pretrain on source, then adapt with the curriculum"},
        {"eval", "Per-domain IoU of a checkpoint"},
        {"ablate", "Component and freeze ablations"},
        {"selfcheck", "Numeric self-checks"},
    };
    for (const char* name : kCommands) {
        auto* sub = app->add_subcommand(name, help.at(name));
        sub->fallthrough();
        sub->callback([&s, name] { s.command = name; });
    }
    return app;
}

void apply(Settings& s, const Switches& sw) {
    s.train.use_hopfield = !sw.no_hopfield;
    s.train.use_curriculum = !sw.no_curriculum;
    s.train.freeze_memory = !sw.no_freeze;
    s.train.model.input_h = sw.input_size;
    s.train.model.input_w = sw.input_size;
    if (!sw.resume.empty()) s.resume = sw.resume;
    if (!sw.checkpoint.empty()) s.checkpoint = sw.checkpoint;
    if (!sw.curriculum.empty()) s.curriculum = sw.curriculum;
    if (sw.stop_after >= 0) s.stop_after = sw.stop_after;
    if (s.image_size < 2) throw ParameterError("image-size must be at least 2");
    s.train.validate();
}

std::string value(const json& v) { return v.dump(); }

/// Shortest round-trip decimal; "nan" for classes absent from an evaluation.
std::string number(double v) { return std::isnan(v) ? "nan" : json(v).dump(); }

std::string list(const std::vector<int>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
    return out + "]";
}

void write_text(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << text;
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void prepare_out(const Settings& s) {
    std::error_code ec;
    fs::create_directories(s.out_dir, ec);
    if (ec || !fs::is_directory(s.out_dir)) throw IoError("cannot create output directory " + s.out_dir.string());
    write_text(s.out_dir / "resolved_config.toml", render(s));
}

void check_classes(const synth::Manifest& m, const trainer::TrainConfig& c) {
    if (m.plan.scene.num_classes != c.model.num_classes) {
        throw ParameterError("dataset has " + std::to_string(m.plan.scene.num_classes) + " classes, model expects " +
                             std::to_string(c.model.num_classes));
    }
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

// ---- commands ----------------------------------------------------------------

int cmd_gen(const Settings& s) {
    auto plan = synth::BenchmarkPlan::defaults();
    plan.scene.seed = s.train.seed;
    plan.scene.height = s.image_size;
    plan.scene.width = s.image_size;
    const auto bench = synth::gen_benchmark(plan);
    prepare_out(s);
    synth::write_benchmark(bench, s.out_dir);
    std::map<synth::Split, int> counts;
    for (const auto& r : bench.records) ++counts[r.split];
    std::cout << "wrote " << bench.records.size() << " images to " << s.out_dir.string() << " (source "
              << counts[synth::Split::source] << ", compound " << counts[synth::Split::compound] << ", open "
              << counts[synth::Split::open] << ")\n";
    return kOk;
}

int cmd_rank(const Settings& s) {
    const auto manifest = synth::read_manifest(s.data_dir);
    const auto splits = pipeline::load(manifest, false);
    auto distances = pipeline::rank(splits.source, splits.compound, s.train.beta);
    const auto cur = curriculum::build_curriculum(distances, s.train.effective_k());
    prepare_out(s);

    std::map<std::string, std::string> path_of;
    for (const auto& e : manifest.split(synth::Split::compound)) path_of[e.id] = e.image.generic_string();
    std::ostringstream csv;
    csv << "path,delta\n";
    auto row = [&](const curriculum::RankedImage& r) { csv << path_of.at(r.id) << ',' << number(r.delta) << '\n'; };
    for (const auto& r : cur.ordered) row(r);
    for (const auto& r : cur.dropped) row(r);
    write_text(s.out_dir / "distances.csv", csv.str());
    write_text(s.out_dir / "curriculum.json", curriculum::to_json(cur, s.train.beta).dump(2) + "\n");
    std::cout << "ranked " << distances.size() << " compound images into " << cur.k << " stages of "
              << cur.stage_size() << "\n";
    return kOk;
}

int cmd_train(const Settings& in) {
    Settings s = in;
    trainer::RunState st =
        s.resume ? trainer::load_checkpoint(*s.resume) : trainer::initial_state(s.train);
    // A resumed run continues with the configuration stored in its checkpoint.
    s.train = st.config;
    const auto manifest = synth::read_manifest(s.data_dir);
    check_classes(manifest, s.train);
    auto data = pipeline::training_data(s.train, pipeline::load(manifest, false));
    if (s.curriculum) {
        std::ifstream f(*s.curriculum);
        if (!f) throw IoError("missing curriculum " + s.curriculum->string());
        json j;
        try {
            j = json::parse(f);
        } catch (const json::exception& e) {
            throw IoError("malformed curriculum " + s.curriculum->string() + ": " + e.what());
        }
        auto cur = curriculum::curriculum_from_json(j);
        if (cur.k != s.train.effective_k()) {
            throw ParameterError("curriculum has K = " + std::to_string(cur.k) + " but the run uses K = " +
                                 std::to_string(s.train.effective_k()));
        }
        data.curriculum = std::move(cur);
    }
    prepare_out(s);

    std::ofstream metrics(s.out_dir / "metrics.jsonl", s.resume ? std::ios::app : std::ios::trunc);
    if (!metrics) throw IoError("cannot write " + (s.out_dir / "metrics.jsonl").string());
    trainer::RunOptions opt;
    opt.on_metric = [&](const trainer::MetricRecord& r) { metrics << trainer::to_json(r, s.train.mean_reduce).dump() << '\n'; };
    opt.stop_after = s.stop_after;
    opt.on_pretrain_end = [&](const trainer::RunState& state) {
        trainer::save_checkpoint(state, s.out_dir / "pretrain.ckpt");
    };
    opt.on_stage_end = [&](const trainer::RunState& state) {
        trainer::save_checkpoint(state, s.out_dir / ("stage" + std::to_string(state.stage) + ".ckpt"));
        const auto& sum = state.stages.back();
        std::cout << "stage " << sum.stage << ": " << sum.target_images << " target, " << sum.fake_source_images
                  << " fake-source, mean l_ce " << fmt(sum.mean_l_ce) << "\n";
    };
    const bool done = trainer::run(st, data, opt);
    metrics.flush();
    if (!metrics) throw IoError("write failed for " + (s.out_dir / "metrics.jsonl").string());
    const fs::path last = s.out_dir / (done ? "final.ckpt" : "stopped.ckpt");
    trainer::save_checkpoint(st, last);
    std::cout << (done ? "finished: " : "stopped: ") << last.string() << "\n";
    return kOk;
}

int cmd_eval(const Settings& in) {
    Settings s = in;
    const fs::path ckpt = s.checkpoint.value_or(s.out_dir / "final.ckpt");
    const trainer::RunState st = trainer::load_checkpoint(ckpt);
    s.train = st.config;
    const auto manifest = synth::read_manifest(s.data_dir);
    check_classes(manifest, s.train);
    const auto splits = pipeline::load(manifest, true);
    const auto k_stage = curriculum::build_curriculum(pipeline::rank(splits.source, splits.compound, s.train.beta),
                                                      s.train.k);
    auto domains = pipeline::eval_domains(s.train, splits, k_stage);

    // Compound + open together, then one domain per hidden shift kind.
    std::vector<trainer::EvalDomain> extra;
    trainer::EvalDomain both{"compound+open", {}};
    for (const auto& d : domains)
        if (d.name == "compound" || d.name == "open") both.samples.insert(both.samples.end(), d.samples.begin(), d.samples.end());
    extra.push_back(std::move(both));
    std::map<std::string, std::string> kind_of;
    for (const auto& [id, shift] : synth::read_sidecar(s.data_dir)) kind_of[id] = synth::to_string(shift.kind);
    std::map<std::string, trainer::EvalDomain> per_kind;
    for (const auto& d : domains) {
        if (d.name != "compound" && d.name != "open") continue;
        for (const auto& sample : d.samples) {
            const auto it = kind_of.find(sample.id);
            if (it == kind_of.end()) continue;
            const std::string name = d.name + ":" + it->second;
            per_kind[name].name = name;
            per_kind[name].samples.push_back(sample);
        }
    }
    for (auto& [name, d] : per_kind) extra.push_back(std::move(d));
    domains.insert(domains.end(), std::make_move_iterator(extra.begin()), std::make_move_iterator(extra.end()));

    prepare_out(s);
    std::ostringstream csv;
    csv << "domain,class,iou\n";
    const int classes = s.train.model.num_classes;
    for (const auto& d : domains) {
        const auto r = trainer::evaluate(st.seg, d.samples, classes);
        for (int c = 0; c < classes; ++c) csv << d.name << ',' << c << ',' << number(r.per_class[c]) << '\n';
        csv << d.name << ",mean," << number(r.mean) << '\n';
        std::cout << d.name << " mIoU " << fmt(r.mean) << " (" << d.samples.size() << " images)\n";
    }
    write_text(s.out_dir / "eval.csv", csv.str());
    return kOk;
}

int cmd_ablate(const Settings& s) {
    const auto manifest = synth::read_manifest(s.data_dir);
    check_classes(manifest, s.train);
    const auto splits = pipeline::load(manifest, true);
    // Training never sees compound labels: training_data drops them.
    const auto data = pipeline::training_data(s.train, splits);
    const auto k_stage = curriculum::build_curriculum(pipeline::rank(splits.source, splits.compound, s.train.beta),
                                                      s.train.k);
    const auto domains = pipeline::eval_domains(s.train, splits, k_stage);
    prepare_out(s);
    const auto rows = trainer::ablation_suite(s.train, data, domains, [](const std::string& name) {
        std::cerr << "running " << name << "\n";
    });
    std::ostringstream csv;
    csv << "configuration,domain,miou\n";
    for (const auto& r : rows) {
        csv << r.configuration << ',' << r.domain << ',' << number(r.miou) << '\n';
        std::cout << r.configuration << ' ' << r.domain << ' ' << fmt(r.miou) << '\n';
    }
    write_text(s.out_dir / "ablation.csv", csv.str());
    return kOk;
}

int cmd_selfcheck(const Settings& s) {
    selfcheck::Options opt;
    opt.seed = s.train.seed;
    opt.inject_gradient_fault = s.inject_gradient_fault;
    const auto results = selfcheck::run(opt);
    for (const auto& r : results) {
        char line[256];
        std::snprintf(line, sizeof line, "%-4s %-22s measured %.3e  tolerance %.3e  ", r.passed ? "PASS" : "FAIL",
                      r.name.c_str(), r.measured, r.tolerance);
        std::cout << line << r.detail << '\n';
    }
    const bool ok = selfcheck::all_passed(results);
    std::cout << (ok ? "all checks passed" : "self-check FAILED") << '\n';
    return ok ? kOk : kRuntime;
}

}  // namespace

Settings parse(const std::vector<std::string>& args) {
    Settings s;
    Switches sw;
    auto app = build_app(s, sw);
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app->parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        std::cout << app->help();
        s.command = "help";
        return s;
    } catch (const CLI::ParseError& e) {
        throw ParameterError(e.what());
    }
    apply(s, sw);
    return s;
}

Settings load_config(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("missing config " + path.string());
    return parse({"ahocda", "--config", path.string(), "selfcheck"});
}

std::string render(const Settings& s) {
    const auto& t = s.train;
    const auto& m = t.model;
    std::ostringstream o;
    o << "# resolved configuration" << (s.command.empty() ? "" : " of ahocda " + s.command) << "\n";
    o << "data = " << value(s.data_dir.string()) << "\n";
    o << "out = " << value(s.out_dir.string()) << "\n";
    o << "seed = " << t.seed << "\n";
    o << "beta = " << value(t.beta) << "\n";
    o << "k = " << t.k << "\n";
    o << "lambda-adv = " << value(t.lambda_adv) << "\n";
    o << "tau = " << value(t.tau) << "\n";
    o << "memory-size = " << t.memory_size << "\n";
    o << "no-hopfield = " << (t.use_hopfield ? "false" : "true") << "\n";
    o << "no-curriculum = " << (t.use_curriculum ? "false" : "true") << "\n";
    o << "no-freeze = " << (t.freeze_memory ? "false" : "true") << "\n";
    o << "mean-reduce = " << (t.mean_reduce ? "true" : "false") << "\n";
    o << "lr-seg = " << value(t.lr_seg) << "\n";
    o << "lr-disc = " << value(t.lr_disc) << "\n";
    o << "poly-power = " << value(t.poly_power) << "\n";
    o << "momentum = " << value(t.momentum) << "\n";
    o << "weight-decay = " << value(t.weight_decay) << "\n";
    o << "iters-pretrain = " << t.iters_pretrain << "\n";
    o << "iters-per-stage = " << t.iters_per_stage << "\n";
    o << "batch-size = " << t.batch_size << "\n";
    o << "input-size = " << m.input_h << "\n";
    o << "encoder-channels = " << list(m.encoder_channels) << "\n";
    o << "disc-channels = " << list(m.disc_channels) << "\n";
    o << "projection-dim = " << m.projection_dim << "\n";
    o << "memory-init-gain = " << value(m.memory_init_gain) << "\n";
    o << "leaky-slope = " << value(m.leaky_slope) << "\n";
    o << "image-size = " << s.image_size << "\n";
    if (s.resume) o << "resume = " << value(s.resume->string()) << "\n";
    if (s.checkpoint) o << "checkpoint = " << value(s.checkpoint->string()) << "\n";
    if (s.curriculum) o << "curriculum = " << value(s.curriculum->string()) << "\n";
    if (s.stop_after) o << "stop-after = " << *s.stop_after << "\n";
    return o.str();
}

int execute(const Settings& s) {
    if (s.command == "help") return kOk;
    if (s.command == "gen") return cmd_gen(s);
    if (s.command == "rank") return cmd_rank(s);
    if (s.command == "train") return cmd_train(s);
    if (s.command == "eval") return cmd_eval(s);
    if (s.command == "ablate") return cmd_ablate(s);
    if (s.command == "selfcheck") return cmd_selfcheck(s);
    throw ParameterError("unknown command '" + s.command + "'");
}

int main(int argc, char** argv) {
    try {
        return execute(parse(std::vector<std::string>(argv, argv + argc)));
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
}

}  // namespace ahocda::cli
