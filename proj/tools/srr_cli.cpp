#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "srr/config.hpp"
#include "srr/dataset.hpp"
#include "srr/error.hpp"
#include "srr/evaluate.hpp"
#include "srr/gradcheck.hpp"
#include "srr/image.hpp"
#include "srr/infer.hpp"
#include "srr/model.hpp"
#include "srr/synth.hpp"
#include "srr/train.hpp"

namespace fs = std::filesystem;
using namespace srr;

namespace {

constexpr double kPublishedFullParams = 53.79e6;

/// Config-file keys exposed as --key flags on a subcommand. Flags given on
/// the command line override the --config file.
struct KeyFlags {
    std::string config_path;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void bind(CLI::App* app, const std::vector<std::string>& keys) {
        app->add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
        for (const auto& k : keys) options[k] = app->add_option("--" + k, values[k]);
    }

    RunConfig resolve() const {
        RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
        for (const auto& [k, opt] : options)
            if (opt->count() > 0) cfg.set(k, values.at(k));
        return cfg;
    }
};

std::string format_count(std::size_t n) {
    std::string digits = std::to_string(n), out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i && (digits.size() - i) % 3 == 0) out += ',';
        out += digits[i];
    }
    return out;
}

void require_path(const std::string& value, const char* flag) {
    if (value.empty()) throw ConfigError(std::string("missing required ") + flag);
}

int run_synth(const RunConfig& cfg) {
    require_path(cfg.out, "--out");
    cfg.synth.validate();
    if (cfg.synth_sequences == 0) throw ConfigError("sequences must be positive");
    for (std::size_t i = 0; i < cfg.synth_sequences; ++i) {
        SynthParams p = cfg.synth;
        p.seed = cfg.synth.seed + i;
        char name[32];
        std::snprintf(name, sizeof name, "synth%03zu", i);
        const Sequence seq = synth_generate(p, name);
        save_sequence(fs::path(cfg.out) / name, seq);
        std::cout << "wrote " << (fs::path(cfg.out) / name).string() << " (" << seq.size() << " frames)\n";
    }
    if (cfg.static_images > 0) {
        const StaticPool pool = synth_static_pool(cfg.synth, cfg.static_images, cfg.static_categories);
        save_static_pool(fs::path(cfg.out) / "static", pool);
        std::cout << "wrote " << (fs::path(cfg.out) / "static").string() << " (" << pool.images.size()
                  << " images)\n";
    }
    return 0;
}

int run_train(const RunConfig& cfg) {
    require_path(cfg.data, "--data");
    require_path(cfg.out, "--out");
    const std::vector<Sequence> videos = load_dataset(cfg.data);
    if (videos.empty()) throw ConfigError("no sequences under " + cfg.data);
    std::optional<StaticPool> pool;
    if (!cfg.pool.empty()) pool = load_static_pool(cfg.pool);

    std::unique_ptr<SrrNet> net =
        cfg.checkpoint.empty() ? std::make_unique<SrrNet>(cfg.model_config(), cfg.seed) : load_model(cfg.checkpoint);

    const auto start = std::chrono::steady_clock::now();
    const std::size_t total = cfg.schedule.pretrain_iters + cfg.schedule.finetune_iters;
    const std::size_t every = std::max<std::size_t>(1, total / 20);
    const auto records = train_model(*net, pool ? &*pool : nullptr, videos, cfg.schedule, [&](const LossRecord& r) {
        if (r.iteration % every == 0 || r.iteration == total) {
            std::printf("%6zu %-8s loss %.6f bce %.6f mse %.6f\n", r.iteration, r.stage.c_str(), r.total, r.bce,
                        r.mse);
            std::fflush(stdout);
        }
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    fs::path out(cfg.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_model(out, *net);
    const fs::path csv = cfg.loss_csv.empty() ? fs::path(cfg.out + ".loss.csv") : fs::path(cfg.loss_csv);
    write_loss_csv(csv, records);
    std::printf("trained %zu iterations in %.1f s; checkpoint %s, losses %s\n", records.size(), secs,
                out.string().c_str(), csv.string().c_str());
    return 0;
}

/// Sequence directories under a data root; a root that is itself a sequence
/// yields one entry.
std::vector<fs::path> input_sequences(const std::string& root) {
    if (fs::exists(fs::path(root) / "00000.ppm")) return {fs::path(root)};
    auto dirs = sequence_dirs(root);
    if (dirs.empty()) throw ConfigError("no sequences under " + root);
    return dirs;
}

int run_infer(const RunConfig& cfg) {
    require_path(cfg.checkpoint, "--checkpoint");
    require_path(cfg.data, "--data");
    require_path(cfg.out, "--out");
    const auto net = load_model(cfg.checkpoint);
    NetPredictor predictor(*net);
    const InferOptions opts{cfg.reference_mode, cfg.seed};
    for (const auto& dir : input_sequences(cfg.data)) {
        const fs::path dst = fs::path(cfg.out) / dir.filename();
        for (const char* sub : {"mask", "prob", "error"}) fs::create_directories(dst / sub);
        DirectoryFrameSource frames(dir);
        const auto results = infer_sequence(frames, predictor, opts, [&](const StepResult& r) {
            const std::string stem = frame_stem(r.frame_index) + ".pgm";
            write_mask(dst / "mask" / stem, r.mask);
            write_error_map(dst / "prob" / stem, r.probability);
            write_error_map(dst / "error" / stem, r.error);
        });
        // labelled inputs get the true MAE column
        std::vector<Tensor> gt;
        for (std::size_t t = 0; t < results.size(); ++t) {
            const fs::path m = dir / (frame_stem(t) + ".pgm");
            if (!fs::exists(m)) {
                gt.clear();
                break;
            }
            gt.push_back(read_mask(m));
        }
        write_score_csv(dst / "scores.csv", score_trace(results, gt));
        std::cout << dir.filename().string() << ": " << results.size() << " frames -> " << dst.string() << "\n";
    }
    return 0;
}

int run_trace_score(const RunConfig& cfg) {
    require_path(cfg.checkpoint, "--checkpoint");
    require_path(cfg.data, "--data");
    require_path(cfg.out, "--out");
    const auto net = load_model(cfg.checkpoint);
    NetPredictor predictor(*net);
    const auto dirs = input_sequences(cfg.data);
    if (dirs.size() != 1) throw ConfigError("trace-score takes a single sequence directory, found " +
                                            std::to_string(dirs.size()));
    DirectoryFrameSource frames(dirs.front());
    const auto results = infer_sequence(frames, predictor, {cfg.reference_mode, cfg.seed});
    std::vector<Tensor> gt;
    if (!cfg.gt.empty()) {
        for (std::size_t t = 0; t < results.size(); ++t) gt.push_back(read_mask(fs::path(cfg.gt) / (frame_stem(t) + ".pgm")));
    }
    const auto rows = score_trace(results, gt);
    fs::path out(cfg.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_score_csv(out, rows);
    std::cout << "wrote " << rows.size() << " rows to " << out.string() << "\n";
    return 0;
}

int run_params(const RunConfig& cfg) {
    const ModelConfig mc = cfg.model_config();
    const SrrNet net(mc, cfg.seed);
    const std::size_t n = count_parameters(net.parameters());
    std::cout << "preset " << cfg.preset << " (" << to_string(mc.attention_mode()) << "): " << format_count(n)
              << " parameters\n";
    if (cfg.preset == "full") {
        const double dev = (static_cast<double>(n) - kPublishedFullParams) / kPublishedFullParams;
        std::printf("published 53.79M; this preset %.2fM (%+.1f%%)\n", static_cast<double>(n) / 1e6, dev * 100.0);
    }
    return 0;
}

struct GradcheckFlags {
    std::size_t size = 32;
    double tolerance = 1e-3;
    std::size_t max_per_tensor = 0;
    bool verbose = false;
};

int run_gradcheck(const RunConfig& cfg, const GradcheckFlags& flags) {
    SrrNet net(cfg.model_config(), cfg.seed);
    GradcheckOptions opts;
    opts.size = flags.size;
    opts.seed = cfg.seed;
    opts.tolerance = flags.tolerance;
    opts.max_elements_per_tensor = flags.max_per_tensor;
    opts.loss = cfg.schedule.loss;
    if (flags.verbose) {
        opts.progress = [](const std::string& name, std::size_t done, std::size_t total) {
            std::fprintf(stderr, "[%zu/%zu] %s\n", done, total, name.c_str());
        };
    }
    const GradcheckReport rep = gradcheck_model(net, opts);
    if (flags.verbose) {
        for (const auto& p : rep.parameters) std::printf("%-48s %8zu  %.3e\n", p.name.c_str(), p.checked, p.max_rel);
    }
    std::printf("gradcheck %s %s: %zu elements over %zu tensors, max rel %.3e (%s), tolerance %.1e, %.1f s: %s\n",
                cfg.preset.c_str(), std::string(to_string(cfg.attention_mode)).c_str(), rep.elements,
                rep.parameters.size(), rep.max_rel, rep.worst.c_str(), rep.tolerance, rep.seconds,
                rep.passed() ? "PASS" : "FAIL");
    return rep.passed() ? 0 : 1;
}

struct EvalFlags {
    std::string pred, gt, out;
    bool allow_missing = false;
    bool flat = false;
};

int run_eval(const EvalFlags& f) {
    const MetricReport rep = evaluate_dataset(f.pred, f.gt, {f.allow_missing});
    for (const auto& m : rep.missing) std::fprintf(stderr, "missing prediction: %s\n", m.c_str());
    std::cout << format_report(rep, f.flat);
    if (!f.out.empty()) write_metrics_csv(f.out, rep);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SRR video camouflaged object detection"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "expand help of every subcommand");
    app.failure_message(CLI::FailureMessage::help);

    const std::vector<std::string> model_keys{"preset", "attention_mode", "share_cross_qkv", "seed"};
    auto with = [](std::vector<std::string> a, const std::vector<std::string>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };

    KeyFlags synth_flags, train_flags, infer_flags, trace_flags, params_flags, grad_flags;

    auto* synth = app.add_subcommand("synth", "write synthetic camouflage sequences");
    synth_flags.bind(synth, {"out", "seed", "appearance_seed", "sequences", "frames", "size", "texture_grain",
                             "contrast", "contrast_variation", "motion_amplitude", "occlusion_prob", "min_radius",
                             "max_radius", "static_images", "static_categories"});

    auto* train = app.add_subcommand("train", "pretrain on stills, fine-tune on video, save a checkpoint");
    train_flags.bind(train, with(model_keys, {"data", "pool", "out", "checkpoint", "loss_csv", "gamma",
                                              "error_target", "pretrain_iters", "finetune_iters", "pretrain_lr",
                                              "finetune_lr", "batch", "weight_decay", "hflip", "crop"}));

    auto* infer = app.add_subcommand("infer", "single-pass inference writing masks, error maps and scores");
    infer_flags.bind(infer, {"checkpoint", "data", "out", "reference_mode", "seed"});

    EvalFlags eval_flags;
    auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
    eval->add_option("--pred", eval_flags.pred, "prediction root")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--gt", eval_flags.gt, "ground-truth root")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--out", eval_flags.out, "per-frame metrics CSV");
    eval->add_flag("--allow-missing", eval_flags.allow_missing, "skip frames without a prediction");
    eval->add_flag("--flat", eval_flags.flat, "report the per-frame mean as the primary aggregate");

    auto* trace = app.add_subcommand("trace-score", "per-frame predicted score (and true MAE) of one sequence");
    trace_flags.bind(trace, {"checkpoint", "data", "gt", "out", "reference_mode", "seed"});

    GradcheckFlags gc;
    auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every parameter gradient");
    grad_flags.bind(grad, with(model_keys, {"gamma", "error_target"}));
    grad->add_option("--size", gc.size, "input extent")->check(CLI::PositiveNumber);
    grad->add_option("--tolerance", gc.tolerance, "max relative error");
    grad->add_option("--max-per-tensor", gc.max_per_tensor, "elements sampled per tensor, 0 = all");
    grad->add_flag("-v,--verbose", gc.verbose, "per-tensor report and progress");

    auto* params = app.add_subcommand("params", "parameter count of a preset");
    params_flags.bind(params, model_keys);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return e.get_exit_code() == 0 ? code : 2;
    }

    try {
        if (synth->parsed()) return run_synth(synth_flags.resolve());
        if (train->parsed()) return run_train(train_flags.resolve());
        if (infer->parsed()) return run_infer(infer_flags.resolve());
        if (eval->parsed()) return run_eval(eval_flags);
        if (trace->parsed()) return run_trace_score(trace_flags.resolve());
        if (grad->parsed()) return run_gradcheck(grad_flags.resolve(), gc);
        if (params->parsed()) return run_params(params_flags.resolve());
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
