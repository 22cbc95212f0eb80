// prunekit: FLOPs-targeted magnitude pruning, masked fine-tuning, and int8
// block-sparse inference benchmarking behind one reproducible CLI.
//
// Exit codes: 0 success, 2 usage/validation error, 3 infeasible FLOPs target,
// 4 runtime/numeric failure. Every report embeds the toolkit version, the
// effective configuration, and its hash; artifact files carry the same pair.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "prunekit/analysis.hpp"
#include "prunekit/bench.hpp"
#include "prunekit/block_sparse.hpp"
#include "prunekit/common.hpp"
#include "prunekit/dataset.hpp"
#include "prunekit/kernels.hpp"
#include "prunekit/mask.hpp"
#include "prunekit/model.hpp"
#include "prunekit/prune.hpp"
#include "prunekit/quant.hpp"
#include "prunekit/solver.hpp"
#include "prunekit/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace prunekit;

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

void atomic_write_text(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot write " + path.string());
        out << content;
    }
    fs::rename(tmp, path);
}

void atomic_save_model(const ModelGraph& model, const fs::path& manifest, const fs::path& weights,
                       const ModelMeta& meta) {
    if (manifest.has_parent_path()) fs::create_directories(manifest.parent_path());
    if (weights.has_parent_path()) fs::create_directories(weights.parent_path());
    const fs::path mtmp = manifest.string() + ".tmp";
    const fs::path wtmp = weights.string() + ".tmp";
    save_model(model, mtmp.string(), wtmp.string(), meta);
    fs::rename(mtmp, manifest);
    fs::rename(wtmp, weights);
}

void atomic_save_mask(const SparsityMask& mask, const fs::path& path,
                      const std::string& config_hash) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    save_mask(mask, tmp.string(), config_hash);
    fs::rename(tmp, path);
}

json base_report(const std::string& command, const json& config) {
    json report;
    report["command"] = command;
    report["toolkit_version"] = kToolkitVersion;
    report["config"] = config;
    report["config_hash"] = fnv1a64_hex(config.dump());
    return report;
}

std::string csv_preamble(const json& report) {
    std::ostringstream out;
    out << "# command=" << report.at("command").get<std::string>() << "\n";
    out << "# toolkit_version=" << kToolkitVersion << "\n";
    out << "# config_hash=" << report.at("config_hash").get<std::string>() << "\n";
    out << "# config=" << report.at("config").dump() << "\n";
    return out.str();
}

// JSON to stdout (or a file) by default; --csv swaps in the command's
// tabular rendering, prefixed with the config echo as comment lines.
void emit_report(const json& report, const std::string& out_path, bool csv,
                 const std::function<std::string(const json&)>& to_csv) {
    std::string text;
    if (csv) {
        text = csv_preamble(report) + to_csv(report);
    } else {
        text = report.dump(2) + "\n";
    }
    if (out_path.empty()) {
        std::cout << text;
    } else {
        atomic_write_text(out_path, text);
    }
}

// ---------------------------------------------------------------- datasets

struct DataArgs {
    std::string train_images, train_labels, val_images, val_labels;
    std::string images, labels;  // single-set commands (sensitivity)
    int synth_classes = 0;
    std::int64_t synth_n = 0;
    int synth_channels = 1, synth_height = 8, synth_width = 8;
    float synth_noise = 0.25f;
    std::int64_t train_n = 0, val_n = 0;
};

void add_synth_options(CLI::App* cmd, DataArgs& args) {
    cmd->add_option("--synth-classes", args.synth_classes,
                    "Generate a synthetic blob dataset with this many classes");
    cmd->add_option("--synth-n", args.synth_n, "Synthetic sample count");
    cmd->add_option("--synth-channels", args.synth_channels, "Synthetic image channels");
    cmd->add_option("--synth-height", args.synth_height, "Synthetic image height");
    cmd->add_option("--synth-width", args.synth_width, "Synthetic image width");
    cmd->add_option("--synth-noise", args.synth_noise, "Synthetic Gaussian noise stddev");
}

json synth_config(const DataArgs& args) {
    return {{"classes", args.synth_classes},   {"n", args.synth_n},
            {"channels", args.synth_channels}, {"height", args.synth_height},
            {"width", args.synth_width},       {"noise", args.synth_noise}};
}

std::pair<Dataset, Dataset> load_train_val(const DataArgs& args, std::uint64_t seed) {
    const bool idx_mode = !args.train_images.empty();
    const bool synth_mode = args.synth_classes > 0;
    if (idx_mode == synth_mode) {
        throw ValidationError(
            "provide either IDX dataset paths or --synth-classes, not both or neither");
    }
    if (idx_mode) {
        Dataset train = load_idx(args.train_images, args.train_labels);
        Dataset val = load_idx(args.val_images, args.val_labels);
        train.split = "train";
        val.split = "val";
        const int classes = std::max(train.num_classes, val.num_classes);
        train.num_classes = val.num_classes = classes;
        return {std::move(train), std::move(val)};
    }
    if (args.train_n <= 0 || args.val_n <= 0) {
        throw ValidationError("synthetic mode requires --train-n and --val-n");
    }
    const Dataset full = synth_blobs(args.synth_classes, args.synth_n, args.synth_channels,
                                     args.synth_height, args.synth_width, seed, args.synth_noise);
    return split_train_val(full, args.train_n, args.val_n);
}

Dataset load_eval_set(const DataArgs& args, std::uint64_t seed) {
    const bool idx_mode = !args.images.empty();
    const bool synth_mode = args.synth_classes > 0;
    if (idx_mode == synth_mode) {
        throw ValidationError(
            "provide either --images/--labels or --synth-classes, not both or neither");
    }
    if (idx_mode) {
        Dataset ds = load_idx(args.images, args.labels);
        ds.split = "val";
        return ds;
    }
    if (args.synth_n <= 0) throw ValidationError("synthetic mode requires --synth-n");
    Dataset ds = synth_blobs(args.synth_classes, args.synth_n, args.synth_channels,
                             args.synth_height, args.synth_width, seed, args.synth_noise);
    ds.split = "val";
    return ds;
}

json eval_to_json(const EvalResult& ev) {
    return {{"top1", ev.top1}, {"top5", ev.top5}, {"mean_loss", ev.mean_loss}, {"n", ev.n}};
}

// ------------------------------------------------------------------- flops

struct FlopsArgs {
    std::string model, weights, mask, out;
    bool lenient = false, csv = false;
};

void run_flops(const FlopsArgs& args) {
    const json config = {{"model", args.model},
                         {"weights", args.weights},
                         {"mask", args.mask},
                         {"lenient", args.lenient}};
    const ModelGraph model = load_model(args.model, args.weights, !args.lenient);
    SparsityMask mask;
    const bool with_mask = !args.mask.empty();
    if (with_mask) mask = load_mask(args.mask);
    const FlopsReport flops = model_flops(model, with_mask ? &mask : nullptr);

    json report = base_report("flops", config);
    json per_layer = json::array();
    for (std::size_t i = 0; i < flops.per_layer.size(); ++i) {
        json entry = {{"name", flops.per_layer[i].first}, {"macs", flops.per_layer[i].second}};
        if (with_mask) entry["effective_macs"] = flops.effective_per_layer[i].second;
        per_layer.push_back(std::move(entry));
    }
    report["per_layer"] = std::move(per_layer);
    report["total_macs"] = flops.total;
    report["total_mflops"] = macs_to_mflops(flops.total);
    report["prunable_macs"] = flops.prunable_total;
    report["prunable_mflops"] = macs_to_mflops(flops.prunable_total);
    if (flops.effective_total.has_value()) {
        report["effective_macs"] = *flops.effective_total;
        report["effective_mflops"] = macs_to_mflops(*flops.effective_total);
    }

    emit_report(report, args.out, args.csv, [](const json& r) {
        std::ostringstream out;
        out << "kind,name,macs,effective_macs\n";
        for (const json& e : r.at("per_layer")) {
            out << "layer," << e.at("name").get<std::string>() << ","
                << e.at("macs").get<std::uint64_t>() << ",";
            if (e.contains("effective_macs")) out << e.at("effective_macs").get<std::uint64_t>();
            out << "\n";
        }
        out << "total,," << r.at("total_macs").get<std::uint64_t>() << ",";
        if (r.contains("effective_macs")) out << r.at("effective_macs").get<std::uint64_t>();
        out << "\n";
        out << "prunable_total,," << r.at("prunable_macs").get<std::uint64_t>() << ",\n";
        return out.str();
    });
}

// ------------------------------------------------------------------- prune

struct PruneArgs {
    std::string model, weights, method = "uniform";
    double sparsity = -1.0;
    double target_mflops = -1.0;
    std::string out_mask = "mask.json", out_model, out_weights, out;
    bool lenient = false, csv = false;
};

void run_prune(const PruneArgs& args) {
    const bool have_sparsity = args.sparsity >= 0.0;
    const bool have_target = args.target_mflops >= 0.0;
    if (have_sparsity == have_target) {
        throw ValidationError("give exactly one of --sparsity or --target-mflops");
    }
    const json config = {{"model", args.model},
                         {"weights", args.weights},
                         {"method", args.method},
                         {"sparsity", have_sparsity ? json(args.sparsity) : json()},
                         {"target_mflops", have_target ? json(args.target_mflops) : json()},
                         {"out_mask", args.out_mask},
                         {"out_model", args.out_model},
                         {"out_weights", args.out_weights},
                         {"lenient", args.lenient}};
    const std::string config_hash = fnv1a64_hex(config.dump());
    const PruneMethod method = prune_method_from_string(args.method);
    const ModelGraph model = load_model(args.model, args.weights, !args.lenient);

    SparsityMask mask;
    PruneReport prune_report;
    json solver_json;
    if (have_target) {
        // FLOPs targets route through the solver first.
        if (method == PruneMethod::global_magnitude) {
            auto [result, solved_mask] = solve_global(model, args.target_mflops);
            mask = std::move(solved_mask);
            ModelGraph pruned = apply_mask(model, mask);
            prune_report = measure_sparsity(pruned);
            prune_report.method = method;
            prune_report.threshold = result.threshold;
            solver_json = {{"sparsity", result.sparsity},
                           {"threshold", result.threshold},
                           {"achieved_mflops", result.achieved_mflops},
                           {"pruned_weights", result.pruned_weights}};
        } else {
            const FlopsReport dense = model_flops(model);
            FlopsTarget target;
            target.seed_total_mflops = macs_to_mflops(dense.total);
            target.target_total_mflops = args.target_mflops;
            target.prunable_mflops = macs_to_mflops(dense.prunable_total);
            const double s = solve_uniform(target);
            std::tie(mask, prune_report) = method == PruneMethod::uniform_magnitude
                                               ? prune_uniform(model, s)
                                               : prune_block(model, s);
            solver_json = {{"sparsity", s}};
        }
    } else {
        switch (method) {
            case PruneMethod::uniform_magnitude:
                std::tie(mask, prune_report) = prune_uniform(model, args.sparsity);
                break;
            case PruneMethod::global_magnitude:
                std::tie(mask, prune_report) = prune_global(model, args.sparsity);
                break;
            case PruneMethod::block_magnitude:
                std::tie(mask, prune_report) = prune_block(model, args.sparsity);
                break;
        }
    }

    atomic_save_mask(mask, args.out_mask, config_hash);
    if (!args.out_model.empty() || !args.out_weights.empty()) {
        if (args.out_model.empty() || args.out_weights.empty()) {
            throw ValidationError("--out-model and --out-weights must be given together");
        }
        atomic_save_model(apply_mask(model, mask), args.out_model, args.out_weights,
                          {kToolkitVersion, config_hash});
    }

    json report = base_report("prune", config);
    report["method"] = to_string(prune_report.method);
    report["threshold"] = prune_report.threshold;
    report["overall_prunable_sparsity"] = prune_report.overall_prunable_sparsity;
    report["overall_model_sparsity"] = prune_report.overall_model_sparsity;
    json per_layer = json::array();
    for (const auto& [name, s] : prune_report.per_layer_sparsity) {
        per_layer.push_back({{"name", name}, {"sparsity", s}});
    }
    report["per_layer"] = std::move(per_layer);
    if (!solver_json.is_null()) report["solver"] = solver_json;
    if (have_target) {
        const VerifyResult verify = verify_mask_flops(model, mask, args.target_mflops);
        report["verify"] = {{"ok", verify.ok},
                            {"achieved_mflops", verify.achieved_mflops},
                            {"achieved_macs", verify.achieved_macs}};
    }

    emit_report(report, args.out, args.csv, [](const json& r) {
        std::ostringstream out;
        out << "kind,name,value\n";
        for (const json& e : r.at("per_layer")) {
            out << "layer," << e.at("name").get<std::string>() << ","
                << fmt_double(e.at("sparsity").get<double>()) << "\n";
        }
        out << "overall_prunable,," << fmt_double(r.at("overall_prunable_sparsity").get<double>())
            << "\n";
        out << "overall_model,," << fmt_double(r.at("overall_model_sparsity").get<double>())
            << "\n";
        out << "threshold,," << fmt_double(r.at("threshold").get<double>()) << "\n";
        return out.str();
    });
}

// ------------------------------------------------------------------- solve

struct SolveArgs {
    std::string model, weights, method = "uniform", out_mask, out;
    double seed_mflops = -1.0, target_mflops = -1.0, prunable_mflops = -1.0, sparsity = -1.0;
    bool lenient = false, csv = false;
};

void run_solve(const SolveArgs& args) {
    const json config = {{"model", args.model},
                         {"weights", args.weights},
                         {"method", args.method},
                         {"seed_mflops", args.seed_mflops},
                         {"target_mflops", args.target_mflops},
                         {"prunable_mflops", args.prunable_mflops},
                         {"sparsity", args.sparsity},
                         {"out_mask", args.out_mask},
                         {"lenient", args.lenient}};
    json report = base_report("solve", config);

    if (args.model.empty()) {
        // Closed-form modes over scalar totals.
        if (args.sparsity >= 0.0) {
            if (args.seed_mflops < 0.0 || args.target_mflops < 0.0) {
                throw ValidationError("inversion needs --seed-mflops, --target-mflops, --sparsity");
            }
            report["prunable_mflops"] =
                invert_prunable_mflops(args.seed_mflops, args.target_mflops, args.sparsity);
            report["mode"] = "invert";
        } else {
            if (args.seed_mflops < 0.0 || args.target_mflops < 0.0 || args.prunable_mflops < 0.0) {
                throw ValidationError(
                    "closed-form solve needs --seed-mflops, --target-mflops, --prunable-mflops");
            }
            FlopsTarget target;
            target.seed_total_mflops = args.seed_mflops;
            target.target_total_mflops = args.target_mflops;
            target.prunable_mflops = args.prunable_mflops;
            report["sparsity"] = solve_uniform(target);
            report["mode"] = "closed_form";
        }
    } else {
        if (args.target_mflops < 0.0) throw ValidationError("model mode needs --target-mflops");
        const ModelGraph model = load_model(args.model, args.weights, !args.lenient);
        const PruneMethod method = prune_method_from_string(args.method);
        report["mode"] = "model";
        report["method"] = args.method;
        if (method == PruneMethod::global_magnitude) {
            auto [result, mask] = solve_global(model, args.target_mflops);
            report["sparsity"] = result.sparsity;
            report["threshold"] = result.threshold;
            report["achieved_mflops"] = result.achieved_mflops;
            report["pruned_weights"] = result.pruned_weights;
            json per_layer = json::array();
            for (const auto& [name, s] : result.per_layer_sparsity) {
                per_layer.push_back({{"name", name}, {"sparsity", s}});
            }
            report["per_layer"] = std::move(per_layer);
            if (!args.out_mask.empty()) {
                atomic_save_mask(mask, args.out_mask, report["config_hash"].get<std::string>());
            }
        } else if (method == PruneMethod::uniform_magnitude) {
            const FlopsReport dense = model_flops(model);
            FlopsTarget target;
            target.seed_total_mflops = macs_to_mflops(dense.total);
            target.target_total_mflops = args.target_mflops;
            target.prunable_mflops = macs_to_mflops(dense.prunable_total);
            const double s = solve_uniform(target);
            report["sparsity"] = s;
            auto [mask, prune_report] = prune_uniform(model, s);
            (void)prune_report;
            const VerifyResult verify = verify_mask_flops(model, mask, args.target_mflops);
            report["achieved_mflops"] = verify.achieved_mflops;
            if (!args.out_mask.empty()) {
                atomic_save_mask(mask, args.out_mask, report["config_hash"].get<std::string>());
            }
        } else {
            throw ValidationError("solve supports the uniform and global methods");
        }
    }

    emit_report(report, args.out, args.csv, [](const json& r) {
        std::ostringstream out;
        out << "kind,name,value\n";
        for (const char* key : {"sparsity", "threshold", "achieved_mflops", "prunable_mflops"}) {
            if (r.contains(key)) out << key << ",," << fmt_double(r.at(key).get<double>()) << "\n";
        }
        if (r.contains("per_layer")) {
            for (const json& e : r.at("per_layer")) {
                out << "layer," << e.at("name").get<std::string>() << ","
                    << fmt_double(e.at("sparsity").get<double>()) << "\n";
            }
        }
        return out.str();
    });
}

// ---------------------------------------------------------------- finetune

struct FinetuneArgs {
    std::string model, weights, mask;
    std::string out_model = "finetuned.json", out_weights = "finetuned.bin";
    std::string history = "history.csv", out;
    DataArgs data;
    TrainConfig train;
    std::uint64_t seed = 0;
    bool lenient = false, csv = false;
};

json train_config_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate},
            {"momentum", c.momentum},
            {"weight_decay", c.weight_decay},
            {"batch_size", c.batch_size},
            {"max_epochs", c.max_epochs},
            {"convergence_tol", c.convergence_tol},
            {"smoothing_alpha", c.smoothing_alpha}};
}

void run_finetune(const FinetuneArgs& args) {
    json config = {{"model", args.model},       {"weights", args.weights},
                   {"mask", args.mask},         {"out_model", args.out_model},
                   {"out_weights", args.out_weights}, {"history", args.history},
                   {"seed", args.seed},         {"lenient", args.lenient},
                   {"train", train_config_json(args.train)}};
    if (args.data.synth_classes > 0) config["synth"] = synth_config(args.data);
    const std::string config_hash = fnv1a64_hex(config.dump());

    const ModelGraph model = load_model(args.model, args.weights, !args.lenient);
    SparsityMask mask;
    const bool with_mask = !args.mask.empty();
    if (with_mask) mask = load_mask(args.mask);
    auto [train_set, val_set] = load_train_val(args.data, args.seed);

    const EvalResult before = evaluate(with_mask ? apply_mask(model, mask) : model, val_set);
    TrainOutcome outcome =
        finetune(model, with_mask ? &mask : nullptr, train_set, val_set, args.train, args.seed);
    const EvalResult after = evaluate(outcome.model, val_set);

    atomic_save_model(outcome.model, args.out_model, args.out_weights,
                      {kToolkitVersion, config_hash});
    save_history_csv(outcome.history, args.history);

    json report = base_report("finetune", config);
    report["initial"] = eval_to_json(before);
    report["final"] = eval_to_json(after);
    report["epochs_run"] = outcome.history.epochs.size();
    report["best_epoch"] = outcome.history.best_epoch;
    report["stop_reason"] = outcome.history.stop_reason;

    emit_report(report, args.out, args.csv, [](const json& r) {
        std::ostringstream out;
        out << "metric,value\n";
        out << "initial_top1," << fmt_double(r.at("initial").at("top1").get<double>()) << "\n";
        out << "final_top1," << fmt_double(r.at("final").at("top1").get<double>()) << "\n";
        out << "final_top5," << fmt_double(r.at("final").at("top5").get<double>()) << "\n";
        out << "final_mean_loss," << fmt_double(r.at("final").at("mean_loss").get<double>())
            << "\n";
        out << "epochs_run," << r.at("epochs_run").get<std::uint64_t>() << "\n";
        out << "best_epoch," << r.at("best_epoch").get<int>() << "\n";
        out << "stop_reason," << r.at("stop_reason").get<std::string>() << "\n";
        return out.str();
    });
}

// ------------------------------------------------------------------- bench

struct BenchArgs {
    std::string model, weights, layer, kernel = "both", backend = "auto", out;
    int rows = 256, cols = 256, batch = 64;
    double sparsity = 0.6;
    int warmup = 3, iters = 20;
    std::uint64_t seed = 0;
    bool lenient = false, csv = false;
};

kernels::Backend backend_from_string(const std::string& s) {
    if (s == "auto") return kernels::Backend::kAuto;
    if (s == "scalar") return kernels::Backend::kScalar;
    if (s == "avx2") return kernels::Backend::kAvx2;
    throw ValidationError("unknown backend '" + s + "' (auto, scalar, avx2)");
}

void run_bench(const BenchArgs& args) {
    if (args.kernel != "dense" && args.kernel != "sparse" && args.kernel != "both") {
        throw ValidationError("--kernel must be dense, sparse, or both");
    }
    const kernels::Backend backend = kernels::resolve_backend(backend_from_string(args.backend));

    int rows = args.rows, cols = args.cols;
    std::vector<float> wf;
    std::mt19937_64 rng(args.seed);
    if (!args.model.empty()) {
        const ModelGraph model = load_model(args.model, args.weights, !args.lenient);
        if (args.layer.empty()) throw ValidationError("--layer is required with --model");
        const LayerSpec& layer = model.layer(args.layer);
        const bool pointwise =
            layer.op_kind == OpKind::linear ||
            (layer.op_kind == OpKind::conv2d && layer.kernel_h == 1 && layer.kernel_w == 1 &&
             layer.groups == 1);
        if (!pointwise) {
            throw ValidationError("layer '" + args.layer +
                                  "' is not a pointwise or linear layer; bench needs an "
                                  "(out x in) weight matrix");
        }
        rows = static_cast<int>(layer.out_channels);
        cols = static_cast<int>(layer.in_channels);
        const auto span = model.weight_span(layer);
        wf.assign(span.begin(), span.end());
    } else {
        if (rows <= 0 || cols <= 0) throw ValidationError("--rows and --cols must be positive");
        wf.resize(static_cast<std::size_t>(rows) * cols);
        std::uniform_real_distribution<float> wdist(-1.0f, 1.0f);
        for (float& v : wf) v = wdist(rng);
    }
    if (args.batch <= 0) throw ValidationError("--batch must be positive");

    const json config = {{"model", args.model},     {"weights", args.weights},
                         {"layer", args.layer},     {"kernel", args.kernel},
                         {"backend", args.backend}, {"rows", rows},
                         {"cols", cols},            {"batch", args.batch},
                         {"sparsity", args.sparsity}, {"warmup", args.warmup},
                         {"iters", args.iters},     {"seed", args.seed}};

    // Activation sample in [0,1] doubles as the benchmark input.
    std::vector<float> xf(static_cast<std::size_t>(cols) * args.batch);
    std::uniform_real_distribution<float> adist(0.0f, 1.0f);
    for (float& v : xf) v = adist(rng);

    auto [qm, params] = quantize_layer(wf, rows, cols, xf);
    const std::vector<std::int8_t> qx = quantize_activations(xf, params);

    // The sparse operand is the block-pruned matrix; dense runs the full one.
    ModelGraph holder;
    holder.name = "bench";
    LayerSpec spec;
    spec.name = "w";
    spec.op_kind = OpKind::linear;
    spec.in_channels = cols;
    spec.out_channels = rows;
    spec.weight_len = static_cast<std::int64_t>(rows) * cols;
    spec.prunable = true;
    holder.layers.push_back(spec);
    holder.weights = wf;
    const auto [mask, prune_report] = prune_block(holder, args.sparsity);
    (void)prune_report;
    const BlockSparseMatrix bsr = to_block_sparse(qm.values, rows, cols, mask.per_layer.at("w"));

    // Cross-check once against the masked dense product before timing.
    std::vector<std::int8_t> masked = qm.values;
    const std::vector<std::uint8_t>& bits = mask.per_layer.at("w");
    for (std::size_t i = 0; i < masked.size(); ++i) {
        if (bits[i] == 0) masked[i] = 0;
    }
    std::vector<std::int32_t> ref(static_cast<std::size_t>(rows) * args.batch);
    std::vector<std::int32_t> out(ref.size());
    kernels::gemm_s8_s32(masked, rows, cols, qx, args.batch, ref, kernels::Backend::kScalar);
    kernels::bsr_spmm_s8_s32(bsr, qx, args.batch, out, backend);
    if (ref != out) throw NumericError("sparse kernel output diverged from the dense reference");

    json results = json::array();
    auto record = [&](const std::string& kernel_name, std::uint64_t macs, auto&& fn) {
        const LatencyStats stats = benchmark_kernel(fn, macs, args.warmup, args.iters);
        results.push_back({{"kernel", kernel_name},
                           {"rows", rows},
                           {"cols", cols},
                           {"batch", args.batch},
                           {"sparsity", args.sparsity},
                           {"mac_count", stats.mac_count},
                           {"median_ns", stats.median_ns},
                           {"mad_ns", stats.mad_ns},
                           {"gmacs_per_sec", stats.gmacs_per_sec()}});
    };
    if (args.kernel != "sparse") {
        record("dense_s8", kernels::gemm_mac_count(rows, cols, args.batch), [&]() {
            kernels::gemm_s8_s32(qm.values, rows, cols, qx, args.batch, out, backend);
        });
    }
    if (args.kernel != "dense") {
        record("bsr_1x4", kernels::bsr_mac_count(bsr, args.batch), [&]() {
            kernels::bsr_spmm_s8_s32(bsr, qx, args.batch, out, backend);
        });
    }

    json report = base_report("bench", config);
    report["backend"] = kernels::backend_name(backend);
    report["results"] = results;
    if (results.size() == 2) {
        const double dense_ns = results[0].at("median_ns").get<double>();
        const double sparse_ns = results[1].at("median_ns").get<double>();
        if (sparse_ns > 0.0) report["median_speedup"] = dense_ns / sparse_ns;
    }

    emit_report(report, args.out, args.csv, [](const json& r) {
        std::ostringstream out;
        out << "kernel,rows,cols,batch,sparsity,mac_count,median_ns,mad_ns\n";
        for (const json& e : r.at("results")) {
            out << e.at("kernel").get<std::string>() << "," << e.at("rows").get<int>() << ","
                << e.at("cols").get<int>() << "," << e.at("batch").get<int>() << ","
                << fmt_double(e.at("sparsity").get<double>()) << ","
                << e.at("mac_count").get<std::uint64_t>() << ","
                << e.at("median_ns").get<std::uint64_t>() << ","
                << e.at("mad_ns").get<std::uint64_t>() << "\n";
        }
        return out.str();
    });
}

// ------------------------------------------------------------- sensitivity

struct SensitivityArgs {
    std::string model, weights, mask, out;
    DataArgs data;
    double sparsity = 0.95;
    std::uint64_t seed = 0;
    bool pattern = false, lenient = false, csv = false;
};

void run_sensitivity(const SensitivityArgs& args) {
    json config = {{"model", args.model},   {"weights", args.weights}, {"mask", args.mask},
                   {"sparsity", args.sparsity}, {"seed", args.seed},   {"pattern", args.pattern},
                   {"lenient", args.lenient}};
    if (args.data.synth_classes > 0) config["synth"] = synth_config(args.data);
    const ModelGraph model = load_model(args.model, args.weights, !args.lenient);

    if (args.pattern) {
        // Per-layer sparsity of an existing mask, in depth order.
        if (args.mask.empty()) throw ValidationError("--pattern requires --mask");
        const SparsityMask mask = load_mask(args.mask);
        const SparsityPattern pattern = sparsity_pattern(mask, model);
        json report = base_report("sensitivity", config);
        json entries = json::array();
        for (const SparsityPatternEntry& e : pattern.entries) {
            entries.push_back({{"layer", e.layer},
                               {"depth_index", e.depth_index},
                               {"role", to_string(e.role)},
                               {"sparsity", e.sparsity}});
        }
        report["pattern"] = std::move(entries);
        emit_report(report, args.out, args.csv, [](const json& r) {
            std::ostringstream out;
            out << "layer,depth_index,role,sparsity\n";
            for (const json& e : r.at("pattern")) {
                out << e.at("layer").get<std::string>() << "," << e.at("depth_index").get<int>()
                    << "," << e.at("role").get<std::string>() << ","
                    << fmt_double(e.at("sparsity").get<double>()) << "\n";
            }
            return out.str();
        });
        return;
    }

    const Dataset eval_set = load_eval_set(args.data, args.seed);
    const SensitivityReport sens = layer_sensitivity(model, eval_set, args.sparsity);
    json report = base_report("sensitivity", config);
    report["baseline_top1"] = sens.baseline_top1;
    report["sparsity_used"] = sens.sparsity_used;
    json per_layer = json::array();
    for (const SensitivityEntry& e : sens.per_layer) {
        per_layer.push_back({{"layer", e.layer}, {"role", to_string(e.role)}, {"top1", e.top1}});
    }
    report["per_layer"] = std::move(per_layer);
    json by_role = json::object();
    for (const auto& [role, q] : sens.by_role) {
        by_role[role] = {
            {"min", q.min}, {"q1", q.q1}, {"median", q.median}, {"q3", q.q3}, {"max", q.max}};
    }
    report["by_role"] = std::move(by_role);

    emit_report(report, args.out, args.csv, [](const json& r) {
        std::ostringstream out;
        out << "# baseline_top1=" << fmt_double(r.at("baseline_top1").get<double>()) << "\n";
        for (const auto& [role, q] : r.at("by_role").items()) {
            out << "# role " << role << ": min=" << fmt_double(q.at("min").get<double>())
                << " q1=" << fmt_double(q.at("q1").get<double>())
                << " median=" << fmt_double(q.at("median").get<double>())
                << " q3=" << fmt_double(q.at("q3").get<double>())
                << " max=" << fmt_double(q.at("max").get<double>()) << "\n";
        }
        out << "layer,role,top1\n";
        for (const json& e : r.at("per_layer")) {
            out << e.at("layer").get<std::string>() << "," << e.at("role").get<std::string>()
                << "," << fmt_double(e.at("top1").get<double>()) << "\n";
        }
        return out.str();
    });
}

// --------------------------------------------------------------- gpu-hours

struct GpuHoursArgs {
    int nodes = 1, gpus_per_node = 1;
    double hours = 0.0, baseline = -1.0;
    std::string out;
    bool csv = false;
};

void run_gpu_hours(const GpuHoursArgs& args) {
    const json config = {{"nodes", args.nodes},
                         {"gpus_per_node", args.gpus_per_node},
                         {"hours", args.hours},
                         {"baseline_gpu_hours", args.baseline}};
    const double total = gpu_hours(args.nodes, args.gpus_per_node, args.hours);
    json report = base_report("gpu-hours", config);
    report["gpu_hours"] = total;
    if (args.baseline >= 0.0) report["speedup"] = speedup(args.baseline, total);

    emit_report(report, args.out, args.csv, [](const json& r) {
        std::ostringstream out;
        out << "metric,value\n";
        out << "gpu_hours," << fmt_double(r.at("gpu_hours").get<double>()) << "\n";
        if (r.contains("speedup")) {
            out << "speedup," << fmt_double(r.at("speedup").get<double>()) << "\n";
        }
        return out.str();
    });
}

// ---------------------------------------------------------------- pipeline

struct PipelineArgs {
    std::string config_path, out_dir_override;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + " is not valid JSON: " + e.what());
    }
}

// One config file reproduces a full prune -> fine-tune -> evaluate run;
// every byte written into out_dir is a deterministic function of the config.
void run_pipeline(const PipelineArgs& args) {
    json cfg = read_json_file(args.config_path);
    if (!cfg.is_object()) throw ValidationError("pipeline config must be a JSON object");
    if (args.seed_given) cfg["seed"] = args.seed;
    if (!args.out_dir_override.empty()) cfg["out_dir"] = args.out_dir_override;
    const std::uint64_t seed = cfg.value("seed", std::uint64_t{0});
    const fs::path out_dir = cfg.value("out_dir", std::string("."));
    const std::string config_hash = fnv1a64_hex(cfg.dump());
    fs::create_directories(out_dir);

    for (const char* key : {"model", "data", "prune"}) {
        if (!cfg.contains(key)) {
            throw ValidationError(std::string("pipeline config is missing the '") + key +
                                  "' section");
        }
    }

    // Model
    const json& mcfg = cfg.at("model");
    const ModelGraph model = load_model(mcfg.at("manifest").get<std::string>(),
                                        mcfg.at("weights").get<std::string>(),
                                        !mcfg.value("lenient", false));

    // Data
    const json& dcfg = cfg.at("data");
    Dataset train_set, val_set;
    if (dcfg.contains("synth")) {
        const json& s = dcfg.at("synth");
        const Dataset full = synth_blobs(s.at("classes").get<int>(),
                                         s.at("n").get<std::int64_t>(), s.value("channels", 1),
                                         s.value("height", 8), s.value("width", 8), seed,
                                         s.value("noise", 0.25f));
        std::tie(train_set, val_set) =
            split_train_val(full, s.at("train_n").get<std::int64_t>(),
                            s.at("val_n").get<std::int64_t>());
    } else if (dcfg.contains("idx")) {
        const json& d = dcfg.at("idx");
        train_set = load_idx(d.at("train_images").get<std::string>(),
                             d.at("train_labels").get<std::string>());
        val_set = load_idx(d.at("val_images").get<std::string>(),
                           d.at("val_labels").get<std::string>());
        const int classes = std::max(train_set.num_classes, val_set.num_classes);
        train_set.num_classes = val_set.num_classes = classes;
    } else {
        throw ValidationError("pipeline data section needs either 'synth' or 'idx'");
    }

    // Prune
    const json& pcfg = cfg.at("prune");
    const PruneMethod method = prune_method_from_string(pcfg.value("method", "uniform"));
    const bool have_sparsity = pcfg.contains("sparsity");
    const bool have_target = pcfg.contains("target_mflops");
    if (have_sparsity == have_target) {
        throw ValidationError("pipeline prune section needs exactly one of sparsity/target_mflops");
    }
    SparsityMask mask;
    double threshold = 0.0;
    if (have_target) {
        const double target_mflops = pcfg.at("target_mflops").get<double>();
        if (method == PruneMethod::global_magnitude) {
            auto [result, solved] = solve_global(model, target_mflops);
            mask = std::move(solved);
            threshold = result.threshold;
        } else {
            const FlopsReport dense = model_flops(model);
            FlopsTarget target;
            target.seed_total_mflops = macs_to_mflops(dense.total);
            target.target_total_mflops = target_mflops;
            target.prunable_mflops = macs_to_mflops(dense.prunable_total);
            const double s = solve_uniform(target);
            auto pruned = method == PruneMethod::uniform_magnitude ? prune_uniform(model, s)
                                                                   : prune_block(model, s);
            mask = std::move(pruned.first);
            threshold = pruned.second.threshold;
        }
    } else {
        const double s = pcfg.at("sparsity").get<double>();
        auto pruned = method == PruneMethod::global_magnitude  ? prune_global(model, s)
                      : method == PruneMethod::uniform_magnitude ? prune_uniform(model, s)
                                                                 : prune_block(model, s);
        mask = std::move(pruned.first);
        threshold = pruned.second.threshold;
    }
    const ModelGraph pruned_model = apply_mask(model, mask);

    // Fine-tune
    TrainConfig train_config;
    if (cfg.contains("finetune")) {
        const json& t = cfg.at("finetune");
        train_config.learning_rate = t.value("learning_rate", train_config.learning_rate);
        train_config.momentum = t.value("momentum", train_config.momentum);
        train_config.weight_decay = t.value("weight_decay", train_config.weight_decay);
        train_config.batch_size = t.value("batch_size", train_config.batch_size);
        train_config.max_epochs = t.value("max_epochs", train_config.max_epochs);
        train_config.convergence_tol = t.value("convergence_tol", train_config.convergence_tol);
        train_config.smoothing_alpha = t.value("smoothing_alpha", train_config.smoothing_alpha);
    }

    const EvalResult baseline_eval = evaluate(model, val_set);
    const EvalResult pruned_eval = evaluate(pruned_model, val_set);
    const FlopsReport flops_before = model_flops(model, &mask);
    TrainOutcome outcome = finetune(pruned_model, &mask, train_set, val_set, train_config, seed);
    const EvalResult final_eval = evaluate(outcome.model, val_set);
    const FlopsReport flops_after = model_flops(outcome.model, &mask);

    // Artifacts
    const ModelMeta meta{kToolkitVersion, config_hash};
    atomic_save_mask(mask, out_dir / "mask.json", config_hash);
    atomic_save_model(pruned_model, out_dir / "pruned.json", out_dir / "pruned.bin", meta);
    atomic_save_model(outcome.model, out_dir / "finetuned.json", out_dir / "finetuned.bin", meta);
    save_history_csv(outcome.history, out_dir / "history.csv");

    json report = base_report("pipeline", cfg);
    report["baseline"] = eval_to_json(baseline_eval);
    report["pruned"] = eval_to_json(pruned_eval);
    report["finetuned"] = eval_to_json(final_eval);
    report["threshold"] = threshold;
    report["epochs_run"] = outcome.history.epochs.size();
    report["best_epoch"] = outcome.history.best_epoch;
    report["stop_reason"] = outcome.history.stop_reason;
    report["flops"] = {{"total_macs", flops_before.total},
                       {"effective_macs_before", *flops_before.effective_total},
                       {"effective_macs_after", *flops_after.effective_total}};
    atomic_write_text(out_dir / "report.json", report.dump(2) + "\n");

    // Manifest of everything produced, with content hashes.
    json artifact_list = json::array();
    for (const char* name :
         {"mask.json", "pruned.json", "pruned.bin", "finetuned.json", "finetuned.bin",
          "history.csv", "report.json"}) {
        std::ifstream in(out_dir / name, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        const std::string bytes = buf.str();
        artifact_list.push_back({{"file", name},
                                 {"bytes", bytes.size()},
                                 {"fnv1a64", fnv1a64_hex(bytes)}});
    }
    json artifacts = {{"toolkit_version", kToolkitVersion},
                      {"config_hash", config_hash},
                      {"artifacts", artifact_list}};
    atomic_write_text(out_dir / "artifacts.json", artifacts.dump(2) + "\n");

    std::cout << report.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "prunekit: magnitude pruning to FLOPs targets, masked fine-tuning, and int8 "
        "block-sparse inference benchmarking"};
    app.set_version_flag("--version", std::string(kToolkitVersion));
    app.require_subcommand(1);

    FlopsArgs flops_args;
    auto* flops_cmd = app.add_subcommand("flops", "Count dense and masked-effective MACs");
    flops_cmd->add_option("--model", flops_args.model, "Model manifest JSON")->required();
    flops_cmd->add_option("--weights", flops_args.weights, "Model weights blob")->required();
    flops_cmd->add_option("--mask", flops_args.mask, "Sparsity mask for effective counts");
    flops_cmd->add_option("-o,--out", flops_args.out, "Write the report here instead of stdout");
    flops_cmd->add_flag("--lenient", flops_args.lenient, "Ignore unknown manifest fields");
    flops_cmd->add_flag("--csv", flops_args.csv, "Emit CSV instead of JSON");
    flops_cmd->callback([&]() { run_flops(flops_args); });

    PruneArgs prune_args;
    auto* prune_cmd = app.add_subcommand("prune", "Compute and apply a magnitude-pruning mask");
    prune_cmd->add_option("--model", prune_args.model, "Model manifest JSON")->required();
    prune_cmd->add_option("--weights", prune_args.weights, "Model weights blob")->required();
    prune_cmd->add_option("--method", prune_args.method, "uniform, global, or block")
        ->check(CLI::IsMember({"uniform", "global", "block"}));
    prune_cmd->add_option("--sparsity", prune_args.sparsity, "Fraction of prunable weights to remove");
    prune_cmd->add_option("--target-mflops", prune_args.target_mflops,
                          "Total-FLOPs budget; the sparsity is solved for");
    prune_cmd->add_option("--out-mask", prune_args.out_mask, "Mask artifact path");
    prune_cmd->add_option("--out-model", prune_args.out_model, "Pruned manifest path");
    prune_cmd->add_option("--out-weights", prune_args.out_weights, "Pruned weights path");
    prune_cmd->add_option("-o,--out", prune_args.out, "Write the report here instead of stdout");
    prune_cmd->add_flag("--lenient", prune_args.lenient, "Ignore unknown manifest fields");
    prune_cmd->add_flag("--csv", prune_args.csv, "Emit CSV instead of JSON");
    prune_cmd->callback([&]() { run_prune(prune_args); });

    SolveArgs solve_args;
    auto* solve_cmd = app.add_subcommand(
        "solve", "Solve for the sparsity that meets a FLOPs target (closed-form or per-model)");
    solve_cmd->add_option("--model", solve_args.model, "Model manifest JSON (model mode)");
    solve_cmd->add_option("--weights", solve_args.weights, "Model weights blob (model mode)");
    solve_cmd->add_option("--method", solve_args.method, "uniform or global (model mode)")
        ->check(CLI::IsMember({"uniform", "global"}));
    solve_cmd->add_option("--seed-mflops", solve_args.seed_mflops, "Dense seed total MFLOPs");
    solve_cmd->add_option("--target-mflops", solve_args.target_mflops, "Target total MFLOPs");
    solve_cmd->add_option("--prunable-mflops", solve_args.prunable_mflops,
                          "MFLOPs of the prunable layers");
    solve_cmd->add_option("--sparsity", solve_args.sparsity,
                          "Known sparsity; inverts for the prunable MFLOPs");
    solve_cmd->add_option("--out-mask", solve_args.out_mask, "Save the solved mask here");
    solve_cmd->add_option("-o,--out", solve_args.out, "Write the report here instead of stdout");
    solve_cmd->add_flag("--lenient", solve_args.lenient, "Ignore unknown manifest fields");
    solve_cmd->add_flag("--csv", solve_args.csv, "Emit CSV instead of JSON");
    solve_cmd->callback([&]() { run_solve(solve_args); });

    FinetuneArgs ft_args;
    auto* ft_cmd = app.add_subcommand("finetune", "Train with a fixed sparsity mask until the "
                                                  "smoothed validation loss converges");
    ft_cmd->add_option("--model", ft_args.model, "Model manifest JSON")->required();
    ft_cmd->add_option("--weights", ft_args.weights, "Model weights blob")->required();
    ft_cmd->add_option("--mask", ft_args.mask, "Sparsity mask (omit for dense training)");
    ft_cmd->add_option("--train-images", ft_args.data.train_images, "IDX training images");
    ft_cmd->add_option("--train-labels", ft_args.data.train_labels, "IDX training labels");
    ft_cmd->add_option("--val-images", ft_args.data.val_images, "IDX validation images");
    ft_cmd->add_option("--val-labels", ft_args.data.val_labels, "IDX validation labels");
    add_synth_options(ft_cmd, ft_args.data);
    ft_cmd->add_option("--train-n", ft_args.data.train_n, "Synthetic training sample count");
    ft_cmd->add_option("--val-n", ft_args.data.val_n, "Synthetic validation sample count");
    ft_cmd->add_option("--lr", ft_args.train.learning_rate, "Learning rate");
    ft_cmd->add_option("--momentum", ft_args.train.momentum, "SGD momentum");
    ft_cmd->add_option("--weight-decay", ft_args.train.weight_decay, "L2 penalty on weights");
    ft_cmd->add_option("--batch-size", ft_args.train.batch_size, "Minibatch size");
    ft_cmd->add_option("--max-epochs", ft_args.train.max_epochs, "Epoch cap");
    ft_cmd->add_option("--tol", ft_args.train.convergence_tol,
                       "Relative smoothed-val-loss change that stops training");
    ft_cmd->add_option("--alpha", ft_args.train.smoothing_alpha, "Validation-loss EMA weight");
    ft_cmd->add_option("--seed", ft_args.seed, "Seed for all randomness in this run");
    ft_cmd->add_option("--out-model", ft_args.out_model, "Fine-tuned manifest path");
    ft_cmd->add_option("--out-weights", ft_args.out_weights, "Fine-tuned weights path");
    ft_cmd->add_option("--history", ft_args.history, "Per-epoch history CSV path");
    ft_cmd->add_option("-o,--out", ft_args.out, "Write the report here instead of stdout");
    ft_cmd->add_flag("--lenient", ft_args.lenient, "Ignore unknown manifest fields");
    ft_cmd->add_flag("--csv", ft_args.csv, "Emit CSV instead of JSON");
    ft_cmd->callback([&]() { run_finetune(ft_args); });

    BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand(
        "bench", "Time the int8 dense and 1x4 block-sparse kernels on one pinned thread");
    bench_cmd->add_option("--model", bench_args.model, "Model manifest (with --layer)");
    bench_cmd->add_option("--weights", bench_args.weights, "Model weights blob");
    bench_cmd->add_option("--layer", bench_args.layer, "Pointwise/linear layer to benchmark");
    bench_cmd->add_option("--rows", bench_args.rows, "Matrix rows (without --model)");
    bench_cmd->add_option("--cols", bench_args.cols, "Matrix cols (without --model)");
    bench_cmd->add_option("--batch", bench_args.batch, "Input columns per invocation");
    bench_cmd->add_option("--sparsity", bench_args.sparsity,
                          "Block sparsity preset; 0.4/0.5/0.6 mirror the studied levels");
    bench_cmd->add_option("--kernel", bench_args.kernel, "dense, sparse, or both")
        ->check(CLI::IsMember({"dense", "sparse", "both"}));
    bench_cmd->add_option("--backend", bench_args.backend, "auto, scalar, or avx2")
        ->check(CLI::IsMember({"auto", "scalar", "avx2"}));
    bench_cmd->add_option("--warmup", bench_args.warmup, "Unmeasured warmup iterations");
    bench_cmd->add_option("--iters", bench_args.iters, "Measured iterations");
    bench_cmd->add_option("--seed", bench_args.seed, "Seed for operand generation");
    bench_cmd->add_option("-o,--out", bench_args.out, "Write the report here instead of stdout");
    bench_cmd->add_flag("--lenient", bench_args.lenient, "Ignore unknown manifest fields");
    bench_cmd->add_flag("--csv", bench_args.csv, "Emit CSV instead of JSON");
    bench_cmd->callback([&]() { run_bench(bench_args); });

    SensitivityArgs sens_args;
    auto* sens_cmd = app.add_subcommand(
        "sensitivity", "Per-layer accuracy after pruning each prunable layer in isolation");
    sens_cmd->add_option("--model", sens_args.model, "Model manifest JSON")->required();
    sens_cmd->add_option("--weights", sens_args.weights, "Model weights blob")->required();
    sens_cmd->add_option("--images", sens_args.data.images, "IDX evaluation images");
    sens_cmd->add_option("--labels", sens_args.data.labels, "IDX evaluation labels");
    add_synth_options(sens_cmd, sens_args.data);
    sens_cmd->add_option("--sparsity", sens_args.sparsity, "Isolated pruning sparsity");
    sens_cmd->add_option("--seed", sens_args.seed, "Seed for synthetic data");
    sens_cmd->add_option("--mask", sens_args.mask, "Mask for --pattern mode");
    sens_cmd->add_flag("--pattern", sens_args.pattern,
                       "Report the per-layer sparsity of --mask instead of probing");
    sens_cmd->add_option("-o,--out", sens_args.out, "Write the report here instead of stdout");
    sens_cmd->add_flag("--lenient", sens_args.lenient, "Ignore unknown manifest fields");
    sens_cmd->add_flag("--csv", sens_args.csv, "Emit CSV instead of JSON");
    sens_cmd->callback([&]() { run_sensitivity(sens_args); });

    PipelineArgs pipe_args;
    auto* pipe_cmd = app.add_subcommand(
        "pipeline", "Run a declarative prune -> fine-tune -> evaluate experiment from a config");
    pipe_cmd->add_option("--config", pipe_args.config_path, "Pipeline config JSON")->required();
    pipe_cmd->add_option("--out-dir", pipe_args.out_dir_override, "Override the config out_dir");
    auto* pipe_seed =
        pipe_cmd->add_option("--seed", pipe_args.seed, "Override the config seed");
    pipe_cmd->callback([&]() {
        pipe_args.seed_given = pipe_seed->count() > 0;
        run_pipeline(pipe_args);
    });

    GpuHoursArgs gpu_args;
    auto* gpu_cmd = app.add_subcommand("gpu-hours",
                                       "nodes x GPUs-per-node x hours, with optional speedup");
    gpu_cmd->add_option("--nodes", gpu_args.nodes, "Node count")->required();
    gpu_cmd->add_option("--gpus-per-node", gpu_args.gpus_per_node, "GPUs per node")->required();
    gpu_cmd->add_option("--hours", gpu_args.hours, "Hours to convergence")->required();
    gpu_cmd->add_option("--baseline-gpu-hours", gpu_args.baseline,
                        "Baseline total for the speedup ratio");
    gpu_cmd->add_option("-o,--out", gpu_args.out, "Write the report here instead of stdout");
    gpu_cmd->add_flag("--csv", gpu_args.csv, "Emit CSV instead of JSON");
    gpu_cmd->callback([&]() { run_gpu_hours(gpu_args); });

    try {
        app.parse(argc, argv);
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InfeasibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
