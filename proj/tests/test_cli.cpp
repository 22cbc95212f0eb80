#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "prunekit/kernels.hpp"
#include "prunekit/mask.hpp"
#include "prunekit/model.hpp"
#include "prunekit/train.hpp"
#include "support.hpp"

using json = nlohmann::json;
using namespace prunekit;
using testsupport::TempDir;

#ifndef PRUNEKIT_CLI_PATH
#error "PRUNEKIT_CLI_PATH must name the CLI binary"
#endif

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

CliResult run_cli(const std::string& args, const TempDir& dir) {
    const std::string out_file = dir.file("cli_stdout");
    const std::string err_file = dir.file("cli_stderr");
    const std::string cmd =
        std::string(PRUNEKIT_CLI_PATH) + " " + args + " >" + out_file + " 2>" + err_file;
    const int rc = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

// Writes the shared toy classifier to disk and returns its paths.
struct ModelFiles {
    std::string manifest;
    std::string weights;
};

ModelFiles write_toy(const TempDir& dir) {
    ModelGraph m = testsupport::toy_classifier(3, 4, 4, 8, 12, 4);
    init_weights(m, 1);
    ModelFiles f{dir.file("model.json"), dir.file("model.bin")};
    save_model(m, f.manifest, f.weights);
    return f;
}

bool starts_with(const std::string& text, const std::string& prefix) {
    return text.rfind(prefix, 0) == 0;
}

}  // namespace

TEST_CASE("--version prints the toolkit version and exits cleanly") {
    TempDir dir;
    const CliResult r = run_cli("--version", dir);
    CHECK(r.code == 0);
    CHECK(r.out == std::string(kToolkitVersion) + "\n");
}

TEST_CASE("usage errors exit with code 2") {
    TempDir dir;
    CHECK(run_cli("", dir).code == 2);                             // missing subcommand
    CHECK(run_cli("flops", dir).code == 2);                        // missing required options
    CHECK(run_cli("definitely-not-a-subcommand", dir).code == 2);  // unknown name
    CHECK(run_cli("gpu-hours --nodes 1 --gpus-per-node 1 --hours 1 --bogus", dir).code == 2);
}

TEST_CASE("flops reports totals as JSON, CSV, or into a file") {
    TempDir dir;
    const ModelFiles f = write_toy(dir);
    const std::string base = "flops --model " + f.manifest + " --weights " + f.weights;

    const CliResult r = run_cli(base, dir);
    REQUIRE(r.code == 0);
    const json report = json::parse(r.out);
    CHECK(report.at("command") == "flops");
    CHECK(report.at("toolkit_version") == kToolkitVersion);
    CHECK(report.at("config_hash").get<std::string>().size() == 16);

    // Cross-check the totals against the library.
    const ModelGraph m = load_model(f.manifest, f.weights);
    const FlopsReport flops = model_flops(m);
    CHECK(report.at("total_macs").get<std::uint64_t>() == flops.total);
    CHECK(report.at("prunable_macs").get<std::uint64_t>() == flops.prunable_total);
    CHECK(report.at("per_layer").size() == m.layers.size());

    // Determinism: identical invocations produce identical bytes.
    CHECK(run_cli(base, dir).out == r.out);

    // CSV mode carries the config preamble and the fixed header.
    const CliResult csv = run_cli(base + " --csv", dir);
    REQUIRE(csv.code == 0);
    CHECK(starts_with(csv.out, "# command=flops\n"));
    CHECK(csv.out.find("\n# toolkit_version=") != std::string::npos);
    CHECK(csv.out.find("\n# config_hash=") != std::string::npos);
    CHECK(csv.out.find("\nkind,name,macs,effective_macs\n") != std::string::npos);

    // -o writes the same report to a file and keeps stdout quiet.
    const CliResult to_file = run_cli(base + " -o " + dir.file("flops.json"), dir);
    CHECK(to_file.code == 0);
    CHECK(to_file.out.empty());
    CHECK(json::parse(slurp(dir.file("flops.json"))) == report);

    CHECK(run_cli("flops --model " + dir.file("nope.json") + " --weights " + f.weights, dir)
              .code == 2);
}

TEST_CASE("prune writes a mask and model pair and validates its inputs") {
    TempDir dir;
    const ModelFiles f = write_toy(dir);
    const std::string mask_path = dir.file("mask.json");
    const std::string base = "prune --model " + f.manifest + " --weights " + f.weights;

    const CliResult r = run_cli(base + " --method uniform --sparsity 0.5 --out-mask " + mask_path +
                                    " --out-model " + dir.file("pruned.json") + " --out-weights " +
                                    dir.file("pruned.bin"),
                                dir);
    REQUIRE(r.code == 0);
    const json report = json::parse(r.out);
    CHECK(report.at("method") == "uniform_magnitude");
    CHECK(report.at("overall_prunable_sparsity").get<double>() == doctest::Approx(0.5).epsilon(0.01));

    // The saved artifacts agree with the library's own view.
    const SparsityMask mask = load_mask(mask_path);
    const ModelGraph pruned = load_model(dir.file("pruned.json"), dir.file("pruned.bin"));
    for (const auto& [name, bits] : mask.per_layer) {
        const auto w = pruned.weight_span(pruned.layer(name));
        for (std::size_t i = 0; i < bits.size(); ++i)
            if (bits[i] == 0) CHECK(w[i] == 0.0f);
    }

    // Block mode records the block shape in the mask artifact.
    const CliResult blk =
        run_cli(base + " --method block --sparsity 0.25 --out-mask " + dir.file("bm.json"), dir);
    REQUIRE(blk.code == 0);
    const SparsityMask bmask = load_mask(dir.file("bm.json"));
    REQUIRE(bmask.block_shape.has_value());
    CHECK(bmask.block_shape->first == 1);
    CHECK(bmask.block_shape->second == 4);

    CHECK(run_cli(base + " --method uniform --sparsity 2", dir).code == 2);
    CHECK(run_cli(base + " --method uniform", dir).code == 2);  // no sparsity or target
    CHECK(run_cli(base + " --method uniform --sparsity 0.5 --target-mflops 1", dir).code == 2);
    CHECK(run_cli(base + " --method nonsense --sparsity 0.5", dir).code == 2);
}

TEST_CASE("solve handles closed-form, inversion, and model modes") {
    TempDir dir;
    const CliResult cf = run_cli(
        "solve --seed-mflops 1181.6 --target-mflops 557.0 --prunable-mflops 984.8", dir);
    REQUIRE(cf.code == 0);
    const json cf_report = json::parse(cf.out);
    CHECK(cf_report.at("mode") == "closed_form");
    CHECK(cf_report.at("sparsity").get<double>() ==
          doctest::Approx((1181.6 - 557.0) / 984.8).epsilon(1e-12));

    const CliResult inv =
        run_cli("solve --seed-mflops 1181.6 --target-mflops 689.2 --sparsity 0.5", dir);
    REQUIRE(inv.code == 0);
    const json inv_report = json::parse(inv.out);
    CHECK(inv_report.at("mode") == "invert");
    CHECK(inv_report.at("prunable_mflops").get<double>() ==
          doctest::Approx((1181.6 - 689.2) / 0.5).epsilon(1e-9));

    // Infeasible: the target exceeds the dense seed cost.
    CHECK(run_cli("solve --seed-mflops 500 --target-mflops 600 --prunable-mflops 400", dir).code ==
          3);

    // Model mode achieves the MAC target exactly or just under.
    const ModelFiles f = write_toy(dir);
    const ModelGraph m = load_model(f.manifest, f.weights);
    const double total_mflops = static_cast<double>(model_flops(m).total) / 1e6;
    const double target = total_mflops * 0.7;
    const CliResult mm = run_cli("solve --model " + f.manifest + " --weights " + f.weights +
                                     " --method global --target-mflops " + std::to_string(target) +
                                     " --out-mask " + dir.file("solved_mask.json"),
                                 dir);
    REQUIRE(mm.code == 0);
    const json mm_report = json::parse(mm.out);
    CHECK(mm_report.at("mode") == "model");
    CHECK(mm_report.at("achieved_mflops").get<double>() <= target + 1e-9);

    const SparsityMask solved = load_mask(dir.file("solved_mask.json"));
    const FlopsReport effective = model_flops(m, &solved);
    REQUIRE(effective.effective_total.has_value());
    CHECK(static_cast<double>(*effective.effective_total) / 1e6 ==
          doctest::Approx(mm_report.at("achieved_mflops").get<double>()).epsilon(1e-12));
}

TEST_CASE("finetune trains on synthetic data and saves its artifacts") {
    TempDir dir;
    const ModelFiles f = write_toy(dir);
    const std::string mask_path = dir.file("mask.json");
    REQUIRE(run_cli("prune --model " + f.manifest + " --weights " + f.weights +
                        " --method uniform --sparsity 0.5 --out-mask " + mask_path,
                    dir)
                .code == 0);

    const std::string cmd = "finetune --model " + f.manifest + " --weights " + f.weights +
                            " --mask " + mask_path +
                            " --synth-classes 4 --synth-n 120 --synth-channels 3"
                            " --synth-height 4 --synth-width 4 --train-n 90 --val-n 30"
                            " --lr 0.05 --max-epochs 3 --tol 1e-12 --seed 5"
                            " --out-model " + dir.file("ft.json") +
                            " --out-weights " + dir.file("ft.bin") +
                            " --history " + dir.file("hist.csv");
    const CliResult r = run_cli(cmd, dir);
    REQUIRE(r.code == 0);
    const json report = json::parse(r.out);
    CHECK(report.at("epochs_run") == 3);
    CHECK(report.at("stop_reason") == "max_epochs");
    CHECK(report.contains("initial"));
    CHECK(report.contains("final"));

    CHECK(starts_with(slurp(dir.file("hist.csv")),
                      "epoch,train_loss,val_loss,smoothed_val_loss,top1\n"));
    const ModelGraph ft = load_model(dir.file("ft.json"), dir.file("ft.bin"));
    const SparsityMask mask = load_mask(mask_path);
    for (const auto& [name, bits] : mask.per_layer) {
        const auto w = ft.weight_span(ft.layer(name));
        for (std::size_t i = 0; i < bits.size(); ++i)
            if (bits[i] == 0) CHECK(w[i] == 0.0f);
    }

    // Reruns are reproducible artifact for artifact.
    const std::string first_weights = slurp(dir.file("ft.bin"));
    const std::string first_hist = slurp(dir.file("hist.csv"));
    REQUIRE(run_cli(cmd, dir).code == 0);
    CHECK(slurp(dir.file("ft.bin")) == first_weights);
    CHECK(slurp(dir.file("hist.csv")) == first_hist);

    // Synthetic options are required when no IDX files are given.
    CHECK(run_cli("finetune --model " + f.manifest + " --weights " + f.weights, dir).code == 2);
}

TEST_CASE("bench cross-checks kernels and reports exact MAC counts") {
    TempDir dir;
    const std::string base =
        "bench --rows 8 --cols 16 --batch 4 --sparsity 0.5 --warmup 1 --iters 3 --seed 3";
    const CliResult r = run_cli(base + " --backend scalar", dir);
    REQUIRE(r.code == 0);
    const json report = json::parse(r.out);
    CHECK(report.at("backend") == "scalar");
    REQUIRE(report.at("results").size() == 2);
    const json& dense = report.at("results")[0];
    const json& sparse = report.at("results")[1];
    CHECK(dense.at("kernel") == "dense_s8");
    CHECK(sparse.at("kernel") == "bsr_1x4");
    CHECK(dense.at("mac_count").get<std::uint64_t>() == 8ull * 16 * 4);
    // Half the 1x4 blocks survive 50% block pruning: 16 of 32.
    CHECK(sparse.at("mac_count").get<std::uint64_t>() == 4ull * 16 * 4);
    CHECK(report.contains("median_speedup"));

    const CliResult csv = run_cli(base + " --backend scalar --csv", dir);
    REQUIRE(csv.code == 0);
    CHECK(csv.out.find("\nkernel,rows,cols,batch,sparsity,mac_count,median_ns,mad_ns\n") !=
          std::string::npos);
    CHECK(csv.out.find("\ndense_s8,8,16,4,") != std::string::npos);
    CHECK(csv.out.find("\nbsr_1x4,8,16,4,") != std::string::npos);

    if (kernels::backend_available(kernels::Backend::kAvx2)) {
        CHECK(run_cli(base + " --backend avx2", dir).code == 0);
    }
    CHECK(run_cli(base + " --backend mips", dir).code == 2);
    CHECK(run_cli("bench --rows 0 --cols 16 --batch 4", dir).code == 2);
}

TEST_CASE("sensitivity probes layers and dumps mask patterns") {
    TempDir dir;
    const ModelFiles f = write_toy(dir);
    const std::string base = "sensitivity --model " + f.manifest + " --weights " + f.weights +
                             " --synth-classes 4 --synth-n 60 --synth-channels 3"
                             " --synth-height 4 --synth-width 4 --seed 9";

    const CliResult r = run_cli(base + " --sparsity 0.9", dir);
    REQUIRE(r.code == 0);
    const json report = json::parse(r.out);
    CHECK(report.at("sparsity_used") == 0.9);
    REQUIRE(report.at("per_layer").size() == 2);
    CHECK(report.at("per_layer")[0].at("layer") == "pw1");
    CHECK(report.at("by_role").contains("pw"));

    const CliResult csv = run_cli(base + " --sparsity 0.9 --csv", dir);
    REQUIRE(csv.code == 0);
    CHECK(csv.out.find("# baseline_top1=") != std::string::npos);
    CHECK(csv.out.find("\nlayer,role,top1\n") != std::string::npos);

    // Pattern mode reads a saved mask instead of probing.
    const std::string mask_path = dir.file("mask.json");
    REQUIRE(run_cli("prune --model " + f.manifest + " --weights " + f.weights +
                        " --method uniform --sparsity 0.5 --out-mask " + mask_path,
                    dir)
                .code == 0);
    const CliResult pat = run_cli(base + " --pattern --mask " + mask_path + " --csv", dir);
    REQUIRE(pat.code == 0);
    CHECK(pat.out.find("\nlayer,depth_index,role,sparsity\n") != std::string::npos);
    CHECK(run_cli(base + " --pattern", dir).code == 2);  // pattern without a mask
}

TEST_CASE("gpu-hours multiplies out and reports speedups") {
    TempDir dir;
    const CliResult r = run_cli("gpu-hours --nodes 14 --gpus-per-node 8 --hours 20", dir);
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).at("gpu_hours").get<double>() == doctest::Approx(2240.0));

    const CliResult sp = run_cli(
        "gpu-hours --nodes 14 --gpus-per-node 8 --hours 20 --baseline-gpu-hours 10700", dir);
    REQUIRE(sp.code == 0);
    CHECK(json::parse(sp.out).at("speedup").get<double>() ==
          doctest::Approx(10700.0 / 2240.0).epsilon(1e-12));

    CHECK(run_cli("gpu-hours --nodes 0 --gpus-per-node 8 --hours 20", dir).code == 2);
}

TEST_CASE("pipeline runs end to end and reruns byte-identically") {
    TempDir dir;
    const ModelFiles f = write_toy(dir);
    const std::string out_dir = dir.file("run");
    const json cfg = {
        {"seed", 7},
        {"out_dir", out_dir},
        {"model", {{"manifest", f.manifest}, {"weights", f.weights}}},
        {"data",
         {{"synth",
           {{"classes", 4}, {"n", 120}, {"channels", 3}, {"height", 4}, {"width", 4},
            {"train_n", 90}, {"val_n", 30}}}}},
        {"prune", {{"method", "uniform"}, {"sparsity", 0.5}}},
        {"finetune", {{"learning_rate", 0.05}, {"max_epochs", 2}, {"convergence_tol", 1e-12}}},
    };
    const std::string cfg_path = dir.file("pipeline.json");
    {
        std::ofstream out(cfg_path);
        out << cfg.dump(2) << "\n";
    }

    const CliResult r = run_cli("pipeline --config " + cfg_path, dir);
    REQUIRE(r.code == 0);
    const json report = json::parse(r.out);
    CHECK(report.at("command") == "pipeline");
    CHECK(report.at("epochs_run") == 2);

    const std::vector<std::string> artifacts = {"mask.json",      "pruned.json",  "pruned.bin",
                                                "finetuned.json", "finetuned.bin", "history.csv",
                                                "report.json",    "artifacts.json"};
    std::map<std::string, std::string> first;
    for (const std::string& name : artifacts) {
        const std::string body = slurp(out_dir + "/" + name);
        CHECK(!body.empty());
        first[name] = body;
    }
    CHECK(json::parse(first.at("report.json")) == report);
    CHECK(json::parse(first.at("artifacts.json")).at("artifacts").size() == 7);

    REQUIRE(run_cli("pipeline --config " + cfg_path, dir).code == 0);
    for (const std::string& name : artifacts) CHECK(slurp(out_dir + "/" + name) == first.at(name));

    // A different seed changes the run but keeps the artifact set intact.
    REQUIRE(run_cli("pipeline --config " + cfg_path + " --seed 8", dir).code == 0);
    CHECK(slurp(out_dir + "/finetuned.bin") != first.at("finetuned.bin"));

    // Config validation failures surface as usage errors.
    {
        std::ofstream out(dir.file("bad.json"));
        out << "{\"seed\": 1}\n";
    }
    CHECK(run_cli("pipeline --config " + dir.file("bad.json"), dir).code == 2);
}
