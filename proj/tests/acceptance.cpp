// Acceptance gate: every release-blocking property of the toolkit, one
// verdict line each. Tolerances and reference figures are pinned below next
// to the checks that consume them. Exits nonzero if any criterion fails.
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "prunekit/analysis.hpp"
#include "prunekit/block_sparse.hpp"
#include "prunekit/dataset.hpp"
#include "prunekit/kernels.hpp"
#include "prunekit/mask.hpp"
#include "prunekit/model.hpp"
#include "prunekit/prune.hpp"
#include "prunekit/solver.hpp"
#include "prunekit/train.hpp"
#include "support.hpp"

#ifndef PRUNEKIT_CLI_PATH
#error "PRUNEKIT_CLI_PATH must name the CLI binary"
#endif

using namespace prunekit;
using json = nlohmann::json;
using testsupport::ModelBuilder;
using testsupport::TempDir;

namespace {

int g_failures = 0;

void verdict(int idx, bool ok, const char* label) {
    std::printf("[%2d] %s  %s\n", idx, ok ? "PASS" : "FAIL", label);
    if (!ok) ++g_failures;
}

template <typename Fn>
bool guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        std::printf("     unexpected error: %s\n", e.what());
        return false;
    }
}

bool expect(bool cond, const char* what) {
    if (!cond) std::printf("     check failed: %s\n", what);
    return cond;
}

// ------------------------------------------------------------ criteria 1+2
//
// Reference compression schedule for a family of scaled seed models: dense
// cost in MFLOPs, then two observed (target MFLOPs, removed fraction) pairs.
// The F row is internally inconsistent on purpose — its implied prunable
// cost exceeds the whole model — and must be flagged, not silently solved.

struct ScheduleRow {
    const char* seed;
    double dense_mflops;
    double target1, sparsity1;
    double target2, sparsity2;
    bool consistent;
};

constexpr ScheduleRow kSchedule[] = {
    {"C", 557.0, 356.6, 0.407, 461.6, 0.194, true},
    {"D", 644.4, 461.6, 0.3147, 557.0, 0.1504, true},
    {"E", 762.0, 557.0, 0.31, 644.4, 0.178, true},
    {"F", 1181.6, 644.4, 0.382, 762.0, 0.298, false},
    {"G", 2129.7, 762.0, 0.7167, 1181.6, 0.4969, true},
};
constexpr double kScheduleRelTol = 0.005;    // cross-prediction agreement
constexpr double kPrunableShareFloor = 0.80;  // pointwise share of dense cost

bool schedule_row_flagged(const ScheduleRow& row, double target, double sparsity) {
    FlopsTarget t;
    t.seed_total_mflops = row.dense_mflops;
    t.target_total_mflops = target;
    t.prunable_mflops = invert_prunable_mflops(row.dense_mflops, target, sparsity);
    try {
        validate_flops_target(t);
        return false;
    } catch (const InfeasibleError&) {
        return true;
    }
}

bool criterion_solver_consistency() {
    bool ok = true;
    for (const ScheduleRow& row : kSchedule) {
        if (!row.consistent) {
            ok &= expect(schedule_row_flagged(row, row.target1, row.sparsity1),
                         "inconsistent row not flagged (first pair)");
            ok &= expect(schedule_row_flagged(row, row.target2, row.sparsity2),
                         "inconsistent row not flagged (second pair)");
            continue;
        }
        const double implied1 =
            invert_prunable_mflops(row.dense_mflops, row.target1, row.sparsity1);
        const double implied2 =
            invert_prunable_mflops(row.dense_mflops, row.target2, row.sparsity2);
        ok &= expect(!schedule_row_flagged(row, row.target1, row.sparsity1),
                     "consistent row flagged");

        // Each pair must predict the other pair's sparsity via the closed form.
        FlopsTarget from1;
        from1.seed_total_mflops = row.dense_mflops;
        from1.target_total_mflops = row.target2;
        from1.prunable_mflops = implied1;
        const double predicted2 = solve_uniform(from1);
        ok &= expect(std::fabs(predicted2 - row.sparsity2) / row.sparsity2 < kScheduleRelTol,
                     "cross-prediction off (first -> second)");

        FlopsTarget from2;
        from2.seed_total_mflops = row.dense_mflops;
        from2.target_total_mflops = row.target1;
        from2.prunable_mflops = implied2;
        const double predicted1 = solve_uniform(from2);
        ok &= expect(std::fabs(predicted1 - row.sparsity1) / row.sparsity1 < kScheduleRelTol,
                     "cross-prediction off (second -> first)");
    }
    return ok;
}

bool criterion_prunable_share() {
    bool ok = true;
    for (const ScheduleRow& row : kSchedule) {
        if (!row.consistent) continue;
        const double implied1 =
            invert_prunable_mflops(row.dense_mflops, row.target1, row.sparsity1);
        const double implied2 =
            invert_prunable_mflops(row.dense_mflops, row.target2, row.sparsity2);
        ok &= expect(implied1 / row.dense_mflops > kPrunableShareFloor,
                     "prunable share at or below the floor (first pair)");
        ok &= expect(implied2 / row.dense_mflops > kPrunableShareFloor,
                     "prunable share at or below the floor (second pair)");
    }
    return ok;
}

// -------------------------------------------------------------- criterion 3
//
// Selection oracles: stable_sort on the score alone; sort stability realizes
// the positional tie-breaks the library implements explicitly.

std::vector<std::uint8_t> oracle_uniform_layer(std::span<const float> w, double s) {
    const auto n = static_cast<std::int64_t>(w.size());
    const std::int64_t k = std::llround(s * static_cast<double>(n));
    std::vector<std::pair<float, std::int64_t>> mags;
    mags.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
        mags.emplace_back(std::fabs(w[static_cast<std::size_t>(i)]), i);
    std::stable_sort(mags.begin(), mags.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(n), 1);
    for (std::int64_t i = 0; i < k; ++i)
        bits[static_cast<std::size_t>(mags[static_cast<std::size_t>(i)].second)] = 0;
    return bits;
}

SparsityMask oracle_global(const ModelGraph& model, double s) {
    struct Ref {
        float mag;
        const std::string* layer;
        std::int64_t index;
    };
    std::vector<Ref> pool;
    SparsityMask mask;
    for (const LayerSpec& l : model.layers) {
        if (!l.prunable) continue;
        mask.per_layer.emplace(l.name, std::vector<std::uint8_t>(l.weight_len, 1));
        const auto w = model.weight_span(l);
        for (std::int64_t i = 0; i < l.weight_len; ++i)
            pool.push_back({std::fabs(w[static_cast<std::size_t>(i)]), &l.name, i});
    }
    std::stable_sort(pool.begin(), pool.end(),
                     [](const Ref& a, const Ref& b) { return a.mag < b.mag; });
    const std::int64_t k = std::llround(s * static_cast<double>(pool.size()));
    for (std::int64_t i = 0; i < k; ++i) {
        const Ref& r = pool[static_cast<std::size_t>(i)];
        mask.per_layer.at(*r.layer)[static_cast<std::size_t>(r.index)] = 0;
    }
    return mask;
}

std::vector<std::uint8_t> oracle_block_layer(std::span<const float> w, std::int64_t rows,
                                             std::int64_t cols, double s) {
    const std::int64_t per_row = (cols + 3) / 4;
    struct Blk {
        double score;
        std::int64_t row, block;
    };
    std::vector<Blk> blocks;
    for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t b = 0; b < per_row; ++b) {
            double score = 0.0;
            for (std::int64_t c = 4 * b; c < std::min(cols, 4 * (b + 1)); ++c)
                score += std::fabs(static_cast<double>(w[static_cast<std::size_t>(r * cols + c)]));
            blocks.push_back({score, r, b});
        }
    }
    std::stable_sort(blocks.begin(), blocks.end(),
                     [](const Blk& a, const Blk& b) { return a.score < b.score; });
    const std::int64_t k = std::llround(s * static_cast<double>(blocks.size()));
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(rows * cols), 1);
    for (std::int64_t i = 0; i < k; ++i) {
        const Blk& blk = blocks[static_cast<std::size_t>(i)];
        for (std::int64_t c = 4 * blk.block; c < std::min(cols, 4 * (blk.block + 1)); ++c)
            bits[static_cast<std::size_t>(blk.row * cols + c)] = 0;
    }
    return bits;
}

// Every pruned weight at the lower sparsity must stay pruned at the higher.
bool masks_monotone(const SparsityMask& lo, const SparsityMask& hi) {
    for (const auto& [name, lo_bits] : lo.per_layer) {
        const auto& hi_bits = hi.per_layer.at(name);
        for (std::size_t i = 0; i < lo_bits.size(); ++i)
            if (lo_bits[i] == 0 && hi_bits[i] != 0) return false;
    }
    return true;
}

constexpr int kOracleModels = 200;
constexpr double kSparsityGrid[] = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};

bool criterion_pruning_oracles() {
    std::mt19937_64 rng(9301);
    for (int t = 0; t < kOracleModels; ++t) {
        const ModelGraph m = testsupport::random_model(rng);
        std::int64_t prunable_total = 0;
        for (const LayerSpec& l : m.layers)
            if (l.prunable) prunable_total += l.weight_len;
        if (!expect(prunable_total <= 100000, "fixture exceeds the prunable budget")) return false;

        SparsityMask prev_uniform, prev_global, prev_block;
        for (std::size_t si = 0; si < std::size(kSparsityGrid); ++si) {
            const double s = kSparsityGrid[si];
            const auto [uniform, u_report] = prune_uniform(m, s);
            const auto [global, g_report] = prune_global(m, s);
            const auto [block, b_report] = prune_block(m, s);
            (void)u_report;
            (void)g_report;
            (void)b_report;

            std::int64_t global_pruned = 0;
            for (const LayerSpec& l : m.layers) {
                if (!l.prunable) continue;
                const auto w = m.weight_span(l);
                if (uniform.per_layer.at(l.name) != oracle_uniform_layer(w, s)) {
                    return expect(false, "uniform mask diverges from the sort oracle");
                }
                const std::int64_t k = std::llround(s * static_cast<double>(l.weight_len));
                if (static_cast<std::int64_t>(uniform.pruned_count(l.name)) != k) {
                    return expect(false, "uniform count is not round(s*n)");
                }
                if (block.per_layer.at(l.name) !=
                    oracle_block_layer(w, l.out_channels, l.weight_len / l.out_channels, s)) {
                    return expect(false, "block mask diverges from the sort oracle");
                }
                global_pruned += static_cast<std::int64_t>(global.pruned_count(l.name));
            }
            if (global.per_layer != oracle_global(m, s).per_layer) {
                return expect(false, "global mask diverges from the pooled oracle");
            }
            if (global_pruned != std::llround(s * static_cast<double>(prunable_total))) {
                return expect(false, "global count is not round(s*total)");
            }
            if (si > 0) {
                if (!masks_monotone(prev_uniform, uniform) || !masks_monotone(prev_global, global) ||
                    !masks_monotone(prev_block, block)) {
                    return expect(false, "pruned sets are not nested across sparsities");
                }
            }
            prev_uniform = uniform;
            prev_global = global;
            prev_block = block;
        }
    }
    return true;
}

// -------------------------------------------------------------- criterion 4

constexpr int kSolverModels = 100;
constexpr int kSolverTargetsPerModel = 3;

bool criterion_global_solver_bound() {
    std::mt19937_64 rng(7401);
    for (int t = 0; t < kSolverModels; ++t) {
        const ModelGraph m = testsupport::random_model(rng);
        const FlopsReport flops = model_flops(m);
        const std::uint64_t floor_macs = flops.total - flops.prunable_total;
        std::uint64_t max_multiplier = 0;
        for (const LayerSpec& l : m.layers) {
            if (l.prunable) max_multiplier = std::max(max_multiplier, layer_weight_multiplier(l));
        }

        for (int k = 0; k < kSolverTargetsPerModel; ++k) {
            const std::uint64_t span = flops.total - floor_macs;
            const std::uint64_t target = floor_macs + 1 + rng() % span;
            const auto [result, mask] = solve_global_macs(m, target);

            if (!expect(result.achieved_macs <= target, "solver overshot the target")) return false;
            if (!expect(target - result.achieved_macs < max_multiplier ||
                            result.pruned_weights == 0,
                        "achieved cost below target by a full multiplier or more")) {
                return false;
            }

            // Accumulation oracle: retire weights in magnitude order until the
            // running total first reaches the target.
            struct Ref {
                float mag;
                const LayerSpec* layer;
                std::int64_t index;
            };
            std::vector<Ref> pool;
            for (const LayerSpec& l : m.layers) {
                if (!l.prunable) continue;
                const auto w = m.weight_span(l);
                for (std::int64_t i = 0; i < l.weight_len; ++i)
                    pool.push_back({std::fabs(w[static_cast<std::size_t>(i)]), &l, i});
            }
            std::stable_sort(pool.begin(), pool.end(),
                             [](const Ref& a, const Ref& b) { return a.mag < b.mag; });
            std::uint64_t running = flops.total;
            std::uint64_t pruned = 0;
            SparsityMask oracle;
            for (const LayerSpec& l : m.layers) {
                if (l.prunable)
                    oracle.per_layer.emplace(l.name, std::vector<std::uint8_t>(l.weight_len, 1));
            }
            for (const Ref& r : pool) {
                if (running <= target) break;
                running -= layer_weight_multiplier(*r.layer);
                oracle.per_layer.at(r.layer->name)[static_cast<std::size_t>(r.index)] = 0;
                ++pruned;
            }
            if (!expect(running == result.achieved_macs, "oracle achieved cost differs")) {
                return false;
            }
            if (!expect(pruned == result.pruned_weights, "oracle pruned count differs")) {
                return false;
            }
            if (!expect(oracle.per_layer == mask.per_layer, "oracle mask differs")) return false;
        }
    }
    return true;
}

// -------------------------------------------------------------- criterion 5

constexpr int kSpmmCases = 1100;
constexpr int kSpmmBoundCases = 100;

bool criterion_sparse_kernels() {
    std::mt19937_64 rng(5501);
    const bool have_avx2 = kernels::backend_available(kernels::Backend::kAvx2);

    for (int t = 0; t < kSpmmCases; ++t) {
        const int rows = 1 + static_cast<int>(rng() % 12);
        const int cols = 1 + static_cast<int>(rng() % 21);
        const int batch = 1 + static_cast<int>(rng() % 10);
        const int per_row = (cols + 3) / 4;

        std::vector<std::int8_t> dense(static_cast<std::size_t>(rows) * cols);
        std::vector<std::uint8_t> keep(dense.size(), 1);
        for (auto& v : dense) v = static_cast<std::int8_t>(static_cast<int>(rng() % 255) - 127);
        std::uint64_t kept_blocks = 0;
        for (int r = 0; r < rows; ++r) {
            for (int b = 0; b < per_row; ++b) {
                const bool kept = rng() % 2 == 0;
                kept_blocks += kept ? 1 : 0;
                for (int c = 4 * b; c < std::min(cols, 4 * (b + 1)); ++c) {
                    const auto i = static_cast<std::size_t>(r * cols + c);
                    keep[i] = kept ? 1 : 0;
                    if (!kept) dense[i] = 0;  // masked weights are stored as zero
                }
            }
        }
        std::vector<std::int8_t> x(static_cast<std::size_t>(cols) * batch);
        for (auto& v : x) v = static_cast<std::int8_t>(static_cast<int>(rng() % 255) - 127);

        // Plain int32 reference over the masked-dense matrix.
        std::vector<std::int32_t> ref(static_cast<std::size_t>(rows) * batch, 0);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                for (int b = 0; b < batch; ++b)
                    ref[static_cast<std::size_t>(r * batch + b)] +=
                        static_cast<std::int32_t>(dense[static_cast<std::size_t>(r * cols + c)]) *
                        static_cast<std::int32_t>(x[static_cast<std::size_t>(c * batch + b)]);

        const BlockSparseMatrix bsr = to_block_sparse(dense, rows, cols, keep);
        std::vector<std::int32_t> out(ref.size(), -1);
        kernels::bsr_spmm_s8_s32(bsr, x, batch, out, kernels::Backend::kScalar);
        if (!expect(out == ref, "scalar spmm output differs from the dense reference")) {
            return false;
        }
        if (have_avx2) {
            std::fill(out.begin(), out.end(), -1);
            kernels::bsr_spmm_s8_s32(bsr, x, batch, out, kernels::Backend::kAvx2);
            if (!expect(out == ref, "avx2 spmm output differs from the dense reference")) {
                return false;
            }
        }
        if (!expect(kernels::bsr_mac_count(bsr, batch) ==
                        4ull * kept_blocks * static_cast<std::uint64_t>(batch),
                    "spmm MAC count is not 4*kept_blocks*batch")) {
            return false;
        }
    }

    // At 60% block sparsity the MAC count stays within 40% of dense plus at
    // most one padded partial block per row.
    for (int t = 0; t < kSpmmBoundCases; ++t) {
        const int rows = 1 + static_cast<int>(rng() % 24);
        const int cols = 1 + static_cast<int>(rng() % 40);
        const int batch = 1 + static_cast<int>(rng() % 8);
        ModelGraph holder =
            ModelBuilder("holder").linear("w", cols, rows, Role::other, false, true).finish();
        std::mt19937_64 fill_rng(rng());
        testsupport::fill_uniform(holder, fill_rng);
        const auto [mask, report] = prune_block(holder, 0.6);
        (void)report;

        std::vector<std::int8_t> dense(static_cast<std::size_t>(rows) * cols, 1);
        const auto& keep = mask.per_layer.at("w");
        for (std::size_t i = 0; i < keep.size(); ++i)
            if (keep[i] == 0) dense[i] = 0;
        const BlockSparseMatrix bsr = to_block_sparse(dense, rows, cols, keep);
        const std::uint64_t mac = kernels::bsr_mac_count(bsr, batch);
        const double dense_mac =
            static_cast<double>(kernels::gemm_mac_count(rows, cols, batch));
        const double bound = 0.4 * dense_mac +
                             static_cast<double>(rows) * 4.0 * static_cast<double>(batch);
        if (!expect(static_cast<double>(mac) <= bound, "60% sparse MAC count above the bound")) {
            return false;
        }
    }
    return true;
}

// -------------------------------------------------------------- criterion 6

constexpr double kFdStep = 1e-3;
constexpr double kGradientRelTol = 1e-3;

double max_grad_rel_err(ModelGraph model, const Dataset& ds, std::int64_t batch) {
    const std::span<const float> images(ds.images.data(),
                                        static_cast<std::size_t>(batch * ds.image_len()));
    const std::span<const std::int64_t> labels(ds.labels.data(), static_cast<std::size_t>(batch));
    const auto [loss, grads] = batch_gradients(model, images, labels, batch);
    if (!std::isfinite(loss)) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        const float saved = model.weights[i];
        model.weights[i] = static_cast<float>(saved + kFdStep);
        const double up = batch_loss(model, images, labels, batch);
        model.weights[i] = static_cast<float>(saved - kFdStep);
        const double down = batch_loss(model, images, labels, batch);
        model.weights[i] = saved;
        const double applied = static_cast<double>(static_cast<float>(saved + kFdStep)) -
                               static_cast<double>(static_cast<float>(saved - kFdStep));
        const double fd = (up - down) / applied;
        const double denom = std::max({std::fabs(fd), std::fabs(grads[i]), 1e-3});
        worst = std::max(worst, std::fabs(fd - grads[i]) / denom);
    }
    return worst;
}

bool criterion_gradients() {
    bool ok = true;
    {
        // Strided standard conv, grouped conv, relu, pooling, linear head.
        std::mt19937_64 rng(201);
        ModelGraph m = ModelBuilder("fd1")
                           .conv("c1", 3, 4, 3, 2, 1, 5, 5)
                           .relu("r1", 4, 3, 3)
                           .conv("c2", 4, 4, 3, 1, 2, 3, 3)
                           .relu("r2", 4, 3, 3)
                           .gap("pool", 4, 3, 3)
                           .linear("head", 4, 3, Role::pwl)
                           .finish();
        testsupport::fill_uniform(m, rng, -0.5f, 0.5f);
        ok &= expect(m.weights.size() <= 1000, "fixture exceeds the parameter budget");
        const Dataset ds = synth_blobs(3, 4, 3, 5, 5, 31);
        ok &= expect(max_grad_rel_err(m, ds, 4) < kGradientRelTol,
                     "gradient error above tolerance (conv net)");
    }
    {
        // Pointwise conv, residual add, flatten into a wide linear layer.
        std::mt19937_64 rng(202);
        ModelGraph m = ModelBuilder("fd2")
                           .conv("pw", 4, 4, 1, 1, 1, 3, 3, Role::pw)
                           .add("skip", 4, 3, 3)
                           .relu("r", 4, 3, 3)
                           .flatten("flat", 4, 3, 3)
                           .linear("head", 36, 5, Role::pwl)
                           .finish();
        testsupport::fill_uniform(m, rng, -0.5f, 0.5f);
        ok &= expect(m.weights.size() <= 1000, "fixture exceeds the parameter budget");
        const Dataset ds = synth_blobs(5, 3, 4, 3, 3, 32);
        ok &= expect(max_grad_rel_err(m, ds, 3) < kGradientRelTol,
                     "gradient error above tolerance (residual net)");
    }
    {
        // Depthwise then pointwise chain.
        std::mt19937_64 rng(204);
        ModelGraph m = ModelBuilder("fd3")
                           .conv("dw", 6, 6, 3, 1, 6, 4, 4, Role::dw)
                           .relu("r", 6, 4, 4)
                           .conv("pw", 6, 8, 1, 1, 1, 4, 4, Role::pw)
                           .gap("pool", 8, 4, 4)
                           .linear("head", 8, 4, Role::pwl)
                           .finish();
        testsupport::fill_uniform(m, rng, -0.5f, 0.5f);
        ok &= expect(m.weights.size() <= 1000, "fixture exceeds the parameter budget");
        const Dataset ds = synth_blobs(4, 2, 6, 4, 4, 304);
        ok &= expect(max_grad_rel_err(m, ds, 2) < kGradientRelTol,
                     "gradient error above tolerance (depthwise net)");
    }
    return ok;
}

// -------------------------------------------------------------- criterion 7

constexpr int kMaskHoldEpochs = 50;

bool criterion_mask_preservation() {
    ModelGraph m = testsupport::toy_classifier(3, 3, 3, 6, 8, 3);
    init_weights(m, 21);
    const Dataset full = synth_blobs(3, 240, 3, 3, 3, 21);
    const auto [train, val] = split_train_val(full, 180, 60);

    const auto [mask, report] = prune_uniform(m, 0.5);
    (void)report;
    const ModelGraph pruned = apply_mask(m, mask);
    const double target_mflops = macs_to_mflops(model_flops(m).total);
    const VerifyResult before = verify_mask_flops(pruned, mask, target_mflops);

    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.max_epochs = kMaskHoldEpochs;
    cfg.convergence_tol = 1e-12;  // run the full epoch budget
    const TrainOutcome out = finetune(pruned, &mask, train, val, cfg, 21);

    bool ok = expect(out.history.epochs.size() == static_cast<std::size_t>(kMaskHoldEpochs),
                     "fine-tune stopped early");
    for (const auto& [name, bits] : mask.per_layer) {
        const auto w = out.model.weight_span(out.model.layer(name));
        for (std::size_t i = 0; i < bits.size(); ++i) {
            if (bits[i] == 0 && w[i] != 0.0f) {
                return expect(false, "a pruned weight came back nonzero");
            }
        }
    }
    const VerifyResult after = verify_mask_flops(out.model, mask, target_mflops);
    ok &= expect(before.achieved_macs == after.achieved_macs,
                 "effective cost drifted across fine-tuning");
    ok &= expect(before.ok && after.ok, "mask verification rejected the fine-tuned model");
    return ok;
}

// -------------------------------------------------------------- criterion 8

constexpr double kDenseFloor = 0.90;     // minimum dense top-1 on the blob task
constexpr double kRecoveryGapPp = 0.02;  // allowed fine-tuned drop vs dense

bool criterion_recovery() {
    const Dataset full = synth_blobs(10, 6000, 3, 8, 8, 7);
    const auto [train, val] = split_train_val(full, 5000, 1000);

    for (const std::uint64_t seed : {1ull, 2ull, 3ull}) {
        ModelGraph m = ModelBuilder("blob")
                           .conv("pw1", 3, 16, 1, 1, 1, 8, 8, Role::pw)
                           .relu("r1", 16, 8, 8)
                           .conv("pw2", 16, 32, 1, 1, 1, 8, 8, Role::pw)
                           .relu("r2", 32, 8, 8)
                           .gap("pool", 32, 8, 8)
                           .linear("head", 32, 10, Role::pwl)
                           .finish();
        init_weights(m, seed);

        TrainConfig cfg;
        cfg.learning_rate = 0.1;
        cfg.max_epochs = 12;
        cfg.convergence_tol = 1e-4;
        const TrainOutcome dense = finetune(m, nullptr, train, val, cfg, seed);
        const double dense_top1 = evaluate(dense.model, val).top1;
        if (!expect(dense_top1 >= kDenseFloor, "dense baseline under the accuracy floor")) {
            return false;
        }

        const auto [mask, report] = prune_uniform(dense.model, 0.5);
        (void)report;
        const double pruned_top1 = evaluate(apply_mask(dense.model, mask), val).top1;
        const TrainOutcome tuned = finetune(dense.model, &mask, train, val, cfg, seed);
        const double tuned_top1 = evaluate(tuned.model, val).top1;

        if (!expect(tuned_top1 >= pruned_top1, "fine-tuning lost accuracy vs pruning alone")) {
            return false;
        }
        if (!expect(tuned_top1 >= dense_top1 - kRecoveryGapPp,
                    "fine-tuned accuracy more than the allowed gap below dense")) {
            return false;
        }
    }
    return true;
}

// -------------------------------------------------------------- criterion 9

constexpr double kCostRatioTol = 0.01;

bool criterion_cost_ratios() {
    const struct {
        double baseline, ours, expected;
    } cases[] = {
        {10700.0, 2240.0, 4.77},
        {10700.0, 2496.0, 4.28},
        {10700.0, 3456.0, 3.09},
    };
    bool ok = true;
    for (const auto& c : cases) {
        ok &= expect(std::fabs(speedup(c.baseline, c.ours) - c.expected) <= kCostRatioTol,
                     "cost ratio outside the tolerance");
    }
    return ok;
}

// ------------------------------------------------------------- criterion 10

constexpr int kRewriteInputs = 100;

bool criterion_rewrite_equivalence() {
    struct Fixture {
        ModelGraph model;
        std::vector<std::string> convert;  // layers rewritten, in order
    };
    std::vector<Fixture> fixtures;
    {
        ModelGraph m = testsupport::toy_classifier(3, 4, 4, 8, 12, 4);
        init_weights(m, 31);
        fixtures.push_back({std::move(m), {"pw1", "pw2"}});
    }
    {
        // Pointwise sandwiched between layers the rewrite must not touch.
        ModelGraph m = ModelBuilder("deep")
                           .conv("stem", 3, 6, 3, 2, 1, 6, 6)
                           .relu("r0", 6, 3, 3)
                           .conv("mid", 6, 10, 1, 1, 1, 3, 3, Role::pw)
                           .relu("r1", 10, 3, 3)
                           .gap("pool", 10, 3, 3)
                           .linear("head", 10, 5, Role::pwl)
                           .finish();
        init_weights(m, 32);
        fixtures.push_back({std::move(m), {"mid"}});
    }

    std::mt19937_64 rng(4001);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (const Fixture& fx : fixtures) {
        ModelGraph rewritten = fx.model;
        for (const std::string& name : fx.convert) {
            rewritten = conv1x1_to_linear(rewritten, name);
        }
        const LayerSpec& first = fx.model.layers.front();
        const std::int64_t input_len = first.in_channels * first.input_h * first.input_w;
        for (int t = 0; t < kRewriteInputs; ++t) {
            const std::int64_t batch = 1 + static_cast<std::int64_t>(rng() % 3);
            std::vector<float> x(static_cast<std::size_t>(batch * input_len));
            for (auto& v : x) v = dist(rng);
            const std::vector<double> a = forward_logits(fx.model, x, batch);
            const std::vector<double> b = forward_logits(rewritten, x, batch);
            if (!expect(a == b, "rewritten forward output is not bit-identical")) return false;
        }
    }
    return true;
}

// ------------------------------------------------------------- criterion 11

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

bool criterion_pipeline_determinism() {
    TempDir dir;
    ModelGraph m = testsupport::toy_classifier(3, 4, 4, 8, 12, 4);
    init_weights(m, 1);
    const std::string manifest = dir.file("model.json");
    const std::string weights = dir.file("model.bin");
    save_model(m, manifest, weights);

    const std::string out_dir = dir.file("run");
    const json cfg = {
        {"seed", 7},
        {"out_dir", out_dir},
        {"model", {{"manifest", manifest}, {"weights", weights}}},
        {"data",
         {{"synth",
           {{"classes", 4}, {"n", 160}, {"channels", 3}, {"height", 4}, {"width", 4},
            {"train_n", 120}, {"val_n", 40}}}}},
        {"prune", {{"method", "global"}, {"sparsity", 0.5}}},
        {"finetune", {{"learning_rate", 0.05}, {"max_epochs", 3}, {"convergence_tol", 1e-12}}},
    };
    const std::string cfg_path = dir.file("pipeline.json");
    {
        std::ofstream out(cfg_path);
        out << cfg.dump(2) << "\n";
    }

    const std::string cmd = std::string(PRUNEKIT_CLI_PATH) + " pipeline --config " + cfg_path +
                            " >" + dir.file("stdout") + " 2>" + dir.file("stderr");
    const int rc1 = std::system(cmd.c_str());
    if (!expect(WIFEXITED(rc1) && WEXITSTATUS(rc1) == 0, "first pipeline run failed")) {
        std::printf("     stderr: %s\n", slurp(dir.file("stderr")).c_str());
        return false;
    }
    const char* artifacts[] = {"mask.json",      "pruned.json",   "pruned.bin",
                               "finetuned.json", "finetuned.bin", "history.csv",
                               "report.json",    "artifacts.json"};
    std::map<std::string, std::string> first;
    for (const char* name : artifacts) {
        const std::string body = slurp(out_dir + "/" + name);
        if (!expect(!body.empty(), "pipeline artifact missing or empty")) return false;
        first[name] = body;
    }

    const int rc2 = std::system(cmd.c_str());
    if (!expect(WIFEXITED(rc2) && WEXITSTATUS(rc2) == 0, "second pipeline run failed")) {
        return false;
    }
    for (const char* name : artifacts) {
        if (slurp(out_dir + "/" + name) != first.at(name)) {
            std::printf("     artifact differs across reruns: %s\n", name);
            return false;
        }
    }
    return true;
}

}  // namespace

int main() {
    verdict(1, guarded(criterion_solver_consistency),
            "closed-form solver is self-consistent across paired targets");
    verdict(2, guarded(criterion_prunable_share),
            "implied prunable cost share exceeds 0.80 on consistent rows");
    verdict(3, guarded(criterion_pruning_oracles),
            "all pruning methods equal exhaustive-sort oracles on 200 models");
    verdict(4, guarded(criterion_global_solver_bound),
            "global solver meets the cost bound and accumulation oracle on 100 models");
    verdict(5, guarded(criterion_sparse_kernels),
            "sparse kernels are bit-identical to the dense reference on 1100+ cases");
    verdict(6, guarded(criterion_gradients),
            "analytic gradients match central differences on every op");
    verdict(7, guarded(criterion_mask_preservation),
            "50-epoch fine-tune keeps pruned weights at zero and cost constant");
    verdict(8, guarded(criterion_recovery),
            "prune-and-fine-tune recovers dense accuracy on the blob task");
    verdict(9, guarded(criterion_cost_ratios),
            "GPU-hours arithmetic reproduces the reference cost ratios");
    verdict(10, guarded(criterion_rewrite_equivalence),
            "pointwise-to-linear rewrite preserves outputs bit-exactly");
    verdict(11, guarded(criterion_pipeline_determinism),
            "pipeline reruns produce byte-identical artifacts");

    if (g_failures == 0) {
        std::printf("acceptance: all 11 criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d of 11 criteria FAILED\n", g_failures);
    return 1;
}
