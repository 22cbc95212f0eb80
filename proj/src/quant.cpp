#include "prunekit/quant.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace prunekit {
namespace {

// Half away from zero, unlike std::nearbyint's bankers mode.
long round_away(double v) { return std::lround(v); }

std::int8_t clamp_s8(long v, long lo, long hi) {
    return static_cast<std::int8_t>(std::clamp(v, lo, hi));
}

void check_finite(std::span<const float> xs, const char* what) {
    for (float x : xs) {
        if (!std::isfinite(x)) {
            throw ValidationError(std::string(what) + " contain a non-finite value");
        }
    }
}

}  // namespace

std::pair<QuantizedMatrix, QuantParams> quantize_layer(std::span<const float> weights, int rows,
                                                       int cols,
                                                       std::span<const float> activations_sample) {
    if (rows <= 0 || cols <= 0) {
        throw ValidationError("quantize_layer: matrix dimensions must be positive");
    }
    if (std::ssize(weights) != static_cast<std::int64_t>(rows) * cols) {
        throw ValidationError("quantize_layer: weight length does not match rows*cols");
    }
    if (activations_sample.empty()) {
        throw ValidationError("quantize_layer: activations sample is empty");
    }
    check_finite(weights, "weights");
    check_finite(activations_sample, "activations");

    QuantizedMatrix qm;
    qm.rows = rows;
    qm.cols = cols;
    qm.values.resize(weights.size());

    QuantParams params;
    params.weight_scales.resize(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        const float* row = weights.data() + static_cast<std::size_t>(r) * cols;
        float max_abs = 0.0f;
        for (int c = 0; c < cols; ++c) max_abs = std::max(max_abs, std::fabs(row[c]));
        const float scale = max_abs > 0.0f ? max_abs / 127.0f : 1.0f;
        params.weight_scales[static_cast<std::size_t>(r)] = scale;
        std::int8_t* qrow = qm.values.data() + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) {
            qrow[c] = clamp_s8(round_away(static_cast<double>(row[c]) / scale), -127, 127);
        }
    }

    const auto [mn_it, mx_it] =
        std::minmax_element(activations_sample.begin(), activations_sample.end());
    // Widen to include zero so the real value 0 maps exactly onto the
    // zero point; this also pins act_zero_point into [-128, 127].
    const float lo = std::min(*mn_it, 0.0f);
    const float hi = std::max(*mx_it, 0.0f);
    const float range = hi - lo;
    params.act_scale = range > 0.0f ? range / 255.0f : 1.0f;
    params.act_zero_point =
        static_cast<int>(-128 - round_away(static_cast<double>(lo) / params.act_scale));
    params.act_zero_point = std::clamp(params.act_zero_point, -128, 127);
    return {std::move(qm), std::move(params)};
}

std::int8_t quantize_activation(float x, const QuantParams& params) {
    const long q = round_away(static_cast<double>(x) / params.act_scale) + params.act_zero_point;
    return clamp_s8(q, -128, 127);
}

std::vector<std::int8_t> quantize_activations(std::span<const float> x,
                                              const QuantParams& params) {
    std::vector<std::int8_t> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = quantize_activation(x[i], params);
    return out;
}

std::vector<std::int8_t> requantize(std::span<const std::int32_t> acc, int rows, int batch,
                                    const QuantParams& params,
                                    std::span<const std::int32_t> row_sums,
                                    const RequantParams& out_params) {
    if (rows < 0 || batch < 0 ||
        std::ssize(acc) != static_cast<std::int64_t>(rows) * batch) {
        throw ValidationError("requantize: accumulator length does not match rows*batch");
    }
    if (std::ssize(row_sums) != rows) {
        throw ValidationError("requantize: row_sums length does not match rows");
    }
    if (std::ssize(params.weight_scales) != rows) {
        throw ValidationError("requantize: weight_scales length does not match rows");
    }
    if (!(out_params.out_scale > 0.0f)) {
        throw ValidationError("requantize: output scale must be positive");
    }
    std::vector<std::int8_t> out(acc.size());
    for (int r = 0; r < rows; ++r) {
        const double m = static_cast<double>(params.act_scale) *
                         params.weight_scales[static_cast<std::size_t>(r)] /
                         out_params.out_scale;
        const std::int64_t correction =
            static_cast<std::int64_t>(params.act_zero_point) * row_sums[static_cast<std::size_t>(r)];
        const std::int32_t* arow = acc.data() + static_cast<std::size_t>(r) * batch;
        std::int8_t* orow = out.data() + static_cast<std::size_t>(r) * batch;
        for (int b = 0; b < batch; ++b) {
            const double real = m * (static_cast<double>(arow[b]) - static_cast<double>(correction));
            orow[b] = clamp_s8(out_params.out_zero_point + round_away(real), -128, 127);
        }
    }
    return out;
}

}  // namespace prunekit
