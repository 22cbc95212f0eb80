#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "prunekit/common.hpp"

namespace prunekit {

// Symmetric per-output-row weight quantization (zero point 0), affine
// per-tensor activation quantization. Accumulation is 32-bit integer.
struct QuantParams {
    std::vector<float> weight_scales;  // one per output row, > 0
    float act_scale = 1.0f;
    int act_zero_point = 0;  // in [-128, 127]
};

struct QuantizedMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<std::int8_t> values;  // row-major, in [-127, 127]
};

// q = clamp(round(w / scale), -127, 127) with scale = max|w_row| / 127
// (scale = 1 for an all-zero row). Rounding is half away from zero.
// Activation params come from the sample min/max, widened to include 0 so that
// zero is exactly representable; the zero point then always lands in
// [-128, 127]. Throws ValidationError on empty or non-finite inputs.
std::pair<QuantizedMatrix, QuantParams> quantize_layer(std::span<const float> weights, int rows,
                                                       int cols,
                                                       std::span<const float> activations_sample);

std::int8_t quantize_activation(float x, const QuantParams& params);
std::vector<std::int8_t> quantize_activations(std::span<const float> x,
                                              const QuantParams& params);

// Requantization of int32 accumulators to int8, round half away from zero:
// q = clamp(out_zero_point + round(m_r * (acc - act_zp * row_sum_r))) where
// m_r = act_scale * weight_scale_r / out_scale and row_sum_r sums the stored
// quantized weights of row r.
struct RequantParams {
    float out_scale = 1.0f;
    int out_zero_point = 0;
};
std::vector<std::int8_t> requantize(std::span<const std::int32_t> acc, int rows, int batch,
                                    const QuantParams& params,
                                    std::span<const std::int32_t> row_sums,
                                    const RequantParams& out_params);

}  // namespace prunekit
