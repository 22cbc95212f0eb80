#include "prunekit/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "prunekit/prune.hpp"

namespace prunekit {
namespace {

struct Shape {
    std::int64_t c = 0, h = 0, w = 0;
    std::int64_t len() const { return c * h * w; }
    bool operator==(const Shape&) const = default;
};

// acts[0] is the batch input; acts[i+1] the output of layer i. anchor_of[i]
// is the acts index feeding layer i's skip input when it is an `add`.
struct Tape {
    std::int64_t batch = 0;
    std::vector<Shape> shapes;
    std::vector<std::vector<double>> acts;
    std::vector<int> anchor_of;
};

Shape output_shape(const LayerSpec& layer) {
    switch (layer.op_kind) {
        case OpKind::conv2d:
            return {layer.out_channels, layer.out_h(), layer.out_w()};
        case OpKind::linear:
            return {layer.out_channels, layer.input_h, layer.input_w};
        case OpKind::relu:
        case OpKind::add:
            return {layer.in_channels, layer.input_h, layer.input_w};
        case OpKind::global_avg_pool:
            return {layer.in_channels, 1, 1};
        case OpKind::flatten:
            return {layer.in_channels * layer.input_h * layer.input_w, 1, 1};
    }
    throw ValidationError("unsupported op in graph");
}

// Linear shares this with 1x1/stride-1/group-1 convolutions so the
// conv1x1_to_linear transform is bit-exact by construction.
void pointwise_forward(std::int64_t batch, std::int64_t cin, std::int64_t cout, std::int64_t hw,
                       std::span<const float> weight, std::span<const float> bias,
                       const double* in, double* out) {
    for (std::int64_t b = 0; b < batch; ++b) {
        const double* inb = in + b * cin * hw;
        double* outb = out + b * cout * hw;
        for (std::int64_t oc = 0; oc < cout; ++oc) {
            const double bv = bias.empty() ? 0.0 : static_cast<double>(bias[static_cast<std::size_t>(oc)]);
            std::fill_n(outb + oc * hw, hw, bv);
        }
        for (std::int64_t oc = 0; oc < cout; ++oc) {
            double* orow = outb + oc * hw;
            for (std::int64_t ic = 0; ic < cin; ++ic) {
                const double wv = weight[static_cast<std::size_t>(oc * cin + ic)];
                const double* irow = inb + ic * hw;
                for (std::int64_t p = 0; p < hw; ++p) orow[p] += wv * irow[p];
            }
        }
    }
}

void pointwise_backward(std::int64_t batch, std::int64_t cin, std::int64_t cout, std::int64_t hw,
                        std::span<const float> weight, const double* in, const double* gout,
                        double* gin, double* gweight, double* gbias) {
    for (std::int64_t b = 0; b < batch; ++b) {
        const double* inb = in + b * cin * hw;
        const double* goutb = gout + b * cout * hw;
        double* ginb = gin + b * cin * hw;
        for (std::int64_t oc = 0; oc < cout; ++oc) {
            const double* grow = goutb + oc * hw;
            if (gbias != nullptr) {
                double s = 0.0;
                for (std::int64_t p = 0; p < hw; ++p) s += grow[p];
                gbias[oc] += s;
            }
            for (std::int64_t ic = 0; ic < cin; ++ic) {
                const double wv = weight[static_cast<std::size_t>(oc * cin + ic)];
                const double* irow = inb + ic * hw;
                double* girow = ginb + ic * hw;
                double gw = 0.0;
                for (std::int64_t p = 0; p < hw; ++p) {
                    girow[p] += wv * grow[p];
                    gw += grow[p] * irow[p];
                }
                gweight[oc * cin + ic] += gw;
            }
        }
    }
}

struct ConvGeom {
    std::int64_t oh, ow, cin_g, cout_g, pad_top, pad_left;
};

ConvGeom conv_geometry(const LayerSpec& layer) {
    ConvGeom g;
    g.oh = layer.out_h();
    g.ow = layer.out_w();
    g.cin_g = layer.in_channels / layer.groups;
    g.cout_g = layer.out_channels / layer.groups;
    const std::int64_t pad_h =
        std::max<std::int64_t>(0, (g.oh - 1) * layer.stride + layer.kernel_h - layer.input_h);
    const std::int64_t pad_w =
        std::max<std::int64_t>(0, (g.ow - 1) * layer.stride + layer.kernel_w - layer.input_w);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
    return g;
}

void conv_forward(const LayerSpec& layer, std::int64_t batch, std::span<const float> weight,
                  std::span<const float> bias, const double* in, double* out) {
    const ConvGeom g = conv_geometry(layer);
    const std::int64_t in_hw = layer.input_h * layer.input_w;
    const std::int64_t out_hw = g.oh * g.ow;
    for (std::int64_t b = 0; b < batch; ++b) {
        const double* inb = in + b * layer.in_channels * in_hw;
        double* outb = out + b * layer.out_channels * out_hw;
        for (std::int64_t oc = 0; oc < layer.out_channels; ++oc) {
            const std::int64_t grp = oc / g.cout_g;
            const float* wf = weight.data() + oc * g.cin_g * layer.kernel_h * layer.kernel_w;
            const double bv = bias.empty() ? 0.0 : static_cast<double>(bias[static_cast<std::size_t>(oc)]);
            double* orow = outb + oc * out_hw;
            for (std::int64_t oy = 0; oy < g.oh; ++oy) {
                for (std::int64_t ox = 0; ox < g.ow; ++ox) {
                    double acc = bv;
                    for (std::int64_t icl = 0; icl < g.cin_g; ++icl) {
                        const double* irow = inb + (grp * g.cin_g + icl) * in_hw;
                        const float* wrow = wf + icl * layer.kernel_h * layer.kernel_w;
                        for (std::int64_t ky = 0; ky < layer.kernel_h; ++ky) {
                            const std::int64_t iy = oy * layer.stride - g.pad_top + ky;
                            if (iy < 0 || iy >= layer.input_h) continue;
                            for (std::int64_t kx = 0; kx < layer.kernel_w; ++kx) {
                                const std::int64_t ix = ox * layer.stride - g.pad_left + kx;
                                if (ix < 0 || ix >= layer.input_w) continue;
                                acc += static_cast<double>(wrow[ky * layer.kernel_w + kx]) *
                                       irow[iy * layer.input_w + ix];
                            }
                        }
                    }
                    orow[oy * g.ow + ox] = acc;
                }
            }
        }
    }
}

void conv_backward(const LayerSpec& layer, std::int64_t batch, std::span<const float> weight,
                   const double* in, const double* gout, double* gin, double* gweight,
                   double* gbias) {
    const ConvGeom g = conv_geometry(layer);
    const std::int64_t in_hw = layer.input_h * layer.input_w;
    const std::int64_t out_hw = g.oh * g.ow;
    for (std::int64_t b = 0; b < batch; ++b) {
        const double* inb = in + b * layer.in_channels * in_hw;
        const double* goutb = gout + b * layer.out_channels * out_hw;
        double* ginb = gin + b * layer.in_channels * in_hw;
        for (std::int64_t oc = 0; oc < layer.out_channels; ++oc) {
            const std::int64_t grp = oc / g.cout_g;
            const std::int64_t w_base = oc * g.cin_g * layer.kernel_h * layer.kernel_w;
            const double* grow = goutb + oc * out_hw;
            for (std::int64_t oy = 0; oy < g.oh; ++oy) {
                for (std::int64_t ox = 0; ox < g.ow; ++ox) {
                    const double go = grow[oy * g.ow + ox];
                    if (gbias != nullptr) gbias[oc] += go;
                    for (std::int64_t icl = 0; icl < g.cin_g; ++icl) {
                        const std::int64_t ic = grp * g.cin_g + icl;
                        const double* irow = inb + ic * in_hw;
                        double* girow = ginb + ic * in_hw;
                        const std::int64_t wk = w_base + icl * layer.kernel_h * layer.kernel_w;
                        for (std::int64_t ky = 0; ky < layer.kernel_h; ++ky) {
                            const std::int64_t iy = oy * layer.stride - g.pad_top + ky;
                            if (iy < 0 || iy >= layer.input_h) continue;
                            for (std::int64_t kx = 0; kx < layer.kernel_w; ++kx) {
                                const std::int64_t ix = ox * layer.stride - g.pad_left + kx;
                                if (ix < 0 || ix >= layer.input_w) continue;
                                const std::int64_t wi = wk + ky * layer.kernel_w + kx;
                                gweight[wi] += go * irow[iy * layer.input_w + ix];
                                girow[iy * layer.input_w + ix] +=
                                    go * static_cast<double>(weight[static_cast<std::size_t>(wi)]);
                            }
                        }
                    }
                }
            }
        }
    }
}

bool is_pointwise_conv(const LayerSpec& layer) {
    return layer.op_kind == OpKind::conv2d && layer.kernel_h == 1 && layer.kernel_w == 1 &&
           layer.stride == 1 && layer.groups == 1;
}

Tape forward_tape(const ModelGraph& model, std::span<const float> images, std::int64_t batch) {
    if (model.layers.empty()) throw ValidationError("model has no layers");
    if (batch <= 0) throw ValidationError("batch must be positive");
    const LayerSpec& first = model.layers.front();
    Tape tape;
    tape.batch = batch;
    tape.shapes.reserve(model.layers.size() + 1);
    tape.shapes.push_back({first.in_channels, first.input_h, first.input_w});
    if (std::ssize(images) != batch * tape.shapes[0].len()) {
        throw ValidationError("input length does not match batch * model input size");
    }
    tape.acts.reserve(model.layers.size() + 1);
    tape.acts.emplace_back(images.begin(), images.end());
    tape.anchor_of.assign(model.layers.size(), 0);

    int anchor = 0;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const LayerSpec& layer = model.layers[i];
        const Shape in_shape = tape.shapes.back();
        const Shape declared{layer.in_channels, layer.input_h, layer.input_w};
        if (in_shape != declared) {
            throw ValidationError("layer '" + layer.name + "' declares input " +
                                  std::to_string(declared.c) + "x" + std::to_string(declared.h) +
                                  "x" + std::to_string(declared.w) + " but receives " +
                                  std::to_string(in_shape.c) + "x" + std::to_string(in_shape.h) +
                                  "x" + std::to_string(in_shape.w));
        }
        const Shape out_shape = output_shape(layer);
        const double* in = tape.acts.back().data();
        std::vector<double> out(static_cast<std::size_t>(batch * out_shape.len()));
        switch (layer.op_kind) {
            case OpKind::conv2d:
                if (is_pointwise_conv(layer)) {
                    pointwise_forward(batch, in_shape.c, out_shape.c, in_shape.h * in_shape.w,
                                      model.weight_span(layer), model.bias_span(layer), in, out.data());
                } else {
                    conv_forward(layer, batch, model.weight_span(layer), model.bias_span(layer), in,
                                 out.data());
                }
                break;
            case OpKind::linear:
                pointwise_forward(batch, in_shape.c, out_shape.c, in_shape.h * in_shape.w,
                                  model.weight_span(layer), model.bias_span(layer), in, out.data());
                break;
            case OpKind::relu:
                for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::max(0.0, in[j]);
                break;
            case OpKind::global_avg_pool: {
                const std::int64_t hw = in_shape.h * in_shape.w;
                for (std::int64_t b = 0; b < batch; ++b) {
                    for (std::int64_t c = 0; c < in_shape.c; ++c) {
                        const double* row = in + (b * in_shape.c + c) * hw;
                        double s = 0.0;
                        for (std::int64_t p = 0; p < hw; ++p) s += row[p];
                        out[static_cast<std::size_t>(b * in_shape.c + c)] = s / static_cast<double>(hw);
                    }
                }
                break;
            }
            case OpKind::add: {
                tape.anchor_of[i] = anchor;
                if (tape.shapes[static_cast<std::size_t>(anchor)] != in_shape) {
                    throw ValidationError("layer '" + layer.name +
                                          "': skip input shape does not match the main path");
                }
                const double* skip = tape.acts[static_cast<std::size_t>(anchor)].data();
                for (std::size_t j = 0; j < out.size(); ++j) out[j] = in[j] + skip[j];
                anchor = static_cast<int>(i) + 1;
                break;
            }
            case OpKind::flatten:
                std::copy(in, in + out.size(), out.begin());
                break;
        }
        tape.acts.push_back(std::move(out));
        tape.shapes.push_back(out_shape);
    }
    return tape;
}

void check_labels(std::span<const std::int64_t> labels, std::int64_t batch, std::int64_t classes) {
    if (std::ssize(labels) != batch) {
        throw ValidationError("label count does not match batch size");
    }
    for (std::int64_t l : labels) {
        if (l < 0 || l >= classes) {
            throw ValidationError("label " + std::to_string(l) + " outside [0, " +
                                  std::to_string(classes) + ")");
        }
    }
}

// Mean cross-entropy over the batch plus d(loss)/d(logits) in-place.
double softmax_xent(std::span<const double> logits, std::span<const std::int64_t> labels,
                    std::int64_t batch, std::int64_t classes, std::vector<double>* dlogits) {
    if (dlogits != nullptr) dlogits->assign(logits.begin(), logits.end());
    double total = 0.0;
    for (std::int64_t b = 0; b < batch; ++b) {
        const double* row = logits.data() + b * classes;
        const double m = *std::max_element(row, row + classes);
        double z = 0.0;
        for (std::int64_t c = 0; c < classes; ++c) z += std::exp(row[c] - m);
        total += std::log(z) - (row[labels[static_cast<std::size_t>(b)]] - m);
        if (dlogits != nullptr) {
            double* drow = dlogits->data() + b * classes;
            for (std::int64_t c = 0; c < classes; ++c) {
                drow[c] = std::exp(row[c] - m) / z / static_cast<double>(batch);
            }
            drow[labels[static_cast<std::size_t>(b)]] -= 1.0 / static_cast<double>(batch);
        }
    }
    return total / static_cast<double>(batch);
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw ValidationError("learning_rate must be non-negative");
    if (momentum < 0.0 || momentum >= 1.0) throw ValidationError("momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw ValidationError("weight_decay must be non-negative");
    if (batch_size <= 0) throw ValidationError("batch_size must be positive");
    if (max_epochs <= 0) throw ValidationError("max_epochs must be positive");
    if (!(convergence_tol > 0.0)) throw ValidationError("convergence_tol must be positive");
    if (smoothing_alpha <= 0.0 || smoothing_alpha > 1.0) {
        throw ValidationError("smoothing_alpha must be in (0, 1]");
    }
}

std::vector<double> forward_logits(const ModelGraph& model, std::span<const float> images,
                                   std::int64_t batch) {
    Tape tape = forward_tape(model, images, batch);
    return std::move(tape.acts.back());
}

double batch_loss(const ModelGraph& model, std::span<const float> images,
                  std::span<const std::int64_t> labels, std::int64_t batch) {
    const std::vector<double> logits = forward_logits(model, images, batch);
    const std::int64_t classes = std::ssize(logits) / batch;
    check_labels(labels, batch, classes);
    return softmax_xent(logits, labels, batch, classes, nullptr);
}

std::pair<double, std::vector<double>> batch_gradients(const ModelGraph& model,
                                                       std::span<const float> images,
                                                       std::span<const std::int64_t> labels,
                                                       std::int64_t batch) {
    const Tape tape = forward_tape(model, images, batch);
    const std::size_t n_layers = model.layers.size();
    const std::int64_t classes = tape.shapes.back().len();
    check_labels(labels, batch, classes);

    std::vector<double> dlogits;
    const double loss = softmax_xent(tape.acts.back(), labels, batch, classes, &dlogits);

    std::vector<std::vector<double>> act_grads(n_layers + 1);
    act_grads[n_layers] = std::move(dlogits);
    for (std::size_t j = 0; j < n_layers; ++j) {
        act_grads[j].assign(tape.acts[j].size(), 0.0);
    }
    std::vector<double> grads(model.weights.size(), 0.0);

    for (std::size_t ii = n_layers; ii-- > 0;) {
        const LayerSpec& layer = model.layers[ii];
        const Shape in_shape = tape.shapes[ii];
        const double* in = tape.acts[ii].data();
        const double* gout = act_grads[ii + 1].data();
        double* gin = act_grads[ii].data();
        const auto wspan = model.weight_span(layer);
        double* gweight = layer.weight_len > 0 ? grads.data() + layer.weight_offset : nullptr;
        double* gbias = layer.bias_len > 0 ? grads.data() + layer.bias_offset : nullptr;
        switch (layer.op_kind) {
            case OpKind::conv2d:
                if (is_pointwise_conv(layer)) {
                    pointwise_backward(batch, in_shape.c, layer.out_channels,
                                       in_shape.h * in_shape.w, wspan, in, gout, gin, gweight,
                                       gbias);
                } else {
                    conv_backward(layer, batch, wspan, in, gout, gin, gweight, gbias);
                }
                break;
            case OpKind::linear:
                pointwise_backward(batch, in_shape.c, layer.out_channels, in_shape.h * in_shape.w,
                                   wspan, in, gout, gin, gweight, gbias);
                break;
            case OpKind::relu:
                for (std::size_t j = 0; j < act_grads[ii].size(); ++j) {
                    gin[j] += in[j] > 0.0 ? gout[j] : 0.0;
                }
                break;
            case OpKind::global_avg_pool: {
                const std::int64_t hw = in_shape.h * in_shape.w;
                for (std::int64_t b = 0; b < batch; ++b) {
                    for (std::int64_t c = 0; c < in_shape.c; ++c) {
                        const double g = gout[b * in_shape.c + c] / static_cast<double>(hw);
                        double* row = gin + (b * in_shape.c + c) * hw;
                        for (std::int64_t p = 0; p < hw; ++p) row[p] += g;
                    }
                }
                break;
            }
            case OpKind::add: {
                double* ganchor = act_grads[static_cast<std::size_t>(tape.anchor_of[ii])].data();
                for (std::size_t j = 0; j < act_grads[ii + 1].size(); ++j) {
                    gin[j] += gout[j];
                    ganchor[j] += gout[j];
                }
                break;
            }
            case OpKind::flatten:
                for (std::size_t j = 0; j < act_grads[ii + 1].size(); ++j) gin[j] += gout[j];
                break;
        }
    }
    return {loss, std::move(grads)};
}

void init_weights(ModelGraph& model, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const LayerSpec& layer = model.layers[i];
        if (layer.weight_len == 0) continue;
        std::int64_t fan_in = 0;
        if (layer.op_kind == OpKind::conv2d) {
            fan_in = (layer.in_channels / layer.groups) * layer.kernel_h * layer.kernel_w;
        } else if (layer.op_kind == OpKind::linear) {
            fan_in = layer.in_channels;
        } else {
            continue;
        }
        const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (float& v : model.weight_span(layer)) {
            v = static_cast<float>(normal(rng) * stddev);
        }
        for (std::int64_t j = 0; j < layer.bias_len; ++j) {
            model.weights[static_cast<std::size_t>(layer.bias_offset + j)] = 0.0f;
        }
    }
}

void masked_step(ModelGraph& model, std::span<const double> grads, const SparsityMask* mask,
                 const TrainConfig& config, SgdState& state) {
    if (std::ssize(grads) != std::ssize(model.weights)) {
        throw ValidationError("gradient length does not match model parameter count");
    }
    if (state.velocity.empty()) state.velocity.assign(model.weights.size(), 0.0);
    if (state.velocity.size() != model.weights.size()) {
        throw ValidationError("optimizer state does not match model parameter count");
    }
    for (const LayerSpec& layer : model.layers) {
        const std::vector<std::uint8_t>* bits = nullptr;
        if (mask != nullptr) {
            auto it = mask->per_layer.find(layer.name);
            if (it != mask->per_layer.end()) bits = &it->second;
        }
        for (std::int64_t j = 0; j < layer.weight_len; ++j) {
            const std::size_t idx = static_cast<std::size_t>(layer.weight_offset + j);
            if (bits != nullptr && (*bits)[static_cast<std::size_t>(j)] == 0) {
                model.weights[idx] = 0.0f;
                state.velocity[idx] = 0.0;
                continue;
            }
            const double w = static_cast<double>(model.weights[idx]);
            const double g = grads[idx] + config.weight_decay * w;
            state.velocity[idx] = config.momentum * state.velocity[idx] + g;
            model.weights[idx] = static_cast<float>(w - config.learning_rate * state.velocity[idx]);
        }
        for (std::int64_t j = 0; j < layer.bias_len; ++j) {
            const std::size_t idx = static_cast<std::size_t>(layer.bias_offset + j);
            const double b = static_cast<double>(model.weights[idx]);
            state.velocity[idx] = config.momentum * state.velocity[idx] + grads[idx];
            model.weights[idx] = static_cast<float>(b - config.learning_rate * state.velocity[idx]);
        }
    }
}

TrainOutcome finetune(const ModelGraph& model, const SparsityMask* mask, const Dataset& train,
                      const Dataset& val, const TrainConfig& config, std::uint64_t seed) {
    config.validate();
    if (train.size() == 0 || val.size() == 0) {
        throw ValidationError("training and validation sets must be nonempty");
    }
    if (model.layers.empty()) throw ValidationError("model has no layers");
    const LayerSpec& first = model.layers.front();
    if (train.channels != first.in_channels || train.height != first.input_h ||
        train.width != first.input_w) {
        throw ValidationError("dataset shape " + std::to_string(train.channels) + "x" +
                              std::to_string(train.height) + "x" + std::to_string(train.width) +
                              " does not match the model input " +
                              std::to_string(first.in_channels) + "x" +
                              std::to_string(first.input_h) + "x" + std::to_string(first.input_w));
    }
    if (mask != nullptr) validate_mask(model, *mask);

    ModelGraph work = mask != nullptr ? apply_mask(model, *mask) : model;
    SgdState state;
    std::mt19937_64 rng(seed);
    const std::int64_t n = train.size();
    const std::int64_t img_len = train.image_len();
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    TrainOutcome outcome;
    outcome.history.stop_reason = "max_epochs";
    std::vector<float> best_weights = work.weights;
    double best_val = std::numeric_limits<double>::infinity();
    double smoothed_prev = 0.0;

    std::vector<float> batch_images;
    std::vector<std::int64_t> batch_labels;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::int64_t start = 0; start < n; start += config.batch_size) {
            const std::int64_t bsz = std::min<std::int64_t>(config.batch_size, n - start);
            batch_images.resize(static_cast<std::size_t>(bsz * img_len));
            batch_labels.resize(static_cast<std::size_t>(bsz));
            for (std::int64_t j = 0; j < bsz; ++j) {
                const std::int64_t src = order[static_cast<std::size_t>(start + j)];
                std::copy_n(train.images.begin() + static_cast<std::ptrdiff_t>(src * img_len),
                            img_len,
                            batch_images.begin() + static_cast<std::ptrdiff_t>(j * img_len));
                batch_labels[static_cast<std::size_t>(j)] = train.labels[static_cast<std::size_t>(src)];
            }
            auto [loss, grads] = batch_gradients(work, batch_images, batch_labels, bsz);
            if (!std::isfinite(loss)) {
                throw NumericError("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", sample offset " +
                                   std::to_string(start));
            }
            loss_sum += loss * static_cast<double>(bsz);
            masked_step(work, grads, mask, config, state);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(n);
        const EvalResult ev = evaluate(work, val);
        stats.val_loss = ev.mean_loss;
        stats.top1 = ev.top1;
        if (!std::isfinite(stats.val_loss)) {
            throw NumericError("training diverged: non-finite validation loss at epoch " +
                               std::to_string(epoch));
        }
        stats.smoothed_val_loss =
            epoch == 1 ? stats.val_loss
                       : config.smoothing_alpha * stats.val_loss +
                             (1.0 - config.smoothing_alpha) * smoothed_prev;
        outcome.history.epochs.push_back(stats);

        if (stats.val_loss < best_val) {
            best_val = stats.val_loss;
            best_weights = work.weights;
            outcome.history.best_epoch = epoch;
        }
        if (epoch >= 2) {
            const double denom = std::fabs(smoothed_prev);
            const double delta = std::fabs(stats.smoothed_val_loss - smoothed_prev);
            const double rel = denom > 0.0 ? delta / denom : (delta > 0.0 ? 1.0 : 0.0);
            if (rel < config.convergence_tol) {
                outcome.history.stop_reason = "converged";
                smoothed_prev = stats.smoothed_val_loss;
                break;
            }
        }
        smoothed_prev = stats.smoothed_val_loss;
    }

    outcome.model = std::move(work);
    outcome.model.weights = std::move(best_weights);
    return outcome;
}

EvalResult evaluate(const ModelGraph& model, const Dataset& ds, int batch_size) {
    if (batch_size <= 0) throw ValidationError("batch_size must be positive");
    if (ds.size() == 0) throw ValidationError("cannot evaluate on an empty dataset");
    EvalResult result;
    result.n = ds.size();
    const std::int64_t img_len = ds.image_len();
    double loss_sum = 0.0;
    std::int64_t top1_hits = 0, topk_hits = 0;
    std::int64_t classes = 0;
    for (std::int64_t start = 0; start < ds.size(); start += batch_size) {
        const std::int64_t bsz = std::min<std::int64_t>(batch_size, ds.size() - start);
        const std::span<const float> images(ds.images.data() + start * img_len,
                                            static_cast<std::size_t>(bsz * img_len));
        const std::vector<double> logits = forward_logits(model, images, bsz);
        classes = std::ssize(logits) / bsz;
        const std::span<const std::int64_t> labels(ds.labels.data() + start,
                                                   static_cast<std::size_t>(bsz));
        check_labels(labels, bsz, classes);
        loss_sum += softmax_xent(logits, labels, bsz, classes, nullptr) * static_cast<double>(bsz);
        const std::int64_t k = std::min<std::int64_t>(5, classes);
        for (std::int64_t b = 0; b < bsz; ++b) {
            const double* row = logits.data() + b * classes;
            const std::int64_t label = labels[static_cast<std::size_t>(b)];
            // Rank of the true class with ties broken toward the lower index.
            std::int64_t rank = 0;
            for (std::int64_t c = 0; c < classes; ++c) {
                if (row[c] > row[label] || (row[c] == row[label] && c < label)) ++rank;
            }
            top1_hits += rank < 1 ? 1 : 0;
            topk_hits += rank < k ? 1 : 0;
        }
    }
    result.mean_loss = loss_sum / static_cast<double>(ds.size());
    result.top1 = static_cast<double>(top1_hits) / static_cast<double>(ds.size());
    result.top5 = static_cast<double>(topk_hits) / static_cast<double>(ds.size());
    return result;
}

void save_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << "epoch,train_loss,val_loss,smoothed_val_loss,top1\n";
    char line[256];
    for (const EpochStats& e : history.epochs) {
        std::snprintf(line, sizeof(line), "%d,%.10g,%.10g,%.10g,%.10g\n", e.epoch, e.train_loss,
                      e.val_loss, e.smoothed_val_loss, e.top1);
        out << line;
    }
}

}  // namespace prunekit
