#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "prunekit/model.hpp"

namespace testsupport {

using namespace prunekit;

// Builds a valid ModelGraph layer by layer, assigning contiguous weight and
// bias regions in declaration order. finish() sizes the weight buffer and
// validates the result, so fixture bugs fail loudly at construction.
class ModelBuilder {
  public:
    explicit ModelBuilder(std::string name) { model_.name = std::move(name); }

    ModelBuilder& conv(const std::string& name, std::int64_t cin, std::int64_t cout,
                       std::int64_t kernel, std::int64_t stride, std::int64_t groups,
                       std::int64_t ih, std::int64_t iw, Role role = Role::other,
                       bool bias = true) {
        LayerSpec l = base(name, OpKind::conv2d, role, cin, cout, ih, iw);
        l.kernel_h = l.kernel_w = kernel;
        l.stride = stride;
        l.groups = groups;
        l.prunable = kernel == 1 && groups == 1;
        place(l, cout * (cin / groups) * kernel * kernel, bias ? cout : 0);
        return push(l);
    }

    ModelBuilder& linear(const std::string& name, std::int64_t cin, std::int64_t cout,
                         Role role = Role::other, bool bias = true, bool prunable = false,
                         std::int64_t ih = 1, std::int64_t iw = 1) {
        LayerSpec l = base(name, OpKind::linear, role, cin, cout, ih, iw);
        l.prunable = prunable;
        place(l, cin * cout, bias ? cout : 0);
        return push(l);
    }

    ModelBuilder& relu(const std::string& name, std::int64_t c, std::int64_t ih, std::int64_t iw) {
        return plain(name, OpKind::relu, c, c, ih, iw);
    }

    ModelBuilder& gap(const std::string& name, std::int64_t c, std::int64_t ih, std::int64_t iw) {
        return plain(name, OpKind::global_avg_pool, c, c, ih, iw);
    }

    ModelBuilder& add(const std::string& name, std::int64_t c, std::int64_t ih, std::int64_t iw) {
        return plain(name, OpKind::add, c, c, ih, iw);
    }

    ModelBuilder& flatten(const std::string& name, std::int64_t c, std::int64_t ih,
                          std::int64_t iw) {
        return plain(name, OpKind::flatten, c, c * ih * iw, ih, iw);
    }

    ModelGraph finish() {
        model_.weights.assign(static_cast<std::size_t>(offset_), 0.0f);
        validate_model(model_);
        return std::move(model_);
    }

  private:
    static LayerSpec base(const std::string& name, OpKind op, Role role, std::int64_t cin,
                          std::int64_t cout, std::int64_t ih, std::int64_t iw) {
        LayerSpec l;
        l.name = name;
        l.op_kind = op;
        l.role = role;
        l.in_channels = cin;
        l.out_channels = cout;
        l.input_h = ih;
        l.input_w = iw;
        return l;
    }

    void place(LayerSpec& l, std::int64_t wlen, std::int64_t blen) {
        l.weight_offset = wlen > 0 ? offset_ : 0;
        l.weight_len = wlen;
        offset_ += wlen;
        l.bias_offset = blen > 0 ? offset_ : 0;
        l.bias_len = blen;
        offset_ += blen;
    }

    ModelBuilder& plain(const std::string& name, OpKind op, std::int64_t cin, std::int64_t cout,
                        std::int64_t ih, std::int64_t iw) {
        LayerSpec l = base(name, op, Role::other, cin, cout, ih, iw);
        return push(l);
    }

    ModelBuilder& push(const LayerSpec& l) {
        model_.layers.push_back(l);
        return *this;
    }

    ModelGraph model_;
    std::int64_t offset_ = 0;
};

inline void fill_uniform(ModelGraph& model, std::mt19937_64& rng, float lo = -1.0f,
                         float hi = 1.0f) {
    std::uniform_real_distribution<float> dist(lo, hi);
    for (float& v : model.weights) v = dist(rng);
}

// The small all-pointwise classifier used by the training tests: two 1x1
// convs with relus, global average pooling, and a non-prunable linear head.
inline ModelGraph toy_classifier(int in_c, int h, int w, int c1, int c2, int classes) {
    return ModelBuilder("toy")
        .conv("pw1", in_c, c1, 1, 1, 1, h, w, Role::pw)
        .relu("act1", c1, h, w)
        .conv("pw2", c1, c2, 1, 1, 1, h, w, Role::pw)
        .relu("act2", c2, h, w)
        .gap("pool", c2, h, w)
        .linear("head", c2, classes, Role::pwl)
        .finish();
}

// Random valid stack of 1x1 convs (all prunable) with occasional relus,
// stride-2 downsamples, and an optional pooled linear head. Strides give the
// layers heterogeneous spatial multipliers. Weights are uniform in [-1, 1].
inline ModelGraph random_model(std::mt19937_64& rng, std::int64_t max_prunable = 100000) {
    auto pick = [&](std::initializer_list<int> xs) {
        auto it = xs.begin();
        std::advance(it, static_cast<std::ptrdiff_t>(rng() % xs.size()));
        return *it;
    };
    std::int64_t c = pick({3, 4, 6, 8, 12, 16});
    std::int64_t h = pick({2, 3, 4, 6, 8});
    std::int64_t w = pick({2, 3, 4, 6, 8});
    const int depth = 1 + static_cast<int>(rng() % 5);
    ModelBuilder b("rand");
    std::int64_t prunable = 0;
    int placed = 0;
    for (int d = 0; d < depth; ++d) {
        const std::int64_t cout = pick({4, 8, 12, 16, 24, 32, 48, 64});
        if (placed > 0 && prunable + c * cout > max_prunable) break;
        const std::int64_t stride = (h >= 2 && w >= 2 && rng() % 3 == 0) ? 2 : 1;
        b.conv("pw" + std::to_string(d), c, cout, 1, stride, 1, h, w, Role::pw);
        prunable += c * cout;
        ++placed;
        h = (h - 1) / stride + 1;
        w = (w - 1) / stride + 1;
        c = cout;
        if (rng() % 2 == 0) b.relu("relu" + std::to_string(d), c, h, w);
    }
    if (rng() % 2 == 0) {
        b.gap("pool", c, h, w);
        b.linear("head", c, 10, Role::pwl);
    }
    ModelGraph model = b.finish();
    fill_uniform(model, rng);
    return model;
}

// Self-deleting scratch directory for artifact round-trips.
class TempDir {
  public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("prunekit_test_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

  private:
    std::filesystem::path path_;
};

}  // namespace testsupport
