#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prunekit/common.hpp"

namespace prunekit {

// Image classification samples: float32 pixels in [0,1], NCHW layout, integer
// labels in [0, num_classes).
struct Dataset {
    int channels = 0;
    int height = 0;
    int width = 0;
    int num_classes = 0;
    std::string split;  // "train", "val", or "test"
    std::vector<float> images;
    std::vector<std::int64_t> labels;

    std::int64_t size() const { return std::ssize(labels); }
    std::int64_t image_len() const {
        return static_cast<std::int64_t>(channels) * height * width;
    }
    std::span<const float> image(std::int64_t i) const {
        return std::span<const float>(images).subspan(static_cast<std::size_t>(i * image_len()),
                                                     static_cast<std::size_t>(image_len()));
    }
};

// IDX readers (big-endian, magic 0x00000803 for u8 images, 0x00000801 for u8
// labels). Pixels are normalized to [0,1]; channels is always 1. num_classes
// is max(label)+1 unless a larger value is passed. Throws ValidationError on
// bad magic, truncated or oversized files, or image/label count mismatch.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, int num_classes = 0);

// Writes a dataset back out as the IDX pair (pixels rescaled to u8). Only
// single-channel data fits the format.
void save_idx(const Dataset& ds, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path);

// Synthetic Gaussian-blob classification task. Each class gets one
// per-channel center drawn uniformly in [0,1]; a sample is its class center
// replicated across all spatial positions plus iid Gaussian noise, clamped to
// [0,1]. Labels are assigned round-robin, then the sample order is shuffled.
// Deterministic for a fixed seed.
Dataset synth_blobs(int classes, std::int64_t n, int channels, int height, int width,
                    std::uint64_t seed, float noise_stddev = 0.25f);

// First train_n samples become the train split, the next val_n the val split.
std::pair<Dataset, Dataset> split_train_val(const Dataset& ds, std::int64_t train_n,
                                            std::int64_t val_n);

}  // namespace prunekit
