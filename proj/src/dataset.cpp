#include "prunekit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace prunekit {
namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::filesystem::path& path) {
    if (offset + 4 > buf.size()) {
        throw ValidationError(path.string() + " is truncated (header incomplete)");
    }
    return (static_cast<std::uint32_t>(buf[offset]) << 24) |
           (static_cast<std::uint32_t>(buf[offset + 1]) << 16) |
           (static_cast<std::uint32_t>(buf[offset + 2]) << 8) |
           static_cast<std::uint32_t>(buf[offset + 3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
    const unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24),
                                    static_cast<unsigned char>(v >> 16),
                                    static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

void check_payload(const std::vector<unsigned char>& buf, std::size_t header,
                   std::uint64_t payload, const std::filesystem::path& path) {
    if (buf.size() < header + payload) {
        throw ValidationError(path.string() + " is truncated: expected " +
                              std::to_string(header + payload) + " bytes, found " +
                              std::to_string(buf.size()));
    }
    if (buf.size() > header + payload) {
        throw ValidationError(path.string() + " has trailing bytes past the declared payload");
    }
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, int num_classes) {
    const auto ibuf = read_file(images_path);
    if (read_be32(ibuf, 0, images_path) != kImagesMagic) {
        throw ValidationError(images_path.string() + " has a bad image magic number");
    }
    const std::uint64_t n = read_be32(ibuf, 4, images_path);
    const std::uint64_t rows = read_be32(ibuf, 8, images_path);
    const std::uint64_t cols = read_be32(ibuf, 12, images_path);
    check_payload(ibuf, 16, n * rows * cols, images_path);

    const auto lbuf = read_file(labels_path);
    if (read_be32(lbuf, 0, labels_path) != kLabelsMagic) {
        throw ValidationError(labels_path.string() + " has a bad label magic number");
    }
    const std::uint64_t ln = read_be32(lbuf, 4, labels_path);
    check_payload(lbuf, 8, ln, labels_path);
    if (ln != n) {
        throw ValidationError("image count " + std::to_string(n) + " does not match label count " +
                              std::to_string(ln));
    }

    Dataset ds;
    ds.channels = 1;
    ds.height = static_cast<int>(rows);
    ds.width = static_cast<int>(cols);
    ds.images.resize(n * rows * cols);
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        ds.images[i] = static_cast<float>(ibuf[16 + i]) / 255.0f;
    }
    ds.labels.resize(n);
    std::int64_t max_label = -1;
    for (std::uint64_t i = 0; i < n; ++i) {
        ds.labels[i] = lbuf[8 + i];
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.num_classes = std::max(num_classes, static_cast<int>(max_label + 1));
    return ds;
}

void save_idx(const Dataset& ds, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path) {
    if (ds.channels != 1) {
        throw ValidationError("IDX image files hold single-channel data; dataset has " +
                              std::to_string(ds.channels) + " channels");
    }
    std::ofstream iout(images_path, std::ios::binary | std::ios::trunc);
    if (!iout) throw ValidationError("cannot write " + images_path.string());
    write_be32(iout, kImagesMagic);
    write_be32(iout, static_cast<std::uint32_t>(ds.size()));
    write_be32(iout, static_cast<std::uint32_t>(ds.height));
    write_be32(iout, static_cast<std::uint32_t>(ds.width));
    for (float px : ds.images) {
        const float clamped = std::clamp(px, 0.0f, 1.0f);
        iout.put(static_cast<char>(std::lround(clamped * 255.0f)));
    }
    std::ofstream lout(labels_path, std::ios::binary | std::ios::trunc);
    if (!lout) throw ValidationError("cannot write " + labels_path.string());
    write_be32(lout, kLabelsMagic);
    write_be32(lout, static_cast<std::uint32_t>(ds.size()));
    for (std::int64_t label : ds.labels) lout.put(static_cast<char>(label));
}

Dataset synth_blobs(int classes, std::int64_t n, int channels, int height, int width,
                    std::uint64_t seed, float noise_stddev) {
    if (classes <= 0 || n <= 0 || channels <= 0 || height <= 0 || width <= 0) {
        throw ValidationError("synth_blobs requires positive class/sample/dimension counts");
    }
    if (noise_stddev < 0.0f) throw ValidationError("noise_stddev must be non-negative");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> center_dist(0.0f, 1.0f);
    std::normal_distribution<float> noise(0.0f, noise_stddev);

    std::vector<float> centers(static_cast<std::size_t>(classes) * channels);
    for (float& c : centers) c = center_dist(rng);

    Dataset ds;
    ds.channels = channels;
    ds.height = height;
    ds.width = width;
    ds.num_classes = classes;
    const std::int64_t img_len = ds.image_len();
    ds.images.resize(static_cast<std::size_t>(n * img_len));
    ds.labels.resize(static_cast<std::size_t>(n));
    const std::int64_t hw = static_cast<std::int64_t>(height) * width;
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t label = i % classes;
        ds.labels[static_cast<std::size_t>(i)] = label;
        float* img = ds.images.data() + static_cast<std::size_t>(i * img_len);
        for (int ch = 0; ch < channels; ++ch) {
            const float center = centers[static_cast<std::size_t>(label) * channels +
                                         static_cast<std::size_t>(ch)];
            for (std::int64_t p = 0; p < hw; ++p) {
                img[static_cast<std::size_t>(ch) * hw + static_cast<std::size_t>(p)] =
                    std::clamp(center + noise(rng), 0.0f, 1.0f);
            }
        }
    }

    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Dataset shuffled = ds;
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t src = order[static_cast<std::size_t>(i)];
        shuffled.labels[static_cast<std::size_t>(i)] = ds.labels[static_cast<std::size_t>(src)];
        std::copy_n(ds.images.begin() + static_cast<std::ptrdiff_t>(src * img_len), img_len,
                    shuffled.images.begin() + static_cast<std::ptrdiff_t>(i * img_len));
    }
    return shuffled;
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& ds, std::int64_t train_n,
                                            std::int64_t val_n) {
    if (train_n <= 0 || val_n <= 0 || train_n + val_n > ds.size()) {
        throw ValidationError("split sizes " + std::to_string(train_n) + "+" +
                              std::to_string(val_n) + " exceed the dataset size " +
                              std::to_string(ds.size()));
    }
    const std::int64_t img_len = ds.image_len();
    auto take = [&](std::int64_t begin, std::int64_t count, const char* tag) {
        Dataset part;
        part.channels = ds.channels;
        part.height = ds.height;
        part.width = ds.width;
        part.num_classes = ds.num_classes;
        part.split = tag;
        part.images.assign(ds.images.begin() + static_cast<std::ptrdiff_t>(begin * img_len),
                           ds.images.begin() + static_cast<std::ptrdiff_t>((begin + count) * img_len));
        part.labels.assign(ds.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                           ds.labels.begin() + static_cast<std::ptrdiff_t>(begin + count));
        return part;
    };
    return {take(0, train_n, "train"), take(train_n, val_n, "val")};
}

}  // namespace prunekit
