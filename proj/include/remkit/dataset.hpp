#pragma once

#include "remkit/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace remkit {

/// Images flattened channel-major (c, row, col) into rows of `inputs`,
/// with pixel values in [0, 1].
struct LabeledDataset {
    Matrix inputs;
    std::vector<int> clean_labels;
    std::vector<int> labels;  // effective (possibly corrupted) labels
    std::vector<std::uint8_t> corrupted;
    std::vector<std::int64_t> ids;
    int num_classes = 0;
    int channels = 1;
    int height = 0;
    int width = 0;

    std::size_t size() const { return clean_labels.size(); }
    int dim() const { return static_cast<int>(inputs.cols()); }

    std::vector<std::int64_t> corrupted_ids() const;
    std::size_t corrupted_count() const;

    /// Row-subset preserving ids.
    LabeledDataset subset(std::span<const std::size_t> rows) const;

    /// Throws std::logic_error on any broken invariant.
    void validate() const;
};

struct SyntheticConfig {
    int num_classes = 10;
    int per_class_train = 500;
    int per_class_test = 100;
    int side = 8;
    double noise_sigma = 0.15;
};

/// Per class, a pseudo-random prototype image in [0,1]^(side*side); each
/// sample is clip(0.8 * prototype + N(0, sigma^2), 0, 1) per pixel.
/// Returns (train, test); test ids continue after the train ids.
std::pair<LabeledDataset, LabeledDataset> gen_synthetic(const SyntheticConfig& cfg, std::uint64_t seed);

/// IDX image (magic 0x00000803) + label (0x00000801) files. When `limit`
/// is set, a seeded uniform subsample of that many examples is kept.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path,
                        std::optional<std::size_t> limit = std::nullopt, std::uint64_t seed = 0);

/// CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes.
LabeledDataset load_cifar_binary(std::span<const std::string> paths,
                                 std::optional<std::size_t> limit = std::nullopt, std::uint64_t seed = 0);

/// Writes a single-channel dataset as an IDX pair (pixels quantized to u8).
void write_idx(const LabeledDataset& ds, const std::string& images_path, const std::string& labels_path);

}  // namespace remkit
