#include "remkit/dataset.hpp"

#include "remkit/error.hpp"
#include "remkit/io.hpp"
#include "remkit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace remkit {

namespace {

std::vector<unsigned char> read_all(const std::string& path) {
    if (!std::filesystem::exists(path)) throw MissingFileError("file not found: " + path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFileError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off, const std::string& path) {
    if (off + 4 > b.size())
        throw FormatError(path + ": truncated header at byte offset " + std::to_string(off));
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

LabeledDataset maybe_subsample(LabeledDataset ds, std::optional<std::size_t> limit, std::uint64_t seed) {
    if (!limit || *limit >= ds.size()) return ds;
    Rng rng = Rng(seed).split("subsample");
    auto rows = rng.choose(ds.size(), *limit);
    std::sort(rows.begin(), rows.end());
    auto sub = ds.subset(rows);
    for (std::size_t i = 0; i < sub.ids.size(); ++i) sub.ids[i] = static_cast<std::int64_t>(i);
    return sub;
}

void finish_labels(LabeledDataset& ds) {
    ds.labels = ds.clean_labels;
    ds.corrupted.assign(ds.clean_labels.size(), 0);
    ds.ids.resize(ds.clean_labels.size());
    for (std::size_t i = 0; i < ds.ids.size(); ++i) ds.ids[i] = static_cast<std::int64_t>(i);
    int mx = 0;
    for (int y : ds.clean_labels) mx = std::max(mx, y);
    ds.num_classes = std::max(10, mx + 1);
}

}  // namespace

std::vector<std::int64_t> LabeledDataset::corrupted_ids() const {
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < size(); ++i)
        if (corrupted[i]) out.push_back(ids[i]);
    return out;
}

std::size_t LabeledDataset::corrupted_count() const {
    return static_cast<std::size_t>(std::count(corrupted.begin(), corrupted.end(), std::uint8_t{1}));
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> rows) const {
    LabeledDataset s;
    s.inputs = gather_rows(inputs, rows);
    for (auto r : rows) {
        s.clean_labels.push_back(clean_labels[r]);
        s.labels.push_back(labels[r]);
        s.corrupted.push_back(corrupted[r]);
        s.ids.push_back(ids[r]);
    }
    s.num_classes = num_classes;
    s.channels = channels;
    s.height = height;
    s.width = width;
    return s;
}

void LabeledDataset::validate() const {
    const std::size_t n = size();
    if (labels.size() != n || corrupted.size() != n || ids.size() != n ||
        static_cast<std::size_t>(inputs.rows()) != n)
        throw std::logic_error("dataset arrays have inconsistent lengths");
    if (inputs.cols() != static_cast<Eigen::Index>(channels) * height * width)
        throw std::logic_error("dataset input width does not match image dimensions");
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes || clean_labels[i] < 0 || clean_labels[i] >= num_classes)
            throw std::logic_error("label out of range at row " + std::to_string(i));
        if (!corrupted[i] && labels[i] != clean_labels[i])
            throw std::logic_error("label differs from clean label but row " + std::to_string(i) + " is not flagged");
    }
}

std::pair<LabeledDataset, LabeledDataset> gen_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
    if (cfg.num_classes < 2) throw std::invalid_argument("gen_synthetic: need at least 2 classes");
    if (cfg.side < 1 || cfg.per_class_train < 0 || cfg.per_class_test < 0 || cfg.noise_sigma < 0.0)
        throw std::invalid_argument("gen_synthetic: invalid size parameters");
    const int d = cfg.side * cfg.side;
    Rng root(seed);
    Rng proto_rng = root.split("prototypes");
    Matrix protos(cfg.num_classes, d);
    for (Eigen::Index i = 0; i < protos.size(); ++i) protos.data()[i] = proto_rng.uniform();

    auto make = [&](int per_class, std::string_view key, std::int64_t id0) {
        Rng rng = root.split(key);
        LabeledDataset ds;
        const int n = per_class * cfg.num_classes;
        ds.inputs.resize(n, d);
        ds.channels = 1;
        ds.height = ds.width = cfg.side;
        ds.num_classes = cfg.num_classes;
        // Interleave classes so any prefix is roughly balanced.
        for (int i = 0; i < n; ++i) {
            const int y = i % cfg.num_classes;
            for (int p = 0; p < d; ++p) {
                const double noise = cfg.noise_sigma > 0.0 ? cfg.noise_sigma * rng.normal() : 0.0;
                ds.inputs(i, p) = std::clamp(0.8 * protos(y, p) + noise, 0.0, 1.0);
            }
            ds.clean_labels.push_back(y);
            ds.ids.push_back(id0 + i);
        }
        ds.labels = ds.clean_labels;
        ds.corrupted.assign(static_cast<std::size_t>(n), 0);
        return ds;
    };
    auto train = make(cfg.per_class_train, "train", 0);
    auto test = make(cfg.per_class_test, "test", static_cast<std::int64_t>(train.size()));
    return {std::move(train), std::move(test)};
}

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path,
                        std::optional<std::size_t> limit, std::uint64_t seed) {
    const auto img = read_all(images_path);
    const auto lab = read_all(labels_path);
    const std::uint32_t magic_i = read_be32(img, 0, images_path);
    if (magic_i != 0x00000803)
        throw FormatError(images_path + ": bad IDX image magic at byte offset 0");
    const std::uint32_t magic_l = read_be32(lab, 0, labels_path);
    if (magic_l != 0x00000801)
        throw FormatError(labels_path + ": bad IDX label magic at byte offset 0");
    const std::size_t n = read_be32(img, 4, images_path);
    const std::size_t rows = read_be32(img, 8, images_path);
    const std::size_t cols = read_be32(img, 12, images_path);
    const std::size_t nl = read_be32(lab, 4, labels_path);
    if (nl != n)
        throw FormatError(labels_path + ": label count " + std::to_string(nl) + " != image count " +
                          std::to_string(n) + " (byte offset 4)");
    const std::size_t d = rows * cols;
    if (img.size() < 16 + n * d)
        throw FormatError(images_path + ": truncated pixel data at byte offset " + std::to_string(img.size()) +
                          ", expected " + std::to_string(16 + n * d) + " bytes");
    if (lab.size() < 8 + n)
        throw FormatError(labels_path + ": truncated label data at byte offset " + std::to_string(lab.size()) +
                          ", expected " + std::to_string(8 + n) + " bytes");

    LabeledDataset ds;
    ds.channels = 1;
    ds.height = static_cast<int>(rows);
    ds.width = static_cast<int>(cols);
    ds.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < d; ++p)
            ds.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = img[16 + i * d + p] / 255.0;
        ds.clean_labels.push_back(lab[8 + i]);
    }
    finish_labels(ds);
    return maybe_subsample(std::move(ds), limit, seed);
}

LabeledDataset load_cifar_binary(std::span<const std::string> paths, std::optional<std::size_t> limit,
                                 std::uint64_t seed) {
    constexpr std::size_t kRecord = 1 + 3072;
    std::vector<std::vector<unsigned char>> files;
    std::size_t n = 0;
    for (const auto& p : paths) {
        auto b = read_all(p);
        if (b.size() % kRecord != 0)
            throw FormatError(p + ": truncated record at byte offset " +
                              std::to_string(b.size() - b.size() % kRecord));
        n += b.size() / kRecord;
        files.push_back(std::move(b));
    }
    LabeledDataset ds;
    ds.channels = 3;
    ds.height = ds.width = 32;
    ds.inputs.resize(static_cast<Eigen::Index>(n), 3072);
    Eigen::Index row = 0;
    for (std::size_t f = 0; f < files.size(); ++f) {
        const auto& b = files[f];
        for (std::size_t off = 0; off < b.size(); off += kRecord, ++row) {
            if (b[off] > 9)
                throw FormatError(paths[f] + ": label " + std::to_string(b[off]) + " out of range at byte offset " +
                                  std::to_string(off));
            ds.clean_labels.push_back(b[off]);
            for (Eigen::Index p = 0; p < 3072; ++p) ds.inputs(row, p) = b[off + 1 + static_cast<std::size_t>(p)] / 255.0;
        }
    }
    finish_labels(ds);
    return maybe_subsample(std::move(ds), limit, seed);
}

void write_idx(const LabeledDataset& ds, const std::string& images_path, const std::string& labels_path) {
    if (ds.channels != 1) throw std::invalid_argument("write_idx: only single-channel datasets are supported");
    auto be32 = [](std::string& s, std::uint32_t v) {
        for (int sh = 24; sh >= 0; sh -= 8) s.push_back(static_cast<char>((v >> sh) & 0xFF));
    };
    std::string img, lab;
    be32(img, 0x00000803);
    be32(img, static_cast<std::uint32_t>(ds.size()));
    be32(img, static_cast<std::uint32_t>(ds.height));
    be32(img, static_cast<std::uint32_t>(ds.width));
    for (Eigen::Index i = 0; i < ds.inputs.size(); ++i)
        img.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(ds.inputs.data()[i], 0.0, 1.0) * 255.0))));
    be32(lab, 0x00000801);
    be32(lab, static_cast<std::uint32_t>(ds.size()));
    for (int y : ds.labels) lab.push_back(static_cast<char>(y));
    write_file_atomic(images_path, img);
    write_file_atomic(labels_path, lab);
}

}  // namespace remkit
