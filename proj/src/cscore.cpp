#include "remkit/cscore.hpp"

#include "remkit/error.hpp"
#include "remkit/rng.hpp"
#include "remkit/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace remkit {

std::vector<std::size_t> cscore_sizes(const CScoreConfig& cfg, std::size_t pool_size) {
    if (pool_size == 0) throw std::invalid_argument("cscore: empty pool");
    const std::size_t others = pool_size - 1;
    std::vector<std::size_t> sizes = cfg.subset_sizes;
    if (sizes.empty())
        for (double f : cfg.subset_fractions) {
            if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("cscore subset fractions must be in [0, 1]");
            sizes.push_back(static_cast<std::size_t>(std::llround(f * static_cast<double>(others))));
        }
    for (auto n : sizes)
        if (n > others)
            throw std::invalid_argument("cscore: subset size " + std::to_string(n) + " exceeds pool size - 1 (" +
                                        std::to_string(others) + ")");
    return sizes;
}

std::uint64_t subset_training_seed(std::uint64_t seed, std::span<const std::int64_t> subset_ids) {
    std::vector<std::int64_t> ids(subset_ids.begin(), subset_ids.end());
    std::sort(ids.begin(), ids.end());
    std::uint64_t h = hash_combine(seed, hash_str("cscore_subset"));
    h = hash_combine(h, ids.size());
    for (auto id : ids) h = hash_combine(h, static_cast<std::uint64_t>(id));
    return h;
}

int subset_outcome(const LabeledDataset& pool, std::size_t target_row, std::span<const std::size_t> subset_rows,
                   const CScoreConfig& cfg) {
    if (target_row >= pool.size()) throw std::out_of_range("cscore: target row out of range");
    std::vector<std::int64_t> ids;
    for (auto r : subset_rows) {
        if (r == target_row) throw std::invalid_argument("cscore: subset contains the target");
        ids.push_back(pool.ids[r]);
    }
    Rng rng(subset_training_seed(cfg.seed, ids));
    const std::vector<int> profile{cfg.hidden};
    PartitionedNetwork net = init_network(profile, 1.0, {}, pool.dim(), pool.num_classes, rng.split("init"));
    if (!subset_rows.empty()) {
        TrainConfig tc;
        tc.epochs = cfg.epochs;
        tc.batch_size = cfg.batch_size;
        tc.optimizer = cfg.optimizer;
        net = train_supervised(std::move(net), pool, subset_rows, tc, nullptr, rng.split("train"));
    }
    const Matrix x = pool.inputs.row(static_cast<Eigen::Index>(target_row));
    return predict(net, x).front() == pool.labels[target_row] ? 1 : 0;
}

double estimate_cscore(const LabeledDataset& pool, std::size_t target_row, const CScoreConfig& cfg) {
    if (cfg.repetitions < 1) throw ConfigError("cscore repetitions must be >= 1");
    if (target_row >= pool.size()) throw std::out_of_range("cscore: target row out of range");
    const auto sizes = cscore_sizes(cfg, pool.size());
    if (sizes.empty()) throw ConfigError("cscore: no subset sizes");
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (i != target_row) others.push_back(i);

    const Rng base = Rng(cfg.seed).split("cscore_draws").split(static_cast<std::uint64_t>(pool.ids[target_row]));
    double total = 0.0;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
        int hits = 0;
        for (int rep = 0; rep < cfg.repetitions; ++rep) {
            Rng draw = base.split(sizes[s]).split(static_cast<std::uint64_t>(rep));
            std::vector<std::size_t> rows;
            for (auto k : draw.choose(others.size(), sizes[s])) rows.push_back(others[k]);
            std::sort(rows.begin(), rows.end());
            hits += subset_outcome(pool, target_row, rows, cfg);
        }
        total += static_cast<double>(hits) / cfg.repetitions;
    }
    return total / static_cast<double>(sizes.size());
}

}  // namespace remkit
