#pragma once

#include "remkit/dataset.hpp"
#include "remkit/optimizer.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace remkit {

struct CScoreConfig {
    /// Explicit subset sizes; when empty, `subset_fractions` of the pool
    /// (excluding the target) are used.
    std::vector<std::size_t> subset_sizes;
    std::vector<double> subset_fractions{0.25, 0.5, 0.75};
    int repetitions = 20;
    int hidden = 32;
    int epochs = 10;
    int batch_size = 16;
    OptimizerConfig optimizer{OptimizerKind::adam, 0.01};
    std::uint64_t seed = 0;
};

/// Subset sizes actually used for a pool of `pool_size` examples.
std::vector<std::size_t> cscore_sizes(const CScoreConfig& cfg, std::size_t pool_size);

/// Seed of the model trained on a subset. Depends only on the master seed
/// and the sorted subset ids, so any enumeration of the same subset trains
/// the same model.
std::uint64_t subset_training_seed(std::uint64_t seed, std::span<const std::int64_t> subset_ids);

/// 1 if a fresh small model trained on `subset_rows` of `pool` predicts the
/// effective label of `target_row`, else 0. An empty subset means no training.
int subset_outcome(const LabeledDataset& pool, std::size_t target_row, std::span<const std::size_t> subset_rows,
                   const CScoreConfig& cfg);

/// Empirical consistency score of `target_row`: mean over subset sizes of
/// the mean outcome over `repetitions` random subsets excluding the target.
double estimate_cscore(const LabeledDataset& pool, std::size_t target_row, const CScoreConfig& cfg);

}  // namespace remkit
