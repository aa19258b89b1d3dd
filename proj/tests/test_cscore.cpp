#include "remkit/cscore.hpp"
#include "remkit/error.hpp"

#include <doctest.h>

#include <cmath>

using namespace remkit;

namespace {

LabeledDataset pool_of(int n, std::uint64_t seed) {
    auto [train, test] = gen_synthetic({2, n / 2, 1, 4, 0.2}, seed);
    return train;
}

/// Exhaustive mean outcome over every subset of size k of the non-target rows.
double exhaustive(const LabeledDataset& pool, std::size_t target, std::size_t k, const CScoreConfig& cfg) {
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (i != target) others.push_back(i);
    const std::size_t n = others.size();
    int hits = 0, count = 0;
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
        if (static_cast<std::size_t>(__builtin_popcount(bits)) != k) continue;
        std::vector<std::size_t> rows;
        for (std::size_t j = 0; j < n; ++j)
            if (bits & (1u << j)) rows.push_back(others[j]);
        hits += subset_outcome(pool, target, rows, cfg);
        ++count;
    }
    return static_cast<double>(hits) / count;
}

}  // namespace

TEST_CASE("subset sizes") {
    CScoreConfig cfg;
    CHECK(cscore_sizes(cfg, 9) == std::vector<std::size_t>{2, 4, 6});
    cfg.subset_sizes = {9};
    CHECK_THROWS(cscore_sizes(cfg, 9));
}

TEST_CASE("subset training seed ignores enumeration order") {
    const std::vector<std::int64_t> a{3, 1, 2}, b{1, 2, 3}, c{1, 2, 4};
    CHECK(subset_training_seed(7, a) == subset_training_seed(7, b));
    CHECK(subset_training_seed(7, a) != subset_training_seed(7, c));
}

TEST_CASE("estimate is deterministic and in [0, 1]") {
    const auto pool = pool_of(8, 1);
    CScoreConfig cfg;
    cfg.repetitions = 4;
    const double a = estimate_cscore(pool, 2, cfg);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    CHECK(estimate_cscore(pool, 2, cfg) == a);
    CHECK_THROWS(estimate_cscore(pool, 99, cfg));
}

TEST_CASE("empty subsets give untrained-model accuracy near chance") {
    auto [train, test] = gen_synthetic({4, 50, 1, 4, 0.2}, 3);
    CScoreConfig cfg;
    cfg.subset_sizes = {0};
    cfg.repetitions = 1;
    int hits = 0;
    const int n = static_cast<int>(train.size());
    for (int i = 0; i < n; ++i) {
        cfg.seed = static_cast<std::uint64_t>(i);
        hits += estimate_cscore(train, static_cast<std::size_t>(i), cfg) > 0.5;
    }
    const double p = 0.25, sd = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(static_cast<double>(hits) / n - p) <= 3 * sd);
}

TEST_CASE("sampled estimate converges to the exhaustive average") {
    const auto pool = pool_of(8, 4);
    CScoreConfig cfg;
    cfg.subset_sizes = {3};
    cfg.repetitions = 150;
    for (std::size_t target : {0u, 5u}) CHECK(std::abs(estimate_cscore(pool, target, cfg) - exhaustive(pool, target, 3, cfg)) <= 0.1);
}

TEST_CASE("a duplicated example scores at least as high as a mislabeled outlier") {
    auto pool = pool_of(8, 11);
    pool.inputs.row(1) = pool.inputs.row(0);
    pool.labels[1] = pool.clean_labels[1] = pool.labels[0];
    pool.labels[7] = 1 - pool.labels[7];
    CScoreConfig cfg;
    cfg.repetitions = 40;
    CHECK(estimate_cscore(pool, 0, cfg) >= estimate_cscore(pool, 7, cfg));
}
