#pragma once

#include "remkit/bench.hpp"
#include "remkit/network.hpp"
#include "remkit/rng.hpp"

#include <vector>

namespace testing {

using namespace remkit;

/// Small partitioned network with mem units on every hidden layer.
inline PartitionedNetwork small_net(std::uint64_t seed, std::vector<int> profile = {10, 8},
                                    std::vector<int> mem = {3, 2}, int in = 6, int classes = 4) {
    return init_network(profile, 0.5, mem, in, classes, Rng(seed));
}

inline Matrix random_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
    return m;
}

inline std::vector<int> random_labels(int n, int classes, Rng& rng) {
    std::vector<int> y;
    for (int i = 0; i < n; ++i) y.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
    return y;
}

inline BatchMasks random_masks(const PartitionedNetwork& net, int rows, Rng& rng) {
    BatchMasks out;
    for (int w : net.mem_widths()) {
        Matrix m(rows, w);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < w; ++c) m(r, c) = rng.uniform() < 0.5 ? 1.0 : 0.0;
        out.push_back(m);
    }
    return out;
}

/// Desk-size benchmark settings small enough for unit tests.
inline BenchConfig tiny_bench() {
    BenchConfig c;
    c.data = {4, 40, 20, 6, 0.3};
    c.random_label_n = 24;
    c.interclass_n = 12;
    c.interclass_a = 1;
    c.interclass_b = 3;
    c.poison_n = 24;
    c.trigger.size = 2;
    c.model.profile = {24, 24};
    c.train.epochs = 8;
    c.train.batch_size = 32;
    c.unlearn.gamma = 0.3;
    c.unlearn.max_ul_epochs = 2;
    c.unlearn.batch_size = 32;
    c.unlearn.step2_pass_cap = 10;
    return c;
}

}  // namespace testing
