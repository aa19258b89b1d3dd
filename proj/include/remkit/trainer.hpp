#pragma once

#include "remkit/dataset.hpp"
#include "remkit/masking.hpp"
#include "remkit/network.hpp"
#include "remkit/optimizer.hpp"
#include "remkit/rng.hpp"

#include <span>
#include <vector>

namespace remkit {

struct TrainConfig {
    int epochs = 40;
    int batch_size = 128;
    OptimizerConfig optimizer;
};

/// Shuffled minibatch cross-entropy training on the effective labels of
/// `rows` (all rows when empty). With a mask table the forward pass is
/// masked per example id; the gen partition is always active.
PartitionedNetwork train_supervised(PartitionedNetwork net, const LabeledDataset& ds,
                                    std::span<const std::size_t> rows, const TrainConfig& cfg,
                                    const MaskTable* masks, Rng rng);

/// Builds a fresh network and trains it. When `etd_masks` is given, the
/// network gets memorization units matching the table's shape.
struct ModelSpec {
    std::vector<int> profile{128, 128};
    double capacity_fraction = 0.5;
};

std::vector<int> leftover_mem_units(const ModelSpec& spec);

/// Predictions in the given mode (gen_only by default: memorization units
/// are always dropped at evaluation).
std::vector<int> predict(const PartitionedNetwork& net, const Matrix& inputs,
                         ForwardMode mode = ForwardMode::gen_only);

double accuracy(const PartitionedNetwork& net, const Matrix& inputs, std::span<const int> labels,
                ForwardMode mode = ForwardMode::gen_only);

/// Per-example cross-entropy, evaluated in chunks.
std::vector<double> per_example_ce(const PartitionedNetwork& net, const Matrix& inputs,
                                   std::span<const int> labels, ForwardMode mode = ForwardMode::gen_only,
                                   const BatchMasks* masks = nullptr);

}  // namespace remkit
