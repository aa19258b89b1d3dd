#include "remkit/trainer.hpp"

#include "remkit/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace remkit {

PartitionedNetwork train_supervised(PartitionedNetwork net, const LabeledDataset& ds,
                                    std::span<const std::size_t> rows, const TrainConfig& cfg,
                                    const MaskTable* masks, Rng rng) {
    std::vector<std::size_t> order(rows.begin(), rows.end());
    if (order.empty()) {
        order.resize(ds.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
    }
    if (order.empty()) throw std::invalid_argument("train_supervised: empty dataset");
    if (cfg.batch_size < 1) throw std::invalid_argument("train_supervised: batch_size must be >= 1");
    if (cfg.epochs <= 0) return net;

    BatchMasks dense;
    if (masks != nullptr) dense = masks->batch_masks(ds.ids);
    const ForwardMode mode = masks != nullptr ? ForwardMode::masked : ForwardMode::full;

    OptimizerState opt(cfg.optimizer);
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    std::vector<int> y;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::span<const std::size_t> batch(order.data() + start, std::min(bs, order.size() - start));
            const Matrix x = gather_rows(ds.inputs, batch);
            y.clear();
            for (auto r : batch) y.push_back(ds.labels[r]);
            BatchMasks bm;
            if (masks != nullptr) bm = gather_masks(dense, batch);
            const auto cache = forward(net, x, mode, masks != nullptr ? &bm : nullptr);
            const auto ce = cross_entropy(cache.logits, y);
            opt.step(net, backward(net, cache, ce.grad));
        }
    }
    return net;
}

std::vector<int> leftover_mem_units(const ModelSpec& spec) {
    std::vector<int> out;
    for (int w : spec.profile) {
        const int gen = static_cast<int>(std::lround(spec.capacity_fraction * w));
        out.push_back(std::max(0, w - gen));
    }
    return out;
}

std::vector<int> predict(const PartitionedNetwork& net, const Matrix& inputs, ForwardMode mode) {
    return argmax_rows(forward(net, inputs, mode).logits);
}

double accuracy(const PartitionedNetwork& net, const Matrix& inputs, std::span<const int> labels,
                ForwardMode mode) {
    if (labels.empty()) return 0.0;
    const auto pred = predict(net, inputs, mode);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
    return static_cast<double>(hit) / static_cast<double>(labels.size());
}

std::vector<double> per_example_ce(const PartitionedNetwork& net, const Matrix& inputs,
                                   std::span<const int> labels, ForwardMode mode, const BatchMasks* masks) {
    return cross_entropy(forward(net, inputs, mode, masks).logits, labels).per_example;
}

}  // namespace remkit
