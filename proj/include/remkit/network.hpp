#pragma once

#include "remkit/rng.hpp"
#include "remkit/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace remkit {

class MaskTable;

/// One affine layer whose inputs and outputs are each split into a
/// generalization block (first) and a memorization block (second).
///
/// The weight matrix of the equivalent undivided layer is
///
///     [ w_gg  w_gm ]     rows: gen outputs, then mem outputs
///     [ w_mg  w_mm ]     cols: gen inputs,  then mem inputs
///
/// Keeping the four blocks separate means a gen-only pass evaluates exactly
/// the same products as a network that never had memorization units.
struct DenseLayer {
    Matrix w_gg, w_gm, w_mg, w_mm;
    Matrix b_g, b_m;  // [1 x out]

    int in_gen() const { return static_cast<int>(w_gg.cols()); }
    int in_mem() const { return static_cast<int>(w_gm.cols()); }
    int out_gen() const { return static_cast<int>(w_gg.rows()); }
    int out_mem() const { return static_cast<int>(w_mg.rows()); }

    static DenseLayer zeros(int in_gen, int in_mem, int out_gen, int out_mem);

    /// Visits every parameter block in canonical order. `is_gen` is true for
    /// the blocks that belong to the generalization path (w_gg, b_g).
    template <class F>
    void visit(F&& f) {
        f(w_gg, true);
        f(w_gm, false);
        f(w_mg, false);
        f(w_mm, false);
        f(b_g, true);
        f(b_m, false);
    }
    template <class F>
    void visit(F&& f) const {
        f(w_gg, true);
        f(w_gm, false);
        f(w_mg, false);
        f(w_mm, false);
        f(b_g, true);
        f(b_m, false);
    }
};

enum class ForwardMode { full, gen_only, masked };

/// Per-hidden-layer 0/1 matrices [batch x mem_units] for masked passes.
using BatchMasks = std::vector<Matrix>;

class PartitionedNetwork {
public:
    PartitionedNetwork() = default;
    PartitionedNetwork(std::vector<DenseLayer> layers, double capacity_fraction);

    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }

    int input_dim() const { return layers_.front().in_gen(); }
    int num_classes() const { return layers_.back().out_gen(); }
    std::size_t hidden_count() const { return layers_.size() - 1; }
    std::vector<int> gen_widths() const;
    std::vector<int> mem_widths() const;
    bool has_mem() const;
    double capacity_fraction() const { return capacity_fraction_; }

    std::size_t parameter_count() const;
    std::size_t mem_parameter_count() const;
    bool all_finite() const;

    friend bool operator==(const PartitionedNetwork& a, const PartitionedNetwork& b);

private:
    std::vector<DenseLayer> layers_;
    double capacity_fraction_ = 1.0;
};

/// Gradient set with the same block layout as the network it belongs to.
struct Gradients {
    std::vector<DenseLayer> layers;

    static Gradients zeros_like(const PartitionedNetwork& net);
    Gradients& operator+=(const Gradients& other);
    Gradients& operator*=(double s);
    bool all_finite() const;
};

struct ForwardCache {
    ForwardMode mode = ForwardMode::full;
    Matrix input;
    std::vector<Matrix> act_gen;  // post-ReLU hidden activations
    std::vector<Matrix> act_mem;  // post-ReLU, post-mask; empty in gen_only
    BatchMasks masks;             // only for masked
    Matrix logits;
};

/// Builds a network for `profile` hidden widths. Gen widths are
/// round(capacity_fraction * profile[i]); `mem_units[i]` memorization units
/// are added to hidden layer i. Weights are He-uniform
/// U(-sqrt(6/fan_in), sqrt(6/fan_in)); biases start at zero.
PartitionedNetwork init_network(std::span<const int> profile, double capacity_fraction,
                                std::span<const int> mem_units, int input_dim, int num_classes,
                                Rng rng);

/// Forward pass. `masks` is required (one matrix per hidden layer, rows
/// matching the batch) when mode == masked and ignored otherwise.
ForwardCache forward(const PartitionedNetwork& net, const Matrix& batch, ForwardMode mode,
                     const BatchMasks* masks = nullptr);

/// Masked forward that looks each example id up in `table`. Throws if an id
/// has no mask.
ForwardCache forward(const PartitionedNetwork& net, const Matrix& batch, ForwardMode mode,
                     const MaskTable& table, std::span<const std::int64_t> ids);

Matrix logits(const PartitionedNetwork& net, const Matrix& batch,
              ForwardMode mode = ForwardMode::gen_only);

/// Backpropagates dLoss/dlogits through a cached pass of the same network.
/// Blocks outside the active path (mem blocks in gen_only, masked-off units
/// in masked) receive exact zeros.
Gradients backward(const PartitionedNetwork& net, const ForwardCache& cache,
                   const Matrix& dlogits);

/// Appends `add_units[i]` freshly initialized memorization units to hidden
/// layer i. Existing blocks are copied bit-for-bit; only the new rows and
/// columns are drawn from `rng`.
PartitionedNetwork expand_network(const PartitionedNetwork& net, std::span<const int> add_units,
                                  Rng rng);

/// Removes every memorization unit and its incident weights.
PartitionedNetwork excise_memorization(const PartitionedNetwork& net);

}  // namespace remkit
