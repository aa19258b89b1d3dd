#pragma once

#include "remkit/network.hpp"

#include <string>

namespace remkit {

enum class OptimizerKind { sgd, adam };

/// Which parameter blocks an update may touch. `gen` restricts updates to
/// the generalization blocks (w_gg, b_g); memorization blocks and their
/// accumulators are left bit-unchanged.
enum class ParamScope { all, gen };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd;
    double learning_rate = 0.025;
    double momentum = 0.9;  // sgd
    double beta1 = 0.9;     // adam
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Optimizer plus per-parameter accumulators. Accumulators are allocated on
/// the first step and mirror the network's block shapes.
class OptimizerState {
public:
    OptimizerState() = default;
    explicit OptimizerState(OptimizerConfig cfg) : cfg_(cfg) {}

    const OptimizerConfig& config() const { return cfg_; }
    long steps() const { return steps_; }

    /// Applies one update in place. Throws NumericError if any gradient in
    /// scope is non-finite; the network is not modified in that case.
    void step(PartitionedNetwork& net, const Gradients& grads, ParamScope scope = ParamScope::all);

private:
    OptimizerConfig cfg_;
    long steps_ = 0;
    Gradients first_;   // momentum buffer / Adam m
    Gradients second_;  // Adam v
};

OptimizerKind parse_optimizer_kind(const std::string& s);
std::string to_string(OptimizerKind k);

}  // namespace remkit
