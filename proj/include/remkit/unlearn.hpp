#pragma once

#include "remkit/masking.hpp"
#include "remkit/network.hpp"
#include "remkit/optimizer.hpp"
#include "remkit/tasks.hpp"
#include "remkit/trainer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace remkit {

enum class Method { none, rem, rem_ideal, npo, ascent, retrain, finetune, badt, scrub, etd_drop };

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct RemConfig {
    /// Memorization units added per hidden layer; empty means the capacity
    /// left over between the model's gen widths and its full-width profile.
    std::vector<int> mem_units;
    double density = 0.2;
    bool enable_step31 = true;  // redirect on D_tr through the shared-mask channel
    bool enable_step32 = true;  // removal barrier on D_f during repair
};

struct MethodConfig {
    double gamma = 0.2;
    double beta = 1.0;
    /// Unlearning learning rate; <= 0 means one fifth of the training rate.
    double ul_learning_rate = 0.0;
    int max_ul_epochs = 10;
    int batch_size = 128;
    /// Removal passes over D_f allowed per outer REM epoch before giving up.
    int step2_pass_cap = 50;
    double scrub_alpha = 0.1;
    int scrub_max_epochs = 5;
    double distill_temperature = 4.0;
    int badt_epochs = 1;
    RemConfig rem;
};

struct UnlearnContext {
    const PartitionedNetwork* original = nullptr;
    const TaskInstance* task = nullptr;
    /// Present when the original was trained with example-tied dropout.
    const MaskTable* mask_table = nullptr;
    MethodConfig config;
    TrainConfig train;  // recipe of the original model (retrain, finetune)
    ModelSpec model;
    std::uint64_t seed = 0;
};

struct UnlearnOutcome {
    PartitionedNetwork net;  // never carries memorization units
    std::string stop_reason;
    bool stopped_by_gamma = false;
    /// Acc(D_f) measured at the step that triggered the gamma stop.
    double forget_acc_at_stop = -1.0;
    long removal_steps = 0;
    std::vector<std::string> warnings;
};

/// Optimizer used for unlearning updates: the training optimizer kind at
/// the unlearning learning rate.
OptimizerConfig ul_optimizer(const UnlearnContext& ctx);

/// Accuracy of the gen-only view on D_f against effective labels.
double forget_accuracy(const PartitionedNetwork& net, const TaskInstance& task);

UnlearnOutcome rem(const UnlearnContext& ctx);
UnlearnOutcome rem_ideal(const UnlearnContext& ctx);
UnlearnOutcome npo_unlearn(const UnlearnContext& ctx);
UnlearnOutcome ascent(const UnlearnContext& ctx);
UnlearnOutcome retrain(const UnlearnContext& ctx);
UnlearnOutcome finetune(const UnlearnContext& ctx);
UnlearnOutcome badt(const UnlearnContext& ctx);
UnlearnOutcome scrub(const UnlearnContext& ctx);
UnlearnOutcome etd_drop(const UnlearnContext& ctx);
UnlearnOutcome no_unlearning(const UnlearnContext& ctx);

UnlearnOutcome run_method(Method m, const UnlearnContext& ctx);

/// Building blocks exposed for tests.
namespace detail {

enum class RemovalLoss { npo, ascent };

struct RemovalResult {
    bool stopped_by_gamma = false;
    double accuracy = 0.0;
    long steps = 0;
};

/// Minibatch updates on D_f through the gen-only view, touching only gen
/// blocks, until Acc(D_f) < gamma (checked before the first and after every
/// minibatch) or `max_passes` passes over D_f.
RemovalResult run_removal(PartitionedNetwork& net, const TaskInstance& task, RemovalLoss loss,
                          const std::vector<double>& ref_ce, OptimizerState& opt, Rng& rng, int max_passes,
                          const MethodConfig& cfg);

/// Gradient of the repair objective on one step: descent direction of
/// (L_remove - L_redirect). `redirect_*` is a D_tr minibatch under the
/// masked view; `barrier_*` a D_f minibatch under the gen-only view. Either
/// part may be skipped by passing an empty batch. Returns the objective.
double step3_gradient(const PartitionedNetwork& net, const Matrix& redirect_x, std::span<const int> redirect_y,
                      const BatchMasks& redirect_masks, std::span<const double> redirect_ref,
                      const Matrix& barrier_x, std::span<const int> barrier_y,
                      std::span<const double> barrier_ref, double beta, Gradients& grads);

}  // namespace detail

}  // namespace remkit
