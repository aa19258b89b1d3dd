#include "remkit/unlearn.hpp"

#include "remkit/error.hpp"
#include "remkit/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace remkit {

namespace {

std::vector<int> labels_of(const LabeledDataset& ds, std::span<const std::size_t> rows) {
    std::vector<int> y;
    y.reserve(rows.size());
    for (auto r : rows) y.push_back(ds.labels[r]);
    return y;
}

std::vector<double> gather(const std::vector<double>& v, std::span<const std::size_t> idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(v[i]);
    return out;
}

void require(const UnlearnContext& ctx) {
    if (ctx.original == nullptr || ctx.task == nullptr) throw std::invalid_argument("unlearning context is incomplete");
    if (ctx.config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (ctx.config.max_ul_epochs < 0) throw ConfigError("max_ul_epochs must be >= 0");
    if (!(ctx.config.beta > 0.0)) throw ConfigError("beta must be > 0");
}

UnlearnOutcome finish(PartitionedNetwork net, std::string reason) {
    UnlearnOutcome out;
    out.net = excise_memorization(net);
    out.stop_reason = std::move(reason);
    if (!out.net.all_finite()) throw NumericError("unlearning produced non-finite parameters");
    return out;
}

/// Minibatch gradient-descent driver over `rows`; `fn` fills the gradient
/// for one batch.
template <class Fn>
void for_each_batch(std::vector<std::size_t>& order, std::size_t bs, Rng& rng, Fn&& fn) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += bs)
        fn(std::span<const std::size_t>(order.data() + start, std::min(bs, order.size() - start)));
}

UnlearnOutcome removal_method(const UnlearnContext& ctx, detail::RemovalLoss loss) {
    require(ctx);
    const TaskInstance& task = *ctx.task;
    PartitionedNetwork net = *ctx.original;
    if (task.forget_ids.empty()) return finish(std::move(net), "empty_forget");
    const auto frows = task.forget_rows();
    const auto ref = per_example_ce(net, gather_rows(task.train.inputs, frows), labels_of(task.train, frows));
    OptimizerState opt(ul_optimizer(ctx));
    Rng rng = Rng(ctx.seed).split("remove");
    const auto r = detail::run_removal(net, task, loss, ref, opt, rng, ctx.config.max_ul_epochs, ctx.config);
    UnlearnOutcome out = finish(std::move(net), r.stopped_by_gamma ? "gamma" : "max_epochs");
    out.stopped_by_gamma = r.stopped_by_gamma;
    out.forget_acc_at_stop = r.stopped_by_gamma ? r.accuracy : -1.0;
    out.removal_steps = r.steps;
    return out;
}

UnlearnOutcome rem_impl(const UnlearnContext& ctx, bool ideal) {
    require(ctx);
    const TaskInstance& task = *ctx.task;
    const MethodConfig& cfg = ctx.config;
    if (task.forget_ids.empty()) return finish(*ctx.original, "empty_forget");

    // Step 1: reuse example-tied units when present, otherwise add fresh ones.
    PartitionedNetwork net = *ctx.original;
    if (ctx.mask_table == nullptr) {
        std::vector<int> add = cfg.rem.mem_units.empty() ? leftover_mem_units(ctx.model) : cfg.rem.mem_units;
        if (add.size() != net.hidden_count()) throw ConfigError("rem.mem_units must have one entry per hidden layer");
        net = expand_network(net, add, Rng(ctx.seed).split("expand"));
    }
    const std::vector<int> mem_shape = net.mem_widths();
    const std::uint64_t mask_seed = Rng(ctx.seed).split("rem_masks").next_u64();
    const MaskTable table =
        ideal ? assign_ideal_masks(task.train.ids, task.train.corrupted_ids(), mem_shape, cfg.rem.density, mask_seed)
              : assign_rem_masks(task.train.ids, task.forget_ids, mem_shape, cfg.rem.density, mask_seed,
                                 ctx.mask_table);

    // Reference model: the expanded network before any update.
    const auto frows = task.forget_rows();
    const Matrix fx = gather_rows(task.train.inputs, frows);
    const auto fy = labels_of(task.train, frows);
    const auto ref_forget = per_example_ce(net, fx, fy);
    const BatchMasks all_masks = table.batch_masks(task.train.ids);
    std::vector<double> ref_train;
    if (cfg.rem.enable_step31)
        ref_train = per_example_ce(net, task.train.inputs, task.train.labels, ForwardMode::masked, &all_masks);

    OptimizerState remove_opt(ul_optimizer(ctx));
    OptimizerState repair_opt(ul_optimizer(ctx));
    Rng rng = Rng(ctx.seed).split("remove");
    Rng repair_rng = Rng(ctx.seed).split("repair");
    const auto bs = static_cast<std::size_t>(cfg.batch_size);

    UnlearnOutcome out;
    out.stop_reason = "max_epochs";
    std::vector<std::size_t> order(task.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < cfg.max_ul_epochs; ++epoch) {
        // Step 2: remove until the forget set falls below gamma.
        const auto r = detail::run_removal(net, task, detail::RemovalLoss::npo, ref_forget, remove_opt, rng,
                                           cfg.step2_pass_cap, cfg);
        out.removal_steps += r.steps;
        if (r.stopped_by_gamma) {
            out.stopped_by_gamma = true;
            out.forget_acc_at_stop = r.accuracy;
            out.stop_reason = "gamma";
        } else {
            out.warnings.push_back("epoch " + std::to_string(epoch) + ": removal hit the pass cap at Acc(D_f)=" +
                                   std::to_string(r.accuracy));
            out.stop_reason = "step2_cap";
        }

        // Step 3: repair on D_tr while redirecting D_f into the shared mask.
        if (!cfg.rem.enable_step31 && !cfg.rem.enable_step32) continue;
        for_each_batch(order, bs, repair_rng, [&](std::span<const std::size_t> batch) {
            Gradients g = Gradients::zeros_like(net);
            Matrix rx;
            std::vector<int> ry;
            BatchMasks rm;
            std::vector<double> rref;
            if (cfg.rem.enable_step31) {
                rx = gather_rows(task.train.inputs, batch);
                ry = labels_of(task.train, batch);
                rm = gather_masks(all_masks, batch);
                rref = gather(ref_train, batch);
            }
            Matrix bx;
            std::vector<int> by;
            std::vector<double> bref;
            if (cfg.rem.enable_step32) {
                const auto pick = repair_rng.choose(frows.size(), std::min(bs, frows.size()));
                std::vector<std::size_t> rows;
                for (auto p : pick) rows.push_back(frows[p]);
                bx = gather_rows(task.train.inputs, rows);
                by = labels_of(task.train, rows);
                bref = gather(ref_forget, pick);
            }
            detail::step3_gradient(net, rx, ry, rm, rref, bx, by, bref, cfg.beta, g);
            repair_opt.step(net, g, ParamScope::all);
        });
    }

    // Step 4: drop the memorization units.
    UnlearnOutcome done = finish(std::move(net), out.stop_reason);
    done.stopped_by_gamma = out.stopped_by_gamma;
    done.forget_acc_at_stop = out.forget_acc_at_stop;
    done.removal_steps = out.removal_steps;
    done.warnings = std::move(out.warnings);
    return done;
}

/// Distillation-style training of `student` on `rows` towards per-row
/// teacher logits under the gen-only view.
void distill_pass(PartitionedNetwork& student, const LabeledDataset& ds, std::vector<std::size_t>& rows,
                  const Matrix& teacher_logits_all, double temperature, double sign, double ce_weight,
                  OptimizerState& opt, Rng& rng, std::size_t bs) {
    if (rows.empty()) return;
    for_each_batch(rows, bs, rng, [&](std::span<const std::size_t> batch) {
        const Matrix x = gather_rows(ds.inputs, batch);
        const auto cache = forward(student, x, ForwardMode::gen_only);
        const auto kl = kl_distill(cache.logits, gather_rows(teacher_logits_all, batch), temperature);
        Matrix dl = sign * kl.grad;
        if (ce_weight != 0.0) dl += ce_weight * cross_entropy(cache.logits, labels_of(ds, batch)).grad;
        opt.step(student, backward(student, cache, dl), ParamScope::gen);
    });
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::none: return "none";
        case Method::rem: return "rem";
        case Method::rem_ideal: return "rem_ideal";
        case Method::npo: return "npo";
        case Method::ascent: return "ascent";
        case Method::retrain: return "retrain";
        case Method::finetune: return "finetune";
        case Method::badt: return "badt";
        case Method::scrub: return "scrub";
        case Method::etd_drop: return "etd_drop";
    }
    return "none";
}

Method parse_method(const std::string& s) {
    for (Method m : {Method::none, Method::rem, Method::rem_ideal, Method::npo, Method::ascent, Method::retrain,
                     Method::finetune, Method::badt, Method::scrub, Method::etd_drop})
        if (to_string(m) == s) return m;
    throw ConfigError("unknown method '" + s + "'");
}

OptimizerConfig ul_optimizer(const UnlearnContext& ctx) {
    OptimizerConfig o = ctx.train.optimizer;
    o.learning_rate = ctx.config.ul_learning_rate > 0.0 ? ctx.config.ul_learning_rate : o.learning_rate / 5.0;
    return o;
}

double forget_accuracy(const PartitionedNetwork& net, const TaskInstance& task) {
    const auto rows = task.forget_rows();
    if (rows.empty()) return 0.0;
    return accuracy(net, gather_rows(task.train.inputs, rows), labels_of(task.train, rows));
}

namespace detail {

RemovalResult run_removal(PartitionedNetwork& net, const TaskInstance& task, RemovalLoss loss,
                          const std::vector<double>& ref_ce, OptimizerState& opt, Rng& rng, int max_passes,
                          const MethodConfig& cfg) {
    const auto frows = task.forget_rows();
    const Matrix fx = gather_rows(task.train.inputs, frows);
    const auto fy = labels_of(task.train, frows);
    if (loss == RemovalLoss::npo && ref_ce.size() != frows.size())
        throw std::invalid_argument("run_removal: reference losses do not match the forget set");

    RemovalResult res;
    res.accuracy = accuracy(net, fx, fy);
    if (res.accuracy < cfg.gamma) {
        res.stopped_by_gamma = true;
        return res;
    }
    std::vector<std::size_t> order(frows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    for (int pass = 0; pass < max_passes; ++pass) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::span<const std::size_t> batch(order.data() + start, std::min(bs, order.size() - start));
            const Matrix x = gather_rows(fx, batch);
            std::vector<int> y;
            for (auto i : batch) y.push_back(fy[i]);
            const auto cache = forward(net, x, ForwardMode::gen_only);
            Matrix dl;
            if (loss == RemovalLoss::npo) {
                dl = npo_term(cache.logits, y, gather(ref_ce, batch), cfg.beta).grad;
            } else {
                dl = -cross_entropy(cache.logits, y).grad;
            }
            opt.step(net, backward(net, cache, dl), ParamScope::gen);
            ++res.steps;
            res.accuracy = accuracy(net, fx, fy);
            if (res.accuracy < cfg.gamma) {
                res.stopped_by_gamma = true;
                return res;
            }
        }
    }
    return res;
}

double step3_gradient(const PartitionedNetwork& net, const Matrix& redirect_x, std::span<const int> redirect_y,
                      const BatchMasks& redirect_masks, std::span<const double> redirect_ref,
                      const Matrix& barrier_x, std::span<const int> barrier_y,
                      std::span<const double> barrier_ref, double beta, Gradients& grads) {
    double objective = 0.0;
    if (redirect_x.rows() > 0) {
        const auto cache = forward(net, redirect_x, ForwardMode::masked, &redirect_masks);
        const auto l = npo_term(cache.logits, redirect_y, redirect_ref, beta);
        Gradients g = backward(net, cache, l.grad);
        g *= -1.0;
        grads += g;
        objective -= l.mean;
    }
    if (barrier_x.rows() > 0) {
        const auto cache = forward(net, barrier_x, ForwardMode::gen_only);
        const auto l = npo_term(cache.logits, barrier_y, barrier_ref, beta);
        grads += backward(net, cache, l.grad);
        objective += l.mean;
    }
    return objective;
}

}  // namespace detail

UnlearnOutcome rem(const UnlearnContext& ctx) { return rem_impl(ctx, false); }
UnlearnOutcome rem_ideal(const UnlearnContext& ctx) { return rem_impl(ctx, true); }
UnlearnOutcome npo_unlearn(const UnlearnContext& ctx) { return removal_method(ctx, detail::RemovalLoss::npo); }
UnlearnOutcome ascent(const UnlearnContext& ctx) { return removal_method(ctx, detail::RemovalLoss::ascent); }

UnlearnOutcome retrain(const UnlearnContext& ctx) {
    require(ctx);
    const TaskInstance& task = *ctx.task;
    const PartitionedNetwork& orig = *ctx.original;
    const auto rows = task.retain_rows();
    if (rows.empty()) throw std::invalid_argument("retrain: retain set is empty");
    Rng rng = Rng(ctx.seed).split("retrain");
    PartitionedNetwork net = init_network(ctx.model.profile, ctx.model.capacity_fraction, orig.mem_widths(),
                                          orig.input_dim(), orig.num_classes(), rng.split("init"));
    net = train_supervised(std::move(net), task.train, rows, ctx.train, ctx.mask_table, rng.split("train"));
    return finish(std::move(net), "completed");
}

UnlearnOutcome finetune(const UnlearnContext& ctx) {
    require(ctx);
    const TaskInstance& task = *ctx.task;
    if (task.forget_ids.empty()) return finish(*ctx.original, "empty_forget");
    const auto rows = task.retain_rows();
    if (rows.empty()) throw std::invalid_argument("finetune: retain set is empty");
    TrainConfig tc = ctx.train;
    tc.epochs = ctx.config.max_ul_epochs;
    tc.batch_size = ctx.config.batch_size;
    tc.optimizer = ul_optimizer(ctx);
    PartitionedNetwork net =
        train_supervised(*ctx.original, task.train, rows, tc, ctx.mask_table, Rng(ctx.seed).split("finetune"));
    return finish(std::move(net), "completed");
}

UnlearnOutcome badt(const UnlearnContext& ctx) {
    require(ctx);
    const TaskInstance& task = *ctx.task;
    const PartitionedNetwork& orig = *ctx.original;
    if (task.forget_ids.empty()) return finish(orig, "empty_forget");
    Rng rng = Rng(ctx.seed).split("badt");
    const PartitionedNetwork bad = init_network(ctx.model.profile, ctx.model.capacity_fraction, {},
                                                orig.input_dim(), orig.num_classes(), rng.split("teacher"));
    // Competent teacher on retained rows, incompetent teacher on D_f.
    Matrix teacher = logits(orig, task.train.inputs);
    const auto frows = task.forget_rows();
    if (!frows.empty()) {
        const Matrix bad_logits = logits(bad, gather_rows(task.train.inputs, frows));
        for (std::size_t i = 0; i < frows.size(); ++i)
            teacher.row(static_cast<Eigen::Index>(frows[i])) = bad_logits.row(static_cast<Eigen::Index>(i));
    }
    PartitionedNetwork net = orig;
    OptimizerState opt(ul_optimizer(ctx));
    std::vector<std::size_t> rows(task.train.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Rng batch_rng = rng.split("batches");
    for (int e = 0; e < ctx.config.badt_epochs; ++e)
        distill_pass(net, task.train, rows, teacher, ctx.config.distill_temperature, 1.0, 0.0, opt, batch_rng,
                     static_cast<std::size_t>(ctx.config.batch_size));
    return finish(std::move(net), "completed");
}

UnlearnOutcome scrub(const UnlearnContext& ctx) {
    require(ctx);
    const TaskInstance& task = *ctx.task;
    const PartitionedNetwork& orig = *ctx.original;
    if (task.forget_ids.empty()) return finish(orig, "empty_forget");
    const Matrix teacher = logits(orig, task.train.inputs);
    auto frows = task.forget_rows();
    auto rrows = task.retain_rows();
    PartitionedNetwork net = orig;
    OptimizerState opt(ul_optimizer(ctx));
    Rng rng = Rng(ctx.seed).split("scrub");
    const auto bs = static_cast<std::size_t>(ctx.config.batch_size);
    const double t = ctx.config.distill_temperature;
    for (int e = 0; e < ctx.config.max_ul_epochs; ++e) {
        // Max step: move away from the teacher on D_f.
        if (e < ctx.config.scrub_max_epochs) distill_pass(net, task.train, frows, teacher, t, -1.0, 0.0, opt, rng, bs);
        // Min step: stay close to the teacher and the labels on D_r.
        distill_pass(net, task.train, rrows, teacher, t, 1.0, ctx.config.scrub_alpha, opt, rng, bs);
    }
    return finish(std::move(net), "completed");
}

UnlearnOutcome etd_drop(const UnlearnContext& ctx) {
    require(ctx);
    if (ctx.mask_table == nullptr) throw ConfigError("etd_drop requires a model trained with example-tied dropout");
    return finish(*ctx.original, "completed");
}

UnlearnOutcome no_unlearning(const UnlearnContext& ctx) {
    require(ctx);
    return finish(*ctx.original, "no_op");
}

UnlearnOutcome run_method(Method m, const UnlearnContext& ctx) {
    switch (m) {
        case Method::none: return no_unlearning(ctx);
        case Method::rem: return rem(ctx);
        case Method::rem_ideal: return rem_ideal(ctx);
        case Method::npo: return npo_unlearn(ctx);
        case Method::ascent: return ascent(ctx);
        case Method::retrain: return retrain(ctx);
        case Method::finetune: return finetune(ctx);
        case Method::badt: return badt(ctx);
        case Method::scrub: return scrub(ctx);
        case Method::etd_drop: return etd_drop(ctx);
    }
    throw ConfigError("unknown method");
}

}  // namespace remkit
