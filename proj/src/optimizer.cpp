#include "remkit/optimizer.hpp"

#include "remkit/error.hpp"

#include <cmath>

namespace remkit {

namespace {

bool shapes_match(const Gradients& g, const PartitionedNetwork& net) {
    if (g.layers.size() != net.layers().size()) return false;
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        const auto& a = g.layers[i];
        const auto& b = net.layers()[i];
        if (a.in_gen() != b.in_gen() || a.in_mem() != b.in_mem() || a.out_gen() != b.out_gen() ||
            a.out_mem() != b.out_mem())
            return false;
    }
    return true;
}

// Calls f(param, grad, acc1, acc2) on every in-scope block.
template <class F>
void for_each_block(PartitionedNetwork& net, const Gradients& g, Gradients& a1, Gradients& a2,
                    ParamScope scope, F&& f) {
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        auto& p = net.layers()[i];
        const auto& gl = g.layers[i];
        auto& m = a1.layers[i];
        auto& v = a2.layers[i];
        auto one = [&](Matrix& pm, const Matrix& gm, Matrix& mm, Matrix& vm, bool is_gen) {
            if (scope == ParamScope::gen && !is_gen) return;
            f(pm, gm, mm, vm);
        };
        one(p.w_gg, gl.w_gg, m.w_gg, v.w_gg, true);
        one(p.w_gm, gl.w_gm, m.w_gm, v.w_gm, false);
        one(p.w_mg, gl.w_mg, m.w_mg, v.w_mg, false);
        one(p.w_mm, gl.w_mm, m.w_mm, v.w_mm, false);
        one(p.b_g, gl.b_g, m.b_g, v.b_g, true);
        one(p.b_m, gl.b_m, m.b_m, v.b_m, false);
    }
}

}  // namespace

void OptimizerState::step(PartitionedNetwork& net, const Gradients& grads, ParamScope scope) {
    if (!shapes_match(grads, net)) throw std::invalid_argument("optimizer: gradient shapes do not match network");
    if (!shapes_match(first_, net)) {
        first_ = Gradients::zeros_like(net);
        second_ = Gradients::zeros_like(net);
        steps_ = 0;
    }
    bool finite = true;
    for (std::size_t i = 0; i < grads.layers.size(); ++i)
        grads.layers[i].visit([&](const Matrix& m, bool is_gen) {
            if (scope == ParamScope::gen && !is_gen) return;
            finite = finite && all_finite(m);
        });
    if (!finite) throw NumericError("optimizer: non-finite gradient at step " + std::to_string(steps_));

    ++steps_;
    const double lr = cfg_.learning_rate;
    if (cfg_.kind == OptimizerKind::sgd) {
        const double mu = cfg_.momentum;
        for_each_block(net, grads, first_, second_, scope,
                       [&](Matrix& p, const Matrix& g, Matrix& buf, Matrix&) {
                           if (mu != 0.0) {
                               buf = mu * buf + g;
                               p -= lr * buf;
                           } else {
                               p -= lr * g;
                           }
                       });
    } else {
        const double b1 = cfg_.beta1, b2 = cfg_.beta2, eps = cfg_.epsilon;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
        for_each_block(net, grads, first_, second_, scope,
                       [&](Matrix& p, const Matrix& g, Matrix& m, Matrix& v) {
                           m = b1 * m + (1.0 - b1) * g;
                           v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
                           p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
                       });
    }
}

OptimizerKind parse_optimizer_kind(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + s + "'");
}

std::string to_string(OptimizerKind k) {
    return k == OptimizerKind::sgd ? "sgd" : "adam";
}

}  // namespace remkit
