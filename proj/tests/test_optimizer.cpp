#include "helpers.hpp"
#include "remkit/error.hpp"
#include "remkit/loss.hpp"
#include "remkit/optimizer.hpp"

#include <doctest.h>

#include <limits>

using namespace remkit;
using namespace testing;

namespace {

Gradients full_gradients(const PartitionedNetwork& net, std::uint64_t seed) {
    Rng rng(seed);
    const Matrix x = random_matrix(6, net.input_dim(), rng);
    const auto y = random_labels(6, net.num_classes(), rng);
    BatchMasks m;
    for (int w : net.mem_widths()) m.push_back(Matrix::Ones(6, w));
    const auto cache = forward(net, x, ForwardMode::masked, &m);
    return backward(net, cache, cross_entropy(cache.logits, y).grad);
}

}  // namespace

TEST_CASE("gen scope leaves memorization blocks bitwise unchanged") {
    for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam}) {
        auto net = small_net(1);
        const auto before = net;
        OptimizerState opt(OptimizerConfig{kind, 0.05});
        for (int i = 0; i < 3; ++i) opt.step(net, full_gradients(net, 10 + i), ParamScope::gen);
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
            const auto& a = net.layers()[l];
            const auto& b = before.layers()[l];
            CHECK((a.w_gm.array() == b.w_gm.array()).all());
            CHECK((a.w_mg.array() == b.w_mg.array()).all());
            CHECK((a.w_mm.array() == b.w_mm.array()).all());
            CHECK((a.b_m.array() == b.b_m.array()).all());
        }
        CHECK_FALSE(net == before);
    }
}

TEST_CASE("first SGD step is w - lr * g") {
    auto net = small_net(2);
    const auto before = net;
    const auto g = full_gradients(net, 3);
    OptimizerState opt(OptimizerConfig{OptimizerKind::sgd, 0.1});
    opt.step(net, g);
    const Matrix expect = before.layers()[0].w_gg - 0.1 * g.layers[0].w_gg;
    CHECK((net.layers()[0].w_gg - expect).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("non-finite gradients are rejected without touching the network") {
    auto net = small_net(3);
    const auto before = net;
    auto g = full_gradients(net, 4);
    g.layers[1].w_gg(0, 0) = std::numeric_limits<double>::quiet_NaN();
    OptimizerState opt(OptimizerConfig{OptimizerKind::adam, 0.01});
    CHECK_THROWS_AS(opt.step(net, g), NumericError);
    CHECK(net == before);
}

TEST_CASE("optimizer kind names round-trip") {
    CHECK(parse_optimizer_kind(to_string(OptimizerKind::adam)) == OptimizerKind::adam);
    CHECK(parse_optimizer_kind("sgd") == OptimizerKind::sgd);
    CHECK_THROWS(parse_optimizer_kind("rmsprop"));
}
