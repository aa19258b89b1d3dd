#include "helpers.hpp"

#include <doctest.h>

using namespace remkit;
using namespace testing;

TEST_CASE("init_network widths and zero biases") {
    const auto net = small_net(1);
    CHECK(net.gen_widths() == std::vector<int>{5, 4});
    CHECK(net.mem_widths() == std::vector<int>{3, 2});
    CHECK(net.input_dim() == 6);
    CHECK(net.num_classes() == 4);
    for (const auto& l : net.layers()) CHECK(l.b_g.cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS(init_network(std::vector<int>{1}, 0.1, {}, 3, 2, Rng(0)));
}

TEST_CASE("expansion leaves the gen-only function bit-identical") {
    Rng rng(2);
    const auto base = init_network(std::vector<int>{10, 8}, 0.5, {}, 6, 4, Rng(3));
    const auto wide = expand_network(base, std::vector<int>{4, 3}, Rng(4));
    const Matrix x = random_matrix(7, 6, rng);
    CHECK(wide.mem_widths() == std::vector<int>{4, 3});
    const Matrix a = logits(base, x, ForwardMode::full);
    const Matrix b = logits(wide, x, ForwardMode::gen_only);
    CHECK((a.array() == b.array()).all());
}

TEST_CASE("excision matches the gen-only view") {
    Rng rng(5);
    const auto net = small_net(6);
    const auto cut = excise_memorization(net);
    CHECK_FALSE(cut.has_mem());
    CHECK(cut.mem_parameter_count() == 0);
    const Matrix x = random_matrix(9, 6, rng);
    const Matrix d = logits(cut, x, ForwardMode::full) - logits(net, x, ForwardMode::gen_only);
    CHECK(d.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("all-ones masks reproduce the full pass; all-zero masks the gen-only pass") {
    Rng rng(8);
    const auto net = small_net(9);
    const Matrix x = random_matrix(4, 6, rng);
    BatchMasks ones, zeros;
    for (int w : net.mem_widths()) {
        ones.push_back(Matrix::Ones(4, w));
        zeros.push_back(Matrix::Zero(4, w));
    }
    const Matrix full = forward(net, x, ForwardMode::full).logits;
    CHECK((forward(net, x, ForwardMode::masked, &ones).logits - full).cwiseAbs().maxCoeff() <= 1e-12);
    const Matrix gen = forward(net, x, ForwardMode::gen_only).logits;
    CHECK((forward(net, x, ForwardMode::masked, &zeros).logits - gen).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK_THROWS(forward(net, x, ForwardMode::masked));
}

TEST_CASE("gen-only backward gives exact zeros on memorization blocks") {
    Rng rng(10);
    const auto net = small_net(11);
    const Matrix x = random_matrix(4, 6, rng);
    const auto cache = forward(net, x, ForwardMode::gen_only);
    const auto g = backward(net, cache, random_matrix(4, 4, rng));
    for (const auto& l : g.layers)
        l.visit([](const Matrix& m, bool is_gen) {
            if (!is_gen && m.size() > 0) CHECK(m.cwiseAbs().maxCoeff() == 0.0);
        });
}

TEST_CASE("masked-off units receive no gradient on their incoming weights") {
    Rng rng(12);
    const auto net = small_net(13);
    const Matrix x = random_matrix(3, 6, rng);
    BatchMasks m;
    for (int w : net.mem_widths()) {
        Matrix z = Matrix::Zero(3, w);
        z.col(0).setOnes();
        m.push_back(z);
    }
    const auto cache = forward(net, x, ForwardMode::masked, &m);
    const auto g = backward(net, cache, random_matrix(3, 4, rng));
    const auto& w_mg = g.layers[0].w_mg;
    for (Eigen::Index r = 1; r < w_mg.rows(); ++r) CHECK(w_mg.row(r).cwiseAbs().maxCoeff() == 0.0);
}
