#include "remkit/masking.hpp"

#include <doctest.h>

#include <numeric>

using namespace remkit;

namespace {

std::vector<std::int64_t> iota_ids(int n) {
    std::vector<std::int64_t> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 0);
    return v;
}

int ones(const std::vector<std::uint8_t>& bits) { return std::accumulate(bits.begin(), bits.end(), 0); }

}  // namespace

TEST_CASE("active unit count") {
    CHECK(active_count(10, 0.2) == 2);
    CHECK(active_count(64, 0.2) == 13);
    CHECK(active_count(3, 0.01) == 1);
    CHECK(active_count(5, 1.0) == 5);
    CHECK(active_count(0, 0.5) == 0);
}

TEST_CASE("every ETD mask has exactly the active count per layer") {
    const std::vector<int> shape{64, 17, 5};
    const auto ids = iota_ids(200);
    const auto t = assign_etd_masks(ids, shape, 0.2, 7);
    CHECK(t.size() == 200);
    for (const auto& [id, m] : t.entries())
        for (std::size_t l = 0; l < shape.size(); ++l) CHECK(ones(m.layers[l]) == active_count(shape[l], 0.2));
}

TEST_CASE("ETD masks depend only on (seed, id)") {
    const std::vector<int> shape{16};
    std::vector<std::int64_t> a{1, 2, 3, 4}, b{4, 3, 2, 1, 9};
    const auto ta = assign_etd_masks(a, shape, 0.25, 5);
    const auto tb = assign_etd_masks(b, shape, 0.25, 5);
    for (auto id : a) CHECK(ta.at(id).layers == tb.at(id).layers);
    CHECK_FALSE(assign_etd_masks(a, shape, 0.25, 6) == ta);
}

TEST_CASE("forget ids share one mask bitwise; others keep their base mask") {
    const std::vector<int> shape{32, 8};
    const auto ids = iota_ids(50);
    const auto base = assign_etd_masks(ids, shape, 0.2, 1);
    const std::vector<std::int64_t> forget{3, 7, 19, 44};
    const auto t = assign_rem_masks(ids, forget, shape, 0.2, 2, &base);
    CHECK(t.provenance() == MaskProvenance::rem);
    for (auto id : forget) CHECK(t.at(id).layers == t.at(forget[0]).layers);
    for (auto id : ids)
        if (std::find(forget.begin(), forget.end(), id) == forget.end()) CHECK(t.at(id).layers == base.at(id).layers);
    for (const auto& layer : t.at(3).layers) CHECK(ones(layer) == active_count(static_cast<int>(layer.size()), 0.2));
}

TEST_CASE("ideal masks share the mask across all corrupted ids") {
    const std::vector<int> shape{12};
    const auto ids = iota_ids(20);
    const std::vector<std::int64_t> corrupted{1, 5, 8};
    const auto ideal = assign_ideal_masks(ids, corrupted, shape, 0.25, 4);
    CHECK(ideal.at(5).layers == ideal.at(1).layers);
    CHECK(ideal.at(8).layers == ideal.at(1).layers);
    // Same group and seed: the rem table coincides with the ideal one.
    CHECK(assign_rem_masks(ids, corrupted, shape, 0.25, 4).entries() == ideal.entries());
}

TEST_CASE("mask lookups fail loudly") {
    const std::vector<int> shape{4};
    const auto ids = iota_ids(3);
    const auto t = assign_etd_masks(ids, shape, 0.5, 0);
    CHECK_THROWS_AS(t.at(99), std::out_of_range);
    const std::vector<std::int64_t> q{0, 99};
    CHECK_THROWS_AS(t.batch_masks(q), std::out_of_range);
    const auto z = t.batch_masks_or_zero(q);
    CHECK(z[0].row(1).sum() == 0.0);
    CHECK(z[0].row(0).sum() == 2.0);
    const std::vector<std::int64_t> stray{77};
    CHECK_THROWS(assign_rem_masks(ids, stray, shape, 0.5, 0));
    CHECK_THROWS(assign_etd_masks(ids, shape, 0.0, 0));
}
