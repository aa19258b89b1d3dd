#include "remkit/masking.hpp"

#include "remkit/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace remkit {

namespace {

Mask random_mask(std::span<const int> mem_shape, double density, Rng rng) {
    Mask m;
    for (std::size_t l = 0; l < mem_shape.size(); ++l) {
        const int units = mem_shape[l];
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(units), 0);
        Rng layer_rng = rng.split(static_cast<std::uint64_t>(l));
        for (std::size_t idx : layer_rng.choose(static_cast<std::size_t>(units),
                                                static_cast<std::size_t>(active_count(units, density))))
            bits[idx] = 1;
        m.layers.push_back(std::move(bits));
    }
    return m;
}

void check_density(double density) {
    if (!(density > 0.0 && density <= 1.0)) throw std::invalid_argument("mask density must be in (0, 1]");
}

Rng example_stream(std::uint64_t seed, std::int64_t id) {
    return Rng(seed).split("example").split(static_cast<std::uint64_t>(id));
}

MaskTable shared_group_table(std::span<const std::int64_t> all_ids, std::span<const std::int64_t> group,
                             std::span<const int> mem_shape, double density, std::uint64_t seed,
                             const MaskTable* base, MaskProvenance prov) {
    check_density(density);
    const std::set<std::int64_t> all(all_ids.begin(), all_ids.end());
    const std::set<std::int64_t> grp(group.begin(), group.end());
    for (auto id : grp)
        if (!all.count(id)) throw std::invalid_argument("mask group id " + std::to_string(id) + " is not in the id set");
    if (base != nullptr && base->mem_shape() != std::vector<int>(mem_shape.begin(), mem_shape.end()))
        throw std::invalid_argument("base mask table has a different memorization shape");

    const Mask shared = random_mask(mem_shape, density, Rng(seed).split("shared"));
    std::map<std::int64_t, Mask> entries;
    for (auto id : all) {
        if (grp.count(id))
            entries.emplace(id, shared);
        else if (base != nullptr && base->contains(id))
            entries.emplace(id, base->at(id));
        else
            entries.emplace(id, random_mask(mem_shape, density, example_stream(seed, id)));
    }
    return MaskTable(density, {mem_shape.begin(), mem_shape.end()}, prov, std::move(entries));
}

}  // namespace

std::string to_string(MaskProvenance p) {
    switch (p) {
        case MaskProvenance::etd: return "etd";
        case MaskProvenance::rem: return "rem";
        case MaskProvenance::ideal: return "ideal";
    }
    return "etd";
}

MaskProvenance parse_provenance(const std::string& s) {
    if (s == "etd") return MaskProvenance::etd;
    if (s == "rem") return MaskProvenance::rem;
    if (s == "ideal") return MaskProvenance::ideal;
    throw FormatError("unknown mask provenance '" + s + "'");
}

int active_count(int units, double density) {
    if (units <= 0) return 0;
    // The small offset keeps products such as 0.2 * 10 from rounding up.
    const int k = static_cast<int>(std::ceil(density * units - 1e-9));
    return std::clamp(k, 1, units);
}

MaskTable::MaskTable(double density, std::vector<int> mem_shape, MaskProvenance provenance,
                     std::map<std::int64_t, Mask> entries)
    : density_(density), mem_shape_(std::move(mem_shape)), provenance_(provenance), entries_(std::move(entries)) {
    for (const auto& [id, m] : entries_) {
        if (m.layers.size() != mem_shape_.size())
            throw std::invalid_argument("mask for id " + std::to_string(id) + " has wrong layer count");
        for (std::size_t l = 0; l < mem_shape_.size(); ++l)
            if (static_cast<int>(m.layers[l].size()) != mem_shape_[l])
                throw std::invalid_argument("mask for id " + std::to_string(id) + " has wrong width");
    }
}

const Mask& MaskTable::at(std::int64_t id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) throw std::out_of_range("no mask for example id " + std::to_string(id));
    return it->second;
}

BatchMasks MaskTable::batch_masks(std::span<const std::int64_t> ids) const {
    BatchMasks out;
    for (int w : mem_shape_) out.push_back(Matrix::Zero(static_cast<Eigen::Index>(ids.size()), w));
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const Mask& m = at(ids[r]);
        for (std::size_t l = 0; l < mem_shape_.size(); ++l)
            for (int u = 0; u < mem_shape_[l]; ++u)
                out[l](static_cast<Eigen::Index>(r), u) = m.layers[l][static_cast<std::size_t>(u)];
    }
    return out;
}

BatchMasks MaskTable::batch_masks_or_zero(std::span<const std::int64_t> ids) const {
    BatchMasks out;
    for (int w : mem_shape_) out.push_back(Matrix::Zero(static_cast<Eigen::Index>(ids.size()), w));
    for (std::size_t r = 0; r < ids.size(); ++r) {
        auto it = entries_.find(ids[r]);
        if (it == entries_.end()) continue;
        for (std::size_t l = 0; l < mem_shape_.size(); ++l)
            for (int u = 0; u < mem_shape_[l]; ++u)
                out[l](static_cast<Eigen::Index>(r), u) = it->second.layers[l][static_cast<std::size_t>(u)];
    }
    return out;
}

BatchMasks gather_masks(const BatchMasks& dense, std::span<const std::size_t> rows) {
    BatchMasks out;
    out.reserve(dense.size());
    for (const auto& m : dense) out.push_back(gather_rows(m, rows));
    return out;
}

MaskTable assign_etd_masks(std::span<const std::int64_t> ids, std::span<const int> mem_shape, double density,
                           std::uint64_t seed) {
    check_density(density);
    std::map<std::int64_t, Mask> entries;
    for (auto id : ids) entries.emplace(id, random_mask(mem_shape, density, example_stream(seed, id)));
    return MaskTable(density, {mem_shape.begin(), mem_shape.end()}, MaskProvenance::etd, std::move(entries));
}

MaskTable assign_rem_masks(std::span<const std::int64_t> all_ids, std::span<const std::int64_t> forget_ids,
                           std::span<const int> mem_shape, double density, std::uint64_t seed,
                           const MaskTable* base) {
    return shared_group_table(all_ids, forget_ids, mem_shape, density, seed, base, MaskProvenance::rem);
}

MaskTable assign_ideal_masks(std::span<const std::int64_t> all_ids, std::span<const std::int64_t> corrupted_ids,
                             std::span<const int> mem_shape, double density, std::uint64_t seed) {
    return shared_group_table(all_ids, corrupted_ids, mem_shape, density, seed, nullptr, MaskProvenance::ideal);
}

}  // namespace remkit
