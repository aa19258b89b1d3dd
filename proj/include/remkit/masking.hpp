#pragma once

#include "remkit/network.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace remkit {

enum class MaskProvenance { etd, rem, ideal };

std::string to_string(MaskProvenance p);
MaskProvenance parse_provenance(const std::string& s);

/// Binary mask over the memorization units of each hidden layer.
struct Mask {
    std::vector<std::vector<std::uint8_t>> layers;

    friend bool operator==(const Mask&, const Mask&) = default;
};

/// Number of active units for a layer of `units` memorization units:
/// ceil(density * units).
int active_count(int units, double density);

/// Immutable id -> mask map. Entries are kept sorted by id.
class MaskTable {
public:
    MaskTable() = default;
    MaskTable(double density, std::vector<int> mem_shape, MaskProvenance provenance,
              std::map<std::int64_t, Mask> entries);

    double density() const { return density_; }
    const std::vector<int>& mem_shape() const { return mem_shape_; }
    MaskProvenance provenance() const { return provenance_; }
    const std::map<std::int64_t, Mask>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool contains(std::int64_t id) const { return entries_.count(id) != 0; }

    /// Throws std::out_of_range naming the id when absent.
    const Mask& at(std::int64_t id) const;

    /// Per-layer [ids.size() x mem] 0/1 matrices. Throws on a missing id.
    BatchMasks batch_masks(std::span<const std::int64_t> ids) const;

    /// As batch_masks, but ids without an entry get an all-zero mask
    /// (equivalent to the gen-only path).
    BatchMasks batch_masks_or_zero(std::span<const std::int64_t> ids) const;

    friend bool operator==(const MaskTable&, const MaskTable&) = default;

private:
    double density_ = 0.2;
    std::vector<int> mem_shape_;
    MaskProvenance provenance_ = MaskProvenance::etd;
    std::map<std::int64_t, Mask> entries_;
};

/// Selects rows `rows` out of dense per-layer mask matrices.
BatchMasks gather_masks(const BatchMasks& dense, std::span<const std::size_t> rows);

/// Independent random mask per example, fixed for the table's lifetime.
/// Each example's mask depends only on (seed, id), so the table does not
/// depend on the order of `ids`.
MaskTable assign_etd_masks(std::span<const std::int64_t> ids, std::span<const int> mem_shape,
                           double density, std::uint64_t seed);

/// Every forget id receives one shared random mask. Other ids get an
/// independent mask, or keep their mask from `base` when provided.
/// Throws if a forget id is not in `all_ids`.
MaskTable assign_rem_masks(std::span<const std::int64_t> all_ids,
                           std::span<const std::int64_t> forget_ids, std::span<const int> mem_shape,
                           double density, std::uint64_t seed, const MaskTable* base = nullptr);

/// assign_rem_masks with the shared mask given to every corrupted id.
MaskTable assign_ideal_masks(std::span<const std::int64_t> all_ids,
                             std::span<const std::int64_t> corrupted_ids,
                             std::span<const int> mem_shape, double density, std::uint64_t seed);

}  // namespace remkit
