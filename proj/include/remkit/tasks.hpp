#pragma once

#include "remkit/dataset.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace remkit {

enum class CorruptionKind { random_label, interclass, poison };

/// Statistical regularity of the corruption: low = random label swaps,
/// medium = two-class confusion, high = shared poison trigger.
enum class Regularity { low, medium, high };

std::string to_string(Regularity r);
Regularity parse_regularity(const std::string& s);
CorruptionKind corruption_for(Regularity r);

/// Square patch stamped onto every channel. Negative row/col place the
/// patch flush with the bottom/right edge.
struct TriggerSpec {
    int size = 2;
    int row = -1;
    int col = -1;
    double value = 1.0;

    friend bool operator==(const TriggerSpec&, const TriggerSpec&) = default;
};

/// Flat pixel indices covered by the trigger in an image of the given shape.
std::vector<int> trigger_pixels(const TriggerSpec& t, int channels, int height, int width);

Matrix apply_trigger(const Matrix& inputs, const TriggerSpec& t, int channels, int height, int width);

/// `n` distinct examples each get a uniformly random label different from
/// their clean label.
LabeledDataset corrupt_random_labels(const LabeledDataset& ds, std::size_t n, std::uint64_t seed);

/// n/2 examples of class_a are relabeled class_b and vice versa. n must be
/// even and each class must have at least n/2 members.
LabeledDataset corrupt_interclass(const LabeledDataset& ds, int class_a, int class_b, std::size_t n,
                                  std::uint64_t seed);

/// `n` examples with clean label != target get the trigger stamped on and
/// their label set to `target`.
LabeledDataset corrupt_poison(const LabeledDataset& ds, std::size_t n, int target, const TriggerSpec& trigger,
                              std::uint64_t seed);

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::random_label;
    std::size_t n = 1000;
    int class_a = 3;
    int class_b = 5;
    int target = 0;
    TriggerSpec trigger;
};

LabeledDataset apply_corruption(const LabeledDataset& ds, const CorruptionSpec& spec, std::uint64_t seed);

struct TaskInstance {
    LabeledDataset train;
    LabeledDataset test;
    /// Test inputs with the trigger stamped on (poison tasks only).
    std::optional<Matrix> triggered_test;
    int target_class = 0;
    std::vector<std::int64_t> forget_ids;
    std::vector<std::int64_t> retain_ids;
    std::vector<std::int64_t> undiscovered_ids;
    double discovery_rate = 1.0;
    Regularity regularity = Regularity::low;

    /// Row index of each id in `train`.
    std::vector<std::size_t> rows_of(std::span<const std::int64_t> ids) const;
    std::vector<std::size_t> forget_rows() const { return rows_of(forget_ids); }
    std::vector<std::size_t> retain_rows() const { return rows_of(retain_ids); }
    std::vector<std::size_t> corrupted_rows() const;

    /// Throws std::logic_error on any broken partition invariant.
    void validate() const;
};

/// Samples round(rate * |D_c|) corrupted ids as the forget set. The sample
/// is a prefix of one seeded permutation, so forget sets for increasing
/// rates are nested.
TaskInstance split_discovery(const LabeledDataset& corrupted_train, const LabeledDataset& test, double rate,
                             std::uint64_t seed, Regularity regularity, int target_class = 0,
                             std::optional<Matrix> triggered_test = std::nullopt);

}  // namespace remkit
