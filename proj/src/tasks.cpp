#include "remkit/tasks.hpp"

#include "remkit/error.hpp"
#include "remkit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace remkit {

std::string to_string(Regularity r) {
    switch (r) {
        case Regularity::low: return "low";
        case Regularity::medium: return "medium";
        case Regularity::high: return "high";
    }
    return "low";
}

Regularity parse_regularity(const std::string& s) {
    if (s == "low" || s == "random_label" || s == "random") return Regularity::low;
    if (s == "medium" || s == "interclass") return Regularity::medium;
    if (s == "high" || s == "poison") return Regularity::high;
    throw ConfigError("unknown task/regularity '" + s + "'");
}

CorruptionKind corruption_for(Regularity r) {
    switch (r) {
        case Regularity::low: return CorruptionKind::random_label;
        case Regularity::medium: return CorruptionKind::interclass;
        case Regularity::high: return CorruptionKind::poison;
    }
    return CorruptionKind::random_label;
}

std::vector<int> trigger_pixels(const TriggerSpec& t, int channels, int height, int width) {
    if (t.size < 1 || t.size > height || t.size > width) throw std::invalid_argument("trigger does not fit the image");
    const int r0 = t.row < 0 ? height - t.size : t.row;
    const int c0 = t.col < 0 ? width - t.size : t.col;
    if (r0 + t.size > height || c0 + t.size > width) throw std::invalid_argument("trigger does not fit the image");
    std::vector<int> px;
    for (int c = 0; c < channels; ++c)
        for (int r = r0; r < r0 + t.size; ++r)
            for (int k = c0; k < c0 + t.size; ++k) px.push_back(c * height * width + r * width + k);
    return px;
}

Matrix apply_trigger(const Matrix& inputs, const TriggerSpec& t, int channels, int height, int width) {
    Matrix out = inputs;
    const auto px = trigger_pixels(t, channels, height, width);
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (int p : px) out(i, p) = t.value;
    return out;
}

LabeledDataset corrupt_random_labels(const LabeledDataset& ds, std::size_t n, std::uint64_t seed) {
    if (n > ds.size()) throw std::invalid_argument("corrupt_random_labels: n exceeds dataset size");
    if (ds.num_classes < 2) throw std::invalid_argument("corrupt_random_labels: need at least 2 classes");
    LabeledDataset out = ds;
    Rng rng = Rng(seed).split("random_label");
    for (std::size_t r : rng.choose(ds.size(), n)) {
        // Uniform over the other num_classes - 1 labels.
        int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(ds.num_classes - 1)));
        if (y >= ds.clean_labels[r]) ++y;
        out.labels[r] = y;
        out.corrupted[r] = 1;
    }
    return out;
}

LabeledDataset corrupt_interclass(const LabeledDataset& ds, int class_a, int class_b, std::size_t n,
                                  std::uint64_t seed) {
    if (class_a == class_b) throw std::invalid_argument("corrupt_interclass: classes must be distinct");
    if (n % 2 != 0) throw std::invalid_argument("corrupt_interclass: n must be even");
    std::vector<std::size_t> in_a, in_b;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.clean_labels[i] == class_a) in_a.push_back(i);
        if (ds.clean_labels[i] == class_b) in_b.push_back(i);
    }
    const std::size_t half = n / 2;
    if (in_a.size() < half || in_b.size() < half)
        throw std::invalid_argument("corrupt_interclass: a class has fewer than n/2 members");
    LabeledDataset out = ds;
    Rng rng = Rng(seed).split("interclass");
    for (std::size_t k : rng.choose(in_a.size(), half)) {
        out.labels[in_a[k]] = class_b;
        out.corrupted[in_a[k]] = 1;
    }
    for (std::size_t k : rng.choose(in_b.size(), half)) {
        out.labels[in_b[k]] = class_a;
        out.corrupted[in_b[k]] = 1;
    }
    return out;
}

LabeledDataset corrupt_poison(const LabeledDataset& ds, std::size_t n, int target, const TriggerSpec& trigger,
                              std::uint64_t seed) {
    if (target < 0 || target >= ds.num_classes) throw std::invalid_argument("corrupt_poison: target out of range");
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.clean_labels[i] != target) eligible.push_back(i);
    if (n > eligible.size()) throw std::invalid_argument("corrupt_poison: n exceeds non-target examples");
    const auto px = trigger_pixels(trigger, ds.channels, ds.height, ds.width);
    LabeledDataset out = ds;
    Rng rng = Rng(seed).split("poison");
    for (std::size_t k : rng.choose(eligible.size(), n)) {
        const std::size_t r = eligible[k];
        for (int p : px) out.inputs(static_cast<Eigen::Index>(r), p) = trigger.value;
        out.labels[r] = target;
        out.corrupted[r] = 1;
    }
    return out;
}

LabeledDataset apply_corruption(const LabeledDataset& ds, const CorruptionSpec& spec, std::uint64_t seed) {
    switch (spec.kind) {
        case CorruptionKind::random_label: return corrupt_random_labels(ds, spec.n, seed);
        case CorruptionKind::interclass: return corrupt_interclass(ds, spec.class_a, spec.class_b, spec.n, seed);
        case CorruptionKind::poison: return corrupt_poison(ds, spec.n, spec.target, spec.trigger, seed);
    }
    return ds;
}

std::vector<std::size_t> TaskInstance::rows_of(std::span<const std::int64_t> ids) const {
    std::unordered_map<std::int64_t, std::size_t> pos;
    pos.reserve(train.ids.size());
    for (std::size_t i = 0; i < train.ids.size(); ++i) pos.emplace(train.ids[i], i);
    std::vector<std::size_t> rows;
    rows.reserve(ids.size());
    for (auto id : ids) {
        auto it = pos.find(id);
        if (it == pos.end()) throw std::out_of_range("example id " + std::to_string(id) + " is not in the training set");
        rows.push_back(it->second);
    }
    return rows;
}

std::vector<std::size_t> TaskInstance::corrupted_rows() const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < train.size(); ++i)
        if (train.corrupted[i]) rows.push_back(i);
    return rows;
}

void TaskInstance::validate() const {
    train.validate();
    test.validate();
    const auto corrupted = train.corrupted_ids();
    const std::set<std::int64_t> c(corrupted.begin(), corrupted.end());
    const std::set<std::int64_t> f(forget_ids.begin(), forget_ids.end());
    const std::set<std::int64_t> r(retain_ids.begin(), retain_ids.end());
    const std::set<std::int64_t> u(undiscovered_ids.begin(), undiscovered_ids.end());
    for (auto id : f)
        if (!c.count(id) || r.count(id) || u.count(id)) throw std::logic_error("forget id outside corrupted set or overlapping");
    if (f.size() + r.size() != train.size()) throw std::logic_error("forget and retain do not partition the training set");
    if (f.size() + u.size() != c.size()) throw std::logic_error("forget and undiscovered do not partition corrupted ids");
    const auto expected = static_cast<std::size_t>(std::llround(discovery_rate * static_cast<double>(c.size())));
    if (f.size() != expected) throw std::logic_error("forget set size does not match discovery rate");
}

TaskInstance split_discovery(const LabeledDataset& corrupted_train, const LabeledDataset& test, double rate,
                             std::uint64_t seed, Regularity regularity, int target_class,
                             std::optional<Matrix> triggered_test) {
    if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("split_discovery: rate must be in (0, 1]");
    TaskInstance t;
    t.train = corrupted_train;
    t.test = test;
    t.triggered_test = std::move(triggered_test);
    t.target_class = target_class;
    t.discovery_rate = rate;
    t.regularity = regularity;

    auto corrupted = corrupted_train.corrupted_ids();
    std::sort(corrupted.begin(), corrupted.end());
    Rng rng = Rng(seed).split("discovery");
    rng.shuffle(corrupted);
    const auto k = static_cast<std::size_t>(std::llround(rate * static_cast<double>(corrupted.size())));
    t.forget_ids.assign(corrupted.begin(), corrupted.begin() + static_cast<std::ptrdiff_t>(k));
    t.undiscovered_ids.assign(corrupted.begin() + static_cast<std::ptrdiff_t>(k), corrupted.end());
    std::sort(t.forget_ids.begin(), t.forget_ids.end());
    std::sort(t.undiscovered_ids.begin(), t.undiscovered_ids.end());
    const std::set<std::int64_t> f(t.forget_ids.begin(), t.forget_ids.end());
    for (auto id : corrupted_train.ids)
        if (!f.count(id)) t.retain_ids.push_back(id);
    std::sort(t.retain_ids.begin(), t.retain_ids.end());
    return t;
}

}  // namespace remkit
