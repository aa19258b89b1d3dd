#pragma once

#include "remkit/dataset.hpp"
#include "remkit/masking.hpp"
#include "remkit/tasks.hpp"
#include "remkit/trainer.hpp"
#include "remkit/unlearn.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace remkit {

struct Metrics {
    double utility = 0.0;
    double healed_forget = 0.0;
    double healed_all = 0.0;
    double product = 0.0;
    /// Share of non-target triggered test inputs predicted as the target
    /// class; negative when the task has no trigger.
    double attack_rate = -1.0;
};

/// Evaluates a network without memorization units (gen-only view).
Metrics evaluate(const PartitionedNetwork& net, const TaskInstance& task);

/// A method together with the kind of original model it starts from.
struct MethodSpec {
    std::string name;  // as written in configs and CSVs
    Method method = Method::none;
    bool etd = false;          // start from an example-tied-dropout model
    bool step32 = true;        // rem only
};

/// Accepts a method name, `rem_no32` for REM without the step-3 barrier,
/// and a `+etd` suffix to start from an ETD-trained model. etd_drop always
/// starts from an ETD model.
MethodSpec parse_method_spec(const std::string& s);

struct BenchConfig {
    SyntheticConfig data{10, 500, 100, 16, 0.35};
    std::size_t random_label_n = 1000;
    std::size_t interclass_n = 400;
    int interclass_a = 3;
    int interclass_b = 5;
    std::size_t poison_n = 1000;
    int poison_target = 0;
    TriggerSpec trigger;
    ModelSpec model;
    TrainConfig train{40, 128, OptimizerConfig{OptimizerKind::adam, 0.003}};
    double etd_density = 0.2;
    MethodConfig unlearn;
    std::uint64_t master_seed = 0;
};

struct RunResult {
    std::string method;
    Regularity regularity = Regularity::low;
    double discovery_rate = 0.0;
    std::uint64_t seed = 0;
    Metrics metrics;
    double wall_time = 0.0;
    std::string stop_reason;
};

struct GridSpec {
    std::vector<MethodSpec> methods;
    std::vector<Regularity> regularities{Regularity::low, Regularity::medium, Regularity::high};
    std::vector<double> discovery_rates{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<std::uint64_t> seeds{0, 1, 2};
    int jobs = 1;
    /// Wall time is zeroed unless requested so that reruns are byte-identical.
    bool record_wall_time = false;
    /// Adds a discovery-rate-0 row per (method, regularity, seed) holding the
    /// metrics of the model the method starts from.
    bool zero_column = false;
};

/// The corrupted dataset of one (regularity, seed) pair together with the
/// clean test split and, for poison tasks, the triggered test inputs.
struct CorruptedData {
    LabeledDataset train;
    LabeledDataset test;
    std::optional<Matrix> triggered_test;
    int target_class = 0;
};

CorruptedData build_corrupted_data(const BenchConfig& cfg, Regularity reg, std::uint64_t seed);
TaskInstance build_task(const BenchConfig& cfg, const CorruptedData& data, Regularity reg, double rate,
                        std::uint64_t seed);

struct OriginalModel {
    PartitionedNetwork net;
    std::optional<MaskTable> masks;  // present for ETD training
};

OriginalModel train_original(const BenchConfig& cfg, const LabeledDataset& train, bool etd, std::uint64_t seed);

/// Seed of one method invocation, derived from the cell key.
std::uint64_t cell_seed(const BenchConfig& cfg, const std::string& method, Regularity reg, double rate,
                        std::uint64_t seed);

UnlearnContext make_context(const BenchConfig& cfg, const MethodSpec& spec, const OriginalModel& original,
                            const TaskInstance& task, std::uint64_t seed);

/// Results ordered by (method order in `grid.methods`, regularity, rate, seed).
std::vector<RunResult> run_grid(const GridSpec& grid, const BenchConfig& cfg);

struct AggregateResult {
    std::string method;
    std::optional<Regularity> regularity;  // absent when grouped by method only
    std::optional<double> discovery_rate;
    std::size_t k = 0;                     // number of seeds
    Metrics mean;
    Metrics sem;
};

double mean_of(std::span<const double> v);
/// Sample standard deviation (n - 1) over sqrt(n); 0 for fewer than two values.
double sem_of(std::span<const double> v);

enum class GroupBy { method, cell };

/// Per method (averaging every cell of a seed first) or per grid cell; SEM
/// across seeds. Rows with discovery rate 0 are ignored by method grouping.
/// Independent of input order.
std::vector<AggregateResult> aggregate(const std::vector<RunResult>& results, GroupBy group_by);

extern const char* const kCsvHeader;
std::string format_results_csv(const std::vector<RunResult>& results);
std::vector<RunResult> parse_results_csv(const std::string& text);
std::string format_aggregate_csv(const std::vector<AggregateResult>& rows);

enum class HeatmapMetric { utility, healed_forget, healed_all, product };
HeatmapMetric parse_heatmap_metric(const std::string& s);
std::string to_string(HeatmapMetric m);

/// SVG heatmap of one method's seed-averaged metric: rows are regularities
/// (high on top), columns discovery rates ascending, darker is higher.
std::string render_heatmap(const std::vector<RunResult>& results, const std::string& method, HeatmapMetric metric);

/// Fill shade of a cell in [0,1]: 255 at 0 (white) down to 0 at 1 (black).
int heatmap_gray(double value);

}  // namespace remkit
