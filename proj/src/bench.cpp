#include "remkit/bench.hpp"

#include "remkit/error.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace remkit {

namespace {

std::vector<int> clean_labels_of(const LabeledDataset& ds, std::span<const std::size_t> rows) {
    std::vector<int> y;
    for (auto r : rows) y.push_back(ds.clean_labels[r]);
    return y;
}

double healed_on(const PartitionedNetwork& net, const LabeledDataset& ds, std::span<const std::size_t> rows) {
    if (rows.empty()) return 0.0;
    return accuracy(net, gather_rows(ds.inputs, rows), clean_labels_of(ds, rows));
}

std::uint64_t reg_key(Regularity r) { return static_cast<std::uint64_t>(r) + 1; }

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

/// Runs `n` independent tasks on up to `jobs` threads.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

double metric_value(const Metrics& m, HeatmapMetric which) {
    switch (which) {
        case HeatmapMetric::utility: return m.utility;
        case HeatmapMetric::healed_forget: return m.healed_forget;
        case HeatmapMetric::healed_all: return m.healed_all;
        case HeatmapMetric::product: return m.product;
    }
    return m.product;
}

}  // namespace

Metrics evaluate(const PartitionedNetwork& net, const TaskInstance& task) {
    Metrics m;
    m.utility = accuracy(net, task.test.inputs, task.test.clean_labels);
    m.healed_forget = healed_on(net, task.train, task.forget_rows());
    m.healed_all = healed_on(net, task.train, task.corrupted_rows());
    m.product = m.utility * m.healed_all;
    if (task.triggered_test) {
        const auto pred = predict(net, *task.triggered_test);
        std::size_t eligible = 0, hit = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (task.test.clean_labels[i] == task.target_class) continue;
            ++eligible;
            hit += pred[i] == task.target_class;
        }
        m.attack_rate = eligible == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(eligible);
    }
    return m;
}

MethodSpec parse_method_spec(const std::string& s) {
    MethodSpec spec;
    spec.name = s;
    std::string base = s;
    const std::string suffix = "+etd";
    if (base.size() > suffix.size() && base.ends_with(suffix)) {
        spec.etd = true;
        base.resize(base.size() - suffix.size());
    }
    if (base == "rem_no32") {
        spec.method = Method::rem;
        spec.step32 = false;
    } else {
        spec.method = parse_method(base);
    }
    if (spec.method == Method::etd_drop) spec.etd = true;
    return spec;
}

CorruptedData build_corrupted_data(const BenchConfig& cfg, Regularity reg, std::uint64_t seed) {
    const Rng root(cfg.master_seed);
    auto [train, test] = gen_synthetic(cfg.data, root.split("data").split(seed).next_u64());
    CorruptionSpec spec;
    spec.kind = corruption_for(reg);
    spec.class_a = cfg.interclass_a;
    spec.class_b = cfg.interclass_b;
    spec.target = cfg.poison_target;
    spec.trigger = cfg.trigger;
    switch (reg) {
        case Regularity::low: spec.n = cfg.random_label_n; break;
        case Regularity::medium: spec.n = cfg.interclass_n; break;
        case Regularity::high: spec.n = cfg.poison_n; break;
    }
    CorruptedData out;
    out.train = apply_corruption(train, spec, root.split("corrupt").split(reg_key(reg)).split(seed).next_u64());
    out.test = std::move(test);
    out.target_class = cfg.poison_target;
    if (reg == Regularity::high)
        out.triggered_test = apply_trigger(out.test.inputs, cfg.trigger, out.test.channels, out.test.height,
                                           out.test.width);
    return out;
}

TaskInstance build_task(const BenchConfig& cfg, const CorruptedData& data, Regularity reg, double rate,
                        std::uint64_t seed) {
    // The discovery seed ignores the rate so forget sets are nested.
    const auto dseed = Rng(cfg.master_seed).split("discovery").split(reg_key(reg)).split(seed).next_u64();
    return split_discovery(data.train, data.test, rate, dseed, reg, data.target_class, data.triggered_test);
}

OriginalModel train_original(const BenchConfig& cfg, const LabeledDataset& train, bool etd, std::uint64_t seed) {
    const Rng rng = Rng(seed).split(etd ? "original_etd" : "original");
    OriginalModel out;
    std::vector<int> mem;
    if (etd) {
        mem = leftover_mem_units(cfg.model);
        out.masks = assign_etd_masks(train.ids, mem, cfg.etd_density, rng.split("masks").next_u64());
    }
    PartitionedNetwork net = init_network(cfg.model.profile, cfg.model.capacity_fraction, mem, train.dim(),
                                          train.num_classes, rng.split("init"));
    out.net = train_supervised(std::move(net), train, {}, cfg.train, out.masks ? &*out.masks : nullptr,
                               rng.split("train"));
    if (!out.net.all_finite()) throw NumericError("original training produced non-finite parameters");
    return out;
}

std::uint64_t cell_seed(const BenchConfig& cfg, const std::string& method, Regularity reg, double rate,
                        std::uint64_t seed) {
    const auto rate_key = static_cast<std::uint64_t>(std::llround(rate * 1e6));
    return Rng(cfg.master_seed).split("cell").split(method).split(reg_key(reg)).split(rate_key).split(seed).next_u64();
}

UnlearnContext make_context(const BenchConfig& cfg, const MethodSpec& spec, const OriginalModel& original,
                            const TaskInstance& task, std::uint64_t seed) {
    UnlearnContext ctx;
    ctx.original = &original.net;
    ctx.task = &task;
    ctx.mask_table = original.masks ? &*original.masks : nullptr;
    ctx.config = cfg.unlearn;
    if (!spec.step32) ctx.config.rem.enable_step32 = false;
    ctx.train = cfg.train;
    ctx.model = cfg.model;
    ctx.seed = seed;
    return ctx;
}

std::vector<RunResult> run_grid(const GridSpec& grid, const BenchConfig& cfg) {
    for (double r : grid.discovery_rates)
        if (!(r > 0.0 && r <= 1.0)) throw ConfigError("discovery rates must be in (0, 1]");
    if (grid.jobs < 1) throw ConfigError("jobs must be >= 1");

    // Corrupted data per (regularity, seed).
    struct DataKey {
        Regularity reg;
        std::uint64_t seed;
    };
    std::vector<DataKey> data_keys;
    for (auto reg : grid.regularities)
        for (auto s : grid.seeds) data_keys.push_back({reg, s});
    std::vector<CorruptedData> data(data_keys.size());
    parallel_for(data_keys.size(), grid.jobs,
                 [&](std::size_t i) { data[i] = build_corrupted_data(cfg, data_keys[i].reg, data_keys[i].seed); });

    // Original models per (regularity, seed, etd), trained once and shared.
    std::set<bool> kinds;
    for (const auto& m : grid.methods) kinds.insert(m.etd);
    struct ModelKey {
        std::size_t data;
        bool etd;
    };
    std::vector<ModelKey> model_keys;
    for (std::size_t d = 0; d < data_keys.size(); ++d)
        for (bool etd : kinds) model_keys.push_back({d, etd});
    std::vector<std::optional<OriginalModel>> models(model_keys.size());
    std::vector<std::string> model_errors(model_keys.size());
    parallel_for(model_keys.size(), grid.jobs, [&](std::size_t i) {
        const auto& k = model_keys[i];
        const auto seed = Rng(cfg.master_seed)
                              .split("original")
                              .split(reg_key(data_keys[k.data].reg))
                              .split(data_keys[k.data].seed)
                              .next_u64();
        try {
            models[i] = train_original(cfg, data[k.data].train, k.etd, seed);
        } catch (const std::exception& e) {
            model_errors[i] = e.what();
        }
    });
    auto model_index = [&](std::size_t d, bool etd) {
        for (std::size_t i = 0; i < model_keys.size(); ++i)
            if (model_keys[i].data == d && model_keys[i].etd == etd) return i;
        throw std::logic_error("missing original model");
    };

    struct Cell {
        std::size_t method;
        std::size_t data;
        double rate;
    };
    std::vector<Cell> cells;
    for (std::size_t m = 0; m < grid.methods.size(); ++m)
        for (std::size_t ri = 0; ri < grid.regularities.size(); ++ri) {
            std::vector<double> rates = grid.discovery_rates;
            std::sort(rates.begin(), rates.end());
            if (grid.zero_column) rates.insert(rates.begin(), 0.0);
            for (double rate : rates)
                for (std::size_t si = 0; si < grid.seeds.size(); ++si)
                    cells.push_back({m, ri * grid.seeds.size() + si, rate});
        }

    std::vector<RunResult> results(cells.size());
    parallel_for(cells.size(), grid.jobs, [&](std::size_t i) {
        const Cell& c = cells[i];
        const MethodSpec& spec = grid.methods[c.method];
        const DataKey& dk = data_keys[c.data];
        RunResult& rr = results[i];
        rr.method = spec.name;
        rr.regularity = dk.reg;
        rr.discovery_rate = c.rate;
        rr.seed = dk.seed;
        const auto mi = model_index(c.data, spec.etd);
        if (!models[mi]) {
            rr.stop_reason = sanitize("failed: " + model_errors[mi]);
            return;
        }
        const auto t0 = std::chrono::steady_clock::now();
        try {
            if (c.rate == 0.0) {
                // Pre-unlearning column: no forget set exists.
                TaskInstance task = build_task(cfg, data[c.data], dk.reg, 1.0, dk.seed);
                const PartitionedNetwork net = excise_memorization(models[mi]->net);
                rr.metrics = evaluate(net, task);
                rr.metrics.healed_forget = 0.0;
                rr.stop_reason = "original";
            } else {
                const TaskInstance task = build_task(cfg, data[c.data], dk.reg, c.rate, dk.seed);
                const auto ctx =
                    make_context(cfg, spec, *models[mi], task, cell_seed(cfg, spec.name, dk.reg, c.rate, dk.seed));
                const UnlearnOutcome out = run_method(spec.method, ctx);
                rr.metrics = evaluate(out.net, task);
                rr.stop_reason = out.stop_reason;
            }
        } catch (const std::exception& e) {
            rr.metrics = Metrics{};
            rr.stop_reason = sanitize(std::string("failed: ") + e.what());
        }
        if (grid.record_wall_time)
            rr.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });
    return results;
}

double mean_of(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sem_of(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
}

std::vector<AggregateResult> aggregate(const std::vector<RunResult>& results, GroupBy group_by) {
    // group key -> seed -> cell key -> metrics; std::map fixes the summation order.
    using CellKey = std::pair<int, double>;
    using GroupKey = std::tuple<std::string, int, double>;
    std::map<GroupKey, std::map<std::uint64_t, std::map<CellKey, Metrics>>> groups;
    for (const auto& r : results) {
        if (group_by == GroupBy::method && r.discovery_rate == 0.0) continue;
        const int reg = static_cast<int>(r.regularity);
        const GroupKey g = group_by == GroupBy::method ? GroupKey{r.method, -1, -1.0}
                                                       : GroupKey{r.method, reg, r.discovery_rate};
        groups[g][r.seed][{reg, r.discovery_rate}] = r.metrics;
    }
    std::vector<AggregateResult> out;
    for (const auto& [key, seeds] : groups) {
        AggregateResult a;
        a.method = std::get<0>(key);
        if (group_by == GroupBy::cell) {
            a.regularity = static_cast<Regularity>(std::get<1>(key));
            a.discovery_rate = std::get<2>(key);
        }
        a.k = seeds.size();
        std::vector<double> u, hf, ha, p, at;
        for (const auto& [seed, cells] : seeds) {
            std::vector<double> cu, chf, cha, cp, cat;
            for (const auto& [ck, m] : cells) {
                cu.push_back(m.utility);
                chf.push_back(m.healed_forget);
                cha.push_back(m.healed_all);
                cp.push_back(m.product);
                cat.push_back(m.attack_rate);
            }
            u.push_back(mean_of(cu));
            hf.push_back(mean_of(chf));
            ha.push_back(mean_of(cha));
            p.push_back(mean_of(cp));
            at.push_back(mean_of(cat));
        }
        a.mean = {mean_of(u), mean_of(hf), mean_of(ha), mean_of(p), mean_of(at)};
        a.sem = {sem_of(u), sem_of(hf), sem_of(ha), sem_of(p), sem_of(at)};
        out.push_back(std::move(a));
    }
    return out;
}

const char* const kCsvHeader =
    "method,regularity,discovery_rate,seed,utility,healed_forget,healed_all,product,wall_time,stop_reason";

std::string format_results_csv(const std::vector<RunResult>& results) {
    std::string out = std::string(kCsvHeader) + "\n";
    for (const auto& r : results) {
        out += sanitize(r.method) + "," + to_string(r.regularity) + "," + fixed6(r.discovery_rate) + "," +
               std::to_string(r.seed) + "," + fixed6(r.metrics.utility) + "," + fixed6(r.metrics.healed_forget) + "," +
               fixed6(r.metrics.healed_all) + "," + fixed6(r.metrics.product) + "," + fixed6(r.wall_time) + "," +
               sanitize(r.stop_reason) + "\n";
    }
    return out;
}

std::vector<RunResult> parse_results_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw FormatError("results CSV: unexpected header");
    std::vector<RunResult> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cur;
        std::istringstream ls(line);
        while (std::getline(ls, cur, ',')) f.push_back(cur);
        if (line.back() == ',') f.emplace_back();
        if (f.size() != 10) throw FormatError("results CSV line " + std::to_string(lineno) + ": expected 10 fields");
        try {
            RunResult r;
            r.method = f[0];
            r.regularity = parse_regularity(f[1]);
            r.discovery_rate = std::stod(f[2]);
            r.seed = std::stoull(f[3]);
            r.metrics.utility = std::stod(f[4]);
            r.metrics.healed_forget = std::stod(f[5]);
            r.metrics.healed_all = std::stod(f[6]);
            r.metrics.product = std::stod(f[7]);
            r.wall_time = std::stod(f[8]);
            r.stop_reason = f[9];
            out.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw FormatError("results CSV line " + std::to_string(lineno) + ": malformed number");
        } catch (const ConfigError&) {
            throw FormatError("results CSV line " + std::to_string(lineno) + ": unknown regularity");
        }
    }
    return out;
}

std::string format_aggregate_csv(const std::vector<AggregateResult>& rows) {
    std::string out =
        "method,regularity,discovery_rate,k,utility,utility_sem,healed_forget,healed_forget_sem,healed_all,"
        "healed_all_sem,product,product_sem\n";
    for (const auto& a : rows) {
        out += sanitize(a.method) + "," + (a.regularity ? to_string(*a.regularity) : "all") + "," +
               (a.discovery_rate ? fixed6(*a.discovery_rate) : "all") + "," + std::to_string(a.k) + "," +
               fixed6(a.mean.utility) + "," + fixed6(a.sem.utility) + "," + fixed6(a.mean.healed_forget) + "," +
               fixed6(a.sem.healed_forget) + "," + fixed6(a.mean.healed_all) + "," + fixed6(a.sem.healed_all) + "," +
               fixed6(a.mean.product) + "," + fixed6(a.sem.product) + "\n";
    }
    return out;
}

HeatmapMetric parse_heatmap_metric(const std::string& s) {
    for (auto m : {HeatmapMetric::utility, HeatmapMetric::healed_forget, HeatmapMetric::healed_all,
                   HeatmapMetric::product})
        if (to_string(m) == s) return m;
    throw ConfigError("unknown heatmap metric '" + s + "'");
}

std::string to_string(HeatmapMetric m) {
    switch (m) {
        case HeatmapMetric::utility: return "utility";
        case HeatmapMetric::healed_forget: return "healed_forget";
        case HeatmapMetric::healed_all: return "healed_all";
        case HeatmapMetric::product: return "product";
    }
    return "product";
}

int heatmap_gray(double value) {
    const double v = std::clamp(value, 0.0, 1.0);
    return static_cast<int>(std::lround(255.0 * (1.0 - v)));
}

std::string render_heatmap(const std::vector<RunResult>& results, const std::string& method, HeatmapMetric metric) {
    std::map<std::pair<int, double>, std::vector<double>> cells;
    std::set<double> rates;
    std::set<int, std::greater<>> regs;  // high regularity first
    for (const auto& r : results) {
        if (r.method != method) continue;
        const int reg = static_cast<int>(r.regularity);
        cells[{reg, r.discovery_rate}].push_back(metric_value(r.metrics, metric));
        rates.insert(r.discovery_rate);
        regs.insert(reg);
    }
    if (cells.empty()) throw ConfigError("no results for method '" + method + "'");

    constexpr int cw = 56, ch = 36, left = 80, top = 40;
    const int width = left + cw * static_cast<int>(rates.size()) + 10;
    const int height = top + ch * static_cast<int>(regs.size()) + 40;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">" << sanitize(method) << " - " << to_string(metric)
        << "</text>\n";
    int row = 0;
    for (int reg : regs) {
        const int y = top + row * ch;
        svg << "<text x=\"" << left - 6 << "\" y=\"" << y + ch / 2 + 4 << "\" text-anchor=\"end\">"
            << to_string(static_cast<Regularity>(reg)) << "</text>\n";
        int col = 0;
        for (double rate : rates) {
            const int x = left + col * cw;
            auto it = cells.find({reg, rate});
            if (it != cells.end()) {
                const double v = mean_of(it->second);
                const int g = heatmap_gray(v);
                svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw << "\" height=\"" << ch
                    << "\" fill=\"rgb(" << g << "," << g << "," << g << ")\" stroke=\"#888\"/>\n";
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.2f", v);
                svg << "<text x=\"" << x + cw / 2 << "\" y=\"" << y + ch / 2 + 4 << "\" text-anchor=\"middle\" fill=\""
                    << (g < 128 ? "white" : "black") << "\">" << buf << "</text>\n";
            }
            ++col;
        }
        ++row;
    }
    int col = 0;
    for (double rate : rates) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.1f", rate);
        svg << "<text x=\"" << left + col * cw + cw / 2 << "\" y=\"" << top + ch * static_cast<int>(regs.size()) + 16
            << "\" text-anchor=\"middle\">" << buf << "</text>\n";
        ++col;
    }
    svg << "<text x=\"" << left + cw * static_cast<int>(rates.size()) / 2 << "\" y=\"" << height - 6
        << "\" text-anchor=\"middle\">discovery rate</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace remkit
