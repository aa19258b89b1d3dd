// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Criteria 4-7 run the full default grid over three seeds.

#include "gradcheck.hpp"
#include "helpers.hpp"
#include "remkit/checkpoint.hpp"
#include "remkit/cscore.hpp"
#include "remkit/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace remkit;
using namespace testing;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

bool report(int id, const std::string& name, const Verdict& v, const std::string& info) {
    std::printf("%s criterion %d (%s): %s%s%s\n", v.pass ? "PASS" : "FAIL", id, name.c_str(), info.c_str(),
                v.detail.empty() ? "" : " | ", v.detail.c_str());
    std::fflush(stdout);
    return v.pass;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1: gradients ----------------------------------------------------------

bool criterion_gradients() {
    Verdict v;
    double worst = 0.0;
    for (GradKind k : {GradKind::ce, GradKind::npo, GradKind::step3, GradKind::kl}) {
        double kind_worst = 0.0;
        for (std::uint64_t s = 0; s < 10; ++s) kind_worst = std::max(kind_worst, gradient_instance(k, 1000 + s));
        v.require(kind_worst <= 1e-4, std::string(grad_kind_name(k)) + fmt(" max rel err %.3g", kind_worst));
        worst = std::max(worst, kind_worst);
    }
    return report(1, "gradient suite", v, fmt("4 losses x 10 instances, max rel err %.3g", worst));
}

// ---- 2: structure ----------------------------------------------------------

bool same(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

bool criterion_structure() {
    Verdict v;
    Rng rng(77);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto base = init_network(std::vector<int>{20, 16}, 0.5, {}, 6, 4, Rng(s));
        const auto wide = expand_network(base, std::vector<int>{6, 5}, Rng(s + 100));
        const Matrix x = random_matrix(11, 6, rng);
        v.require(same(logits(base, x, ForwardMode::full), logits(wide, x, ForwardMode::gen_only)),
                  "expansion changed the gen-only function");
        const Matrix d = logits(excise_memorization(wide), x, ForwardMode::full) - logits(wide, x, ForwardMode::gen_only);
        v.require(d.cwiseAbs().maxCoeff() <= 1e-6, "excision differs from gen-only view");

        auto net = wide;
        const auto before = net;
        OptimizerState opt(OptimizerConfig{OptimizerKind::adam, 0.05});
        const auto y = random_labels(11, 4, rng);
        for (int i = 0; i < 3; ++i) {
            const auto cache = forward(net, x, ForwardMode::full);
            opt.step(net, backward(net, cache, cross_entropy(cache.logits, y).grad), ParamScope::gen);
        }
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
            const auto& a = net.layers()[l];
            const auto& b = before.layers()[l];
            v.require(same(a.w_gm, b.w_gm) && same(a.w_mg, b.w_mg) && same(a.w_mm, b.w_mm) && same(a.b_m, b.b_m),
                      "gen-scope update touched memorization blocks");
        }
    }

    std::vector<std::int64_t> ids(300);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i);
    const std::vector<int> shape{64, 17};
    const auto etd = assign_etd_masks(ids, shape, 0.2, 5);
    const std::vector<std::int64_t> forget{2, 50, 51, 299};
    const auto remm = assign_rem_masks(ids, forget, shape, 0.2, 6, &etd);
    for (const auto* t : {&etd, &remm})
        for (const auto& [id, m] : t->entries())
            for (std::size_t l = 0; l < shape.size(); ++l) {
                int on = 0;
                for (auto b : m.layers[l]) on += b;
                v.require(on == active_count(shape[l], 0.2), "mask density not exact");
            }
    for (auto id : forget) v.require(remm.at(id).layers == remm.at(forget[0]).layers, "forget masks differ");

    Checkpoint ck{round_to_storage(small_net(3)), std::nullopt, 42};
    ck.masks = assign_etd_masks(ids, ck.net.mem_widths(), 0.3, 1);
    const auto bytes = serialize_checkpoint(ck);
    const auto back = deserialize_checkpoint(bytes);
    v.require(back.net == ck.net && back.masks == ck.masks && serialize_checkpoint(back) == bytes,
              "checkpoint round trip not bit-exact");

    const BenchConfig cfg = tiny_bench();
    GridSpec g;
    for (const char* m : {"rem", "npo", "etd_drop", "scrub"}) g.methods.push_back(parse_method_spec(m));
    g.discovery_rates = {0.5, 1.0};
    g.seeds = {0, 1};
    g.zero_column = true;
    const auto a = format_results_csv(run_grid(g, cfg));
    const auto b = format_results_csv(run_grid(g, cfg));
    g.jobs = 4;
    const auto c = format_results_csv(run_grid(g, cfg));
    v.require(a == b, "grid rerun not byte-identical");
    v.require(a == c, "--jobs 1 and --jobs 4 differ");
    return report(2, "structural suite", v, "expansion, excision, isolation, masks, checkpoint, grid determinism");
}

// ---- 3: gamma stop ---------------------------------------------------------

struct Originals {
    std::map<std::pair<int, std::uint64_t>, CorruptedData> data;
    std::map<std::tuple<int, std::uint64_t, bool>, OriginalModel> models;

    const CorruptedData& get_data(const BenchConfig& cfg, Regularity r, std::uint64_t s) {
        const auto key = std::make_pair(static_cast<int>(r), s);
        auto it = data.find(key);
        if (it == data.end()) it = data.emplace(key, build_corrupted_data(cfg, r, s)).first;
        return it->second;
    }

    // Same seed derivation as the grid runner so cached models match grid cells.
    const OriginalModel& get_model(const BenchConfig& cfg, Regularity r, std::uint64_t s, bool etd) {
        const auto key = std::make_tuple(static_cast<int>(r), s, etd);
        auto it = models.find(key);
        if (it == models.end()) {
            const auto seed = Rng(cfg.master_seed)
                                  .split("original")
                                  .split(static_cast<std::uint64_t>(r) + 1)
                                  .split(s)
                                  .next_u64();
            it = models.emplace(key, train_original(cfg, get_data(cfg, r, s).train, etd, seed)).first;
        }
        return it->second;
    }
};

bool criterion_gamma(const BenchConfig& cfg, Originals& orig) {
    Verdict v;
    int stopped = 0, runs = 0;
    double worst = 0.0;
    for (Regularity r : {Regularity::low, Regularity::medium, Regularity::high})
        for (double rate : {0.1, 1.0})
            for (const char* name : {"rem", "rem_ideal", "npo", "ascent", "rem+etd"}) {
                const auto spec = parse_method_spec(name);
                const auto task = build_task(cfg, orig.get_data(cfg, r, 0), r, rate, 0);
                const auto ctx = make_context(cfg, spec, orig.get_model(cfg, r, 0, spec.etd), task,
                                              cell_seed(cfg, name, r, rate, 0));
                const auto out = run_method(spec.method, ctx);
                ++runs;
                if (!out.stopped_by_gamma) continue;
                ++stopped;
                worst = std::max(worst, out.forget_acc_at_stop);
                v.require(out.forget_acc_at_stop < cfg.unlearn.gamma,
                          std::string(name) + " stopped at " + fmt("%.4f", out.forget_acc_at_stop));
            }
    v.require(stopped > 0, "no run stopped on gamma");
    return report(3, "gamma stop", v,
                  fmt("%.0f of %.0f runs gamma-stopped, max Acc(D_f) at stop %.4f (< %.2f)", stopped, runs, worst,
                      cfg.unlearn.gamma));
}

// ---- grid-based criteria ---------------------------------------------------

struct SeedStat {
    double mean = 0.0;
    double sem = 0.0;
};

/// Mean over seeds of healed_all for one (method, regularity, rate).
SeedStat cell_stat(const std::vector<RunResult>& rs, const std::string& method, Regularity r, double rate,
                   double Metrics::*field) {
    std::vector<double> v;
    for (const auto& x : rs)
        if (x.method == method && x.regularity == r && x.discovery_rate == rate) v.push_back(x.metrics.*field);
    return {mean_of(v), sem_of(v)};
}

bool criterion_reintroduction(const std::vector<RunResult>& rs) {
    Verdict v;
    const auto p1 = cell_stat(rs, "retrain", Regularity::high, 1.0, &Metrics::healed_all);
    const auto p5 = cell_stat(rs, "retrain", Regularity::high, 0.5, &Metrics::healed_all);
    const auto r1 = cell_stat(rs, "retrain", Regularity::low, 1.0, &Metrics::healed_all);
    const auto r5 = cell_stat(rs, "retrain", Regularity::low, 0.5, &Metrics::healed_all);
    const double poison_gap = p1.mean - p5.mean, random_gap = r1.mean - r5.mean;
    v.require(poison_gap >= 0.30, fmt("poison gap %.3f < 0.30", poison_gap));
    v.require(random_gap < poison_gap, "random-label gap not below poison gap");
    return report(4, "reintroduction", v,
                  fmt("retrain healed_all poison 1.0 %.3f vs 0.5 %.3f (gap %.3f); random-label gap %.3f", p1.mean,
                      p5.mean, poison_gap, random_gap));
}

bool criterion_etd(const BenchConfig& cfg, Originals& orig) {
    Verdict v;
    std::vector<double> etd_rand, plain_rand, etd_poison;
    for (std::uint64_t s = 0; s < 3; ++s) {
        for (bool etd : {false, true}) {
            const auto& data = orig.get_data(cfg, Regularity::low, s);
            const auto net = excise_memorization(orig.get_model(cfg, Regularity::low, s, etd).net);
            const auto pred = predict(net, data.train.inputs);
            double hit = 0, n = 0;
            for (std::size_t i = 0; i < pred.size(); ++i)
                if (data.train.corrupted[i]) {
                    ++n;
                    hit += pred[i] == data.train.labels[i];
                }
            (etd ? etd_rand : plain_rand).push_back(hit / n);
        }
        const auto& data = orig.get_data(cfg, Regularity::high, s);
        const auto net = excise_memorization(orig.get_model(cfg, Regularity::high, s, true).net);
        const auto pred = predict(net, data.train.inputs);
        double hit = 0, n = 0;
        for (std::size_t i = 0; i < pred.size(); ++i)
            if (data.train.corrupted[i]) {
                ++n;
                hit += pred[i] == data.target_class;
            }
        etd_poison.push_back(hit / n);
    }
    const double e = mean_of(etd_rand), p = mean_of(plain_rand), q = mean_of(etd_poison);
    v.require(e <= 0.3, fmt("ETD corrupted-label acc %.3f > 0.3", e));
    v.require(p >= 0.7, fmt("plain corrupted-label acc %.3f < 0.7", p));
    v.require(q >= 0.5, fmt("ETD triggered-train target rate %.3f < 0.5", q));
    return report(5, "ETD pattern", v,
                  fmt("random-label corrupted acc ETD %.3f, plain %.3f; poison target rate after mem-drop %.3f", e,
                      p, q));
}

const AggregateResult& find_agg(const std::vector<AggregateResult>& agg, const std::string& m) {
    for (const auto& a : agg)
        if (a.method == m) return a;
    throw std::runtime_error("no aggregate for " + m);
}

bool criterion_coverage(const std::vector<AggregateResult>& agg) {
    Verdict v;
    const auto& rem = find_agg(agg, "rem");
    const auto& ideal = find_agg(agg, "rem_ideal");
    std::ostringstream info;
    info << fmt("rem %.4f+-%.4f", rem.mean.product, rem.sem.product);
    for (const char* b : {"retrain", "finetune", "ascent", "npo", "badt", "scrub", "etd_drop"}) {
        const auto& a = find_agg(agg, b);
        const double slack = std::max(rem.sem.product, a.sem.product);
        if (rem.mean.product + slack < a.mean.product)
            v.require(false, "DEVIATION: " + std::string(b) +
                                 fmt(" %.4f exceeds rem %.4f beyond one SEM", a.mean.product, rem.mean.product));
    }
    const double slack = std::max(rem.sem.product, ideal.sem.product);
    if (ideal.mean.product + slack < rem.mean.product)
        v.require(false, fmt("DEVIATION: rem_ideal %.4f below rem %.4f beyond one SEM", ideal.mean.product,
                             rem.mean.product));
    info << fmt(", rem_ideal %.4f+-%.4f", ideal.mean.product, ideal.sem.product);
    return report(6, "REM coverage", v, info.str());
}

bool criterion_ablation(const std::vector<AggregateResult>& agg) {
    Verdict v;
    const auto& rem = find_agg(agg, "rem");
    const auto& no32 = find_agg(agg, "rem_no32");
    const double slack = std::max(rem.sem.product, no32.sem.product);
    v.require(no32.mean.product <= rem.mean.product + slack,
              fmt("rem_no32 %.4f exceeds rem %.4f beyond one SEM", no32.mean.product, rem.mean.product));
    return report(7, "removal barrier ablation", v,
                  fmt("rem %.4f+-%.4f, without barrier %.4f+-%.4f", rem.mean.product, rem.sem.product,
                      no32.mean.product, no32.sem.product));
}

// ---- 8: C-score ------------------------------------------------------------

double exhaustive_cscore(const LabeledDataset& pool, std::size_t target, std::size_t k, const CScoreConfig& cfg) {
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (i != target) others.push_back(i);
    int hits = 0, count = 0;
    std::vector<std::size_t> rows;
    std::function<void(std::size_t)> rec = [&](std::size_t start) {
        if (rows.size() == k) {
            hits += subset_outcome(pool, target, rows, cfg);
            ++count;
            return;
        }
        for (std::size_t j = start; j < others.size(); ++j) {
            rows.push_back(others[j]);
            rec(j + 1);
            rows.pop_back();
        }
    };
    rec(0);
    return static_cast<double>(hits) / count;
}

bool criterion_cscore() {
    Verdict v;
    auto pool = gen_synthetic({2, 4, 1, 4, 0.2}, 11).first;
    // Row 1 duplicates row 0; row 7 carries the other class's label.
    pool.inputs.row(1) = pool.inputs.row(0);
    pool.labels[1] = pool.clean_labels[1] = pool.labels[0];
    pool.labels[7] = 1 - pool.labels[7];
    CScoreConfig cfg;
    cfg.subset_sizes = {3};
    cfg.repetitions = 150;
    double worst = 0.0;
    for (std::size_t t : {0u, 3u, 7u}) {
        const double est = estimate_cscore(pool, t, cfg), ex = exhaustive_cscore(pool, t, 3, cfg);
        worst = std::max(worst, std::abs(est - ex));
    }
    v.require(worst <= 0.1, fmt("estimate off by %.3f", worst));
    cfg.subset_sizes = {};
    cfg.repetitions = 40;
    const double dup = estimate_cscore(pool, 0, cfg), outlier = estimate_cscore(pool, 7, cfg);
    v.require(dup >= outlier, fmt("duplicate %.3f < outlier %.3f", dup, outlier));
    return report(8, "C-score oracle", v,
                  fmt("max |estimate - exhaustive| %.3f; duplicate %.3f >= outlier %.3f", worst, dup, outlier));
}

// ---- 9: metric identities --------------------------------------------------

bool criterion_identities(const std::vector<RunResult>& rs) {
    Verdict v;
    std::size_t bad = 0;
    for (const auto& r : rs)
        if (r.metrics.product != r.metrics.utility * r.metrics.healed_all) ++bad;
    v.require(bad == 0, std::to_string(bad) + " rows break product identity");
    const std::vector<double> s{0.70, 0.72, 0.74};
    const double sem = sem_of(s);
    v.require(std::abs(sem - 0.011547) <= 1e-6, fmt("SEM %.8f", sem));
    return report(9, "metric identities", v,
                  fmt("product identity on %.0f rows; SEM{0.70,0.72,0.74} = %.6f", static_cast<double>(rs.size()),
                      sem));
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    ok &= criterion_gradients();
    ok &= criterion_structure();

    const BenchConfig cfg;
    Originals orig;
    ok &= criterion_gamma(cfg, orig);

    GridSpec grid;
    for (const char* m :
         {"rem", "rem_ideal", "rem_no32", "retrain", "finetune", "ascent", "npo", "badt", "scrub", "etd_drop"})
        grid.methods.push_back(parse_method_spec(m));
    const auto g0 = std::chrono::steady_clock::now();
    const auto results = run_grid(grid, cfg);
    const double grid_s = elapsed(g0);
    write_file_atomic("acceptance_results.csv", format_results_csv(results));
    const auto agg = aggregate(results, GroupBy::method);
    write_file_atomic("acceptance_aggregate.csv", format_aggregate_csv(agg));
    std::printf("grid: %zu cells in %.0f s (%.2f s per cell)\n", results.size(), grid_s,
                grid_s / static_cast<double>(results.size()));
    for (const auto& a : agg)
        std::printf("  %-10s utility %.4f  healed_all %.4f  product %.4f +- %.4f\n", a.method.c_str(),
                    a.mean.utility, a.mean.healed_all, a.mean.product, a.sem.product);
    std::size_t failed = 0;
    for (const auto& r : results) failed += r.stop_reason.rfind("failed", 0) == 0;
    if (failed > 0) std::printf("warning: %zu grid cells failed\n", failed);

    ok &= criterion_reintroduction(results);
    ok &= criterion_etd(cfg, orig);
    ok &= criterion_coverage(agg);
    ok &= criterion_ablation(agg);
    ok &= criterion_cscore();
    ok &= criterion_identities(results);
    std::printf("%s: total %.0f s\n", ok ? "ALL PASS" : "SOME FAILED", elapsed(t0));
    return ok ? 0 : 1;
}
