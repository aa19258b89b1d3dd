// Command-line entry point. Exit codes: 0 ok, 1 other failure, 2 config
// error, 3 missing file, 4 numeric failure.

#include "remkit/bench.hpp"
#include "remkit/checkpoint.hpp"
#include "remkit/config.hpp"
#include "remkit/cscore.hpp"
#include "remkit/error.hpp"
#include "remkit/io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#ifndef REMKIT_VERSION
#define REMKIT_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace remkit;

namespace {

struct Common {
    std::string config_path;
    std::string out_dir;
};

Config effective_config(const Common& common) {
    Config cfg = common.config_path.empty() ? config_from_json(nlohmann::json::object()) : load_config(common.config_path);
    if (!common.out_dir.empty()) cfg.output_dir = common.out_dir;
    return cfg;
}

std::string join(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

void write_manifest(const fs::path& dir, const std::string& command, const Config& cfg,
                    const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json m;
    m["tool"] = "remkit";
    m["version"] = REMKIT_VERSION;
    m["command"] = command;
    m["config"] = config_to_json(cfg);
    if (!extra.empty()) m["details"] = extra;
    write_file_atomic(join(dir, "manifest.json"), m.dump(2) + "\n");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::string ids_csv(const std::vector<std::int64_t>& ids) {
    std::string out = "id\n";
    for (auto id : ids) out += std::to_string(id) + "\n";
    return out;
}

OriginalModel original_for(const Config& cfg, const CorruptedData& data, Regularity reg, std::uint64_t seed,
                           bool etd, const std::string& checkpoint) {
    if (!checkpoint.empty()) {
        Checkpoint ck = load_checkpoint(checkpoint);
        if (ck.master_seed != cfg.bench.master_seed)
            throw ConfigError("checkpoint master seed " + std::to_string(ck.master_seed) +
                              " does not match config seed " + std::to_string(cfg.bench.master_seed));
        if (ck.net.input_dim() != data.train.dim())
            throw ConfigError("checkpoint input size does not match the configured data");
        return OriginalModel{std::move(ck.net), std::move(ck.masks)};
    }
    const auto oseed = Rng(cfg.bench.master_seed).split("original").split(static_cast<std::uint64_t>(reg) + 1)
                           .split(seed).next_u64();
    return train_original(cfg.bench, data.train, etd, oseed);
}

int fail(const char* kind, int code, const std::string& msg) {
    std::cerr << "error: kind=" << kind << " code=" << code << " message=\"" << msg << "\"\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Corrupted-data unlearning benchmark toolkit"};
    app.set_version_flag("--version", REMKIT_VERSION);
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "JSON config file");
        sub->add_option("--out-dir", common.out_dir, "output directory (default: $REMKIT_OUTPUT_DIR or ./out)");
    };

    std::string task = "low";
    std::uint64_t seed = 0;
    double discovery = 1.0;
    bool etd = false;
    std::string method = "rem";
    std::string checkpoint;

    auto* gen = app.add_subcommand("gen-data", "write the clean synthetic dataset as IDX files");
    add_common(gen);
    gen->add_option("--seed", seed, "data seed");

    auto* corrupt = app.add_subcommand("corrupt", "write a corrupted training set and its corrupted ids");
    add_common(corrupt);
    corrupt->add_option("--task", task, "low|medium|high (or random_label|interclass|poison)");
    corrupt->add_option("--seed", seed);

    auto* train = app.add_subcommand("train", "train the original model on a corrupted task");
    add_common(train);
    train->add_option("--task", task);
    train->add_option("--seed", seed);
    train->add_flag("--etd", etd, "train with example-tied dropout");

    auto* unlearn = app.add_subcommand("unlearn", "run one unlearning method on one grid cell");
    add_common(unlearn);
    unlearn->add_option("--method", method, "method name, optionally with +etd");
    unlearn->add_option("--task", task);
    unlearn->add_option("--discovery", discovery, "discovery rate in (0, 1]");
    unlearn->add_option("--seed", seed);
    unlearn->add_option("--checkpoint", checkpoint, "original model (default: train one)");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a task");
    add_common(eval);
    eval->add_option("--checkpoint", checkpoint)->required();
    eval->add_option("--task", task);
    eval->add_option("--discovery", discovery);
    eval->add_option("--seed", seed);

    std::string methods, seeds, rates, regs;
    int jobs = 0;
    auto* grid = app.add_subcommand("grid", "run the regularity x discovery grid");
    add_common(grid);
    grid->add_option("--methods", methods, "comma-separated method names");
    grid->add_option("--seeds", seeds, "comma-separated seeds");
    grid->add_option("--rates", rates, "comma-separated discovery rates");
    grid->add_option("--regularities", regs, "comma-separated regularities");
    grid->add_option("--jobs", jobs, "concurrent cells");

    std::string rows_arg;
    std::size_t pool = 64;
    auto* cscore = app.add_subcommand("cscore", "estimate consistency scores on a pool of training examples");
    add_common(cscore);
    cscore->add_option("--task", task);
    cscore->add_option("--seed", seed);
    cscore->add_option("--pool", pool, "pool size (first rows of the corrupted training set)");
    cscore->add_option("--rows", rows_arg, "comma-separated pool rows to score (default: all)");

    std::string results_path, metric = "product", svg_out;
    auto* heat = app.add_subcommand("heatmap", "render a results CSV as an SVG heatmap");
    heat->add_option("--results", results_path)->required();
    heat->add_option("--method", method)->required();
    heat->add_option("--metric", metric, "utility|healed_forget|healed_all|product");
    heat->add_option("--out", svg_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("config", 2, e.what());
    }

    try {
        if (*heat) {
            const auto results = parse_results_csv(read_file(results_path));
            write_file_atomic(svg_out, render_heatmap(results, method, parse_heatmap_metric(metric)));
            return 0;
        }

        Config cfg = effective_config(common);
        const fs::path out = resolve_output_dir(cfg);
        const Regularity reg = parse_regularity(task);

        if (*gen) {
            auto [tr, te] = gen_synthetic(cfg.bench.data, Rng(cfg.bench.master_seed).split("data").split(seed).next_u64());
            write_idx(tr, join(out, "train-images.idx"), join(out, "train-labels.idx"));
            write_idx(te, join(out, "test-images.idx"), join(out, "test-labels.idx"));
            write_manifest(out, "gen-data", cfg, {{"seed", seed}});
        } else if (*corrupt) {
            const auto data = build_corrupted_data(cfg.bench, reg, seed);
            write_idx(data.train, join(out, "train-images.idx"), join(out, "train-labels.idx"));
            write_file_atomic(join(out, "corrupted_ids.csv"), ids_csv(data.train.corrupted_ids()));
            write_manifest(out, "corrupt", cfg, {{"task", to_string(reg)}, {"seed", seed}});
        } else if (*train) {
            const auto data = build_corrupted_data(cfg.bench, reg, seed);
            OriginalModel m = original_for(cfg, data, reg, seed, etd, "");
            save_checkpoint({m.net, m.masks, cfg.bench.master_seed}, join(out, "original.rmck"));
            const Metrics met = evaluate(excise_memorization(m.net), build_task(cfg.bench, data, reg, 1.0, seed));
            write_manifest(out, "train", cfg,
                           {{"task", to_string(reg)}, {"seed", seed}, {"etd", etd}, {"utility", met.utility}});
        } else if (*unlearn) {
            const MethodSpec spec = parse_method_spec(method);
            if (!(discovery > 0.0 && discovery <= 1.0)) throw ConfigError("--discovery must be in (0, 1]");
            const auto data = build_corrupted_data(cfg.bench, reg, seed);
            const OriginalModel orig = original_for(cfg, data, reg, seed, spec.etd, checkpoint);
            const TaskInstance t = build_task(cfg.bench, data, reg, discovery, seed);
            const auto ctx = make_context(cfg.bench, spec, orig, t, cell_seed(cfg.bench, spec.name, reg, discovery, seed));
            const UnlearnOutcome res = run_method(spec.method, ctx);
            for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
            RunResult rr{spec.name, reg, discovery, seed, evaluate(res.net, t), 0.0, res.stop_reason};
            save_checkpoint({res.net, std::nullopt, cfg.bench.master_seed}, join(out, "unlearned.rmck"));
            write_file_atomic(join(out, "result.csv"), format_results_csv({rr}));
            write_manifest(out, "unlearn", cfg,
                           {{"method", spec.name}, {"task", to_string(reg)}, {"discovery", discovery}, {"seed", seed},
                            {"stopped_by_gamma", res.stopped_by_gamma}, {"warnings", res.warnings}});
            std::cout << format_results_csv({rr});
        } else if (*eval) {
            Checkpoint ck = load_checkpoint(checkpoint);
            const auto data = build_corrupted_data(cfg.bench, reg, seed);
            if (ck.net.input_dim() != data.train.dim())
                throw ConfigError("checkpoint input size does not match the configured data");
            const Metrics m = evaluate(excise_memorization(ck.net), build_task(cfg.bench, data, reg, discovery, seed));
            RunResult rr{"eval", reg, discovery, seed, m, 0.0, "evaluated"};
            std::cout << format_results_csv({rr});
        } else if (*grid) {
            if (!methods.empty()) cfg.methods = split_list(methods);
            if (!seeds.empty()) {
                cfg.grid.seeds.clear();
                for (const auto& s : split_list(seeds)) cfg.grid.seeds.push_back(std::stoull(s));
            }
            if (!rates.empty()) {
                cfg.grid.discovery_rates.clear();
                for (const auto& r : split_list(rates)) cfg.grid.discovery_rates.push_back(std::stod(r));
            }
            if (!regs.empty()) {
                cfg.grid.regularities.clear();
                for (const auto& r : split_list(regs)) cfg.grid.regularities.push_back(parse_regularity(r));
            }
            if (jobs > 0) cfg.grid.jobs = jobs;
            GridSpec g = cfg.grid;
            g.methods.clear();
            for (const auto& m : cfg.methods) g.methods.push_back(parse_method_spec(m));
            const auto results = run_grid(g, cfg.bench);
            write_file_atomic(join(out, "results.csv"), format_results_csv(results));
            write_file_atomic(join(out, "aggregate.csv"), format_aggregate_csv(aggregate(results, GroupBy::method)));
            write_file_atomic(join(out, "cells.csv"), format_aggregate_csv(aggregate(results, GroupBy::cell)));
            // jobs does not change outputs, so it is left out of the manifest.
            Config shown = cfg;
            shown.grid.jobs = 1;
            write_manifest(out, "grid", shown);
            for (const auto& r : results)
                if (r.stop_reason.rfind("failed", 0) == 0)
                    std::cerr << "warning: cell " << r.method << "/" << to_string(r.regularity) << "/"
                              << r.discovery_rate << "/" << r.seed << " " << r.stop_reason << "\n";
        } else if (*cscore) {
            const auto data = build_corrupted_data(cfg.bench, reg, seed);
            pool = std::min(pool, data.train.size());
            std::vector<std::size_t> prow(pool);
            for (std::size_t i = 0; i < pool; ++i) prow[i] = i;
            const LabeledDataset p = data.train.subset(prow);
            std::vector<std::size_t> targets;
            if (rows_arg.empty()) targets = prow;
            else
                for (const auto& r : split_list(rows_arg)) {
                    const auto v = std::stoull(r);
                    if (v >= pool) throw ConfigError("--rows entry " + r + " is outside the pool");
                    targets.push_back(v);
                }
            CScoreConfig cc;
            cc.seed = hash_combine(cfg.bench.master_seed, seed);
            std::string csv = "id,corrupted,cscore\n";
            for (auto t : targets) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.6f", estimate_cscore(p, t, cc));
                csv += std::to_string(p.ids[t]) + "," + std::to_string(int(p.corrupted[t])) + "," + buf + "\n";
            }
            write_file_atomic(join(out, "cscores.csv"), csv);
            write_manifest(out, "cscore", cfg, {{"task", to_string(reg)}, {"seed", seed}, {"pool", pool}});
        }
        return 0;
    } catch (const ConfigError& e) {
        return fail("config", 2, e.what());
    } catch (const MissingFileError& e) {
        return fail("missing_file", 3, e.what());
    } catch (const NumericError& e) {
        return fail("numeric", 4, e.what());
    } catch (const std::invalid_argument& e) {
        return fail("config", 2, e.what());
    } catch (const std::exception& e) {
        return fail("error", 1, e.what());
    }
}
