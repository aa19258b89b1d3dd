#include "remkit/config.hpp"

#include "remkit/error.hpp"
#include "remkit/io.hpp"

#include <cstdlib>
#include <set>

namespace remkit {

namespace {

using nlohmann::json;

/// Reads keys of one JSON object, rejecting anything not consumed.
class Section {
public:
    Section(const json& doc, std::string name) : name_(std::move(name)) {
        if (doc.contains(name_)) {
            obj_ = doc.at(name_);
            if (!obj_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
        } else {
            obj_ = json::object();
        }
    }
    ~Section() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (const auto& [k, v] : obj_.items())
            if (!seen_.count(k)) throw ConfigError("unknown config key '" + name_ + "." + k + "'");
    }
    template <class T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!obj_.contains(key)) return;
        try {
            out = obj_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type");
        }
    }
    template <class T>
    void get(const std::string& key, T& out, auto&& check, const char* what) {
        get(key, out);
        if (!check(out)) throw ConfigError("config key '" + name_ + "." + key + "' " + what);
    }

private:
    std::string name_;
    json obj_;
    std::set<std::string> seen_;
};

auto positive = [](auto v) { return v > 0; };
auto non_negative = [](auto v) { return v >= 0; };
auto unit_half_open = [](double v) { return v > 0.0 && v <= 1.0; };

}  // namespace

Config config_from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
    static const std::set<std::string> sections{"data", "model", "train", "corruption", "unlearn", "grid", "output"};
    for (const auto& [k, v] : doc.items())
        if (!sections.count(k)) throw ConfigError("unknown config section '" + k + "'");

    Config c;
    BenchConfig& b = c.bench;
    {
        Section s(doc, "data");
        s.get("num_classes", b.data.num_classes, [](int v) { return v >= 2; }, "must be >= 2");
        s.get("per_class_train", b.data.per_class_train, positive, "must be > 0");
        s.get("per_class_test", b.data.per_class_test, positive, "must be > 0");
        s.get("side", b.data.side, positive, "must be > 0");
        s.get("noise_sigma", b.data.noise_sigma, non_negative, "must be >= 0");
        s.get("seed", b.master_seed);
    }
    {
        Section s(doc, "model");
        s.get("profile", b.model.profile);
        for (int w : b.model.profile)
            if (w <= 0) throw ConfigError("config key 'model.profile' entries must be > 0");
        if (b.model.profile.empty()) throw ConfigError("config key 'model.profile' must not be empty");
        s.get("capacity_fraction", b.model.capacity_fraction, unit_half_open, "must be in (0, 1]");
        s.get("etd_density", b.etd_density, unit_half_open, "must be in (0, 1]");
    }
    {
        Section s(doc, "train");
        s.get("epochs", b.train.epochs, non_negative, "must be >= 0");
        s.get("batch_size", b.train.batch_size, positive, "must be > 0");
        std::string kind = to_string(b.train.optimizer.kind);
        s.get("optimizer", kind);
        try {
            b.train.optimizer.kind = parse_optimizer_kind(kind);
        } catch (const std::exception&) {
            throw ConfigError("config key 'train.optimizer' must be 'sgd' or 'adam'");
        }
        s.get("learning_rate", b.train.optimizer.learning_rate, positive, "must be > 0");
        s.get("momentum", b.train.optimizer.momentum, [](double v) { return v >= 0 && v < 1; }, "must be in [0, 1)");
    }
    {
        Section s(doc, "corruption");
        s.get("random_label_n", b.random_label_n);
        s.get("interclass_n", b.interclass_n, [](std::size_t v) { return v % 2 == 0; }, "must be even");
        s.get("interclass_a", b.interclass_a);
        s.get("interclass_b", b.interclass_b);
        s.get("poison_n", b.poison_n);
        s.get("poison_target", b.poison_target, non_negative, "must be >= 0");
        s.get("trigger_size", b.trigger.size, positive, "must be > 0");
        s.get("trigger_value", b.trigger.value);
        const int nc = b.data.num_classes;
        const auto in_range = [nc](int v) { return v >= 0 && v < nc; };
        if (!in_range(b.interclass_a) || !in_range(b.interclass_b) || b.interclass_a == b.interclass_b)
            throw ConfigError("config keys 'corruption.interclass_a/b' must be distinct classes below num_classes");
        if (!in_range(b.poison_target))
            throw ConfigError("config key 'corruption.poison_target' must be below num_classes");
    }
    {
        Section s(doc, "unlearn");
        MethodConfig& u = b.unlearn;
        const double chance = 1.0 / b.data.num_classes;
        s.get("gamma", u.gamma);
        if (!(u.gamma > chance && u.gamma < 1.0))
            throw ConfigError("config key 'unlearn.gamma' must be in (1/num_classes, 1)");
        s.get("beta", u.beta, positive, "must be > 0");
        s.get("learning_rate", u.ul_learning_rate, non_negative, "must be >= 0 (0 means training lr / 5)");
        s.get("max_epochs", u.max_ul_epochs, non_negative, "must be >= 0");
        s.get("batch_size", u.batch_size, positive, "must be > 0");
        s.get("step2_pass_cap", u.step2_pass_cap, positive, "must be > 0");
        s.get("scrub_alpha", u.scrub_alpha, non_negative, "must be >= 0");
        s.get("scrub_max_epochs", u.scrub_max_epochs, non_negative, "must be >= 0");
        s.get("distill_temperature", u.distill_temperature, positive, "must be > 0");
        s.get("badt_epochs", u.badt_epochs, non_negative, "must be >= 0");
        s.get("rem_mem_units", u.rem.mem_units);
        for (int m : u.rem.mem_units)
            if (m < 0) throw ConfigError("config key 'unlearn.rem_mem_units' entries must be >= 0");
        s.get("rem_density", u.rem.density, unit_half_open, "must be in (0, 1]");
        s.get("enable_step31", u.rem.enable_step31);
        s.get("enable_step32", u.rem.enable_step32);
    }
    {
        Section s(doc, "grid");
        s.get("methods", c.methods);
        for (const auto& m : c.methods) (void)parse_method_spec(m);
        std::vector<std::string> regs;
        for (auto r : c.grid.regularities) regs.push_back(to_string(r));
        s.get("regularities", regs);
        c.grid.regularities.clear();
        for (const auto& r : regs) c.grid.regularities.push_back(parse_regularity(r));
        s.get("discovery_rates", c.grid.discovery_rates);
        for (double r : c.grid.discovery_rates)
            if (!unit_half_open(r)) throw ConfigError("config key 'grid.discovery_rates' entries must be in (0, 1]");
        s.get("seeds", c.grid.seeds);
        s.get("jobs", c.grid.jobs, positive, "must be > 0");
        s.get("record_wall_time", c.grid.record_wall_time);
        s.get("zero_column", c.grid.zero_column);
    }
    {
        Section s(doc, "output");
        s.get("dir", c.output_dir);
    }
    return c;
}

json config_to_json(const Config& c) {
    const BenchConfig& b = c.bench;
    const MethodConfig& u = b.unlearn;
    json j;
    j["data"] = {{"num_classes", b.data.num_classes},     {"per_class_train", b.data.per_class_train},
                 {"per_class_test", b.data.per_class_test}, {"side", b.data.side},
                 {"noise_sigma", b.data.noise_sigma},     {"seed", b.master_seed}};
    j["model"] = {{"profile", b.model.profile},
                  {"capacity_fraction", b.model.capacity_fraction},
                  {"etd_density", b.etd_density}};
    j["train"] = {{"epochs", b.train.epochs},
                  {"batch_size", b.train.batch_size},
                  {"optimizer", to_string(b.train.optimizer.kind)},
                  {"learning_rate", b.train.optimizer.learning_rate},
                  {"momentum", b.train.optimizer.momentum}};
    j["corruption"] = {{"random_label_n", b.random_label_n}, {"interclass_n", b.interclass_n},
                       {"interclass_a", b.interclass_a},     {"interclass_b", b.interclass_b},
                       {"poison_n", b.poison_n},             {"poison_target", b.poison_target},
                       {"trigger_size", b.trigger.size},     {"trigger_value", b.trigger.value}};
    j["unlearn"] = {{"gamma", u.gamma},
                    {"beta", u.beta},
                    {"learning_rate", u.ul_learning_rate},
                    {"max_epochs", u.max_ul_epochs},
                    {"batch_size", u.batch_size},
                    {"step2_pass_cap", u.step2_pass_cap},
                    {"scrub_alpha", u.scrub_alpha},
                    {"scrub_max_epochs", u.scrub_max_epochs},
                    {"distill_temperature", u.distill_temperature},
                    {"badt_epochs", u.badt_epochs},
                    {"rem_mem_units", u.rem.mem_units},
                    {"rem_density", u.rem.density},
                    {"enable_step31", u.rem.enable_step31},
                    {"enable_step32", u.rem.enable_step32}};
    std::vector<std::string> regs;
    for (auto r : c.grid.regularities) regs.push_back(to_string(r));
    j["grid"] = {{"methods", c.methods},
                 {"regularities", regs},
                 {"discovery_rates", c.grid.discovery_rates},
                 {"seeds", c.grid.seeds},
                 {"jobs", c.grid.jobs},
                 {"record_wall_time", c.grid.record_wall_time},
                 {"zero_column", c.grid.zero_column}};
    j["output"] = {{"dir", c.output_dir}};
    return j;
}

Config load_config(const std::string& path) {
    const std::string text = read_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(doc);
}

std::string resolve_output_dir(const Config& cfg) {
    if (!cfg.output_dir.empty()) return cfg.output_dir;
    if (const char* env = std::getenv("REMKIT_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
    return "out";
}

}  // namespace remkit
