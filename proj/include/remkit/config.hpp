#pragma once

#include "remkit/bench.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace remkit {

/// Effective configuration of a run. Every field has a default; unknown keys
/// in a config document are rejected.
struct Config {
    BenchConfig bench;
    std::vector<std::string> methods{"rem"};
    GridSpec grid;  // grid.methods is filled from `methods` at run time
    std::string output_dir;  // empty: use the environment default
};

/// Sections: data, model, train, corruption, unlearn, grid, output.
Config config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const Config& cfg);
Config load_config(const std::string& path);

/// Output directory: the configured one, else $REMKIT_OUTPUT_DIR, else "out".
std::string resolve_output_dir(const Config& cfg);

}  // namespace remkit
