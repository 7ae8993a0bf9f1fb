#ifndef LILDE_RUN_CONFIG_HPP
#define LILDE_RUN_CONFIG_HPP

// JSON configuration files for the command-line tool.
//
// {
//   "objective": "ackley" | "simulated-experiment" | "external",
//   "dimension": 2,                    ackley / external
//   "command": "./my_evaluator",       external only
//   "space": {"names": [...], "lower": [...], "upper": [...]},   external only
//   "noise": 0.0, "drift": [...], "resample": 1,
//   "timeout": 60, "sessions": 1,      external only (seconds, parallel processes)
//   "F": 0.9, "CR": 0.9, "E": 0.5, "N": 20, "lifetime": 10 | "unlimited",
//   "T": 0.005, "epsilon": 1e-9, "budget": 1000000, "seed": 1, "workers": 1,
//   "output": {"dir": "runs", "trace": "trace.csv", "report": "report.json"},
//   "bench": {...}                     see BenchSettings
// }
//
// Every key is optional except where the objective needs it. Unknown keys are errors.

#include <lilde/bench.hpp>
#include <lilde/engine.hpp>
#include <lilde/objectives.hpp>

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace lilde {

struct OutputSettings {
    std::optional<std::filesystem::path> dir; // unset: environment variable, then "."
    std::string trace = "trace.csv";
    std::string report = "report.json";
};

struct BenchSettings {
    bench::SweepOptions options;
    std::optional<std::vector<std::size_t>> dimensions;
    std::optional<std::vector<std::size_t>> population_candidates;
    std::optional<std::size_t> pre_runs;
    std::optional<std::vector<double>> sigmas;
    std::optional<std::vector<std::size_t>> sizes;
    std::optional<std::size_t> noise_dimension;
    std::optional<std::size_t> popsize_dimension;
    /// Result file stem inside the output directory; defaults to the sweep name.
    std::optional<std::string> stem;
};

struct RunConfig {
    ObjectiveSpec objective;
    std::string command;
    std::chrono::milliseconds timeout{60'000};
    std::size_t sessions = 1;
    ParameterSpace space = ackley_space(2);
    OptimizerConfig optimizer;
    OutputSettings output;
    BenchSettings bench;
    /// N was given explicitly (bench sweeps otherwise use their own defaults).
    bool population_given = false;

    /// Fresh core objective with the configured wrappers applied.
    ObjectivePtr make_objective() const;
};

/// Parses and validates. Throws ConfigError naming the file, line or field.
RunConfig parse_run_config(const nlohmann::json& document, const std::string& origin = "config");
RunConfig parse_run_config_text(const std::string& text, const std::string& origin = "config");
RunConfig load_run_config(const std::filesystem::path& path);

/// The output directory: explicit setting, else $LILDE_OUTPUT_DIR, else the current directory.
std::filesystem::path output_directory(const OutputSettings& output);

inline constexpr const char* output_dir_variable = "LILDE_OUTPUT_DIR";

} // namespace lilde

#endif
