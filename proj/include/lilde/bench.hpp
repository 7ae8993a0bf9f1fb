#ifndef LILDE_BENCH_HPP
#define LILDE_BENCH_HPP

#include <lilde/engine.hpp>
#include <lilde/objectives.hpp>

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace lilde::bench {

/// An objective with a known optimum, rebuilt fresh for every trial.
struct Problem {
    std::string name;
    ParameterSpace space;
    std::vector<double> optimum;
    std::function<ObjectivePtr()> make;
};

/// Ackley (maximization form) in d dimensions with optional noise/resampling.
Problem ackley_problem(std::size_t dimension, double relative_sigma = 0.0, std::size_t resample = 1);

/// The 21-parameter simulated apparatus with optional noise.
Problem simulated_experiment_problem(double relative_sigma = 0.0);

struct TrialOutcome {
    std::uint64_t seed = 0;
    bool converged = false;
    /// First-success evaluation count, or the evaluations spent when not converged.
    std::size_t evaluations = 0;
    std::size_t generations = 0;
    std::size_t refresh_evaluations = 0;
    std::vector<double> best;
    /// |best - optimum| / (U - L) per component.
    std::vector<double> distance_fraction;
};

/// |best^n - optimum^n| <= fraction * (U^n - L^n) for every n.
bool success_check(std::span<const double> best, std::span<const double> optimum, const ParameterSpace& space,
    double fraction);

/// Runs the optimizer, testing the best member after every generation. The
/// run stops at the first success or when the budget is spent; the termination
/// threshold is not used. A population that has collapsed onto one point
/// (spread below 1e-9 of the range) cannot move again and ends the trial early.
TrialOutcome run_until_success(const Problem& problem, OptimizerConfig config, std::size_t budget, std::uint64_t seed,
    double fraction = 0.05);

struct SweepResult {
    std::string label;
    double variable = 0.0;
    /// Mean and population std of evaluations-to-success over converged runs (NaN if none).
    double mean_evals = 0.0;
    double std_evals = 0.0;
    double success_rate = 0.0;
    std::size_t runs = 0;
    OptimizerConfig config;
    std::size_t resample = 1;
    std::vector<TrialOutcome> trials;
};

/// Mean/std/success rate recomputed from the trials.
void aggregate(SweepResult& result);

/// Common knobs for all sweeps.
struct SweepOptions {
    std::size_t runs = 50;
    std::size_t budget = 2'000'000;
    double fraction = 0.05;
    std::uint64_t seed = 2024;
    /// Trials evaluated at once. Results do not depend on it.
    std::size_t threads = 1;
    /// Set to true from elsewhere to stop between trials.
    const std::atomic<bool>* cancel = nullptr;
    /// Called after every finished SweepResult.
    std::function<void(const SweepResult&)> on_result;
};

class Cancelled : public std::runtime_error {
public:
    Cancelled() : std::runtime_error("sweep cancelled") {}
};

/// Runs `runs` seeded trials of one configuration. Trial r uses derive_seed(seed, stream, r).
SweepResult run_trials(const Problem& problem, const OptimizerConfig& config, const SweepOptions& options,
    std::uint64_t stream, std::string label, double variable);

struct DimensionSweep {
    std::vector<std::size_t> dimensions{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    OptimizerConfig base;
    std::vector<std::size_t> population_candidates{6, 8, 10, 12, 15};
    /// Trials per candidate in the N pre-sweep.
    std::size_t pre_runs = 50;
};

/// Noiseless Ackley for each d; N per d is picked by a pre-sweep (lowest
/// mean evaluations, failures charged the full budget).
std::vector<SweepResult> sweep_dimensions(const DimensionSweep& sweep, const SweepOptions& options);

/// One algorithm line of the noise experiment.
struct NoiseVariant {
    std::string label;
    std::uint32_t lifetime = 10;
    /// 0 = no resampling. Otherwise k = max(1, ceil((sigma / resample_tolerance)^2)),
    /// the sample count that brings the averaged noise down to resample_tolerance.
    double resample_tolerance = 0.0;
};

std::size_t resample_count(double sigma, double tolerance);

struct NoiseSweep {
    std::size_t dimension = 10;
    std::vector<double> sigmas{0.0, 0.01, 0.05, 0.10, 0.25};
    OptimizerConfig base; // N = 15 by default
    std::vector<NoiseVariant> variants{
        {"lilde5", 5, 0.0}, {"lilde10", 10, 0.0}, {"lilde20", 20, 0.0}, {"de", unlimited_lifetime, 0.0},
        {"de_resampled", unlimited_lifetime, 0.01}};

    NoiseSweep();
};

std::vector<SweepResult> sweep_noise(const NoiseSweep& sweep, const SweepOptions& options);

struct PopulationSweep {
    std::size_t dimension = 5;
    std::vector<std::size_t> sizes{6, 8, 10, 12, 15, 25, 50};
    OptimizerConfig base;
};

/// Throws ConfigError up front if any N violates ceil(E*N) >= 3.
std::vector<SweepResult> sweep_popsize(const PopulationSweep& sweep, const SweepOptions& options);

/// Least-squares line y = a + b x.
struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    double r_squared = 0.0;
};

LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Fits log(y) = log(a) + p log(x) and returns p in `slope`.
LinearFit fit_power_law(std::span<const double> x, std::span<const double> y);

// Result files ---------------------------------------------------------------

inline constexpr const char* csv_header = "variable,mean_evals,std_evals,success_rate,runs";

std::string to_csv(const std::vector<SweepResult>& results);

nlohmann::json to_json(const TrialOutcome& trial);
nlohmann::json to_json(const SweepResult& result);
nlohmann::json config_to_json(const OptimizerConfig& config);
OptimizerConfig config_from_json(const nlohmann::json& j);
TrialOutcome trial_from_json(const nlohmann::json& j);
SweepResult result_from_json(const nlohmann::json& j);

/// Writes `<stem>.csv` and `<stem>.json`. The sidecar carries every trial, the
/// configs and seeds, `provenance`, and `complete` (false for interrupted sweeps).
void write_results(const std::vector<SweepResult>& results, const std::filesystem::path& stem,
    const nlohmann::json& provenance = {}, bool complete = true);

struct LoadedResults {
    std::vector<SweepResult> results;
    nlohmann::json provenance;
    bool complete = false;
};

LoadedResults load_results(const std::filesystem::path& json_path);

} // namespace lilde::bench

#endif
