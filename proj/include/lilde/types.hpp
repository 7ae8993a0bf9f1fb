#ifndef LILDE_TYPES_HPP
#define LILDE_TYPES_HPP

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lilde {

/// Raised when a parameter space or optimizer configuration violates its invariants.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an objective is evaluated outside its domain.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Failure of a single objective evaluation. Transient failures may be retried once.
class EvaluationError : public std::runtime_error {
public:
    EvaluationError(const std::string& what, bool transient) : std::runtime_error(what), _transient(transient) {}

    bool transient() const { return _transient; }

private:
    bool _transient;
};

/// A generation could not be completed within the evaluation budget.
class BudgetExhausted : public std::runtime_error {
public:
    BudgetExhausted(std::size_t spent, std::size_t required, std::size_t remaining)
        : std::runtime_error("evaluation budget exhausted: generation needs " + std::to_string(required) + " evaluations, "
              + std::to_string(remaining) + " remain"),
          _spent(spent), _required(required), _remaining(remaining)
    {
    }

    /// Evaluations consumed by the aborted generation (always 0: the budget is checked up front).
    std::size_t evaluations_spent() const { return _spent; }
    std::size_t evaluations_required() const { return _required; }
    std::size_t evaluations_remaining() const { return _remaining; }

private:
    std::size_t _spent;
    std::size_t _required;
    std::size_t _remaining;
};

/// Box-bounded search space, one [lower, upper] pair per component.
class ParameterSpace {
public:
    ParameterSpace(std::vector<double> lower, std::vector<double> upper, std::vector<std::string> names = {});

    /// Same interval on every axis.
    static ParameterSpace uniform(std::size_t dimension, double lower, double upper);

    std::size_t dimension() const { return _lower.size(); }
    const std::vector<double>& lower() const { return _lower; }
    const std::vector<double>& upper() const { return _upper; }
    const std::vector<std::string>& names() const { return _names; }
    double lower(std::size_t n) const { return _lower[n]; }
    double upper(std::size_t n) const { return _upper[n]; }
    double range(std::size_t n) const { return _upper[n] - _lower[n]; }

    bool contains(const std::vector<double>& x) const;
    double clamp(std::size_t n, double value) const;

private:
    std::vector<double> _lower;
    std::vector<double> _upper;
    std::vector<std::string> _names;
};

struct Individual {
    std::vector<double> x;
    double fitness = std::numeric_limits<double>::quiet_NaN();
    /// Generations survived since the last evaluation.
    std::uint32_t age = 0;

    bool evaluated() const { return fitness == fitness; }
};

struct Population {
    std::vector<Individual> members;
    std::size_t generation = 0;

    std::size_t size() const { return members.size(); }
    Individual& operator[](std::size_t i) { return members[i]; }
    const Individual& operator[](std::size_t i) const { return members[i]; }
};

/// Lifetime value meaning "never re-evaluate" (plain DE).
inline constexpr std::uint32_t unlimited_lifetime = std::numeric_limits<std::uint32_t>::max();

struct OptimizerConfig {
    double amplification = 0.9;  // F
    double crossover = 0.9;      // CR
    double elite_fraction = 0.5; // E
    std::size_t population_size = 20;
    std::uint32_t lifetime = 10;
    double threshold = 0.005;    // T
    double mean_guard = 1e-9;    // epsilon
    std::size_t max_evaluations = 1'000'000;
    std::uint64_t seed = 1;
    /// Concurrent evaluation threads; 1 = serial.
    std::size_t workers = 1;

    /// ceil(E * N).
    std::size_t elite_size() const;

    /// Throws ConfigError naming the offending field and its legal range.
    void validate() const;
};

struct GenerationStats {
    std::size_t generation = 0;
    double best = 0.0;
    double mean = 0.0;
    /// Population standard deviation (divides by N).
    double stddev = 0.0;
    std::size_t cumulative_evaluations = 0;
    /// Re-evaluations spent on expired individuals while producing this generation.
    std::size_t refresh_evaluations = 0;
    std::vector<double> best_x;

    double ratio() const;
};

enum class TerminationReason { ThresholdMet, BudgetExhausted, Stopped };

std::string to_string(TerminationReason reason);

struct OptimizationTrace {
    std::vector<GenerationStats> generations;
    std::optional<Individual> best;
    TerminationReason reason = TerminationReason::BudgetExhausted;

    std::size_t evaluations() const { return generations.empty() ? 0 : generations.back().cumulative_evaluations; }
    std::size_t refresh_evaluations() const;
};

/// Fitness summary over a full generation.
GenerationStats compute_stats(const Population& population, std::size_t cumulative_evaluations);

} // namespace lilde

#endif
