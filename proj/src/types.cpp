#include <lilde/types.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lilde {

ParameterSpace::ParameterSpace(std::vector<double> lower, std::vector<double> upper, std::vector<std::string> names)
    : _lower(std::move(lower)), _upper(std::move(upper)), _names(std::move(names))
{
    if (_lower.empty())
        throw ConfigError("parameter space: dimension must be >= 1");
    if (_lower.size() != _upper.size())
        throw ConfigError("parameter space: lower and upper bounds differ in length");
    if (!_names.empty() && _names.size() != _lower.size())
        throw ConfigError("parameter space: names differ in length from bounds");
    for (std::size_t n = 0; n < _lower.size(); ++n) {
        if (!std::isfinite(_lower[n]) || !std::isfinite(_upper[n]) || !(_lower[n] < _upper[n])) {
            std::ostringstream msg;
            msg << "parameter space: component " << n;
            if (!_names.empty())
                msg << " (" << _names[n] << ")";
            msg << " needs finite lower < upper, got [" << _lower[n] << ", " << _upper[n] << "]";
            throw ConfigError(msg.str());
        }
    }
}

ParameterSpace ParameterSpace::uniform(std::size_t dimension, double lower, double upper)
{
    return ParameterSpace(std::vector<double>(dimension, lower), std::vector<double>(dimension, upper));
}

bool ParameterSpace::contains(const std::vector<double>& x) const
{
    if (x.size() != dimension())
        return false;
    for (std::size_t n = 0; n < x.size(); ++n)
        if (!(x[n] >= _lower[n] && x[n] <= _upper[n]))
            return false;
    return true;
}

double ParameterSpace::clamp(std::size_t n, double value) const
{
    return std::clamp(value, _lower[n], _upper[n]);
}

std::size_t OptimizerConfig::elite_size() const
{
    // Guard against E*N landing a rounding step above an integer (0.1 * 30).
    const double raw = elite_fraction * static_cast<double>(population_size);
    return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

void OptimizerConfig::validate() const
{
    auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
    if (!in_unit(amplification))
        throw ConfigError("F (amplification) must lie in (0, 1], got " + std::to_string(amplification));
    if (!in_unit(crossover))
        throw ConfigError("CR (crossover) must lie in (0, 1], got " + std::to_string(crossover));
    if (!in_unit(elite_fraction))
        throw ConfigError("E (elite_fraction) must lie in (0, 1], got " + std::to_string(elite_fraction));
    if (population_size < 4)
        throw ConfigError("N (population_size) must be >= 4, got " + std::to_string(population_size));
    if (elite_size() < 3)
        throw ConfigError("ceil(E*N) must be >= 3 to supply three distinct parents, got "
            + std::to_string(elite_size()) + " (E=" + std::to_string(elite_fraction)
            + ", N=" + std::to_string(population_size) + ")");
    if (lifetime < 1)
        throw ConfigError("lifetime must be >= 1 generation (or unlimited)");
    if (!(threshold >= 0.0))
        throw ConfigError("T (threshold) must be >= 0");
    if (!(mean_guard >= 0.0))
        throw ConfigError("epsilon (mean_guard) must be >= 0");
    if (max_evaluations < 1)
        throw ConfigError("max_evaluations must be >= 1");
    if (workers < 1)
        throw ConfigError("workers must be >= 1");
}

double GenerationStats::ratio() const
{
    return stddev / std::abs(mean);
}

std::string to_string(TerminationReason reason)
{
    switch (reason) {
    case TerminationReason::ThresholdMet:
        return "threshold-met";
    case TerminationReason::BudgetExhausted:
        return "budget-exhausted";
    case TerminationReason::Stopped:
        return "stopped";
    }
    return "unknown";
}

std::size_t OptimizationTrace::refresh_evaluations() const
{
    std::size_t total = 0;
    for (const auto& g : generations)
        total += g.refresh_evaluations;
    return total;
}

GenerationStats compute_stats(const Population& population, std::size_t cumulative_evaluations)
{
    GenerationStats stats;
    stats.generation = population.generation;
    stats.cumulative_evaluations = cumulative_evaluations;
    const std::size_t count = population.size();
    if (count == 0)
        return stats;

    std::size_t best = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double f = population[i].fitness;
        sum += f;
        if (f > population[best].fitness)
            best = i;
    }
    stats.mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (const auto& ind : population.members) {
        const double dev = ind.fitness - stats.mean;
        sq += dev * dev;
    }
    stats.stddev = std::sqrt(sq / static_cast<double>(count));
    stats.best = population[best].fitness;
    stats.best_x = population[best].x;
    return stats;
}

} // namespace lilde
