#ifndef LILDE_ENGINE_HPP
#define LILDE_ENGINE_HPP

#include <lilde/objective.hpp>
#include <lilde/rng.hpp>
#include <lilde/types.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace lilde {

/// Dispatches objective calls for one run: assigns each call its context,
/// counts budget units, retries transient failures once and optionally
/// fans a batch out over worker threads.
class Evaluator {
public:
    Evaluator(ObjectivePtr objective, std::uint64_t seed, std::size_t budget, std::size_t workers = 1);

    /// Evaluates one vector and charges cost() units.
    double evaluate(std::span<const double> x);

    /// Evaluates every vector in `points` (results in index order) and charges cost() units each.
    std::vector<double> evaluate_batch(const std::vector<const std::vector<double>*>& points);

    std::size_t cost() const { return _objective->cost(); }
    std::size_t used() const { return _used; }
    std::size_t budget() const { return _budget; }
    std::size_t remaining() const { return _used >= _budget ? 0 : _budget - _used; }
    std::size_t retries() const { return _retries; }

    const Objective& objective() const { return *_objective; }

private:
    double call(std::span<const double> x, const EvalContext& ctx);
    EvalContext context_for(std::uint64_t index) const;

    ObjectivePtr _objective;
    std::uint64_t _seed;
    std::size_t _budget;
    std::size_t _workers;
    std::size_t _used = 0;
    std::size_t _retries = 0;
};

/// N members drawn uniformly per component from [L^n, U^n]; fitness unset, generation 0.
Population init_population(const ParameterSpace& space, const OptimizerConfig& config, Rng& rng);

/// Indices of the ceil(E*N) fittest members, best first; ties go to the lower index.
std::vector<std::size_t> elite_indices(const Population& population, double elite_fraction);

/// Three pairwise-distinct population indices, all drawn from the elite set.
struct ParentDraw {
    std::size_t base;  // j
    std::size_t plus;  // k
    std::size_t minus; // l
};

ParentDraw draw_parents(std::span<const std::size_t> elite, Rng& rng);

/// x_j + F (x_k - x_l), each component clamped onto the box.
std::vector<double> mutate(const Population& population, const ParentDraw& parents, double amplification,
    const ParameterSpace& space);

std::vector<double> mutate(const Population& population, std::span<const std::size_t> elite, double amplification,
    const ParameterSpace& space, Rng& rng);

struct Crossover {
    std::vector<double> x;
    /// from_mutant[n] != 0 when component n was copied from the mutant.
    std::vector<std::uint8_t> from_mutant;
    std::size_t forced = 0;
};

/// Binomial crossover with one forced mutant component.
Crossover recombine(std::span<const double> parent, std::span<const double> mutant, double crossover, Rng& rng);

/// Greedy survivor selection; the trial wins ties.
const Individual& select(const Individual& parent, const Individual& trial);

/// Re-measures every member with age >= lifetime. Fitness is replaced, age reset.
/// Returns the budget units spent.
std::size_t refresh_expired(Population& population, std::uint32_t lifetime, Evaluator& evaluator);

/// Budget units refresh_expired would spend.
std::size_t expired_count(const Population& population, std::uint32_t lifetime);

enum class Decision { Continue, Terminate, GuardInapplicable };

/// std/|mean| < T terminates; |mean| < epsilon makes the ratio inapplicable.
Decision check_termination(const GenerationStats& stats, double threshold, double mean_guard);

/// What one step drew, for inspection.
struct StepRecord {
    std::vector<std::size_t> elite;
    std::vector<ParentDraw> parents;
    std::vector<Crossover> trials;
    std::vector<double> trial_fitness;
    std::size_t refreshed = 0;
};

/// One generation: refresh, rank, build trials, evaluate, select, age, summarize.
/// Throws BudgetExhausted before spending anything if the generation does not fit.
GenerationStats step(Population& population, const OptimizerConfig& config, const ParameterSpace& space,
    Evaluator& evaluator, Rng& rng, StepRecord* record = nullptr);

/// Index of the fittest member (lowest index on ties).
std::size_t best_index(const Population& population);

/// Drives a full optimization. Holds the run's RNG, evaluator and population.
class Optimizer {
public:
    /// Called after each completed generation; return true to stop the run.
    using Observer = std::function<bool(const Population&, const GenerationStats&)>;

    Optimizer(ParameterSpace space, OptimizerConfig config, ObjectivePtr objective);

    /// Draws and evaluates generation 0. Returns false if the budget cannot cover it.
    bool initialize();

    /// Advances one generation. Throws BudgetExhausted when it does not fit.
    const GenerationStats& advance(StepRecord* record = nullptr);

    OptimizationTrace run(const Observer& observer = {});

    const Population& population() const { return _population; }
    const OptimizationTrace& trace() const { return _trace; }
    const Evaluator& evaluator() const { return _evaluator; }
    const ParameterSpace& space() const { return _space; }
    const OptimizerConfig& config() const { return _config; }

private:
    ParameterSpace _space;
    OptimizerConfig _config;
    Rng _rng;
    Evaluator _evaluator;
    Population _population;
    OptimizationTrace _trace;
    bool _initialized = false;
};

OptimizationTrace run(const ParameterSpace& space, const OptimizerConfig& config, ObjectivePtr objective);

} // namespace lilde

#endif
