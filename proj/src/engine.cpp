#include <lilde/engine.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace lilde {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t tag_engine = 0x454E47;
constexpr std::uint64_t tag_eval = 0x4556414C;

} // namespace

Evaluator::Evaluator(ObjectivePtr objective, std::uint64_t seed, std::size_t budget, std::size_t workers)
    : _objective(std::move(objective)), _seed(seed), _budget(budget), _workers(std::max<std::size_t>(workers, 1))
{
    if (!_objective)
        throw ConfigError("evaluator: objective is null");
    if (_objective->cost() < 1)
        throw ConfigError("evaluator: objective cost must be >= 1");
}

EvalContext Evaluator::context_for(std::uint64_t index) const
{
    return EvalContext{index, derive_seed(_seed, tag_eval, index)};
}

double Evaluator::call(std::span<const double> x, const EvalContext& ctx)
{
    try {
        return _objective->evaluate(x, ctx);
    } catch (const EvaluationError& e) {
        if (!e.transient())
            throw;
    }
    // One retry for transient failures; a second failure propagates.
    return _objective->evaluate(x, ctx);
}

double Evaluator::evaluate(std::span<const double> x)
{
    const double value = call(x, context_for(_used));
    _used += cost();
    return value;
}

std::vector<double> Evaluator::evaluate_batch(const std::vector<const std::vector<double>*>& points)
{
    const std::size_t count = points.size();
    std::vector<double> values(count, 0.0);
    const std::size_t unit = cost();
    const std::size_t workers = _objective->concurrent() ? std::min(_workers, count) : 1;

    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            values[i] = call(*points[i], context_for(_used + i * unit));
    } else {
        std::vector<std::exception_ptr> errors(count);
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < count; i += workers) {
                    try {
                        values[i] = call(*points[i], context_for(_used + i * unit));
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool)
            t.join();
        for (const auto& err : errors)
            if (err)
                std::rethrow_exception(err);
    }
    _used += count * unit;
    return values;
}

Population init_population(const ParameterSpace& space, const OptimizerConfig& config, Rng& rng)
{
    config.validate();
    Population population;
    population.generation = 0;
    population.members.resize(config.population_size);
    for (auto& ind : population.members) {
        ind.x.resize(space.dimension());
        for (std::size_t n = 0; n < space.dimension(); ++n)
            ind.x[n] = space.clamp(n, space.lower(n) + uniform_01(rng) * space.range(n));
    }
    return population;
}

std::vector<std::size_t> elite_indices(const Population& population, double elite_fraction)
{
    OptimizerConfig probe;
    probe.elite_fraction = elite_fraction;
    probe.population_size = population.size();
    const std::size_t size = probe.elite_size();
    if (!(elite_fraction > 0.0 && elite_fraction <= 1.0))
        throw ConfigError("E (elite_fraction) must lie in (0, 1]");
    if (size < 3)
        throw ConfigError("ceil(E*N) must be >= 3, got " + std::to_string(size));

    std::vector<std::size_t> order(population.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
        [&](std::size_t a, std::size_t b) { return population[a].fitness > population[b].fitness; });
    order.resize(size);
    return order;
}

ParentDraw draw_parents(std::span<const std::size_t> elite, Rng& rng)
{
    if (elite.size() < 3)
        throw ConfigError("mutation needs at least 3 elite members, got " + std::to_string(elite.size()));
    const std::uint64_t m = elite.size();
    const std::uint64_t a = uniform_index(rng, m);
    std::uint64_t b = uniform_index(rng, m - 1);
    if (b >= a)
        ++b;
    std::uint64_t c = uniform_index(rng, m - 2);
    const std::uint64_t lo = std::min(a, b);
    const std::uint64_t hi = std::max(a, b);
    if (c >= lo)
        ++c;
    if (c >= hi)
        ++c;
    return ParentDraw{elite[a], elite[b], elite[c]};
}

std::vector<double> mutate(const Population& population, const ParentDraw& parents, double amplification,
    const ParameterSpace& space)
{
    const auto& xj = population[parents.base].x;
    const auto& xk = population[parents.plus].x;
    const auto& xl = population[parents.minus].x;
    std::vector<double> v(space.dimension());
    for (std::size_t n = 0; n < v.size(); ++n)
        v[n] = space.clamp(n, xj[n] + amplification * (xk[n] - xl[n]));
    return v;
}

std::vector<double> mutate(const Population& population, std::span<const std::size_t> elite, double amplification,
    const ParameterSpace& space, Rng& rng)
{
    return mutate(population, draw_parents(elite, rng), amplification, space);
}

Crossover recombine(std::span<const double> parent, std::span<const double> mutant, double crossover, Rng& rng)
{
    if (parent.size() != mutant.size() || parent.empty())
        throw std::invalid_argument("recombine: parent and mutant dimensions differ");
    const std::size_t d = parent.size();
    Crossover out;
    out.x.resize(d);
    out.from_mutant.assign(d, 0);
    out.forced = uniform_index(rng, d);
    for (std::size_t n = 0; n < d; ++n) {
        const double draw = uniform_open_closed(rng);
        const bool take = draw <= crossover || n == out.forced;
        out.from_mutant[n] = take ? 1 : 0;
        out.x[n] = take ? mutant[n] : parent[n];
    }
    return out;
}

const Individual& select(const Individual& parent, const Individual& trial)
{
    return trial.fitness >= parent.fitness ? trial : parent;
}

std::size_t expired_count(const Population& population, std::uint32_t lifetime)
{
    if (lifetime == unlimited_lifetime)
        return 0;
    return static_cast<std::size_t>(std::count_if(population.members.begin(), population.members.end(),
        [lifetime](const Individual& ind) { return ind.age >= lifetime; }));
}

std::size_t refresh_expired(Population& population, std::uint32_t lifetime, Evaluator& evaluator)
{
    if (lifetime == unlimited_lifetime)
        return 0;
    std::vector<std::size_t> expired;
    for (std::size_t i = 0; i < population.size(); ++i)
        if (population[i].age >= lifetime)
            expired.push_back(i);
    if (expired.empty())
        return 0;

    std::vector<const std::vector<double>*> points;
    points.reserve(expired.size());
    for (auto i : expired)
        points.push_back(&population[i].x);
    const std::size_t before = evaluator.used();
    const auto values = evaluator.evaluate_batch(points);
    for (std::size_t e = 0; e < expired.size(); ++e) {
        population[expired[e]].fitness = values[e];
        population[expired[e]].age = 0;
    }
    return evaluator.used() - before;
}

Decision check_termination(const GenerationStats& stats, double threshold, double mean_guard)
{
    const double magnitude = std::abs(stats.mean);
    if (magnitude < mean_guard || magnitude == 0.0)
        return Decision::GuardInapplicable;
    return stats.stddev / magnitude < threshold ? Decision::Terminate : Decision::Continue;
}

std::size_t best_index(const Population& population)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < population.size(); ++i)
        if (population[i].fitness > population[best].fitness)
            best = i;
    return best;
}

GenerationStats step(Population& population, const OptimizerConfig& config, const ParameterSpace& space,
    Evaluator& evaluator, Rng& rng, StepRecord* record)
{
    const std::size_t count = population.size();
    const std::size_t required = (expired_count(population, config.lifetime) + count) * evaluator.cost();
    if (required > evaluator.remaining())
        throw BudgetExhausted(0, required, evaluator.remaining());

    const std::size_t refreshed = refresh_expired(population, config.lifetime, evaluator);
    const auto elite = elite_indices(population, config.elite_fraction);

    std::vector<Crossover> trials;
    trials.reserve(count);
    std::vector<ParentDraw> parents;
    parents.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        parents.push_back(draw_parents(elite, rng));
        const auto mutant = mutate(population, parents.back(), config.amplification, space);
        trials.push_back(recombine(population[i].x, mutant, config.crossover, rng));
    }

    std::vector<const std::vector<double>*> points;
    points.reserve(count);
    for (const auto& t : trials)
        points.push_back(&t.x);
    const auto values = evaluator.evaluate_batch(points);

    for (std::size_t i = 0; i < count; ++i) {
        Individual& parent = population[i];
        if (values[i] >= parent.fitness) {
            parent.x = trials[i].x;
            parent.fitness = values[i];
            parent.age = 0;
        } else if (parent.age < unlimited_lifetime) {
            ++parent.age;
        }
    }
    ++population.generation;

    if (record) {
        record->elite = elite;
        record->parents = std::move(parents);
        record->trials = std::move(trials);
        record->trial_fitness = values;
        record->refreshed = refreshed;
    }

    GenerationStats stats = compute_stats(population, evaluator.used());
    stats.refresh_evaluations = refreshed;
    return stats;
}

Optimizer::Optimizer(ParameterSpace space, OptimizerConfig config, ObjectivePtr objective)
    : _space(std::move(space)), _config(config), _rng(derive_seed(config.seed, tag_engine)),
      _evaluator(std::move(objective), config.seed, config.max_evaluations, config.workers)
{
    _config.validate();
    if (_evaluator.objective().dimension() != _space.dimension())
        throw ConfigError("objective dimension " + std::to_string(_evaluator.objective().dimension())
            + " does not match parameter space dimension " + std::to_string(_space.dimension()));
}

bool Optimizer::initialize()
{
    _population = init_population(_space, _config, _rng);
    _trace = OptimizationTrace{};
    _initialized = true;
    if (_config.population_size * _evaluator.cost() > _evaluator.remaining()) {
        _population.members.clear();
        return false;
    }
    std::vector<const std::vector<double>*> points;
    for (const auto& ind : _population.members)
        points.push_back(&ind.x);
    const auto values = _evaluator.evaluate_batch(points);
    for (std::size_t i = 0; i < values.size(); ++i) {
        _population[i].fitness = values[i];
        _population[i].age = 0;
    }
    _trace.generations.push_back(compute_stats(_population, _evaluator.used()));
    _trace.best = _population[best_index(_population)];
    return true;
}

const GenerationStats& Optimizer::advance(StepRecord* record)
{
    if (!_initialized || _population.members.empty())
        throw std::logic_error("Optimizer::advance called before a successful initialize()");
    _trace.generations.push_back(step(_population, _config, _space, _evaluator, _rng, record));
    _trace.best = _population[best_index(_population)];
    return _trace.generations.back();
}

OptimizationTrace Optimizer::run(const Observer& observer)
{
    if (!initialize()) {
        _trace.reason = TerminationReason::BudgetExhausted;
        return _trace;
    }
    for (;;) {
        const auto& stats = _trace.generations.back();
        if (observer && observer(_population, stats)) {
            _trace.reason = TerminationReason::Stopped;
            break;
        }
        if (check_termination(stats, _config.threshold, _config.mean_guard) == Decision::Terminate) {
            _trace.reason = TerminationReason::ThresholdMet;
            break;
        }
        try {
            advance();
        } catch (const BudgetExhausted&) {
            _trace.reason = TerminationReason::BudgetExhausted;
            break;
        }
    }
    return _trace;
}

OptimizationTrace run(const ParameterSpace& space, const OptimizerConfig& config, ObjectivePtr objective)
{
    Optimizer optimizer(space, config, std::move(objective));
    return optimizer.run();
}

} // namespace lilde
