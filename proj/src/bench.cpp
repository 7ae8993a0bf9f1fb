#include <lilde/bench.hpp>
#include <lilde/protocol.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace lilde::bench {

namespace {

constexpr std::uint64_t tag_dims = 0x44494D53;
constexpr std::uint64_t tag_dims_pre = 0x44505245;
constexpr std::uint64_t tag_noise = 0x4E4F4953;
constexpr std::uint64_t tag_popsize = 0x504F5053;

void check_cancel(const SweepOptions& options)
{
    if (options.cancel && options.cancel->load())
        throw Cancelled();
}

double penalized_mean(const SweepResult& r, std::size_t budget)
{
    double sum = 0.0;
    for (const auto& t : r.trials)
        sum += t.converged ? static_cast<double>(t.evaluations) : static_cast<double>(budget);
    return r.trials.empty() ? std::numeric_limits<double>::infinity() : sum / static_cast<double>(r.trials.size());
}

// Every component spread below 1e-9 of its range: difference vectors can no
// longer move the population anywhere.
bool collapsed(const Population& population, const ParameterSpace& space)
{
    for (std::size_t n = 0; n < space.dimension(); ++n) {
        double lo = population[0].x[n], hi = lo;
        for (const auto& ind : population.members) {
            lo = std::min(lo, ind.x[n]);
            hi = std::max(hi, ind.x[n]);
        }
        if (hi - lo > 1e-9 * space.range(n))
            return false;
    }
    return true;
}

} // namespace

Problem ackley_problem(std::size_t dimension, double relative_sigma, std::size_t resample)
{
    Problem p{"ackley", ackley_space(dimension), std::vector<double>(dimension, 0.0), {}};
    p.make = [dimension, relative_sigma, resample] {
        ObjectiveSpec spec;
        spec.dimension = dimension;
        spec.relative_sigma = relative_sigma;
        spec.resample = resample;
        return wrap(std::make_shared<AckleyObjective>(dimension), spec);
    };
    return p;
}

Problem simulated_experiment_problem(double relative_sigma)
{
    auto core = std::make_shared<SimulatedExperiment>();
    Problem p{"simulated-experiment", core->space(), core->optimum(), {}};
    p.make = [relative_sigma] {
        ObjectiveSpec spec;
        spec.kind = ObjectiveSpec::Kind::SimulatedExperiment;
        spec.dimension = SimulatedExperiment::parameters;
        spec.relative_sigma = relative_sigma;
        return wrap(std::make_shared<SimulatedExperiment>(), spec);
    };
    return p;
}

bool success_check(std::span<const double> best, std::span<const double> optimum, const ParameterSpace& space,
    double fraction)
{
    if (best.size() != optimum.size() || best.size() != space.dimension())
        throw std::invalid_argument("success_check: dimension mismatch");
    for (std::size_t n = 0; n < best.size(); ++n)
        if (!(std::abs(best[n] - optimum[n]) <= fraction * space.range(n)))
            return false;
    return true;
}

TrialOutcome run_until_success(const Problem& problem, OptimizerConfig config, std::size_t budget, std::uint64_t seed,
    double fraction)
{
    config.seed = seed;
    config.max_evaluations = std::max<std::size_t>(budget, 1);
    config.threshold = 0.0;
    TrialOutcome outcome;
    outcome.seed = seed;
    if (budget == 0)
        return outcome;

    Optimizer optimizer(problem.space, config, problem.make());
    const auto trace = optimizer.run([&](const Population& population, const GenerationStats& stats) {
        if (success_check(stats.best_x, problem.optimum, problem.space, fraction)) {
            outcome.converged = true;
            return true;
        }
        return collapsed(population, problem.space);
    });

    outcome.evaluations = trace.evaluations();
    outcome.generations = trace.generations.empty() ? 0 : trace.generations.back().generation;
    outcome.refresh_evaluations = trace.refresh_evaluations();
    if (trace.best) {
        outcome.best = trace.best->x;
        outcome.distance_fraction.resize(outcome.best.size());
        for (std::size_t n = 0; n < outcome.best.size(); ++n)
            outcome.distance_fraction[n] = std::abs(outcome.best[n] - problem.optimum[n]) / problem.space.range(n);
    }
    return outcome;
}

void aggregate(SweepResult& result)
{
    result.runs = result.trials.size();
    std::size_t converged = 0;
    double sum = 0.0;
    for (const auto& t : result.trials) {
        if (t.converged) {
            ++converged;
            sum += static_cast<double>(t.evaluations);
        }
    }
    result.success_rate = result.runs ? static_cast<double>(converged) / static_cast<double>(result.runs) : 0.0;
    if (converged == 0) {
        result.mean_evals = std::numeric_limits<double>::quiet_NaN();
        result.std_evals = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    result.mean_evals = sum / static_cast<double>(converged);
    double sq = 0.0;
    for (const auto& t : result.trials) {
        if (t.converged) {
            const double dev = static_cast<double>(t.evaluations) - result.mean_evals;
            sq += dev * dev;
        }
    }
    result.std_evals = std::sqrt(sq / static_cast<double>(converged));
}

SweepResult run_trials(const Problem& problem, const OptimizerConfig& config, const SweepOptions& options,
    std::uint64_t stream, std::string label, double variable)
{
    config.validate();
    SweepResult result;
    result.label = std::move(label);
    result.variable = variable;
    result.config = config;
    result.trials.resize(options.runs);

    const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, options.runs));
    auto run_one = [&](std::size_t r) {
        result.trials[r] = run_until_success(problem, config, options.budget, derive_seed(options.seed, stream, r),
            options.fraction);
    };
    if (threads == 1) {
        for (std::size_t r = 0; r < options.runs; ++r) {
            check_cancel(options);
            run_one(r);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        std::exception_ptr error;
        std::mutex error_mutex;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t r = next++;
                    if (r >= options.runs || (options.cancel && options.cancel->load()))
                        return;
                    try {
                        run_one(r);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error)
                            error = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool)
            t.join();
        if (error)
            std::rethrow_exception(error);
        check_cancel(options);
    }
    aggregate(result);
    return result;
}

std::vector<SweepResult> sweep_dimensions(const DimensionSweep& sweep, const SweepOptions& options)
{
    // Candidates that cannot supply three elite parents are not eligible.
    std::vector<std::size_t> candidates;
    for (std::size_t n : sweep.population_candidates) {
        OptimizerConfig probe = sweep.base;
        probe.population_size = n;
        try {
            probe.validate();
            candidates.push_back(n);
        } catch (const ConfigError&) {
        }
    }
    if (candidates.empty())
        throw ConfigError("dimension sweep: no population size candidate satisfies ceil(E*N) >= 3");
    std::vector<SweepResult> out;
    for (std::size_t d : sweep.dimensions) {
        const Problem problem = ackley_problem(d);

        OptimizerConfig chosen = sweep.base;
        double best_score = std::numeric_limits<double>::infinity();
        SweepOptions pre = options;
        pre.runs = sweep.pre_runs;
        pre.on_result = nullptr;
        for (std::size_t n : candidates) {
            OptimizerConfig candidate = sweep.base;
            candidate.population_size = n;
            const auto r = run_trials(problem, candidate, pre, derive_seed(tag_dims_pre, d, n), "pre", double(d));
            const double score = penalized_mean(r, options.budget);
            if (score < best_score) {
                best_score = score;
                chosen = candidate;
            }
        }

        out.push_back(run_trials(problem, chosen, options, derive_seed(tag_dims, d), "lilde", double(d)));
        if (options.on_result)
            options.on_result(out.back());
    }
    return out;
}

std::size_t resample_count(double sigma, double tolerance)
{
    if (!(tolerance > 0.0) || sigma <= tolerance)
        return 1;
    const double ratio = sigma / tolerance;
    return static_cast<std::size_t>(std::ceil(ratio * ratio - 1e-9));
}

NoiseSweep::NoiseSweep()
{
    base.population_size = 15;
}

std::vector<SweepResult> sweep_noise(const NoiseSweep& sweep, const SweepOptions& options)
{
    std::vector<SweepResult> out;
    for (std::size_t v = 0; v < sweep.variants.size(); ++v) {
        const auto& variant = sweep.variants[v];
        for (std::size_t s = 0; s < sweep.sigmas.size(); ++s) {
            const double sigma = sweep.sigmas[s];
            const std::size_t k = resample_count(sigma, variant.resample_tolerance);
            OptimizerConfig config = sweep.base;
            config.lifetime = variant.lifetime;
            const Problem problem = ackley_problem(sweep.dimension, sigma, k);
            // The stream depends on the sigma index only, so variants share seeds.
            auto result = run_trials(problem, config, options, derive_seed(tag_noise, s), variant.label, sigma);
            result.resample = k;
            out.push_back(std::move(result));
            if (options.on_result)
                options.on_result(out.back());
        }
    }
    return out;
}

std::vector<SweepResult> sweep_popsize(const PopulationSweep& sweep, const SweepOptions& options)
{
    for (std::size_t n : sweep.sizes) {
        OptimizerConfig probe = sweep.base;
        probe.population_size = n;
        try {
            probe.validate();
        } catch (const ConfigError& e) {
            throw ConfigError("population size " + std::to_string(n) + ": " + e.what());
        }
    }
    const Problem problem = ackley_problem(sweep.dimension);
    std::vector<SweepResult> out;
    for (std::size_t n : sweep.sizes) {
        OptimizerConfig config = sweep.base;
        config.population_size = n;
        out.push_back(run_trials(problem, config, options, derive_seed(tag_popsize, sweep.dimension), "lilde", double(n)));
        if (options.on_result)
            options.on_result(out.back());
    }
    return out;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_line: need at least two paired points");
    const double count = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= count;
    my /= count;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

LinearFit fit_power_law(std::span<const double> x, std::span<const double> y)
{
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0 && y[i] > 0.0))
            throw std::invalid_argument("fit_power_law: values must be positive");
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    return fit_line(lx, ly);
}

std::string to_csv(const std::vector<SweepResult>& results)
{
    std::string out = csv_header;
    out += '\n';
    for (const auto& r : results) {
        out += protocol::format_number(r.variable);
        out += ',';
        out += protocol::format_number(r.mean_evals);
        out += ',';
        out += protocol::format_number(r.std_evals);
        out += ',';
        out += protocol::format_number(r.success_rate);
        out += ',';
        out += std::to_string(r.runs);
        out += '\n';
    }
    return out;
}

nlohmann::json config_to_json(const OptimizerConfig& c)
{
    nlohmann::json j;
    j["F"] = c.amplification;
    j["CR"] = c.crossover;
    j["E"] = c.elite_fraction;
    j["N"] = c.population_size;
    j["lifetime"] = c.lifetime == unlimited_lifetime ? nlohmann::json("unlimited") : nlohmann::json(c.lifetime);
    j["T"] = c.threshold;
    j["epsilon"] = c.mean_guard;
    j["max_evaluations"] = c.max_evaluations;
    j["seed"] = c.seed;
    return j;
}

OptimizerConfig config_from_json(const nlohmann::json& j)
{
    OptimizerConfig c;
    c.amplification = j.at("F").get<double>();
    c.crossover = j.at("CR").get<double>();
    c.elite_fraction = j.at("E").get<double>();
    c.population_size = j.at("N").get<std::size_t>();
    const auto& life = j.at("lifetime");
    c.lifetime = life.is_string() ? unlimited_lifetime : life.get<std::uint32_t>();
    c.threshold = j.at("T").get<double>();
    c.mean_guard = j.at("epsilon").get<double>();
    c.max_evaluations = j.at("max_evaluations").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

nlohmann::json to_json(const TrialOutcome& t)
{
    return nlohmann::json{{"seed", t.seed}, {"converged", t.converged}, {"evaluations", t.evaluations},
        {"generations", t.generations}, {"refresh_evaluations", t.refresh_evaluations}, {"best", t.best},
        {"distance_fraction", t.distance_fraction}};
}

TrialOutcome trial_from_json(const nlohmann::json& j)
{
    TrialOutcome t;
    t.seed = j.at("seed").get<std::uint64_t>();
    t.converged = j.at("converged").get<bool>();
    t.evaluations = j.at("evaluations").get<std::size_t>();
    t.generations = j.at("generations").get<std::size_t>();
    t.refresh_evaluations = j.value("refresh_evaluations", std::size_t{0});
    t.best = j.at("best").get<std::vector<double>>();
    t.distance_fraction = j.at("distance_fraction").get<std::vector<double>>();
    return t;
}

namespace {

// JSON has no NaN; aggregates without converged runs are stored as null.
nlohmann::json number_or_null(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_from(const nlohmann::json& j)
{
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

} // namespace

nlohmann::json to_json(const SweepResult& r)
{
    nlohmann::json trials = nlohmann::json::array();
    for (const auto& t : r.trials)
        trials.push_back(to_json(t));
    return nlohmann::json{{"label", r.label}, {"variable", r.variable}, {"mean_evals", number_or_null(r.mean_evals)},
        {"std_evals", number_or_null(r.std_evals)}, {"success_rate", r.success_rate}, {"runs", r.runs},
        {"resample", r.resample}, {"config", config_to_json(r.config)}, {"trials", trials}};
}

SweepResult result_from_json(const nlohmann::json& j)
{
    SweepResult r;
    r.label = j.at("label").get<std::string>();
    r.variable = j.at("variable").get<double>();
    r.mean_evals = number_from(j.at("mean_evals"));
    r.std_evals = number_from(j.at("std_evals"));
    r.success_rate = j.at("success_rate").get<double>();
    r.runs = j.at("runs").get<std::size_t>();
    r.resample = j.value("resample", std::size_t{1});
    r.config = config_from_json(j.at("config"));
    for (const auto& t : j.at("trials"))
        r.trials.push_back(trial_from_json(t));
    return r;
}

void write_results(const std::vector<SweepResult>& results, const std::filesystem::path& stem,
    const nlohmann::json& provenance, bool complete)
{
    if (stem.has_parent_path())
        std::filesystem::create_directories(stem.parent_path());

    auto write_file = [](const std::filesystem::path& path, const std::string& text) {
        const auto tmp = std::filesystem::path(path.string() + ".tmp");
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out)
                throw std::runtime_error("cannot open " + tmp.string() + " for writing");
            out << text;
            if (!out)
                throw std::runtime_error("write failed: " + tmp.string());
        }
        std::filesystem::rename(tmp, path);
    };

    nlohmann::json doc;
    doc["complete"] = complete;
    doc["provenance"] = provenance.is_null() ? nlohmann::json::object() : provenance;
    doc["results"] = nlohmann::json::array();
    for (const auto& r : results)
        doc["results"].push_back(to_json(r));

    write_file(std::filesystem::path(stem.string() + ".csv"), to_csv(results));
    write_file(std::filesystem::path(stem.string() + ".json"), doc.dump(2) + "\n");
}

LoadedResults load_results(const std::filesystem::path& json_path)
{
    std::ifstream in(json_path);
    if (!in)
        throw std::runtime_error("cannot open " + json_path.string());
    const auto doc = nlohmann::json::parse(in);
    LoadedResults loaded;
    loaded.complete = doc.at("complete").get<bool>();
    loaded.provenance = doc.value("provenance", nlohmann::json::object());
    for (const auto& r : doc.at("results"))
        loaded.results.push_back(result_from_json(r));
    return loaded;
}

} // namespace lilde::bench
