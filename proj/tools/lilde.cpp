// Command-line front end: optimize, bench, validate.

#include <lilde/bench.hpp>
#include <lilde/engine.hpp>
#include <lilde/protocol.hpp>
#include <lilde/run_config.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace lilde;

namespace {

constexpr int exit_threshold = 0;
constexpr int exit_error = 1;
constexpr int exit_budget = 2;

std::atomic<bool> interrupted{false};

extern "C" void on_signal(int)
{
    interrupted.store(true);
}

void install_signal_handlers()
{
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
}

std::string num(double v)
{
    if (std::isnan(v))
        return "nan";
    return protocol::format_number(v);
}

void write_atomic(const fs::path& path, const std::string& content)
{
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out)
            throw std::runtime_error("error writing " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::optional<std::vector<double>> known_optimum(const RunConfig& c)
{
    if (!c.objective.drift.empty())
        return std::nullopt;
    switch (c.objective.kind) {
    case ObjectiveSpec::Kind::Ackley:
        return std::vector<double>(c.objective.dimension, 0.0);
    case ObjectiveSpec::Kind::SimulatedExperiment:
        return SimulatedExperiment().optimum();
    default:
        return std::nullopt;
    }
}

nlohmann::json space_to_json(const ParameterSpace& space)
{
    return {{"names", space.names()}, {"lower", space.lower()}, {"upper", space.upper()}};
}

const char* kind_name(ObjectiveSpec::Kind kind)
{
    switch (kind) {
    case ObjectiveSpec::Kind::Ackley:
        return "ackley";
    case ObjectiveSpec::Kind::SimulatedExperiment:
        return "simulated-experiment";
    case ObjectiveSpec::Kind::External:
        return "external";
    }
    return "?";
}

// optimize -----------------------------------------------------------------

struct OptimizeArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> out;
};

int cmd_optimize(const OptimizeArgs& args)
{
    RunConfig c = load_run_config(args.config);
    if (args.seed)
        c.optimizer.seed = *args.seed;
    if (args.workers) {
        if (*args.workers < 1)
            throw ConfigError("--workers must be >= 1");
        c.optimizer.workers = *args.workers;
    }
    if (args.out)
        c.output.dir = *args.out;

    const fs::path dir = output_directory(c.output);
    fs::create_directories(dir);
    const fs::path trace_path = dir / c.output.trace;
    const fs::path report_path = dir / c.output.report;

    std::ofstream trace_out(trace_path.string() + ".tmp", std::ios::trunc);
    if (!trace_out)
        throw std::runtime_error("cannot write " + trace_path.string());
    trace_out << "generation,best,mean,std,cum_evals\n";

    install_signal_handlers();
    Optimizer optimizer(c.space, c.optimizer, c.make_objective());
    const auto trace = optimizer.run([&](const Population&, const GenerationStats& s) {
        trace_out << s.generation << ',' << num(s.best) << ',' << num(s.mean) << ',' << num(s.stddev) << ','
                  << s.cumulative_evaluations << '\n';
        std::printf("gen %zu  best %.6g  mean %.6g  std/mean %.3g  evals %zu\n", s.generation, s.best, s.mean,
            s.ratio(), s.cumulative_evaluations);
        std::fflush(stdout);
        return interrupted.load();
    });
    trace_out.close();
    fs::rename(trace_path.string() + ".tmp", trace_path);

    nlohmann::json report;
    report["objective"] = kind_name(c.objective.kind);
    report["dimension"] = c.objective.dimension;
    report["space"] = space_to_json(c.space);
    report["config"] = bench::config_to_json(c.optimizer);
    report["config"]["workers"] = c.optimizer.workers;
    report["reason"] = to_string(trace.reason);
    report["generations"] = trace.generations.size();
    report["evaluations"] = trace.evaluations();
    report["refresh_evaluations"] = trace.refresh_evaluations();
    report["trace"] = trace_path.string();
    if (trace.best) {
        report["best"] = trace.best->x;
        report["best_fitness"] = trace.best->fitness;
        if (const auto opt = known_optimum(c)) {
            std::vector<double> fractions;
            for (std::size_t n = 0; n < opt->size(); ++n)
                fractions.push_back(std::abs(trace.best->x[n] - (*opt)[n]) / c.space.range(n));
            report["distance_fraction"] = fractions;
            report["within_5_percent"] = bench::success_check(trace.best->x, *opt, c.space, 0.05);
        }
    } else {
        report["best"] = nullptr;
        report["best_fitness"] = nullptr;
    }
    write_atomic(report_path, report.dump(2) + "\n");

    std::printf("%s after %zu evaluations; report %s\n", to_string(trace.reason).c_str(), trace.evaluations(),
        report_path.string().c_str());
    switch (trace.reason) {
    case TerminationReason::ThresholdMet:
        return exit_threshold;
    case TerminationReason::BudgetExhausted:
        return exit_budget;
    case TerminationReason::Stopped:
        std::fprintf(stderr, "lilde: interrupted\n");
        return exit_error;
    }
    return exit_error;
}

// bench --------------------------------------------------------------------

std::string wide_noise_csv(const std::vector<bench::SweepResult>& results)
{
    std::vector<std::string> labels;
    std::map<double, std::map<std::string, const bench::SweepResult*>> rows;
    for (const auto& r : results) {
        if (std::find(labels.begin(), labels.end(), r.label) == labels.end())
            labels.push_back(r.label);
        rows[r.variable][r.label] = &r;
    }
    std::ostringstream out;
    out << "sigma";
    for (const auto& l : labels)
        out << ',' << l << "_mean_evals," << l << "_std_evals," << l << "_success_rate";
    out << '\n';
    for (const auto& [sigma, cols] : rows) {
        out << num(sigma);
        for (const auto& l : labels) {
            const auto it = cols.find(l);
            if (it == cols.end())
                out << ",,,";
            else
                out << ',' << num(it->second->mean_evals) << ',' << num(it->second->std_evals) << ','
                    << num(it->second->success_rate);
        }
        out << '\n';
    }
    return out.str();
}

int cmd_bench(const std::string& which, const std::string& config_path, const std::optional<std::string>& out)
{
    RunConfig c = load_run_config(config_path);
    if (out)
        c.output.dir = *out;
    const fs::path dir = output_directory(c.output);
    fs::create_directories(dir);
    const fs::path stem = dir / c.bench.stem.value_or(which);

    install_signal_handlers();
    std::vector<bench::SweepResult> done;
    bench::SweepOptions options = c.bench.options;
    options.cancel = &interrupted;
    options.on_result = [&](const bench::SweepResult& r) {
        done.push_back(r);
        std::printf("%s %s=%g  N=%zu  mean %.6g  std %.6g  success %.3f  runs %zu\n", r.label.c_str(),
            which == "noise" ? "sigma" : (which == "dims" ? "d" : "N"), r.variable, r.config.population_size,
            r.mean_evals, r.std_evals, r.success_rate, r.runs);
        std::fflush(stdout);
    };

    nlohmann::json provenance{{"command", "bench " + which}, {"config_file", config_path},
        {"seed", options.seed}, {"runs", options.runs}, {"budget", options.budget}, {"fraction", options.fraction},
        {"base", bench::config_to_json(c.optimizer)}};

    bool complete = true;
    try {
        if (which == "dims") {
            bench::DimensionSweep sweep;
            sweep.base = c.optimizer;
            if (c.bench.dimensions)
                sweep.dimensions = *c.bench.dimensions;
            if (c.bench.population_candidates)
                sweep.population_candidates = *c.bench.population_candidates;
            if (c.bench.pre_runs)
                sweep.pre_runs = *c.bench.pre_runs;
            provenance["population_candidates"] = sweep.population_candidates;
            provenance["pre_runs"] = sweep.pre_runs;
            bench::sweep_dimensions(sweep, options);
        } else if (which == "noise") {
            bench::NoiseSweep sweep;
            const std::size_t default_n = sweep.base.population_size;
            sweep.base = c.optimizer;
            if (!c.population_given)
                sweep.base.population_size = default_n;
            sweep.base.validate();
            if (c.bench.sigmas)
                sweep.sigmas = *c.bench.sigmas;
            if (c.bench.noise_dimension)
                sweep.dimension = *c.bench.noise_dimension;
            provenance["dimension"] = sweep.dimension;
            bench::sweep_noise(sweep, options);
        } else if (which == "popsize") {
            bench::PopulationSweep sweep;
            sweep.base = c.optimizer;
            if (c.bench.sizes)
                sweep.sizes = *c.bench.sizes;
            if (c.bench.popsize_dimension)
                sweep.dimension = *c.bench.popsize_dimension;
            provenance["dimension"] = sweep.dimension;
            bench::sweep_popsize(sweep, options);
        } else {
            throw ConfigError("unknown bench '" + which + "' (expected dims, noise or popsize)");
        }
    } catch (const bench::Cancelled&) {
        complete = false;
    }

    bench::write_results(done, stem, provenance, complete);
    if (which == "noise") {
        std::map<std::string, std::vector<bench::SweepResult>> by_variant;
        for (const auto& r : done)
            by_variant[r.label].push_back(r);
        for (const auto& [label, rs] : by_variant)
            write_atomic(stem.string() + "_" + label + ".csv", bench::to_csv(rs));
        write_atomic(stem.string() + "_wide.csv", wide_noise_csv(done));
    }
    std::printf("wrote %s.csv and %s.json%s\n", stem.string().c_str(), stem.string().c_str(),
        complete ? "" : " (incomplete)");
    if (!complete) {
        std::fprintf(stderr, "lilde: interrupted; partial results kept\n");
        return exit_error;
    }
    return exit_threshold;
}

// validate -----------------------------------------------------------------

int cmd_validate(const std::string& config_path)
{
    const RunConfig c = load_run_config(config_path);
    const auto& o = c.optimizer;
    const std::size_t unit = c.objective.resample;
    std::printf("objective          %s (d = %zu)\n", kind_name(c.objective.kind), c.objective.dimension);
    std::printf("population N       %zu\n", o.population_size);
    std::printf("elite size         %zu (ceil(E*N), E = %g)\n", o.elite_size(), o.elite_fraction);
    std::printf("evaluation cost    %zu per trial vector\n", unit);
    std::printf("per generation     %zu evaluations", o.population_size * unit);
    if (o.lifetime != unlimited_lifetime)
        std::printf(" + about %.3g refresh (lifetime %u)\n", double(o.population_size * unit) / o.lifetime,
            o.lifetime);
    else
        std::printf(" (no refresh)\n");
    std::printf("initial population %zu evaluations\n", o.population_size * unit);
    std::printf("budget             %zu evaluations\n", o.max_evaluations);
    std::printf("output directory   %s\n", output_directory(c.output).string().c_str());
    std::printf("ok\n");
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"LILDE optimizer: differential evolution with limited individual lifetime"};
    app.require_subcommand(1);

    OptimizeArgs opt;
    auto* optimize = app.add_subcommand("optimize", "Run one optimization from a config file");
    optimize->add_option("config", opt.config, "JSON config file")->required();
    optimize->add_option("--seed", opt.seed, "Override the seed");
    optimize->add_option("--workers", opt.workers, "Parallel evaluations (1 = serial)");
    optimize->add_option("--out", opt.out, "Output directory (default: $LILDE_OUTPUT_DIR or .)");

    std::string bench_kind;
    std::string bench_config;
    std::optional<std::string> bench_out;
    auto* bench = app.add_subcommand("bench", "Run a benchmark sweep");
    bench->add_option("sweep", bench_kind, "dims, noise or popsize")
        ->required()
        ->check(CLI::IsMember({"dims", "noise", "popsize"}));
    bench->add_option("config", bench_config, "JSON config file")->required();
    bench->add_option("--out", bench_out, "Output directory (default: $LILDE_OUTPUT_DIR or .)");

    std::string validate_config;
    auto* validate = app.add_subcommand("validate", "Check a config file without evaluating anything");
    validate->add_option("config", validate_config, "JSON config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_error;
    }

    try {
        if (*optimize)
            return cmd_optimize(opt);
        if (*bench)
            return cmd_bench(bench_kind, bench_config, bench_out);
        if (*validate)
            return cmd_validate(validate_config);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "lilde: configuration error: %s\n", e.what());
        return exit_error;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "lilde: error: %s\n", e.what());
        return exit_error;
    }
    return exit_error;
}
