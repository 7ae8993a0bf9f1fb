#include <doctest.h>

#include <lilde/bench.hpp>
#include <lilde/run_config.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#ifndef LILDE_CLI
#error "LILDE_CLI must point at the lilde binary"
#endif

using namespace lilde;
namespace fs = std::filesystem;

namespace {

struct Result {
    int status = -1;
    std::string output;
};

Result run_cli(const std::string& args)
{
    Result r;
    const std::string cmd = std::string(LILDE_CLI) + " " + args + " 2>&1";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    while (std::fgets(buf, sizeof(buf), pipe))
        r.output += buf;
    const int raw = ::pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

fs::path scratch_dir(const std::string& name)
{
    auto dir = fs::temp_directory_path() / ("lilde_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_file(const fs::path& path, const std::string& content)
{
    std::ofstream(path) << content;
    return path;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string config_error(const std::string& text)
{
    try {
        parse_run_config_text(text, "cfg");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

std::size_t count_lines(const std::string& s)
{
    std::size_t n = 0;
    for (char c : s)
        n += c == '\n';
    return n;
}

} // namespace

TEST_CASE("config parsing")
{
    SUBCASE("defaults")
    {
        const auto c = parse_run_config_text("{}");
        CHECK(c.objective.kind == ObjectiveSpec::Kind::Ackley);
        CHECK(c.space.dimension() == 2);
        CHECK(c.optimizer.amplification == 0.9);
        CHECK(c.optimizer.crossover == 0.9);
        CHECK(c.optimizer.elite_fraction == 0.5);
        CHECK(c.optimizer.lifetime == 10);
        CHECK_FALSE(c.population_given);
    }
    SUBCASE("full file")
    {
        const auto c = parse_run_config_text(R"({
            "objective": "ackley", "dimension": 3, "noise": 0.05, "resample": 4,
            "F": 0.8, "CR": 0.7, "E": 0.3, "N": 12, "lifetime": "unlimited",
            "T": 0.02, "epsilon": 1e-6, "budget": 5000, "seed": 99, "workers": 2,
            "output": {"dir": "x", "trace": "t.csv", "report": "r.json"},
            "bench": {"runs": 3, "budget": 100, "dimensions": [1, 2], "sigmas": [0, 0.1], "stem": "s"}
        })");
        CHECK(c.space.dimension() == 3);
        CHECK(c.objective.relative_sigma == 0.05);
        CHECK(c.objective.resample == 4);
        CHECK(c.optimizer.lifetime == unlimited_lifetime);
        CHECK(c.optimizer.population_size == 12);
        CHECK(c.optimizer.max_evaluations == 5000);
        CHECK(c.optimizer.seed == 99);
        CHECK(c.optimizer.workers == 2);
        CHECK(c.output.dir.value() == "x");
        CHECK(c.output.trace == "t.csv");
        CHECK(c.bench.options.runs == 3);
        CHECK(c.bench.dimensions.value() == std::vector<std::size_t>{1, 2});
        CHECK(c.bench.stem.value() == "s");
        CHECK(c.population_given);
        CHECK(c.make_objective()->cost() == 4);
    }
    SUBCASE("simulated experiment")
    {
        const auto c = parse_run_config_text(R"({"objective": "simulated-experiment", "N": 84})");
        CHECK(c.space.dimension() == 21);
        CHECK(c.space.lower()[0] == 0.0);
        CHECK(c.space.upper()[0] == 10.0);
        CHECK(config_error(R"({"objective": "simulated-experiment", "dimension": 3})").find("21") != std::string::npos);
    }
    SUBCASE("external")
    {
        const auto c = parse_run_config_text(R"({"objective": "external", "command": "./eval",
            "space": {"names": ["a", "b"], "lower": [0, -1], "upper": [1, 1]}, "timeout": 0.5, "sessions": 2})");
        CHECK(c.objective.dimension == 2);
        CHECK(c.command == "./eval");
        CHECK(c.timeout.count() == 500);
        CHECK(c.sessions == 2);
        CHECK(config_error(R"({"objective": "external", "space": {"lower": [0], "upper": [1]}})").find("command")
            != std::string::npos);
        CHECK(config_error(R"({"objective": "external", "command": "x"})").find("space") != std::string::npos);
        CHECK(config_error(R"({"command": "x"})").find("command") != std::string::npos);
    }
    SUBCASE("errors name the field")
    {
        auto msg = config_error(R"({"F": 1.5})");
        CHECK(msg.find("F (amplification)") != std::string::npos);
        CHECK(msg.find("(0, 1]") != std::string::npos);
        CHECK(config_error(R"({"N": 4})").find("ceil(E*N)") != std::string::npos);
        CHECK(config_error(R"({"CR": "high"})").find("field 'CR'") != std::string::npos);
        CHECK(config_error(R"({"N": -3})").find("field 'N'") != std::string::npos);
        CHECK(config_error(R"({"N": 2.5})").find("field 'N'") != std::string::npos);
        CHECK(config_error(R"({"lifetime": "forever"})").find("field 'lifetime'") != std::string::npos);
        CHECK(config_error(R"({"lifetime": 0})").find("lifetime") != std::string::npos);
        CHECK(config_error(R"({"objective": "sphere"})").find("field 'objective'") != std::string::npos);
        CHECK(config_error(R"({"noise": -0.1})").find("noise") != std::string::npos);
        CHECK(config_error(R"({"bench": {"runs": 0}})").find("field 'bench.runs'") != std::string::npos);
    }
    SUBCASE("unknown keys are rejected")
    {
        CHECK(config_error(R"({"Fx": 0.9})").find("unknown key 'Fx'") != std::string::npos);
        CHECK(config_error(R"({"output": {"folder": "x"}})").find("unknown key 'folder' in output")
            != std::string::npos);
        CHECK(config_error(R"({"bench": {"run": 3}})").find("unknown key 'run' in bench") != std::string::npos);
    }
    SUBCASE("bounds name the component")
    {
        const auto msg = config_error(R"({"objective": "external", "command": "x",
            "space": {"names": ["a", "current"], "lower": [0, 2], "upper": [1, 1]}})");
        CHECK(msg.find("component 1 (current)") != std::string::npos);
        CHECK(config_error(R"({"objective": "external", "command": "x", "dimension": 3,
            "space": {"lower": [0], "upper": [1]}})")
                  .find("dimension") != std::string::npos);
    }
    SUBCASE("syntax errors carry line and column")
    {
        const auto msg = config_error("{\n  \"F\": 0.9,\n  \"N\": 20\n  \"E\": 0.5\n}");
        CHECK(msg.rfind("cfg:4:", 0) == 0);
    }
    SUBCASE("missing file")
    {
        CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), ConfigError);
    }
}

TEST_CASE("output directory resolution")
{
    OutputSettings o;
    ::unsetenv(output_dir_variable);
    CHECK(output_directory(o) == ".");
    ::setenv(output_dir_variable, "/tmp/from-env", 1);
    CHECK(output_directory(o) == "/tmp/from-env");
    o.dir = "explicit";
    CHECK(output_directory(o) == "explicit");
    ::unsetenv(output_dir_variable);
}

TEST_CASE("cli validate")
{
    const auto dir = scratch_dir("validate");
    auto r = run_cli("validate " + write_file(dir / "ok.json", R"({"N": 20, "E": 0.5})").string());
    CHECK(r.status == 0);
    CHECK(r.output.find("elite size         10") != std::string::npos);
    CHECK(r.output.find("per generation     20 evaluations") != std::string::npos);

    r = run_cli("validate " + write_file(dir / "en.json", R"({"N": 5, "E": 0.4})").string());
    CHECK(r.status == 1);
    r = run_cli("validate " + write_file(dir / "f.json", R"({"F": 1.5})").string());
    CHECK(r.status == 1);
    CHECK(r.output.find("F (amplification) must lie in (0, 1]") != std::string::npos);
    r = run_cli("validate " + write_file(dir / "b.json", R"({"objective": "external", "command": "x",
        "space": {"lower": [0, 3], "upper": [1, 2]}})")
                                  .string());
    CHECK(r.status == 1);
    CHECK(r.output.find("component 1") != std::string::npos);
    r = run_cli("validate " + (dir / "missing.json").string());
    CHECK(r.status == 1);
    r = run_cli("frobnicate");
    CHECK(r.status == 1);
}

TEST_CASE("cli optimize")
{
    const auto dir = scratch_dir("optimize");
    const auto cfg = write_file(dir / "ackley.json",
        R"({"objective": "ackley", "dimension": 2, "F": 0.9, "CR": 0.9, "E": 0.5, "N": 20, "T": 0.005, "seed": 1})");

    auto r = run_cli("optimize " + cfg.string() + " --out " + (dir / "a").string());
    CHECK(r.status == 0);
    CHECK(r.output.find("gen 0 ") != std::string::npos);
    const auto trace = slurp(dir / "a" / "trace.csv");
    CHECK(trace.rfind("generation,best,mean,std,cum_evals\n", 0) == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
    CHECK(report.at("reason") == "threshold-met");
    CHECK(report.at("within_5_percent") == true);
    CHECK(count_lines(trace) == report.at("generations").get<std::size_t>() + 1);

    // Non-decreasing best column for a noiseless objective.
    std::istringstream rows(trace);
    std::string row;
    std::getline(rows, row);
    double previous = -1e300;
    while (std::getline(rows, row)) {
        const auto a = row.find(',');
        const double best = std::stod(row.substr(a + 1, row.find(',', a + 1) - a - 1));
        CHECK(best >= previous);
        previous = best;
    }

    SUBCASE("seed override changes the trace")
    {
        r = run_cli("optimize " + cfg.string() + " --seed 2 --out " + (dir / "b").string());
        CHECK((r.status == 0 || r.status == 2));
        CHECK(slurp(dir / "b" / "trace.csv") != trace);
        r = run_cli("optimize " + cfg.string() + " --out " + (dir / "c").string());
        CHECK(slurp(dir / "c" / "trace.csv") == trace);
    }
    SUBCASE("workers do not change results")
    {
        r = run_cli("optimize " + cfg.string() + " --workers 4 --out " + (dir / "w").string());
        CHECK(r.status == 0);
        CHECK(slurp(dir / "w" / "trace.csv") == trace);
    }
    SUBCASE("budget exhaustion exits 2")
    {
        const auto tight = write_file(dir / "tight.json", R"({"dimension": 5, "N": 10, "T": 0.0, "budget": 200})");
        r = run_cli("optimize " + tight.string() + " --out " + (dir / "t").string());
        CHECK(r.status == 2);
        CHECK(nlohmann::json::parse(slurp(dir / "t" / "report.json")).at("reason") == "budget-exhausted");
    }
    SUBCASE("environment variable sets the output directory")
    {
        const auto env_dir = dir / "env";
        const std::string cmd = std::string(output_dir_variable) + "=" + env_dir.string() + " " + LILDE_CLI
            + " optimize " + cfg.string() + " > /dev/null";
        CHECK(std::system(cmd.c_str()) == 0);
        CHECK(fs::exists(env_dir / "trace.csv"));
        CHECK(fs::exists(env_dir / "report.json"));
    }
    SUBCASE("bad config exits 1")
    {
        r = run_cli("optimize " + write_file(dir / "bad.json", R"({"F": 1.5})").string());
        CHECK(r.status == 1);
        CHECK(r.output.find("F (amplification)") != std::string::npos);
    }
}

TEST_CASE("cli bench")
{
    const auto dir = scratch_dir("bench");
    SUBCASE("dims")
    {
        const auto cfg = write_file(dir / "dims.json", R"({"bench": {"runs": 3, "budget": 20000,
            "dimensions": [1, 2, 3], "population_candidates": [6, 10], "pre_runs": 2}})");
        const auto r = run_cli("bench dims " + cfg.string() + " --out " + dir.string());
        CHECK(r.status == 0);
        const auto csv = slurp(dir / "dims.csv");
        CHECK(count_lines(csv) == 4);
        CHECK(csv.rfind(bench::csv_header, 0) == 0);
        const auto loaded = bench::load_results(dir / "dims.json");
        CHECK(loaded.complete);
        CHECK(loaded.results.size() == 3);
        CHECK(loaded.provenance.at("command") == "bench dims");
    }
    SUBCASE("noise")
    {
        const auto cfg = write_file(dir / "noise.json", R"({"bench": {"runs": 2, "budget": 5000,
            "sigmas": [0, 0.05], "noise_dimension": 2}})");
        const auto r = run_cli("bench noise " + cfg.string() + " --out " + dir.string());
        CHECK(r.status == 0);
        const auto wide = slurp(dir / "noise_wide.csv");
        for (const char* label : {"lilde5", "lilde10", "lilde20", "de", "de_resampled"}) {
            CHECK(wide.find(std::string(label) + "_mean_evals") != std::string::npos);
            CHECK(fs::exists(dir / ("noise_" + std::string(label) + ".csv")));
        }
        CHECK(count_lines(wide) == 3);
        CHECK(bench::load_results(dir / "noise.json").results.size() == 10);
    }
    SUBCASE("popsize rejects an invalid N")
    {
        const auto cfg = write_file(dir / "pop.json", R"({"bench": {"runs": 2, "sizes": [4, 6]}})");
        const auto r = run_cli("bench popsize " + cfg.string() + " --out " + dir.string());
        CHECK(r.status == 1);
        CHECK(r.output.find("population size 4") != std::string::npos);
    }
    SUBCASE("interrupted sweep keeps a partial sidecar")
    {
        const auto cfg = write_file(dir / "long.json", R"({"bench": {"runs": 50, "budget": 2000000,
            "dimensions": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10], "population_candidates": [6], "pre_runs": 1,
            "stem": "partial"}})");
        const std::string cmd = "timeout --preserve-status -s INT 2 " + std::string(LILDE_CLI) + " bench dims "
            + cfg.string() + " --out " + dir.string() + " > /dev/null 2>&1";
        const int raw = std::system(cmd.c_str());
        CHECK(WEXITSTATUS(raw) == 1);
        const auto loaded = bench::load_results(dir / "partial.json");
        CHECK_FALSE(loaded.complete);
        CHECK(loaded.results.size() < 10);
    }
}
