#include <lilde/run_config.hpp>
#include <lilde/protocol.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace lilde {

namespace {

using nlohmann::json;

// Typed access to one JSON object with unknown-key detection.
class Fields {
public:
    Fields(const json& object, std::string where, std::string origin)
        : _object(object), _where(std::move(where)), _origin(std::move(origin))
    {
        if (!_object.is_object())
            fail(_where, "expected a JSON object");
    }

    bool has(const std::string& key)
    {
        _seen.insert(key);
        return _object.contains(key);
    }

    const json& raw(const std::string& key) const { return _object.at(key); }

    double number(const std::string& key, double fallback)
    {
        if (!has(key))
            return fallback;
        const auto& v = raw(key);
        if (!v.is_number())
            fail(key, "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d))
            fail(key, "must be finite");
        return d;
    }

    std::uint64_t count(const std::string& key, std::uint64_t fallback)
    {
        if (!has(key))
            return fallback;
        return as_count(raw(key), key);
    }

    std::string text(const std::string& key, const std::string& fallback)
    {
        if (!has(key))
            return fallback;
        const auto& v = raw(key);
        if (!v.is_string())
            fail(key, "expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key)
    {
        const auto& v = raw(key);
        if (!v.is_array())
            fail(key, "expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number())
                fail(key, "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::vector<std::size_t> counts(const std::string& key)
    {
        const auto& v = raw(key);
        if (!v.is_array())
            fail(key, "expected an array of non-negative integers");
        std::vector<std::size_t> out;
        for (const auto& e : v)
            out.push_back(static_cast<std::size_t>(as_count(e, key)));
        return out;
    }

    void reject_unknown() const
    {
        for (const auto& [key, value] : _object.items())
            if (!_seen.count(key))
                throw ConfigError(_origin + ": unknown key '" + key + "' in " + _where);
    }

    [[noreturn]] void fail(const std::string& key, const std::string& message) const
    {
        const std::string name = _where == "top level" ? key : _where + "." + key;
        throw ConfigError(_origin + ": field '" + name + "': " + message);
    }

private:
    std::uint64_t as_count(const json& v, const std::string& key) const
    {
        if (v.is_number_unsigned())
            return v.get<std::uint64_t>();
        if (v.is_number_integer()) {
            if (v.get<std::int64_t>() < 0)
                fail(key, "must be non-negative");
            return v.get<std::uint64_t>();
        }
        if (v.is_number_float()) {
            const double d = v.get<double>();
            if (d >= 0.0 && d == std::floor(d) && d < 1.8e19)
                return static_cast<std::uint64_t>(d);
        }
        fail(key, "expected a non-negative integer");
    }

    const json& _object;
    std::string _where;
    std::string _origin;
    std::set<std::string> _seen;
};

ObjectiveSpec::Kind parse_kind(const std::string& name, Fields& f)
{
    if (name == "ackley")
        return ObjectiveSpec::Kind::Ackley;
    if (name == "simulated-experiment")
        return ObjectiveSpec::Kind::SimulatedExperiment;
    if (name == "external")
        return ObjectiveSpec::Kind::External;
    f.fail("objective", "expected \"ackley\", \"simulated-experiment\" or \"external\", got \"" + name + "\"");
}

void parse_space(const json& node, RunConfig& c, const std::string& origin)
{
    Fields f(node, "space", origin);
    if (!f.has("lower") || !f.has("upper"))
        f.fail("lower", "space needs both \"lower\" and \"upper\"");
    const auto lower = f.numbers("lower");
    const auto upper = f.numbers("upper");
    std::vector<std::string> names;
    if (f.has("names")) {
        const auto& v = f.raw("names");
        if (!v.is_array())
            f.fail("names", "expected an array of strings");
        for (const auto& e : v) {
            if (!e.is_string())
                f.fail("names", "expected an array of strings");
            names.push_back(e.get<std::string>());
        }
    }
    f.reject_unknown();
    try {
        c.space = ParameterSpace(lower, upper, names);
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": field 'space': " + e.what());
    }
}

void parse_output(const json& node, RunConfig& c, const std::string& origin)
{
    Fields f(node, "output", origin);
    if (f.has("dir"))
        c.output.dir = f.text("dir", "");
    c.output.trace = f.text("trace", c.output.trace);
    c.output.report = f.text("report", c.output.report);
    f.reject_unknown();
}

void parse_bench(const json& node, RunConfig& c, const std::string& origin)
{
    Fields f(node, "bench", origin);
    auto& b = c.bench;
    b.options.runs = f.count("runs", b.options.runs);
    b.options.budget = f.count("budget", b.options.budget);
    b.options.fraction = f.number("fraction", b.options.fraction);
    b.options.seed = f.count("seed", b.options.seed);
    b.options.threads = f.count("threads", b.options.threads);
    if (f.has("dimensions"))
        b.dimensions = f.counts("dimensions");
    if (f.has("population_candidates"))
        b.population_candidates = f.counts("population_candidates");
    if (f.has("pre_runs"))
        b.pre_runs = f.count("pre_runs", 0);
    if (f.has("sigmas"))
        b.sigmas = f.numbers("sigmas");
    if (f.has("sizes"))
        b.sizes = f.counts("sizes");
    if (f.has("noise_dimension"))
        b.noise_dimension = f.count("noise_dimension", 0);
    if (f.has("popsize_dimension"))
        b.popsize_dimension = f.count("popsize_dimension", 0);
    if (f.has("stem"))
        b.stem = f.text("stem", "");
    f.reject_unknown();

    if (b.options.runs < 1)
        f.fail("runs", "must be >= 1");
    if (b.options.threads < 1)
        f.fail("threads", "must be >= 1");
    if (!(b.options.fraction > 0.0))
        f.fail("fraction", "must be > 0");
    if (b.dimensions)
        for (auto d : *b.dimensions)
            if (d < 1)
                f.fail("dimensions", "every dimension must be >= 1");
    if (b.sigmas)
        for (double s : *b.sigmas)
            if (!(s >= 0.0))
                f.fail("sigmas", "noise levels must be >= 0");
}

} // namespace

ObjectivePtr RunConfig::make_objective() const
{
    ObjectivePtr core;
    switch (objective.kind) {
    case ObjectiveSpec::Kind::Ackley:
        core = std::make_shared<AckleyObjective>(objective.dimension, objective.drift.empty());
        break;
    case ObjectiveSpec::Kind::SimulatedExperiment:
        core = std::make_shared<SimulatedExperiment>();
        break;
    case ObjectiveSpec::Kind::External:
        if (sessions > 1)
            core = std::make_shared<protocol::SessionPool>(command, objective.dimension, sessions, timeout);
        else
            core = std::make_shared<protocol::Session>(command, objective.dimension, timeout);
        break;
    }
    return wrap(core, objective);
}

RunConfig parse_run_config(const json& document, const std::string& origin)
{
    RunConfig c;
    Fields f(document, "top level", origin);

    c.objective.kind = parse_kind(f.text("objective", "ackley"), f);
    const bool external = c.objective.kind == ObjectiveSpec::Kind::External;
    const bool simulated = c.objective.kind == ObjectiveSpec::Kind::SimulatedExperiment;

    const std::size_t default_dim = simulated ? SimulatedExperiment::parameters : 2;
    c.objective.dimension = f.count("dimension", default_dim);
    if (simulated && c.objective.dimension != SimulatedExperiment::parameters)
        f.fail("dimension", "the simulated experiment has exactly 21 parameters");
    if (c.objective.dimension < 1)
        f.fail("dimension", "must be >= 1");

    if (f.has("command")) {
        if (!external)
            f.fail("command", "only used with \"objective\": \"external\"");
        c.command = f.text("command", "");
    } else if (external) {
        f.fail("command", "required for an external objective");
    }
    if (f.has("space")) {
        if (!external)
            f.fail("space", "built-in objectives have a fixed box");
        parse_space(f.raw("space"), c, origin);
    }
    if (external) {
        if (!f.has("space"))
            f.fail("space", "required for an external objective");
        if (!f.has("dimension"))
            c.objective.dimension = c.space.dimension();
        if (c.space.dimension() != c.objective.dimension)
            f.fail("space", "has " + std::to_string(c.space.dimension()) + " components but dimension is "
                    + std::to_string(c.objective.dimension));
    } else if (simulated) {
        c.space = SimulatedExperiment().space();
    } else {
        c.space = ackley_space(c.objective.dimension);
    }

    const double timeout_s = f.number("timeout", 60.0);
    if (!(timeout_s > 0.0))
        f.fail("timeout", "must be > 0 seconds");
    c.timeout = std::chrono::milliseconds(static_cast<long long>(std::ceil(timeout_s * 1000.0)));
    c.sessions = f.count("sessions", 1);
    if (c.sessions < 1)
        f.fail("sessions", "must be >= 1");

    c.objective.relative_sigma = f.number("noise", 0.0);
    if (f.has("drift"))
        c.objective.drift = f.numbers("drift");
    c.objective.resample = f.count("resample", 1);
    try {
        c.objective.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
    }

    auto& o = c.optimizer;
    o.amplification = f.number("F", o.amplification);
    o.crossover = f.number("CR", o.crossover);
    o.elite_fraction = f.number("E", o.elite_fraction);
    c.population_given = f.has("N");
    o.population_size = f.count("N", o.population_size);
    if (f.has("lifetime")) {
        const auto& v = f.raw("lifetime");
        if (v.is_string()) {
            if (v.get<std::string>() != "unlimited")
                f.fail("lifetime", "expected a positive integer or \"unlimited\"");
            o.lifetime = unlimited_lifetime;
        } else {
            const auto life = f.count("lifetime", 0);
            if (life > unlimited_lifetime)
                f.fail("lifetime", "too large; use \"unlimited\"");
            o.lifetime = static_cast<std::uint32_t>(life);
        }
    }
    o.threshold = f.number("T", o.threshold);
    o.mean_guard = f.number("epsilon", o.mean_guard);
    o.max_evaluations = f.count("budget", o.max_evaluations);
    o.seed = f.count("seed", o.seed);
    o.workers = f.count("workers", o.workers);

    if (f.has("output"))
        parse_output(f.raw("output"), c, origin);
    if (f.has("bench"))
        parse_bench(f.raw("bench"), c, origin);
    f.reject_unknown();

    try {
        o.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return c;
}

RunConfig parse_run_config_text(const std::string& text, const std::string& origin)
{
    json document;
    try {
        document = json::parse(text);
    } catch (const json::parse_error& e) {
        // Turn the byte offset into line:column.
        std::size_t line = 1, column = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(column) + ": invalid JSON: "
            + e.what());
    }
    return parse_run_config(document, origin);
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config_text(buffer.str(), path.string());
}

std::filesystem::path output_directory(const OutputSettings& output)
{
    if (output.dir)
        return *output.dir;
    if (const char* env = std::getenv(output_dir_variable); env && *env)
        return env;
    return ".";
}

} // namespace lilde
