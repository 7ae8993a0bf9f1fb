#include <doctest.h>

#include <lilde/engine.hpp>
#include <lilde/objectives.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <set>

using namespace lilde;

namespace {

Population with_fitness(std::initializer_list<double> values, std::size_t d = 1)
{
    Population p;
    for (double v : values) {
        Individual ind;
        ind.x.assign(d, 0.0);
        ind.fitness = v;
        p.members.push_back(ind);
    }
    return p;
}

ObjectivePtr counting_sphere(std::size_t d, std::shared_ptr<std::atomic<int>> calls)
{
    return std::make_shared<FunctionObjective>(d, [calls](std::span<const double> x) {
        ++*calls;
        double s = 0.0;
        for (double v : x)
            s += v * v;
        return 100.0 - s;
    });
}

OptimizerConfig small_config(std::size_t n = 6)
{
    OptimizerConfig c;
    c.population_size = n;
    c.threshold = 0.0;
    c.max_evaluations = 100000;
    c.seed = 42;
    return c;
}

} // namespace

TEST_CASE("config validation names the field and range")
{
    OptimizerConfig c;
    CHECK_NOTHROW(c.validate());

    c.amplification = 1.5;
    try {
        c.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("F (amplification)") != std::string::npos);
        CHECK(std::string(e.what()).find("(0, 1]") != std::string::npos);
    }

    c = OptimizerConfig{};
    c.population_size = 4;
    c.elite_fraction = 0.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.elite_fraction = 1.0;
    CHECK_NOTHROW(c.validate());

    c = OptimizerConfig{};
    c.crossover = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = OptimizerConfig{};
    c.lifetime = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("elite size rounding")
{
    OptimizerConfig c;
    c.population_size = 30;
    c.elite_fraction = 0.1;
    CHECK(c.elite_size() == 3);
    c.population_size = 15;
    c.elite_fraction = 0.5;
    CHECK(c.elite_size() == 8);
}

TEST_CASE("parameter space rejects degenerate bounds")
{
    CHECK_THROWS_AS(ParameterSpace({}, {}), ConfigError);
    CHECK_THROWS_AS(ParameterSpace({0.0, 1.0}, {1.0, 1.0}), ConfigError);
    try {
        ParameterSpace({0.0, 2.0}, {1.0, 1.0}, {"a", "current"});
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("component 1 (current)") != std::string::npos);
    }
}

TEST_CASE("init_population respects bounds and seed")
{
    SUBCASE("1-d unit box")
    {
        Rng rng(1);
        auto c = small_config(4);
        c.elite_fraction = 1.0;
        const auto p = init_population(ParameterSpace({0.0}, {1.0}), c, rng);
        CHECK(p.size() == 4);
        CHECK(p.generation == 0);
        for (const auto& ind : p.members) {
            CHECK(ind.x[0] >= 0.0);
            CHECK(ind.x[0] <= 1.0);
            CHECK_FALSE(ind.evaluated());
        }
    }
    SUBCASE("per-component bounds")
    {
        Rng rng(2);
        const ParameterSpace space({-1.0, 5.0}, {1.0, 6.0});
        const auto p = init_population(space, small_config(6), rng);
        for (const auto& ind : p.members) {
            CHECK(ind.x[0] >= -1.0);
            CHECK(ind.x[0] <= 1.0);
            CHECK(ind.x[1] >= 5.0);
            CHECK(ind.x[1] <= 6.0);
        }
    }
    SUBCASE("determinism")
    {
        Rng a(7), b(7);
        const auto space = ackley_space(3);
        const auto pa = init_population(space, small_config(), a);
        const auto pb = init_population(space, small_config(), b);
        for (std::size_t i = 0; i < pa.size(); ++i)
            CHECK(pa[i].x == pb[i].x);
    }
    SUBCASE("invalid config")
    {
        Rng rng(1);
        auto c = small_config(4);
        CHECK_THROWS_AS(init_population(ackley_space(1), c, rng), ConfigError);
    }
}

TEST_CASE("elite_indices")
{
    CHECK_THROWS_AS(elite_indices(with_fitness({1, 5, 3, 2}), 0.5), ConfigError);

    auto top = elite_indices(with_fitness({1, 5, 3, 2, 0, -1}), 0.5);
    CHECK(std::set<std::size_t>(top.begin(), top.end()) == std::set<std::size_t>{1, 2, 3});

    // The documented {1,5,3,2} example needs E*N >= 3 to pass validation;
    // with E = 0.75 the top three are 5, 3, 2.
    top = elite_indices(with_fitness({1, 5, 3, 2}), 0.75);
    CHECK(top == std::vector<std::size_t>{1, 2, 3});

    CHECK(elite_indices(with_fitness({4, 3, 2, 1}), 1.0).size() == 4);

    top = elite_indices(with_fitness({7, 7, 7, 1, 1, 1}), 0.5);
    CHECK(std::set<std::size_t>(top.begin(), top.end()) == std::set<std::size_t>{0, 1, 2});

    top = elite_indices(with_fitness({1, 7, 1, 7, 7, 7}), 0.5);
    CHECK(top == std::vector<std::size_t>{1, 3, 4});
}

TEST_CASE("draw_parents yields distinct elite members")
{
    const std::vector<std::size_t> elite{4, 9, 2};
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const auto p = draw_parents(elite, rng);
        CHECK(p.base != p.plus);
        CHECK(p.base != p.minus);
        CHECK(p.plus != p.minus);
        for (auto idx : {p.base, p.plus, p.minus})
            CHECK(std::find(elite.begin(), elite.end(), idx) != elite.end());
    }
    const std::vector<std::size_t> too_small{0, 1};
    CHECK_THROWS_AS(draw_parents(too_small, rng), ConfigError);
}

TEST_CASE("draw_parents covers all ordered triples uniformly")
{
    const std::vector<std::size_t> elite{0, 1, 2, 3};
    Rng rng(11);
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, int> counts;
    const int draws = 24000;
    for (int i = 0; i < draws; ++i) {
        const auto p = draw_parents(elite, rng);
        ++counts[{p.base, p.plus, p.minus}];
    }
    CHECK(counts.size() == 24); // 4 * 3 * 2
    for (const auto& [triple, count] : counts)
        CHECK(std::abs(count - 1000) < 150);
}

TEST_CASE("mutate arithmetic and clamping")
{
    Population p;
    p.members = {Individual{{0.0, 0.0}}, Individual{{1.0, 0.0}}, Individual{{0.0, 1.0}}};
    const ParentDraw parents{0, 1, 2};

    const auto wide = ParameterSpace::uniform(2, -5.0, 5.0);
    auto v = mutate(p, parents, 0.9, wide);
    CHECK(v[0] == doctest::Approx(0.9));
    CHECK(v[1] == doctest::Approx(-0.9));

    const auto unit = ParameterSpace::uniform(2, 0.0, 1.0);
    v = mutate(p, parents, 0.9, unit);
    CHECK(v[0] == doctest::Approx(0.9));
    CHECK(v[1] == 0.0);

    // Equal-valued difference vectors at distinct indices leave x_j.
    p.members = {Individual{{0.3, 0.7}}, Individual{{0.5, 0.5}}, Individual{{0.5, 0.5}}};
    v = mutate(p, parents, 0.9, unit);
    CHECK(v == p[0].x);

    const std::vector<std::size_t> small{0, 1};
    Rng rng(1);
    CHECK_THROWS_AS(mutate(p, small, 0.9, unit, rng), ConfigError);
}

TEST_CASE("recombine")
{
    Rng rng(5);
    const std::vector<double> parent{1, 1, 1, 1};
    const std::vector<double> mutant{9, 9, 9, 9};

    SUBCASE("CR = 1 copies the mutant")
    {
        const auto t = recombine(parent, mutant, 1.0, rng);
        CHECK(t.x == mutant);
    }
    SUBCASE("tiny CR crosses only the forced index")
    {
        const std::vector<double> p3{1, 1, 1};
        const std::vector<double> m3{9, 9, 9};
        for (int i = 0; i < 200; ++i) {
            const auto t = recombine(p3, m3, 1e-300, rng);
            std::vector<double> expected = p3;
            expected[t.forced] = 9;
            CHECK(t.x == expected);
        }
    }
    SUBCASE("forced index is always from the mutant")
    {
        for (int i = 0; i < 500; ++i) {
            const auto t = recombine(parent, mutant, 0.3, rng);
            CHECK(t.from_mutant[t.forced] == 1);
            for (std::size_t n = 0; n < 4; ++n)
                CHECK(t.x[n] == (t.from_mutant[n] ? 9.0 : 1.0));
        }
    }
    SUBCASE("seeded mask is stable")
    {
        // Re-derive the mask from the same stream by hand, then compare with
        // the frozen values recorded from seed 2024.
        Rng replay(2024);
        const auto forced = uniform_index(replay, 4);
        std::vector<std::uint8_t> expected(4);
        for (std::size_t n = 0; n < 4; ++n)
            expected[n] = (uniform_open_closed(replay) <= 0.5 || n == forced) ? 1 : 0;

        Rng seeded(2024);
        const auto t = recombine(parent, mutant, 0.5, seeded);
        CHECK(t.forced == forced);
        CHECK(t.from_mutant == expected);
        CHECK(t.forced == 2);
        CHECK(t.from_mutant == std::vector<std::uint8_t>{0, 1, 1, 1});
    }
    SUBCASE("dimension mismatch")
    {
        const std::vector<double> shorter{1, 1};
        CHECK_THROWS_AS(recombine(parent, shorter, 0.5, rng), std::invalid_argument);
    }
}

TEST_CASE("select keeps the fitter, trial wins ties")
{
    Individual parent{{0.0}, 10.0, 3};
    Individual trial{{1.0}, 12.0, 0};
    CHECK(&select(parent, trial) == &trial);
    parent.fitness = 12.0;
    trial.fitness = 10.0;
    CHECK(&select(parent, trial) == &parent);
    parent.fitness = 10.0;
    CHECK(&select(parent, trial) == &trial);
}

TEST_CASE("refresh_expired")
{
    auto calls = std::make_shared<std::atomic<int>>(0);
    Evaluator evaluator(counting_sphere(1, calls), 1, 1000);

    Population p;
    for (int i = 0; i < 15; ++i) {
        Individual ind{{0.1 * i}, 100.0 - 0.01 * i * i, static_cast<std::uint32_t>(i < 3 ? 10 : 4)};
        p.members.push_back(ind);
    }
    const auto before = p;

    CHECK(refresh_expired(p, unlimited_lifetime, evaluator) == 0);
    CHECK(calls->load() == 0);

    CHECK(refresh_expired(p, 11, evaluator) == 0);

    CHECK(expired_count(p, 10) == 3);
    CHECK(refresh_expired(p, 10, evaluator) == 3);
    CHECK(calls->load() == 3);
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(p[i].fitness == doctest::Approx(before[i].fitness));
        CHECK(p[i].age == (i < 3 ? 0u : 4u));
    }
}

TEST_CASE("refresh replaces rather than averages")
{
    int call = 0;
    auto obj = std::make_shared<FunctionObjective>(1, [&call](std::span<const double>) { return ++call == 1 ? 50.0 : 10.0; });
    Evaluator evaluator(obj, 1, 100);
    Population p;
    p.members.push_back(Individual{{0.0}, 30.0, 5});
    refresh_expired(p, 5, evaluator);
    CHECK(p[0].fitness == 50.0);
    p[0].age = 5;
    refresh_expired(p, 5, evaluator);
    CHECK(p[0].fitness == 10.0);
}

TEST_CASE("check_termination")
{
    auto stats_of = [](std::initializer_list<double> values) { return compute_stats(with_fitness(values), 0); };

    CHECK(check_termination(stats_of({10, 10, 10}), 0.05, 1e-9) == Decision::Terminate);

    const auto s = stats_of({10, 20});
    CHECK(s.stddev == doctest::Approx(5.0));
    CHECK(s.mean == doctest::Approx(15.0));
    CHECK(s.ratio() == doctest::Approx(1.0 / 3.0));
    CHECK(check_termination(s, 0.05, 1e-9) == Decision::Continue);

    CHECK(check_termination(stats_of({1e-12, -1e-12}), 0.05, 1e-6) == Decision::GuardInapplicable);
    CHECK(check_termination(stats_of({0.0, 0.0}), 0.05, 0.0) == Decision::GuardInapplicable);

    // Negative objectives use |mean|.
    CHECK(check_termination(stats_of({-10, -10.1}), 0.05, 1e-9) == Decision::Terminate);
}

TEST_CASE("compute_stats uses the population standard deviation")
{
    const auto s = compute_stats(with_fitness({2, 4, 4, 4, 5, 5, 7, 9}), 8);
    CHECK(s.mean == doctest::Approx(5.0));
    CHECK(s.stddev == doctest::Approx(2.0));
    CHECK(s.best == 9.0);
    CHECK(s.cumulative_evaluations == 8);
}

TEST_CASE("step evaluation accounting and monotone best")
{
    auto calls = std::make_shared<std::atomic<int>>(0);
    const auto space = ackley_space(3);
    auto config = small_config(6);
    config.lifetime = unlimited_lifetime;
    Optimizer opt(space, config, counting_sphere(3, calls));
    REQUIRE(opt.initialize());
    CHECK(calls->load() == 6);
    double best = opt.trace().generations.back().best;
    for (int g = 0; g < 30; ++g) {
        const int before = calls->load();
        const auto& stats = opt.advance();
        CHECK(calls->load() - before == 6);
        CHECK(stats.best >= best);
        best = stats.best;
    }
    CHECK(opt.evaluator().used() == static_cast<std::size_t>(calls->load()));
}

TEST_CASE("ages: parents age, winning trials start at zero")
{
    const auto space = ParameterSpace::uniform(2, -1.0, 1.0);
    auto config = small_config(6);
    config.lifetime = unlimited_lifetime;
    // Constant objective: every trial ties and wins.
    Optimizer flat(space, config, std::make_shared<FunctionObjective>(2, [](std::span<const double>) { return 1.0; }));
    flat.initialize();
    flat.advance();
    for (const auto& ind : flat.population().members)
        CHECK(ind.age == 0);

    // Trials never beat a parent when the objective only decreases with time.
    int counter = 0;
    Optimizer falling(space, config,
        std::make_shared<FunctionObjective>(2, [&counter](std::span<const double>) { return -double(counter++); }));
    falling.initialize();
    for (int g = 1; g <= 5; ++g) {
        falling.advance();
        for (const auto& ind : falling.population().members)
            CHECK(ind.age == static_cast<std::uint32_t>(g));
    }
}

TEST_CASE("lifetime drives periodic re-evaluation")
{
    const auto space = ParameterSpace::uniform(2, -1.0, 1.0);
    auto config = small_config(6);
    config.lifetime = 3;
    int counter = 0;
    Optimizer opt(space, config,
        std::make_shared<FunctionObjective>(2, [&counter](std::span<const double>) { return 1000.0 - double(counter++); }));
    opt.initialize();
    std::vector<std::size_t> refreshed;
    for (int g = 0; g < 8; ++g) {
        StepRecord record;
        opt.advance(&record);
        refreshed.push_back(record.refreshed);
    }
    // Parents always survive: ages 1,2,3 -> refresh at the start of steps 4 and 7 (1-based).
    CHECK(refreshed == std::vector<std::size_t>{0, 0, 0, 6, 0, 0, 6, 0});
}

TEST_CASE("budget exhaustion stops at a generation boundary")
{
    const auto space = ackley_space(2);
    auto config = small_config(6);
    config.max_evaluations = 6;
    auto trace = run(space, config, std::make_shared<AckleyObjective>(2));
    CHECK(trace.generations.size() == 1);
    CHECK(trace.reason == TerminationReason::BudgetExhausted);
    CHECK(trace.evaluations() == 6);

    config.max_evaluations = 20; // 6 + 6 + 6 fits, a fourth generation does not
    trace = run(space, config, std::make_shared<AckleyObjective>(2));
    CHECK(trace.generations.size() == 3);
    CHECK(trace.evaluations() == 18);

    config.max_evaluations = 5;
    trace = run(space, config, std::make_shared<AckleyObjective>(2));
    CHECK(trace.generations.empty());
    CHECK_FALSE(trace.best.has_value());
    CHECK(trace.reason == TerminationReason::BudgetExhausted);
}

TEST_CASE("advance reports the shortfall")
{
    auto config = small_config(6);
    config.max_evaluations = 10;
    Optimizer opt(ackley_space(2), config, std::make_shared<AckleyObjective>(2));
    REQUIRE(opt.initialize());
    try {
        opt.advance();
        FAIL("expected BudgetExhausted");
    } catch (const BudgetExhausted& e) {
        CHECK(e.evaluations_spent() == 0);
        CHECK(e.evaluations_required() == 6);
        CHECK(e.evaluations_remaining() == 4);
    }
    CHECK(opt.population().generation == 0);
}

TEST_CASE("huge threshold terminates after generation 0")
{
    auto config = small_config(6);
    config.threshold = 1e300;
    const auto trace = run(ackley_space(2), config, std::make_shared<AckleyObjective>(2));
    CHECK(trace.generations.size() == 1);
    CHECK(trace.reason == TerminationReason::ThresholdMet);
}

TEST_CASE("identical seeds give identical traces")
{
    auto config = small_config(8);
    config.lifetime = 4;
    config.max_evaluations = 2000;
    const auto space = ackley_space(4);
    auto noisy = [] { return wrap(std::make_shared<AckleyObjective>(4), ObjectiveSpec{ObjectiveSpec::Kind::Ackley, 4, 0.1, {}, 1}); };
    const auto a = run(space, config, noisy());
    const auto b = run(space, config, noisy());
    REQUIRE(a.generations.size() == b.generations.size());
    for (std::size_t g = 0; g < a.generations.size(); ++g) {
        CHECK(a.generations[g].best == b.generations[g].best);
        CHECK(a.generations[g].mean == b.generations[g].mean);
        CHECK(a.generations[g].best_x == b.generations[g].best_x);
    }
    config.seed = 43;
    const auto c = run(space, config, noisy());
    CHECK(c.generations[1].best_x != a.generations[1].best_x);
}

TEST_CASE("worker threads do not change results")
{
    auto config = small_config(12);
    config.lifetime = 5;
    config.max_evaluations = 3000;
    const auto space = ackley_space(5);
    auto noisy = [] { return wrap(std::make_shared<AckleyObjective>(5), ObjectiveSpec{ObjectiveSpec::Kind::Ackley, 5, 0.05, {}, 1}); };
    const auto serial = run(space, config, noisy());
    config.workers = 4;
    const auto threaded = run(space, config, noisy());
    REQUIRE(serial.generations.size() == threaded.generations.size());
    for (std::size_t g = 0; g < serial.generations.size(); ++g)
        CHECK(serial.generations[g].best_x == threaded.generations[g].best_x);
}

TEST_CASE("transient evaluation errors are retried once")
{
    struct Flaky : Objective {
        int calls = 0;
        int fail_every;
        bool always;
        Flaky(int every, bool always_fail) : fail_every(every), always(always_fail) {}
        std::size_t dimension() const override { return 2; }
        double evaluate(std::span<const double>, const EvalContext&) override
        {
            ++calls;
            if (always || calls % fail_every == 0)
                throw EvaluationError("flaky", true);
            return 1.0;
        }
    };

    auto flaky = std::make_shared<Flaky>(10, false);
    auto config = small_config(6);
    config.max_evaluations = 60;
    const auto trace = run(ParameterSpace::uniform(2, 0, 1), config, flaky);
    CHECK(trace.evaluations() == 60);

    auto broken = std::make_shared<Flaky>(1, true);
    CHECK_THROWS_AS(run(ParameterSpace::uniform(2, 0, 1), config, broken), EvaluationError);
    CHECK(broken->calls == 2);
}

TEST_CASE("dimension mismatch between space and objective")
{
    CHECK_THROWS_AS(Optimizer(ackley_space(2), small_config(), std::make_shared<AckleyObjective>(3)), ConfigError);
}

TEST_CASE("negation adapter serves minimization")
{
    auto sphere = std::make_shared<FunctionObjective>(2, [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1] + 1.0; });
    auto config = small_config(10);
    config.max_evaluations = 3000;
    const auto trace = run(ParameterSpace::uniform(2, -5, 5), config, std::make_shared<Negated>(sphere));
    REQUIRE(trace.best);
    CHECK(-trace.best->fitness == doctest::Approx(1.0).epsilon(1e-3));
}
