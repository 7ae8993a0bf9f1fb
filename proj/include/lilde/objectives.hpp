#ifndef LILDE_OBJECTIVES_HPP
#define LILDE_OBJECTIVES_HPP

#include <lilde/objective.hpp>
#include <lilde/types.hpp>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lilde {

// Ackley benchmark in maximization form: 28 - Ackley(x; a=20, b=0.2, c=2*pi)
// on the box [-1.5, 1.5]^d. Global maximum 28 at the origin; the cosine
// ripples leave three maxima per axis (3^d in total), the off-center ones
// roughly 13% below the peak.
inline constexpr double ackley_peak = 28.0;
inline constexpr double ackley_box = 1.5;

/// Raw Ackley function (minimization form, 0 at the origin), no domain check.
double ackley(std::span<const double> x);

/// 28 - ackley(x). Throws DomainError outside [-1.5, 1.5]^d.
double ackley_max(std::span<const double> x);

ParameterSpace ackley_space(std::size_t dimension);

class AckleyObjective : public Objective {
public:
    /// With `check_domain` false the surface extends past the box (used under drift).
    explicit AckleyObjective(std::size_t dimension, bool check_domain = true);

    std::size_t dimension() const override { return _dimension; }
    double evaluate(std::span<const double> x, const EvalContext&) override;
    std::string name() const override { return "ackley"; }

private:
    std::size_t _dimension;
    bool _check_domain;
};

/// Stand-in for a 21-parameter apparatus: S * exp(-|M (x - x*)|^2) with a
/// fixed non-diagonal mixing matrix M, so every parameter is correlated with
/// its neighbours. Box [0, 10]^21, S = 1e6.
class SimulatedExperiment : public Objective {
public:
    static constexpr std::size_t parameters = 21;
    static constexpr double scale = 1e6;

    SimulatedExperiment();

    std::size_t dimension() const override { return parameters; }
    double evaluate(std::span<const double> x, const EvalContext&) override;
    std::string name() const override { return "simulated-experiment"; }

    const std::vector<double>& optimum() const { return _optimum; }
    ParameterSpace space() const;
    /// Row-major 21x21 mixing matrix.
    const std::vector<double>& mixing() const { return _mixing; }

private:
    std::vector<double> _optimum;
    std::vector<double> _mixing;
};

/// f(x) * (1 + sigma_rel * g), g standard normal, fresh per call.
/// Negative values are kept as is.
class WithNoise : public Objective {
public:
    WithNoise(ObjectivePtr base, double relative_sigma);

    std::size_t dimension() const override { return _base->dimension(); }
    double evaluate(std::span<const double> x, const EvalContext& ctx) override;
    std::size_t cost() const override { return _base->cost(); }
    bool concurrent() const override { return _base->concurrent(); }
    std::string name() const override { return "noisy(" + _base->name() + ")"; }

    double relative_sigma() const { return _sigma; }

private:
    ObjectivePtr _base;
    double _sigma;
};

/// Evaluation t returns base(x - t * velocity): the optimum moves linearly
/// with the evaluation count.
class WithDrift : public Objective {
public:
    WithDrift(ObjectivePtr base, std::vector<double> velocity);

    std::size_t dimension() const override { return _base->dimension(); }
    double evaluate(std::span<const double> x, const EvalContext& ctx) override;
    std::size_t cost() const override { return _base->cost(); }
    bool concurrent() const override { return _base->concurrent(); }
    std::string name() const override { return "drifting(" + _base->name() + ")"; }

    /// Where a point at `origin` in the base frame sits after `index` evaluations.
    std::vector<double> translate(std::span<const double> origin, std::uint64_t index) const;

private:
    ObjectivePtr _base;
    std::vector<double> _velocity;
};

/// Averages k independent base evaluations per call; charges k budget units.
class WithResampling : public Objective {
public:
    WithResampling(ObjectivePtr base, std::size_t samples);

    std::size_t dimension() const override { return _base->dimension(); }
    double evaluate(std::span<const double> x, const EvalContext& ctx) override;
    std::size_t cost() const override { return _samples * _base->cost(); }
    bool concurrent() const override { return _base->concurrent(); }
    std::string name() const override { return "resampled(" + _base->name() + ", k=" + std::to_string(_samples) + ")"; }

    std::size_t samples() const { return _samples; }

private:
    ObjectivePtr _base;
    std::size_t _samples;
};

/// What the noise/drift/resampling wrappers should do around a core objective.
struct ObjectiveSpec {
    enum class Kind { Ackley, SimulatedExperiment, External };

    Kind kind = Kind::Ackley;
    std::size_t dimension = 2;
    double relative_sigma = 0.0;
    std::vector<double> drift; // empty = no drift
    std::size_t resample = 1;

    void validate() const;
};

/// Stacks the wrappers on `core` in the order drift, noise, resampling.
ObjectivePtr wrap(ObjectivePtr core, const ObjectiveSpec& spec);

} // namespace lilde

#endif
