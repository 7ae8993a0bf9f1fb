#include <lilde/objectives.hpp>
#include <lilde/rng.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

namespace lilde {

double ackley(std::span<const double> x)
{
    constexpr double a = 20.0;
    constexpr double b = 0.2;
    constexpr double c = 2.0 * std::numbers::pi;
    const double d = static_cast<double>(x.size());
    double squares = 0.0;
    double cosines = 0.0;
    for (double xn : x) {
        squares += xn * xn;
        cosines += std::cos(c * xn);
    }
    return -a * std::exp(-b * std::sqrt(squares / d)) - std::exp(cosines / d) + a + std::numbers::e;
}

double ackley_max(std::span<const double> x)
{
    if (x.empty())
        throw DomainError("ackley_max: empty vector");
    for (std::size_t n = 0; n < x.size(); ++n) {
        if (!(std::abs(x[n]) <= ackley_box)) {
            std::ostringstream msg;
            msg << "ackley_max: component " << n << " = " << x[n] << " outside [-1.5, 1.5]";
            throw DomainError(msg.str());
        }
    }
    return ackley_peak - ackley(x);
}

ParameterSpace ackley_space(std::size_t dimension)
{
    return ParameterSpace::uniform(dimension, -ackley_box, ackley_box);
}

AckleyObjective::AckleyObjective(std::size_t dimension, bool check_domain)
    : _dimension(dimension), _check_domain(check_domain)
{
    if (dimension < 1)
        throw ConfigError("ackley: dimension must be >= 1");
}

double AckleyObjective::evaluate(std::span<const double> x, const EvalContext&)
{
    return _check_domain ? ackley_max(x) : ackley_peak - ackley(x);
}

SimulatedExperiment::SimulatedExperiment()
{
    constexpr std::size_t d = parameters;
    constexpr double sharpness = 0.5;
    _optimum.resize(d);
    for (std::size_t n = 0; n < d; ++n) {
        const double frac = std::fmod(0.3 + 0.6180339887498949 * static_cast<double>(n), 1.0);
        _optimum[n] = 2.0 + 6.0 * frac;
    }
    // Banded coupling: every parameter interacts with its two neighbours on
    // each side. Symbol 1 + 0.8 cos t + 0.3 cos 2t stays >= 0.43, so M is
    // nonsingular and x* is the unique maximum.
    _mixing.assign(d * d, 0.0);
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            const std::size_t gap = r > c ? r - c : c - r;
            double w = 0.0;
            if (gap == 0)
                w = 1.0;
            else if (gap == 1)
                w = 0.4;
            else if (gap == 2)
                w = 0.15;
            _mixing[r * d + c] = sharpness * w;
        }
    }
}

ParameterSpace SimulatedExperiment::space() const
{
    return ParameterSpace::uniform(parameters, 0.0, 10.0);
}

double SimulatedExperiment::evaluate(std::span<const double> x, const EvalContext&)
{
    constexpr std::size_t d = parameters;
    if (x.size() != d)
        throw DomainError("simulated experiment expects 21 parameters, got " + std::to_string(x.size()));
    double offset[d];
    for (std::size_t n = 0; n < d; ++n) {
        if (!(x[n] >= 0.0 && x[n] <= 10.0))
            throw DomainError("simulated experiment: component " + std::to_string(n) + " outside [0, 10]");
        offset[n] = x[n] - _optimum[n];
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
        double row = 0.0;
        for (std::size_t c = 0; c < d; ++c)
            row += _mixing[r * d + c] * offset[c];
        norm += row * row;
    }
    return scale * std::exp(-norm);
}

WithNoise::WithNoise(ObjectivePtr base, double relative_sigma) : _base(std::move(base)), _sigma(relative_sigma)
{
    if (!(relative_sigma >= 0.0))
        throw ConfigError("noise: relative sigma must be >= 0");
}

double WithNoise::evaluate(std::span<const double> x, const EvalContext& ctx)
{
    const double f = _base->evaluate(x, ctx);
    if (_sigma == 0.0)
        return f;
    SplitMix64 stream(derive_seed(ctx.stream_seed, 0x4E4F4953));
    return f * (1.0 + _sigma * standard_normal(stream));
}

WithDrift::WithDrift(ObjectivePtr base, std::vector<double> velocity) : _base(std::move(base)), _velocity(std::move(velocity))
{
    if (_velocity.size() != _base->dimension())
        throw ConfigError("drift: velocity dimension " + std::to_string(_velocity.size())
            + " does not match objective dimension " + std::to_string(_base->dimension()));
}

std::vector<double> WithDrift::translate(std::span<const double> origin, std::uint64_t index) const
{
    std::vector<double> out(origin.begin(), origin.end());
    for (std::size_t n = 0; n < out.size(); ++n)
        out[n] += static_cast<double>(index) * _velocity[n];
    return out;
}

double WithDrift::evaluate(std::span<const double> x, const EvalContext& ctx)
{
    std::vector<double> shifted(x.begin(), x.end());
    const double t = static_cast<double>(ctx.index);
    for (std::size_t n = 0; n < shifted.size(); ++n)
        shifted[n] -= t * _velocity[n];
    return _base->evaluate(shifted, ctx);
}

WithResampling::WithResampling(ObjectivePtr base, std::size_t samples) : _base(std::move(base)), _samples(samples)
{
    if (samples < 1)
        throw ConfigError("resampling: k must be >= 1");
}

double WithResampling::evaluate(std::span<const double> x, const EvalContext& ctx)
{
    if (_samples == 1)
        return _base->evaluate(x, ctx);
    double sum = 0.0;
    const std::size_t unit = _base->cost();
    for (std::size_t s = 0; s < _samples; ++s) {
        EvalContext inner{ctx.index + s * unit, derive_seed(ctx.stream_seed, 0x5245534D, s)};
        sum += _base->evaluate(x, inner);
    }
    return sum / static_cast<double>(_samples);
}

void ObjectiveSpec::validate() const
{
    if (dimension < 1)
        throw ConfigError("objective: dimension must be >= 1");
    if (!(relative_sigma >= 0.0))
        throw ConfigError("objective: noise must be >= 0");
    if (resample < 1)
        throw ConfigError("objective: resample must be >= 1");
    if (!drift.empty() && drift.size() != dimension)
        throw ConfigError("objective: drift velocity must have one entry per dimension");
    if (kind == Kind::SimulatedExperiment && dimension != SimulatedExperiment::parameters)
        throw ConfigError("objective: simulated-experiment has exactly 21 parameters");
}

ObjectivePtr wrap(ObjectivePtr core, const ObjectiveSpec& spec)
{
    spec.validate();
    ObjectivePtr out = std::move(core);
    if (!spec.drift.empty())
        out = std::make_shared<WithDrift>(out, spec.drift);
    if (spec.relative_sigma > 0.0)
        out = std::make_shared<WithNoise>(out, spec.relative_sigma);
    if (spec.resample > 1)
        out = std::make_shared<WithResampling>(out, spec.resample);
    return out;
}

} // namespace lilde
