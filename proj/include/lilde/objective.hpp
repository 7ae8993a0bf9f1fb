#ifndef LILDE_OBJECTIVE_HPP
#define LILDE_OBJECTIVE_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>

namespace lilde {

/// Per-call context handed to an objective by the engine.
struct EvalContext {
    /// Number of budget units consumed before this call. Drift is indexed by it.
    std::uint64_t index = 0;
    /// Seed of this call's private random sub-stream (noise draws).
    std::uint64_t stream_seed = 0;
};

/// Black-box objective, maximized by the engine.
class Objective {
public:
    virtual ~Objective() = default;

    virtual std::size_t dimension() const = 0;
    virtual double evaluate(std::span<const double> x, const EvalContext& ctx) = 0;

    /// Budget units consumed per call.
    virtual std::size_t cost() const { return 1; }

    /// Whether evaluate() may be called from several threads at once.
    virtual bool concurrent() const { return true; }

    virtual std::string name() const { return "objective"; }
};

using ObjectivePtr = std::shared_ptr<Objective>;

/// Wraps a plain deterministic function.
class FunctionObjective : public Objective {
public:
    using Fn = std::function<double(std::span<const double>)>;

    FunctionObjective(std::size_t dimension, Fn fn, std::string name = "function")
        : _dimension(dimension), _fn(std::move(fn)), _name(std::move(name))
    {
    }

    std::size_t dimension() const override { return _dimension; }
    double evaluate(std::span<const double> x, const EvalContext&) override { return _fn(x); }
    std::string name() const override { return _name; }

private:
    std::size_t _dimension;
    Fn _fn;
    std::string _name;
};

/// Serves minimization problems: returns -f.
class Negated : public Objective {
public:
    explicit Negated(ObjectivePtr base) : _base(std::move(base)) {}

    std::size_t dimension() const override { return _base->dimension(); }
    double evaluate(std::span<const double> x, const EvalContext& ctx) override { return -_base->evaluate(x, ctx); }
    std::size_t cost() const override { return _base->cost(); }
    bool concurrent() const override { return _base->concurrent(); }
    std::string name() const override { return "negated(" + _base->name() + ")"; }

private:
    ObjectivePtr _base;
};

} // namespace lilde

#endif
