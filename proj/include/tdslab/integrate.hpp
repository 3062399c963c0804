#pragma once

#include "tdslab/history.hpp"
#include "tdslab/real.hpp"

#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace tdslab {

using State = std::vector<real>;

real norm2(const State& x);

/// Which one-sided limit a right-hand side should use when evaluated exactly at
/// a declared breakpoint. Away from breakpoints the two coincide.
enum class Side { before, after };

/// Type-erased right-hand side f(t, x) -> dx/dt. Accepts callables with or
/// without a trailing Side parameter.
class VectorField {
public:
    using Fn = std::function<void(real, const State&, State&, Side)>;

    template <class F>
        requires std::invocable<F&, real, const State&, State&, Side>
    VectorField(F f) : fn_(std::move(f)) {}

    template <class F>
        requires(!std::invocable<F&, real, const State&, State&, Side> &&
                 std::invocable<F&, real, const State&, State&>)
    VectorField(F f) : fn_([g = std::move(f)](real t, const State& x, State& dx, Side) mutable { g(t, x, dx); }) {}

    void operator()(real t, const State& x, State& dx, Side side) const { fn_(t, x, dx, side); }

private:
    Fn fn_;
};

struct StepControl {
    real rel_tol = 1e-10L;
    real abs_tol = 1e-12L;
    real h_init = 0;  // 0 selects an automatic initial step
    real h_min = 1e-40L;
    real h_max = std::numeric_limits<real>::infinity();
    long max_steps = 20'000'000;

    /// Throws std::invalid_argument when an invariant is broken.
    void validate() const;
};

struct TrajectoryKnot {
    real t = 0;
    State x;
    State dx_before;  // derivative of the piece to the left of t
    State dx_after;   // derivative of the piece to the right of t
};

/// Accepted steps of an integration run, evaluable anywhere on the covered
/// interval by per-step cubic Hermite interpolation. Knots are stored in
/// increasing time regardless of the integration direction.
class DenseTrajectory {
public:
    DenseTrajectory() = default;
    DenseTrajectory(std::vector<TrajectoryKnot> knots, real t_initial);

    std::size_t dimension() const { return knots_.empty() ? 0 : knots_.front().x.size(); }
    /// Time the run started from and the time it stopped at.
    real t_start() const { return t_initial_; }
    real t_end() const { return t_initial_ == t_min() ? t_max() : t_min(); }
    real t_min() const { return knots_.front().t; }
    real t_max() const { return knots_.back().t; }
    bool contains(real t) const { return !knots_.empty() && t >= t_min() && t <= t_max(); }
    const std::vector<TrajectoryKnot>& knots() const { return knots_; }

    /// Throws std::domain_error outside [t_min, t_max].
    State eval(real t) const;
    real eval(real t, std::size_t component) const;
    real norm(real t) const { return norm2(eval(t)); }

private:
    std::vector<TrajectoryKnot> knots_;
    real t_initial_ = 0;
};

/// Hermite value of one component on knots[i]..knots[i+1].
real hermite_component(const TrajectoryKnot& a, const TrajectoryKnot& b, real t, std::size_t component);
/// Index i of the knot interval [knots[i].t, knots[i+1].t] containing t.
std::size_t locate_interval(std::span<const TrajectoryKnot> knots, real t);

enum class IntegrationErrorKind { step_underflow, budget_exceeded, non_finite };

class IntegrationError : public std::runtime_error {
public:
    IntegrationError(IntegrationErrorKind kind, const std::string& what, real last_time, real last_norm)
        : std::runtime_error(what), kind_(kind), last_time_(last_time), last_norm_(last_norm) {}

    IntegrationErrorKind kind() const { return kind_; }
    real last_time() const { return last_time_; }
    real last_norm() const { return last_norm_; }

private:
    IntegrationErrorKind kind_;
    real last_time_;
    real last_norm_;
};

/// Upward crossing of the Euclidean state norm through `threshold`.
struct EventSpec {
    real threshold = 0;
};

struct EventResult {
    DenseTrajectory trajectory;
    std::optional<real> hit;
};

/// Dormand-Prince 5(4) from t0 to t1 (t1 < t0 integrates backward). Steps
/// never straddle an entry of `breakpoints`; at a breakpoint the field is
/// evaluated on both sides.
DenseTrajectory integrate(const VectorField& f, real t0, real t1, const State& x0, const StepControl& ctrl,
                          std::span<const real> breakpoints = {});

/// As integrate, stopping at the first upward norm crossing of event.threshold
/// before t_max. The crossing time is refined by bisection on the dense output.
/// A step-size collapse before the crossing is reported as a probable escape.
EventResult integrate_until(const VectorField& f, real t0, const State& x0, const EventSpec& event, real t_max,
                            const StepControl& ctrl, std::span<const real> breakpoints = {});

/// Read access to the solution of a delay system: the initial histories for
/// t <= 0 and the committed dense output for t > 0.
class PastAccessor {
public:
    PastAccessor(std::span<const HistoryFn> init, const std::vector<TrajectoryKnot>* committed)
        : init_(init), committed_(committed) {}

    /// Throws std::logic_error for times past the committed output or before
    /// the initial histories.
    real operator()(std::size_t channel, real t) const;

private:
    std::span<const HistoryFn> init_;
    const std::vector<TrajectoryKnot>* committed_;
};

using DelayField = std::function<void(real t, const State& x, const PastAccessor& past, State& dx)>;

/// Method of steps on [0, horizon]. Step endpoints are committed at multiples
/// of the smallest delay and at history kinks shifted by each delay, so every
/// delayed lookup reads already committed output.
DenseTrajectory dde_integrate(const DelayField& rhs, std::span<const real> delays, std::span<const HistoryFn> init,
                              real horizon, const StepControl& ctrl);

}  // namespace tdslab
