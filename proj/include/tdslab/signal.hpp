#pragma once

#include "tdslab/history.hpp"
#include "tdslab/integrate.hpp"
#include "tdslab/real.hpp"

#include <limits>
#include <vector>

namespace tdslab {

/// Scalar input u(t) for the planar switched system.
class InputSignal {
public:
    virtual ~InputSignal() = default;
    /// One-sided value at t; the two sides differ only at jumps.
    virtual real value(real t, Side side = Side::after) const = 0;
    /// Times in (a, b) where the signal jumps or has a kink.
    virtual std::vector<real> breakpoints(real a, real b) const = 0;
};

class ConstantSignal final : public InputSignal {
public:
    explicit ConstantSignal(real v) : v_(v) {}
    real value(real, Side) const override { return v_; }
    std::vector<real> breakpoints(real, real) const override { return {}; }

private:
    real v_;
};

/// Piecewise-constant {0, 1} signal. The value is `initial` on
/// [t_start, switches[0]) and flips at every switch time.
class SwitchingSignal final : public InputSignal {
public:
    SwitchingSignal() = default;
    /// Throws std::invalid_argument unless initial is 0 or 1, switch times are
    /// strictly increasing and lie in (t_start, t_end).
    SwitchingSignal(int initial, std::vector<real> switches, real t_start = 0,
                    real t_end = std::numeric_limits<real>::infinity());

    int initial() const { return initial_; }
    const std::vector<real>& switches() const { return switches_; }
    real t_start() const { return t_start_; }
    real t_end() const { return t_end_; }

    /// Throws std::domain_error outside [t_start, t_end].
    real value(real t, Side side = Side::after) const override;
    int level(real t, Side side = Side::after) const;
    std::vector<real> breakpoints(real a, real b) const override;

    /// t -> u(c t).
    SwitchingSignal time_scaled(real c) const;
    /// Holds value `v` on [t_new_start, t_start) before this signal starts;
    /// a switch is inserted at the old t_start if the levels differ.
    SwitchingSignal extended_left(real t_new_start, int v) const;
    /// Shortest interval between consecutive switches inside [a, b], counting
    /// the partial intervals at both ends.
    real min_dwell(real a, real b) const;

private:
    int initial_ = 0;
    std::vector<real> switches_;
    real t_start_ = 0;
    real t_end_ = std::numeric_limits<real>::infinity();
};

/// Continuous signal given by a piecewise-linear function of time.
class PiecewiseLinearSignal final : public InputSignal {
public:
    explicit PiecewiseLinearSignal(HistoryFn f) : f_(std::move(f)) {}
    const HistoryFn& function() const { return f_; }
    real value(real t, Side) const override { return f_.eval(t); }
    std::vector<real> breakpoints(real a, real b) const override;

private:
    HistoryFn f_;
};

}  // namespace tdslab
