#include "tdslab/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tdslab {

real norm2(const State& x) {
    real s = 0;
    for (real v : x) s += v * v;
    return std::sqrt(s);
}

void StepControl::validate() const {
    if (!(rel_tol > 0) || !(abs_tol > 0)) throw std::invalid_argument("StepControl: tolerances must be positive");
    if (!(h_min > 0) || !(h_min <= h_max)) throw std::invalid_argument("StepControl: need 0 < h_min <= h_max");
    if (!(h_init >= 0)) throw std::invalid_argument("StepControl: h_init must be >= 0");
    if (max_steps <= 0) throw std::invalid_argument("StepControl: max_steps must be positive");
}

// ---------------------------------------------------------------------------
// DenseTrajectory

DenseTrajectory::DenseTrajectory(std::vector<TrajectoryKnot> knots, real t_initial)
    : knots_(std::move(knots)), t_initial_(t_initial) {
    if (knots_.empty()) throw std::invalid_argument("DenseTrajectory: no knots");
    for (std::size_t i = 1; i < knots_.size(); ++i)
        if (!(knots_[i - 1].t < knots_[i].t))
            throw std::invalid_argument("DenseTrajectory: knot times must be strictly increasing");
    if (t_initial_ != t_min() && t_initial_ != t_max())
        throw std::invalid_argument("DenseTrajectory: initial time must be an end knot");
}

std::size_t locate_interval(std::span<const TrajectoryKnot> knots, real t) {
    auto it = std::upper_bound(knots.begin(), knots.end(), t,
                               [](real x, const TrajectoryKnot& k) { return x < k.t; });
    std::size_t i = it == knots.begin() ? 0 : static_cast<std::size_t>(it - knots.begin()) - 1;
    if (i + 1 >= knots.size()) i = knots.size() >= 2 ? knots.size() - 2 : 0;
    return i;
}

real hermite_component(const TrajectoryKnot& a, const TrajectoryKnot& b, real t, std::size_t c) {
    if (t == a.t) return a.x[c];
    if (t == b.t) return b.x[c];
    const real h = b.t - a.t;
    const real s = (t - a.t) / h;
    const real s2 = s * s, s3 = s2 * s;
    const real h00 = 2 * s3 - 3 * s2 + 1;
    const real h10 = s3 - 2 * s2 + s;
    const real h01 = -2 * s3 + 3 * s2;
    const real h11 = s3 - s2;
    return h00 * a.x[c] + h10 * h * a.dx_after[c] + h01 * b.x[c] + h11 * h * b.dx_before[c];
}

State DenseTrajectory::eval(real t) const {
    if (!contains(t)) throw std::domain_error("DenseTrajectory::eval: t = " + format_real(t) + " outside trajectory");
    if (knots_.size() == 1) return knots_.front().x;
    const std::size_t i = locate_interval(knots_, t);
    State out(dimension());
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = hermite_component(knots_[i], knots_[i + 1], t, c);
    return out;
}

real DenseTrajectory::eval(real t, std::size_t component) const {
    if (!contains(t)) throw std::domain_error("DenseTrajectory::eval: t = " + format_real(t) + " outside trajectory");
    if (knots_.size() == 1) return knots_.front().x[component];
    const std::size_t i = locate_interval(knots_, t);
    return hermite_component(knots_[i], knots_[i + 1], t, component);
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4)

namespace {

namespace dp {
constexpr real c2 = 1.0L / 5, c3 = 3.0L / 10, c4 = 4.0L / 5, c5 = 8.0L / 9;
constexpr real a21 = 1.0L / 5;
constexpr real a31 = 3.0L / 40, a32 = 9.0L / 40;
constexpr real a41 = 44.0L / 45, a42 = -56.0L / 15, a43 = 32.0L / 9;
constexpr real a51 = 19372.0L / 6561, a52 = -25360.0L / 2187, a53 = 64448.0L / 6561, a54 = -212.0L / 729;
constexpr real a61 = 9017.0L / 3168, a62 = -355.0L / 33, a63 = 46732.0L / 5247, a64 = 49.0L / 176,
               a65 = -5103.0L / 18656;
constexpr real a71 = 35.0L / 384, a73 = 500.0L / 1113, a74 = 125.0L / 192, a75 = -2187.0L / 6784,
               a76 = 11.0L / 84;
constexpr real e1 = 71.0L / 57600, e3 = -71.0L / 16695, e4 = 71.0L / 1920, e5 = -17253.0L / 339200,
               e6 = 22.0L / 525, e7 = -1.0L / 40;
// Fourth-order continuous extension; its excess over the cubic Hermite
// interpolant of a step is theta^2 (1 - theta)^2 h sum(d_i k_i).
constexpr real d1 = -12715105075.0L / 11282082432, d3 = 87487479700.0L / 32700410799,
               d4 = -10690763975.0L / 1880347072, d5 = 701980252875.0L / 199316789632,
               d6 = -1453857185.0L / 822651844, d7 = 69997945.0L / 29380423;
}  // namespace dp

bool all_finite(const State& x) {
    return std::all_of(x.begin(), x.end(), [](real v) { return std::isfinite(v); });
}

struct RunOutput {
    std::vector<TrajectoryKnot> knots;
    std::optional<real> hit;
};

class Dopri5 {
public:
    Dopri5(const VectorField& f, const StepControl& ctrl) : f_(f), ctrl_(ctrl) { ctrl_.validate(); }

    /// Integrates from t0 to t1 through `pieces` boundaries. When `live` is
    /// given, knots are appended there as they are accepted.
    RunOutput run(real t0, real t1, const State& x0, std::vector<real> breaks, const EventSpec* event,
                  std::vector<TrajectoryKnot>* live);

private:
    void eval(real t, const State& x, State& dx, Side s) { f_(t, x, dx, s); }
    real initial_step(real t, const State& y, const State& f0, real dir, real span, Side side);

    const VectorField& f_;
    StepControl ctrl_;
};

real Dopri5::initial_step(real t, const State& y, const State& f0, real dir, real span, Side side) {
    if (ctrl_.h_init > 0) return std::min({ctrl_.h_init, ctrl_.h_max, span});
    const real sc = ctrl_.abs_tol + ctrl_.rel_tol * norm2(y);
    const real d0 = norm2(y) / sc;
    const real d1 = norm2(f0) / sc;
    real h0 = (d0 < 1e-5L || d1 < 1e-5L) ? 1e-6L : 0.01L * d0 / d1;
    h0 = std::min({h0, span, ctrl_.h_max});
    State y1(y.size()), f1(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) y1[i] = y[i] + dir * h0 * f0[i];
    eval(t + dir * h0, y1, f1, side);
    State diff(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) diff[i] = f1[i] - f0[i];
    const real d2 = norm2(diff) / sc / h0;
    real h1;
    if (!std::isfinite(d2)) {
        h1 = h0 * 1e-3L;
    } else if (std::max(d1, d2) <= 1e-15L) {
        h1 = std::max(1e-6L, h0 * 1e-3L);
    } else {
        h1 = std::pow(0.01L / std::max(d1, d2), 0.2L);
    }
    return std::min({100 * h0, h1, span, ctrl_.h_max});
}

RunOutput Dopri5::run(real t0, real t1, const State& x0, std::vector<real> breaks, const EventSpec* event,
                      std::vector<TrajectoryKnot>* live) {
    using namespace dp;
    if (!std::isfinite(t0) || !std::isfinite(t1) || t0 == t1)
        throw std::invalid_argument("integrate: need finite t0 != t1");
    if (!all_finite(x0)) throw std::invalid_argument("integrate: non-finite initial state");

    const real dir = t1 > t0 ? 1 : -1;
    const std::size_t n = x0.size();
    // Pieces in travel order: t0 = p[0], ..., p[m] = t1.
    std::vector<real> pts;
    pts.push_back(t0);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    if (dir < 0) std::reverse(breaks.begin(), breaks.end());
    for (real b : breaks)
        if ((b - t0) * dir > 0 && (t1 - b) * dir > 0) pts.push_back(b);
    pts.push_back(t1);

    RunOutput out;
    std::vector<TrajectoryKnot>& knots = live ? *live : out.knots;

    // Side facing into the piece being entered.
    const Side enter_side = dir > 0 ? Side::after : Side::before;

    State y = x0, k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n), dense(n);
    eval(t0, y, k1, enter_side);
    if (!all_finite(k1))
        throw IntegrationError(IntegrationErrorKind::non_finite, "integrate: non-finite derivative at start", t0,
                               norm2(y));
    knots.push_back({t0, y, k1, k1});

    real t = t0;
    real h = 0;
    real rejected_hs = 0;
    long steps = 0;
    const auto threshold_crossed = [&](const State& a, const State& b) {
        return event && norm2(a) < event->threshold && norm2(b) >= event->threshold;
    };
    if (event && norm2(y) >= event->threshold) {
        out.hit = t0;
        if (live) out.knots.clear();
        return out;
    }

    for (std::size_t p = 1; p < pts.size(); ++p) {
        const real piece_end = pts[p];
        const real lo = std::min(pts[p - 1], piece_end), hi = std::max(pts[p - 1], piece_end);
        const auto stage_side = [&](real tau) {
            if (tau == hi) return Side::before;
            if (tau == lo) return Side::after;
            return enter_side;
        };
        if (p > 1) {
            // Restart the derivative on the far side of the breakpoint.
            eval(t, y, k1, enter_side);
            if (dir > 0)
                knots.back().dx_after = k1;
            else
                knots.back().dx_before = k1;
        }
        if (h == 0) h = initial_step(t, y, k1, dir, std::fabs(piece_end - t), enter_side);

        while (t != piece_end) {
            if (++steps > ctrl_.max_steps)
                throw IntegrationError(IntegrationErrorKind::budget_exceeded,
                                       "integrate: max_steps exceeded at t = " + format_real(t), t, norm2(y));
            h = std::min(h, ctrl_.h_max);
            real t_new;
            if (std::fabs(piece_end - t) <= 1.01L * h)
                t_new = piece_end;
            else
                t_new = t + dir * h;
            const real hs = t_new - t;  // signed, exact representable difference
            const real ulp = std::nextafter(std::max(std::fabs(t), std::fabs(t_new)),
                                            std::numeric_limits<real>::infinity()) -
                             std::max(std::fabs(t), std::fabs(t_new));
            // A rejected step that rounds back to the same size cannot make progress.
            if (std::fabs(hs) < ctrl_.h_min || std::fabs(hs) < ulp || hs == rejected_hs)
                throw IntegrationError(IntegrationErrorKind::step_underflow,
                                       "integrate: step size underflow at t = " + format_real(t) +
                                           ", |x| = " + format_real(norm2(y)),
                                       t, norm2(y));

            for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + hs * a21 * k1[i];
            eval(t + c2 * hs, ytmp, k2, stage_side(t + c2 * hs));
            for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
            eval(t + c3 * hs, ytmp, k3, stage_side(t + c3 * hs));
            for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
            eval(t + c4 * hs, ytmp, k4, stage_side(t + c4 * hs));
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
            eval(t + c5 * hs, ytmp, k5, stage_side(t + c5 * hs));
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
            eval(t_new, ytmp, k6, stage_side(t_new));
            for (std::size_t i = 0; i < n; ++i)
                ynew[i] = y[i] + hs * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
            eval(t_new, ynew, k7, stage_side(t_new));
            for (std::size_t i = 0; i < n; ++i)
                err[i] = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);

            // Both the step error and the Hermite defect at mid-step are held to
            // the tolerance, so dense output is as accurate as the knots.
            for (std::size_t i = 0; i < n; ++i)
                dense[i] = hs * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]) / 16;
            const real sc = ctrl_.abs_tol + ctrl_.rel_tol * std::max(norm2(y), norm2(ynew));
            const real e = std::max(norm2(err), norm2(dense)) / sc;
            if (!std::isfinite(e) || !all_finite(ynew) || !all_finite(k7)) {
                h = std::fabs(hs) * 0.2L;
                rejected_hs = hs;
                continue;
            }
            if (e > 1) {
                h = std::fabs(hs) * std::max(0.2L, 0.9L * std::pow(e, -0.2L));
                rejected_hs = hs;
                continue;
            }
            rejected_hs = 0;

            const bool crossed = threshold_crossed(y, ynew);
            std::optional<TrajectoryKnot> prev;
            if (crossed) prev = knots.back();
            knots.push_back({t_new, ynew, k7, k7});
            const real fac = e == 0 ? 5.0L : std::min(5.0L, std::max(0.2L, 0.9L * std::pow(e, -0.2L)));
            if (t_new != piece_end) h = std::fabs(hs) * fac;
            if (crossed) {
                // Bisection on the step's Hermite interpolant; the bracket shrinks
                // until no representable midpoint remains.
                const TrajectoryKnot& a = dir > 0 ? *prev : knots.back();
                const TrajectoryKnot& b = dir > 0 ? knots.back() : *prev;
                const auto nrm = [&](real tau) {
                    real s = 0;
                    for (std::size_t i = 0; i < n; ++i) {
                        const real v = hermite_component(a, b, tau, i);
                        s += v * v;
                    }
                    return std::sqrt(s);
                };
                real below = t, above = t_new;  // norm < threshold at `below`
                for (int it = 0; it < 400; ++it) {
                    const real mid = below + (above - below) / 2;
                    if (mid == below || mid == above) break;
                    (nrm(mid) >= event->threshold ? above : below) = mid;
                }
                out.hit = above;
                t = t_new;
                y = ynew;
                break;
            }
            t = t_new;
            y = ynew;
            k1 = k7;
        }
        if (out.hit) break;
    }

    if (dir < 0) {
        std::reverse(knots.begin(), knots.end());
    }
    if (live) out.knots.clear();
    return out;
}

}  // namespace

DenseTrajectory integrate(const VectorField& f, real t0, real t1, const State& x0, const StepControl& ctrl,
                          std::span<const real> breakpoints) {
    Dopri5 solver(f, ctrl);
    RunOutput r = solver.run(t0, t1, x0, {breakpoints.begin(), breakpoints.end()}, nullptr, nullptr);
    return DenseTrajectory(std::move(r.knots), t0);
}

EventResult integrate_until(const VectorField& f, real t0, const State& x0, const EventSpec& event, real t_max,
                            const StepControl& ctrl, std::span<const real> breakpoints) {
    if (!(event.threshold > 0)) throw std::invalid_argument("integrate_until: threshold must be positive");
    Dopri5 solver(f, ctrl);
    try {
        RunOutput r = solver.run(t0, t_max, x0, {breakpoints.begin(), breakpoints.end()}, &event, nullptr);
        if (r.knots.empty()) {
            // Started at or above the threshold.
            State dx(x0.size());
            f(t0, x0, dx, t_max > t0 ? Side::after : Side::before);
            r.knots.push_back({t0, x0, dx, dx});
        }
        return {DenseTrajectory(std::move(r.knots), t0), r.hit};
    } catch (const IntegrationError& e) {
        if (e.kind() != IntegrationErrorKind::step_underflow) throw;
        throw IntegrationError(e.kind(),
                               "integrate_until: probable escape before the threshold (step underflow at t = " +
                                   format_real(e.last_time()) + ", |x| = " + format_real(e.last_norm()) + ")",
                               e.last_time(), e.last_norm());
    }
}

// ---------------------------------------------------------------------------
// Method of steps

real PastAccessor::operator()(std::size_t channel, real t) const {
    if (channel >= init_.size()) throw std::logic_error("PastAccessor: channel out of range");
    if (t <= 0) {
        if (t < init_[channel].t_start())
            throw std::logic_error("PastAccessor: lookup at t = " + format_real(t) + " precedes the history");
        return init_[channel].eval(t);
    }
    const auto& k = *committed_;
    if (k.empty() || t > k.back().t)
        throw std::logic_error("PastAccessor: lookup at t = " + format_real(t) + " reads ahead of committed output");
    if (k.size() == 1) return k.front().x[channel];
    const std::size_t i = locate_interval(k, t);
    return hermite_component(k[i], k[i + 1], t, channel);
}

DenseTrajectory dde_integrate(const DelayField& rhs, std::span<const real> delays, std::span<const HistoryFn> init,
                              real horizon, const StepControl& ctrl) {
    if (delays.empty()) throw std::invalid_argument("dde_integrate: no delays");
    if (!(horizon > 0)) throw std::invalid_argument("dde_integrate: horizon must be positive");
    real min_delay = std::numeric_limits<real>::infinity(), max_delay = 0;
    for (real d : delays) {
        if (!(d > 0)) throw std::invalid_argument("dde_integrate: delays must be positive");
        min_delay = std::min(min_delay, d);
        max_delay = std::max(max_delay, d);
    }
    for (const HistoryFn& h : init)
        if (h.empty() || h.t_start() > -max_delay || h.t_end() != 0)
            throw std::invalid_argument("dde_integrate: history must cover [-max delay, 0]");

    std::vector<real> breaks;
    for (long k = 1; static_cast<real>(k) * min_delay < horizon; ++k) breaks.push_back(static_cast<real>(k) * min_delay);
    for (real d : delays) {
        if (d < horizon) breaks.push_back(d);
        for (const HistoryFn& h : init)
            for (real b : h.breakpoints())
                if (b + d > 0 && b + d < horizon) breaks.push_back(b + d);
    }

    State x0(init.size());
    for (std::size_t i = 0; i < init.size(); ++i) x0[i] = init[i].eval(0);

    std::vector<TrajectoryKnot> knots;
    const PastAccessor past(init, &knots);
    const VectorField field = [&rhs, &past](real t, const State& x, State& dx) { rhs(t, x, past, dx); };
    Dopri5 solver(field, ctrl);
    solver.run(0, horizon, x0, std::move(breaks), nullptr, &knots);
    return DenseTrajectory(std::move(knots), 0);
}

}  // namespace tdslab
