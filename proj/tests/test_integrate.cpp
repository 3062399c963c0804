#include <catch2/catch_amalgamated.hpp>

#include "tdslab/integrate.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace tdslab;
using Catch::Approx;

namespace {

const VectorField decay = [](real, const State& x, State& dx) { dx[0] = -x[0]; };
const VectorField growth = [](real, const State& x, State& dx) { dx[0] = x[0]; };
const VectorField oscillator = [](real, const State& x, State& dx) {
    dx[0] = x[1];
    dx[1] = -x[0];
};

StepControl tight() {
    StepControl c;
    c.rel_tol = 1e-12L;
    c.abs_tol = 1e-14L;
    return c;
}

}  // namespace

TEST_CASE("scalar decay forward and backward", "[integrate]") {
    const DenseTrajectory fw = integrate(decay, 0, 1, {1}, tight());
    CHECK(std::fabs(fw.eval(1, 0) - std::exp(-1.0L)) <= 1e-8L);
    CHECK(fw.t_start() == 0);
    CHECK(fw.t_end() == 1);

    const DenseTrajectory bw = integrate(decay, 0, -1, {1}, tight());
    CHECK(std::fabs(bw.eval(-1, 0) - std::exp(1.0L)) <= 1e-8L);
    CHECK(bw.t_start() == 0);
    CHECK(bw.t_end() == -1);
    CHECK(bw.t_min() == -1);
    for (std::size_t i = 1; i < bw.knots().size(); ++i) CHECK(bw.knots()[i - 1].t < bw.knots()[i].t);
}

TEST_CASE("harmonic oscillator returns after one period", "[integrate]") {
    const real two_pi = 2 * std::numbers::pi_v<real>;
    const DenseTrajectory tr = integrate(oscillator, 0, two_pi, {1, 0}, tight());
    const State end = tr.eval(two_pi);
    CHECK(std::fabs(end[0] - 1) <= 1e-6L);
    CHECK(std::fabs(end[1]) <= 1e-6L);
}

TEST_CASE("knots are reproduced exactly by dense evaluation", "[integrate]") {
    const DenseTrajectory tr = integrate(oscillator, 0, 3, {1, 0.5L}, {});
    for (const TrajectoryKnot& k : tr.knots()) {
        CHECK(tr.eval(k.t, 0) == k.x[0]);
        CHECK(tr.eval(k.t, 1) == k.x[1]);
    }
    CHECK_THROWS_AS(tr.eval(3.5L), std::domain_error);
}

TEST_CASE("threshold events", "[integrate]") {
    const EventResult up = integrate_until(growth, 0, {1}, {10}, 5, tight());
    REQUIRE(up.hit.has_value());
    CHECK(std::fabs(*up.hit - std::log(10.0L)) <= 1e-6L);

    const EventResult down = integrate_until(decay, 0, {1}, {10}, 5, tight());
    CHECK_FALSE(down.hit.has_value());
    CHECK(down.trajectory.t_end() == 5);
}

TEST_CASE("cubic blow-up crosses a large threshold before t = 1", "[integrate]") {
    // w' = (1 + w^2) w, w(0) = 1. Separating variables,
    //   t(r) = ln(r / sqrt(1 + r^2)) - ln(1 / sqrt(2)),
    // so the escape time is ln(sqrt 2) ~ 0.34657.
    const VectorField cubic = [](real, const State& x, State& dx) { dx[0] = (1 + x[0] * x[0]) * x[0]; };
    const auto oracle = [](real r) { return std::log(r / std::sqrt(1 + r * r)) + std::log(std::sqrt(2.0L)); };
    const EventResult r = integrate_until(cubic, 0, {1}, {1e6}, 5, tight());
    REQUIRE(r.hit.has_value());
    CHECK(*r.hit < 1);
    CHECK(*r.hit == Approx(static_cast<double>(oracle(1e6L))).epsilon(1e-9));
}

TEST_CASE("genuine escape is reported as a step underflow", "[integrate]") {
    const VectorField cubic = [](real, const State& x, State& dx) { dx[0] = (1 + x[0] * x[0]) * x[0]; };
    try {
        integrate(cubic, 0, 1, {1}, tight());
        FAIL("expected an integration error");
    } catch (const IntegrationError& e) {
        CHECK(e.kind() == IntegrationErrorKind::step_underflow);
        CHECK(e.last_time() < 0.35L);
        CHECK(e.last_norm() > 1e6L);
    }
}

TEST_CASE("step budget", "[integrate]") {
    StepControl c;
    c.max_steps = 3;
    try {
        integrate(oscillator, 0, 100, {1, 0}, c);
        FAIL("expected a budget error");
    } catch (const IntegrationError& e) {
        CHECK(e.kind() == IntegrationErrorKind::budget_exceeded);
    }
}

TEST_CASE("step control validation", "[integrate]") {
    StepControl c;
    c.rel_tol = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.h_min = 1;
    c.h_max = 0.5L;
    CHECK_THROWS_AS(integrate(decay, 0, 1, {1}, c), std::invalid_argument);
}

TEST_CASE("breakpoints split steps and keep one-sided derivatives", "[integrate]") {
    // dx/dt = u(t) with u jumping from 0 to 1 at t = 0.5.
    const VectorField ramp = [](real t, const State&, State& dx, Side s) {
        dx[0] = (t > 0.5L || (t == 0.5L && s == Side::after)) ? 1 : 0;
    };
    const real br[] = {0.5L};
    const DenseTrajectory tr = integrate(ramp, 0, 1, {0}, {}, br);
    CHECK(std::fabs(tr.eval(1, 0) - 0.5L) <= 1e-14L);
    CHECK(std::fabs(tr.eval(0.25L, 0)) <= 1e-14L);
    CHECK(std::fabs(tr.eval(0.75L, 0) - 0.25L) <= 1e-14L);
    bool found = false;
    for (const TrajectoryKnot& k : tr.knots())
        if (k.t == 0.5L) {
            found = true;
            CHECK(k.dx_before[0] == 0);
            CHECK(k.dx_after[0] == 1);
        }
    CHECK(found);

    const DenseTrajectory back = integrate(ramp, 1, 0, {0.5L}, {}, br);
    CHECK(std::fabs(back.eval(0, 0)) <= 1e-14L);
    CHECK(std::fabs(back.eval(0.75L, 0) - 0.25L) <= 1e-14L);
}

TEST_CASE("self convergence under tolerance halving", "[integrate][property]") {
    const VectorField vdp = [](real, const State& x, State& dx) {
        dx[0] = x[1];
        dx[1] = (1 - x[0] * x[0]) * x[1] - x[0];
    };
    for (real tol : {1e-6L, 1e-8L, 1e-10L}) {
        StepControl a, b;
        a.rel_tol = tol;
        a.abs_tol = tol;
        b.rel_tol = tol / 2;
        b.abs_tol = tol / 2;
        const State ea = integrate(vdp, 0, 5, {2, 0}, a).eval(5);
        const State eb = integrate(vdp, 0, 5, {2, 0}, b).eval(5);
        State d{ea[0] - eb[0], ea[1] - eb[1]};
        CHECK(norm2(d) / norm2(eb) <= 10 * tol * 100);
    }
}

TEST_CASE("dense output tracks a much tighter reference", "[integrate][property]") {
    StepControl ctrl;
    ctrl.rel_tol = 1e-8L;
    ctrl.abs_tol = 1e-10L;
    StepControl ref = ctrl;
    ref.rel_tol /= 100;
    ref.abs_tol /= 100;
    const DenseTrajectory a = integrate(oscillator, 0, 10, {1, 0}, ctrl);
    const DenseTrajectory b = integrate(oscillator, 0, 10, {1, 0}, ref);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> t(0, 10);
    real worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const real s = t(rng);
        const State ea = a.eval(s), eb = b.eval(s);
        worst = std::max(worst, std::hypot(ea[0] - eb[0], ea[1] - eb[1]) / norm2(eb));
    }
    CHECK(worst <= 10 * ctrl.rel_tol);
}

TEST_CASE("backward then forward round trip", "[integrate][property]") {
    const VectorField pend = [](real, const State& x, State& dx) {
        dx[0] = x[1];
        dx[1] = -std::sin(x[0]);
    };
    StepControl ctrl;
    ctrl.rel_tol = 1e-10L;
    const DenseTrajectory bw = integrate(pend, 0, -1, {0.7L, 0.1L}, ctrl);
    const DenseTrajectory fw = integrate(pend, -1, 0, bw.eval(-1), ctrl);
    const State back = fw.eval(0);
    CHECK(std::hypot(back[0] - 0.7L, back[1] - 0.1L) <= 10 * ctrl.rel_tol);
}

TEST_CASE("identical inputs give bit-identical knots", "[integrate][property]") {
    const DenseTrajectory a = integrate(oscillator, 0, 7, {1, 0.3L}, {});
    const DenseTrajectory b = integrate(oscillator, 0, 7, {1, 0.3L}, {});
    REQUIRE(a.knots().size() == b.knots().size());
    for (std::size_t i = 0; i < a.knots().size(); ++i) {
        CHECK(a.knots()[i].t == b.knots()[i].t);
        CHECK(a.knots()[i].x == b.knots()[i].x);
    }
}

TEST_CASE("method of steps on x'(t) = -x(t-1)", "[integrate][dde]") {
    const DelayField rhs = [](real t, const State&, const PastAccessor& past, State& dx) {
        dx[0] = -past(0, t - 1);
    };
    const real delays[] = {1};
    const HistoryFn init[] = {HistoryFn::constant(1, -1, 0)};
    StepControl ctrl;
    ctrl.h_max = 0.05L;
    const DenseTrajectory tr = dde_integrate(rhs, delays, init, 2, ctrl);
    CHECK(std::fabs(tr.eval(0.5L, 0) - 0.5L) <= 1e-9L);
    CHECK(std::fabs(tr.eval(1, 0)) <= 1e-9L);
    // second interval: x(t) = 1 - t + (t - 1)^2 / 2
    CHECK(std::fabs(tr.eval(2, 0) + 0.5L) <= 1e-8L);
    CHECK(std::fabs(tr.eval(1.5L, 0) - (1 - 1.5L + 0.125L)) <= 1e-8L);
}

TEST_CASE("delay-free system matches integrate", "[integrate][dde]") {
    const DelayField rhs = [](real t, const State& x, const PastAccessor& past, State& dx) {
        (void)past(0, t - 0.5L);  // dummy delayed read
        dx[0] = -x[0];
    };
    const real delays[] = {0.5L};
    const HistoryFn init[] = {HistoryFn::constant(1)};
    StepControl ctrl;
    ctrl.rel_tol = 1e-12L;
    ctrl.abs_tol = 1e-14L;
    const DenseTrajectory a = dde_integrate(rhs, delays, init, 3, ctrl);
    const DenseTrajectory b = integrate(decay, 0, 3, {1}, ctrl);
    for (real t : {0.3L, 1.0L, 2.2L, 3.0L}) CHECK(std::fabs(a.eval(t, 0) - b.eval(t, 0)) <= 1e-10L);
}

TEST_CASE("delayed lookup ahead of committed output is a logic error", "[integrate][dde]") {
    const DelayField rhs = [](real t, const State&, const PastAccessor& past, State& dx) {
        dx[0] = -past(0, t + 0.5L);
    };
    const real delays[] = {1};
    const HistoryFn init[] = {HistoryFn::constant(1)};
    CHECK_THROWS_AS(dde_integrate(rhs, delays, init, 2, {}), std::logic_error);
}
