#include <catch2/catch_amalgamated.hpp>

#include "tdslab/construct.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using namespace tdslab;

namespace {

const EscapeCertificate& certificate() {
    static const EscapeCertificate cert = escape_search();
    return cert;
}

real vnorm(const State& x) { return norm2(x); }

// Exact integral of a piecewise-linear function over [a, b].
real integral(const HistoryFn& f, real a, real b) {
    std::vector<real> t{a};
    for (const Knot1& k : f.knots())
        if (k.t > a && k.t < b) t.push_back(k.t);
    t.push_back(b);
    real s = 0;
    for (std::size_t i = 1; i < t.size(); ++i) s += (t[i] - t[i - 1]) * (f.eval(t[i]) + f.eval(t[i - 1])) / 2;
    return s;
}

real integral(const SwitchingSignal& u, real a, real b) {
    std::vector<real> t{a};
    for (real s : u.switches())
        if (s > a && s < b) t.push_back(s);
    t.push_back(b);
    real s = 0;
    for (std::size_t i = 1; i < t.size(); ++i) s += (t[i] - t[i - 1]) * u.value(t[i - 1], Side::after);
    return s;
}

std::string temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("greedy starts with A0 at the default w0", "[construct]") {
    const Vec2 w0{0, 0.5L};
    CHECK(sym_part(mat_a0()).quad(w0) == 0);
    CHECK(sym_part(mat_a1()).quad(w0) == Catch::Approx(-0.025).margin(1e-18));
    CHECK(certificate().u.initial() == 0);
}

TEST_CASE("escape needs switching", "[construct]") {
    EscapeOptions o;
    o.allow_switching = false;
    CHECK_THROWS_AS(escape_search(o), ConstructionError);
    try {
        escape_search(o);
    } catch (const ConstructionError& e) {
        CHECK(e.best() == Catch::Approx(0.5));
    }

    const SymMat2 p0 = lyapunov_solve(mat_a0(), SymMat2::identity());
    const EventResult r = w_simulate(o.w0, ConstantSignal(0), 1, 0, o.budget, {}, o.cap);
    CHECK(!r.hit);
    for (std::size_t i = 1; i < r.trajectory.knots().size(); ++i) {
        const State& a = r.trajectory.knots()[i - 1].x;
        const State& b = r.trajectory.knots()[i].x;
        CHECK(p0.quad({b[0], b[1]}) < p0.quad({a[0], a[1]}));
    }
}

TEST_CASE("escape search input checks", "[construct]") {
    EscapeOptions o;
    o.w0 = {0, 0};
    CHECK_THROWS_AS(escape_search(o), std::invalid_argument);
    o = {};
    o.cap = 1e5L;
    CHECK_THROWS_AS(escape_search(o), std::invalid_argument);
}

TEST_CASE("escape certificate", "[construct]") {
    const EscapeCertificate& cert = certificate();
    CHECK(std::isfinite(cert.T_esc));
    CHECK(cert.T_esc > 0);
    CHECK(cert.cap == 1e8L);
    CHECK(cert.escape_signature());
    CHECK(cert.u.min_dwell(0, cert.T_esc) >= 0);
    const EventResult r = replay(cert, 1, {});
    REQUIRE(r.hit);
    CHECK(vnorm(r.trajectory.eval(*r.hit)) >= cert.cap * (1 - 1e-9L));

    const std::string path = temp_dir("tdslab_cert") + ".cert";
    cert.write_file(path);
    CHECK(EscapeCertificate::read_file(path) == cert);
    std::filesystem::remove(path);
}

TEST_CASE("certificate replay is stable across tolerances", "[construct][property]") {
    const EscapeCertificate& cert = certificate();
    for (real tol : {1e-9L, 1e-10L, 1e-11L}) {
        StepControl c;
        c.rel_tol = tol;
        c.abs_tol = tol / 100;
        const auto hit = replay_crossing(cert, 1, c);
        REQUIRE(hit);
        CHECK(std::fabs(*hit - cert.T_esc) <= 1e-3L * cert.T_esc);
    }
}

TEST_CASE("calibration", "[construct]") {
    const EscapeCertificate& cert = certificate();
    const real c = calibrate_c(cert);
    CHECK(c == cert.T_esc);
    const auto one = replay_crossing(cert, c, {});
    REQUIRE(one);
    CHECK(*one <= 1 + 1e-3L);
    const auto half = replay_crossing(cert, 2 * c, {});
    REQUIRE(half);
    CHECK(std::fabs(*half - *one / 2) <= 1e-3L * (*one / 2));

    EscapeCertificate broken = cert;
    broken.T_esc = cert.T_esc / 2;
    CHECK_THROWS_AS(calibrate_c(broken), ConstructionError);
}

TEST_CASE("backward extension stays in the unit ball", "[construct]") {
    for (real c : {1.0L, calibrate_c(certificate()), 8.0L}) {
        const BackwardExtension ext = backward_extend(c);
        CHECK(ext.tau_bar > 0);
        CHECK(ext.tau_bar < 1);
        CHECK(ext.w.t_min() == Catch::Approx(-ext.tau_bar).margin(1e-18));
        CHECK(ext.w.norm(0) == Catch::Approx(0.5).margin(1e-18));
        for (int i = 0; i <= 1000; ++i) CHECK(ext.w.norm(-ext.tau_bar * static_cast<real>(i) / 1000) <= 1);
    }
    CHECK_THROWS_AS(backward_extend(0), std::invalid_argument);
}

TEST_CASE("tau_M from the first 3M crossing", "[construct]") {
    StepControl tight;
    tight.rel_tol = 1e-13L;
    tight.abs_tol = 1e-15L;
    const VectorField grow = [](real, const State& x, State& dx) { dx[0] = x[0]; };
    const DenseTrajectory tr = integrate(grow, 0, 1, {3 * std::exp(-0.9L)}, tight);
    CHECK(pick_tau_M(tr, 1, 0.25L) == Catch::Approx(0.1).epsilon(1e-9));
    CHECK_THROWS_AS(pick_tau_M(tr, 10, 0.25L), ConstructionError);
    CHECK_THROWS_AS(pick_tau_M(tr, 1, 1.5L), std::invalid_argument);

    const EscapeCertificate& cert = certificate();
    const real c = calibrate_c(cert);
    const real tau_bar = backward_extend(c).tau_bar;
    const DenseTrajectory fw = replay(cert, c, {}).trajectory;
    real prev = 1;
    for (real M : {1.0L, 10.0L, 100.0L, 1e3L, 1e4L, 1e5L, 1e6L, 3e6L}) {
        const real tau = pick_tau_M(fw, M, tau_bar);
        CHECK(tau > 0);
        CHECK(tau <= tau_bar);
        CHECK(tau <= prev);
        CHECK(fw.norm(1 - tau) >= 3 * M * (1 - 1e-12L));
        prev = tau;
    }
}

TEST_CASE("mollified switching signal", "[construct]") {
    const SwitchingSignal u(1, {0, 0.3L, 0.5L, 0.9L}, -0.25L, 2);
    const real t_end = 1.4L;
    for (real delta : {0.05L, 1e-3L, 1e-6L}) {
        const HistoryFn m = mollify(u, delta, t_end);
        CHECK(m.eval(-0.25L) == 1);
        CHECK(m.eval(t_end) == 0);
        for (const Knot1& k : m.knots()) {
            CHECK(k.v >= 0);
            CHECK(k.v <= 1);
        }
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> d(-0.25, static_cast<double>(t_end));
        for (int i = 0; i < 2000; ++i) {
            const real t = static_cast<real>(d(rng));
            bool near = t > t_end - delta;
            for (real s : u.switches()) near = near || (t >= s && t <= s + delta);
            if (!near) CHECK(m.eval(t) == u.value(t));
        }
        for (int i = 0; i < 200; ++i) {
            real a = static_cast<real>(d(rng)), b = static_cast<real>(d(rng));
            if (a > b) std::swap(a, b);
            int ramps = 0;
            for (real s : u.switches())
                if (s + delta > a && s < b) ++ramps;
            if (b > t_end - delta) ++ramps;
            CHECK(std::fabs(integral(m, a, b) - integral(u, a, b)) <= ramps * delta / 2 + 1e-15L);
        }
    }
    CHECK_THROWS_AS(mollify(u, 0.1L, t_end), std::invalid_argument);
    CHECK_THROWS_AS(mollify(u, 0, t_end), std::invalid_argument);
}

TEST_CASE("z10 shape", "[construct]") {
    const SwitchingSignal u(1, {0, 0.3L, 0.5L}, -0.25L, 2);
    const real tau_M = 0.2L;
    const HistoryFn uk = mollify(u, 1e-3L, 1 - tau_M);
    const HistoryFn z = build_z10(uk, tau_M);
    CHECK(z.t_start() == -2);
    CHECK(z.t_end() == 0);
    CHECK(z.eval(-2) == 1);
    CHECK(z.eval(-1) == 1);
    CHECK(z.eval(std::nextafter(-1.0L, -2.0L)) == 1);
    CHECK(z.eval(0) == 0);
    CHECK(z.sup_norm() <= 1);
    for (int i = 0; i <= 1000; ++i) {
        const real t = -1 + static_cast<real>(i) / 1000;
        CHECK(std::fabs(z.eval(t) - uk.eval(t + 1 - tau_M)) <= 1e-15L);
    }
    CHECK_THROWS_AS(build_z10(uk, 0.3L), std::invalid_argument);
    const HistoryFn late = mollify(SwitchingSignal(0, {}, -0.25L, 2), 1e-3L, 1 - tau_M);
    CHECK_THROWS_AS(build_z10(late, tau_M), ConstructionError);
}

TEST_CASE("z20 ramp", "[construct]") {
    for (real eps : {1.0L, 0.5L, 0.01L}) {
        const HistoryFn z = build_z20_eps(eps);
        CHECK(z.eval(-2) == 1);
        CHECK(z.eval(-1) == 1);
        CHECK(z.eval(0) == 0);
        CHECK(z.eval(-1 + eps / 2) == Catch::Approx(0.5).margin(1e-15));
        CHECK(z.eval(-1 + eps) == 0);
        CHECK(z.sup_norm() == 1);
    }
    CHECK_THROWS_AS(build_z20_eps(0), std::invalid_argument);
    CHECK_THROWS_AS(build_z20_eps(1.5L), std::invalid_argument);
}

TEST_CASE("large transient witnesses", "[construct]") {
    for (real M : {10.0L, 1e6L}) {
        const Lemma1Artifacts a = lemma1_construct(M, certificate());
        CHECK(a.achieved >= 2 * M);
        CHECK(a.z10.sup_norm() <= 1);
        CHECK(a.z10.eval(0) == 0);
        const InitialState s = a.initial_state(HistoryFn::constant(1));
        CHECK(s.x_norm() <= 1);
        CHECK(s.norm() <= 2);
        CHECK(a.tau_M > 0);
        CHECK(a.tau_M <= a.tau_bar);
        CHECK(a.cap >= lemma1_cap(M, 0));

        const SolutionBundle sol = simulate(s, Params{a.c}, 1, {});
        CHECK(std::hypot(sol.x(1)[0], sol.x(1)[1]) == a.achieved);
        for (int i = 0; i <= 100; ++i) CHECK(sol.state(static_cast<real>(i) / 100)[2] == 0);
    }
    CHECK_THROWS_AS(lemma1_construct(0, certificate()), std::invalid_argument);
}

TEST_CASE("transient state follows the planar solution", "[construct][property]") {
    const StepControl ctrl{};
    const Lemma1Artifacts a = lemma1_construct(10, certificate(), Lemma1Options{.ctrl = ctrl});
    const SolutionBundle sol = simulate(a.initial_state(HistoryFn::constant(1)), Params{a.c}, 1, ctrl);
    const PiecewiseLinearSignal uk(a.u_K);
    const Vec2 start{a.x0_1.eval(0), a.x0_2.eval(0)};
    const EventResult w = w_simulate(start, uk, a.c, -a.tau_M, 1 - a.tau_M, ctrl, 1e30L);
    REQUIRE(!w.hit);
    for (int i = 0; i <= 200; ++i) {
        const real t = static_cast<real>(i) / 200;
        const Vec2 x = sol.x(t);
        const State y = w.trajectory.eval(t - a.tau_M);
        const real scale = std::max<real>(std::hypot(y[0], y[1]), 1);
        CHECK(std::hypot(x[0] - y[0], x[1] - y[1]) <= 10 * ctrl.rel_tol * scale);
    }
    // x0 is the backward solution at -tau_M, so the planar run passes through w0 at 0.
    CHECK(w.trajectory.eval(0, 0) == Catch::Approx(0).margin(1e-9));
    CHECK(w.trajectory.eval(0, 1) == Catch::Approx(0.5).margin(1e-9));
}

TEST_CASE("transient artifacts round trip", "[construct]") {
    const Lemma1Artifacts a = lemma1_construct(1e3L, certificate());
    const std::string dir = temp_dir("tdslab_lemma1");
    a.write_dir(dir);
    CHECK(Lemma1Artifacts::read_dir(dir) == a);
    std::filesystem::remove_all(dir);
}

TEST_CASE("uga adversary", "[construct]") {
    const UgaWitness w = uga_adversary(3, certificate());
    CHECK(w.M == Catch::Approx(std::exp(w.c * lambda0() * 3)).epsilon(1e-15));
    CHECK(w.x0.norm() <= 2);
    CHECK(w.eps > 0);
    CHECK(w.eps <= 1);
    REQUIRE(!w.trace.empty());
    CHECK(w.trace.back().first == w.eps);
    const SolutionBundle sol = simulate(w.x0, Params{w.c}, 3, {});
    CHECK(sol.norm(3) >= 1);
    for (int i = 0; i <= 100; ++i) CHECK(std::hypot(sol.x(1 + 1e-5L * i / 100)[0], sol.x(1 + 1e-5L * i / 100)[1]) >= w.M);

    for (real eps : {1.0L, 0.5L, 0.1L, 1e-3L}) {
        const SolutionBundle s = simulate(w.lemma1.initial_state(build_z20_eps(eps)), Params{w.c}, 1, {});
        CHECK(std::hypot(s.x(1)[0], s.x(1)[1]) >= 2 * w.M);
    }
    CHECK_THROWS_AS(uga_adversary(1, certificate()), std::invalid_argument);
    CHECK_THROWS_AS(uga_adversary(500, certificate()), std::domain_error);
}

TEST_CASE("lambda0", "[construct]") { CHECK(lambda0() == Catch::Approx(0.80166).epsilon(1e-5)); }
