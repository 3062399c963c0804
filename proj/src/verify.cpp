#include "tdslab/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace tdslab {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

real vnorm(const Vec2& v) { return std::hypot(v[0], v[1]); }

real vnorm(const Vec4& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]); }

const EscapeCertificate& certificate(const CheckOptions& opts, std::optional<EscapeCertificate>& storage) {
    if (opts.cert) return *opts.cert;
    storage = escape_search(opts.lemma1.escape);
    return *storage;
}

// Earliest t >= 0 after which |z1(t - 1)| <= eps for good.
real margin_time(const HistoryFn& z10, real eps) {
    const real z0 = std::fabs(z10.eval(0));
    if (z0 > eps) return 1 + std::log(z0 / eps);
    real last = -std::numeric_limits<real>::infinity();
    const auto k = z10.knots();
    for (std::size_t i = 0; i + 1 < k.size(); ++i) {
        const Knot1 a = k[i], b = k[i + 1];
        if (b.t <= -1) continue;
        const real lo = std::max(a.t, -1.0L);
        const auto val = [&](real t) { return a.v + (b.v - a.v) * (t - a.t) / (b.t - a.t); };
        if (std::fabs(b.v) > eps) {
            last = b.t;
        } else if (std::fabs(val(lo)) > eps) {
            // |z| drops through eps inside the piece.
            const real target = val(lo) > 0 ? eps : -eps;
            last = std::max(last, a.t + (target - a.v) * (b.t - a.t) / (b.v - a.v));
        }
    }
    return std::isfinite(last) ? std::max(0.0L, last + 1) : 0;
}

// First t in [from, horizon] with |X(t)| <= tol, refined by bisection.
std::optional<real> first_below(const SolutionBundle& sol, real tol, real from) {
    if (sol.norm(from) <= tol) return from;
    real prev = from;
    for (const TrajectoryKnot& k : sol.trajectory().knots()) {
        if (k.t <= from) continue;
        if (sol.norm(k.t) <= tol) {
            real lo = prev, hi = k.t;
            for (int it = 0; it < 200; ++it) {
                const real mid = lo + (hi - lo) / 2;
                if (mid <= lo || mid >= hi) break;
                (sol.norm(mid) <= tol ? hi : lo) = mid;
            }
            return hi;
        }
        prev = k.t;
    }
    return std::nullopt;
}

std::string tag(real v) {
    std::string s = format_real(v);
    for (char& ch : s)
        if (ch == '.' || ch == '+' || ch == '-') ch = '_';
    return s;
}

void finish(VerificationReport& r, Clock::time_point t0) { r.wall_seconds = seconds_since(t0); }

}  // namespace

StabilityConstants constants(real c) {
    if (!(c > 0)) throw std::invalid_argument("constants: c must be positive");
    StabilityConstants k;
    k.c = c;
    k.P0 = lyapunov_solve(mat_a0(), SymMat2::identity());
    k.P1 = lyapunov_solve(mat_a1(), SymMat2::identity());
    k.lambda_bar = find_lambda_bar(k.P0, 1e-8L);
    k.lambda0 = lambda0();
    const EigBounds e = sym_eig_bounds(k.P0);
    k.alpha_lo = e.lo;
    k.alpha_hi = e.hi;
    k.k = std::sqrt(e.hi / e.lo);
    k.mu = std::min(c / (4 * e.hi), 1.0L);
    return k;
}

const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::pass: return "pass";
        case Outcome::fail: return "fail";
        case Outcome::inconclusive: return "inconclusive";
    }
    return "?";
}

std::string VerificationReport::to_text(bool with_timing) const {
    KeyValueDoc doc;
    doc.set("claim", claim);
    doc.set("outcome", std::string(outcome_name(outcome)));
    for (const auto& [k, v] : params.entries()) doc.set("param." + k, v);
    for (const auto& [k, v] : measured.entries()) doc.set("measured." + k, v);
    for (std::size_t i = 0; i < witnesses.size(); ++i) doc.set("witness." + std::to_string(i), witnesses[i]);
    if (!note.empty()) doc.set("note", note);
    if (with_timing) doc.set("wall_seconds", std::to_string(wall_seconds));
    return doc.to_text();
}

void VerificationReport::write_file(const std::filesystem::path& path, bool with_timing) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << to_text(with_timing);
}

InitialState random_initial_state(std::mt19937_64& rng, real radius) {
    if (!(radius >= 0)) throw std::invalid_argument("random_initial_state: radius must be nonnegative");
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<Knot1> k[4];
    for (auto& ch : k)
        for (int j = 0; j < 8; ++j) ch.push_back({-2 + 2 * static_cast<real>(j) / 7, static_cast<real>(unit(rng))});
    InitialState s{HistoryFn::from_knots(k[0]), HistoryFn::from_knots(k[1]), HistoryFn::from_knots(k[2]),
                   HistoryFn::from_knots(k[3])};
    const real n = s.norm();
    const real scale = n > 0 ? radius / n : 0;
    for (auto& ch : k)
        for (Knot1& p : ch) p.v *= scale;
    return {HistoryFn::from_knots(k[0]), HistoryFn::from_knots(k[1]), HistoryFn::from_knots(k[2]),
            HistoryFn::from_knots(k[3])};
}

real v0(const StabilityConstants& k, const Vec2& x) { return k.P0.quad(x); }

VerificationReport check_les(real c, int n, const StepControl& ctrl, const CheckOptions& opts) {
    if (n < 1) throw std::invalid_argument("check_les: n must be at least 1");
    const auto t0 = Clock::now();
    const StabilityConstants K = constants(c);
    const real horizon = 20 / K.mu;
    const real margin = 1.05L;

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> frac(0.1, 1.0);
    std::vector<InitialState> samples;
    for (int i = 0; i < n; ++i) samples.push_back(random_initial_state(rng, K.lambda_bar * static_cast<real>(frac(rng))));

    struct Result {
        real env = 0;     // max |X(t)| / (k ||X0|| e^{-mu t})
        real decay = 0;   // max v0(t) / (v0(0) e^{-c t / (2 alpha_hi)})
        real rise = 0;    // max (v0(t_i) - v0(t_{i-1})) / v0(0)
        std::size_t knots = 0;
    };
    const std::vector<Result> results = parallel_map<Result>(samples.size(), [&](std::size_t i) {
        const InitialState& x0 = samples[i];
        const real n0 = x0.norm();
        // The envelope ends near e^-20 n0; absolute error must sit well below it.
        StepControl sc = ctrl;
        if (n0 > 0) sc.abs_tol = std::min(ctrl.abs_tol, 1e-6L * n0 * std::exp(-K.mu * horizon));
        const SolutionBundle sol = simulate(x0, Params{c}, horizon, sc);
        const real v00 = v0(K, sol.x(0));
        Result r;
        real prev = v00;
        for (const TrajectoryKnot& kn : sol.trajectory().knots()) {
            const real t = kn.t;
            const real nx = sol.norm(t);
            if (n0 > 0) r.env = std::max(r.env, nx / (K.k * n0 * std::exp(-K.mu * t)));
            const real v = v0(K, {kn.x[0], kn.x[1]});
            if (v00 > 0) {
                r.decay = std::max(r.decay, v / (v00 * std::exp(-c * t / (2 * K.alpha_hi))));
                r.rise = std::max(r.rise, (v - prev) / v00);
            }
            prev = v;
        }
        r.knots = sol.trajectory().knots().size();
        return r;
    });

    VerificationReport rep;
    rep.claim = "les";
    rep.params.set("c", c);
    rep.params.set("n", static_cast<long>(n));
    rep.params.set("seed", std::to_string(opts.seed));
    rep.params.set("horizon", horizon);
    rep.params.set("k", K.k);
    rep.params.set("mu", K.mu);
    rep.params.set("radius", K.lambda_bar);
    real env = 0, decay = 0, rise = 0;
    std::size_t worst = 0, knots = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const real score = std::max(results[i].env, results[i].decay);
        if (score > std::max(env, decay)) worst = i;
        env = std::max(env, results[i].env);
        decay = std::max(decay, results[i].decay);
        rise = std::max(rise, results[i].rise);
        knots += results[i].knots;
    }
    rep.measured.set("max_envelope_ratio", env);
    rep.measured.set("max_decay_ratio", decay);
    rep.measured.set("max_v0_rise", rise);
    rep.measured.set("knots", static_cast<long>(knots));
    const bool ok = env <= margin && decay <= margin && rise <= 1e-9L;
    rep.outcome = ok ? Outcome::pass : Outcome::fail;
    if (!ok && opts.witness_dir) {
        const auto rel = std::filesystem::path("les_witness_" + std::to_string(worst));
        samples[worst].write_dir(*opts.witness_dir / rel);
        rep.witnesses.push_back(rel.string());
    }
    finish(rep, t0);
    return rep;
}

VerificationReport check_gas(const InitialState& x0, real c, real tol, const StepControl& ctrl,
                             const CheckOptions& opts) {
    if (!(tol > 0)) throw std::invalid_argument("check_gas: tol must be positive");
    const auto t0 = Clock::now();
    const StabilityConstants K = constants(c);
    const real eps_star = K.lambda_bar;
    const real t_margin = margin_time(x0.z1, eps_star);

    VerificationReport rep;
    rep.claim = "gas";
    rep.params.set("c", c);
    rep.params.set("tol", tol);
    rep.params.set("eps_star", eps_star);
    rep.params.set("initial_norm", x0.norm());
    rep.measured.set("margin_time", t_margin);
    rep.outcome = Outcome::inconclusive;

    real horizon = std::max(8.0L, 2 * t_margin);
    long attempts = 0;
    while (horizon <= opts.max_horizon) {
        ++attempts;
        try {
            const SolutionBundle sol = simulate(x0, Params{c}, horizon, ctrl);
            if (const auto t = first_below(sol, tol, t_margin)) {
                rep.outcome = Outcome::pass;
                rep.measured.set("convergence_time", *t);
                rep.measured.set("final_norm", sol.norm(*t));
                break;
            }
        } catch (const IntegrationError& e) {
            rep.note = std::string("integration stopped: ") + e.what();
            break;
        }
        horizon *= 2;
    }
    rep.measured.set("horizon", std::min(horizon, opts.max_horizon * 2));
    rep.measured.set("attempts", attempts);
    if (rep.outcome == Outcome::inconclusive && rep.note.empty())
        rep.note = "no convergence within horizon " + format_real(opts.max_horizon);
    finish(rep, t0);
    return rep;
}

VerificationReport check_brs_violation(real M, const StepControl& ctrl, const CheckOptions& opts) {
    const auto t0 = Clock::now();
    std::optional<EscapeCertificate> own;
    const EscapeCertificate& cert = certificate(opts, own);
    Lemma1Options lo = opts.lemma1;
    lo.ctrl = ctrl;
    const Lemma1Artifacts art = lemma1_construct(M, cert, lo);
    const InitialState x0 = art.initial_state(HistoryFn::constant(1));
    const SolutionBundle sol = simulate(x0, Params{art.c}, 1, ctrl);
    const real achieved = vnorm(sol.x(1));
    const real n0 = x0.norm();

    VerificationReport rep;
    rep.claim = "brs";
    rep.params.set("M", M);
    rep.params.set("c", art.c);
    rep.measured.set("initial_norm", n0);
    rep.measured.set("x0_norm", x0.x_norm());
    rep.measured.set("z10_norm", art.z10.sup_norm());
    rep.measured.set("z10_at_0", art.z10.eval(0));
    rep.measured.set("achieved", achieved);
    rep.measured.set("tau_M", art.tau_M);
    rep.measured.set("delta", art.delta);
    const bool ok = n0 <= 2 && x0.x_norm() <= 1 && art.z10.sup_norm() <= 1 && art.z10.eval(0) == 0 &&
                    achieved >= 2 * M;
    rep.outcome = ok ? Outcome::pass : Outcome::fail;
    if (opts.witness_dir) {
        const auto rel = std::filesystem::path("brs_M" + tag(M));
        x0.write_dir(*opts.witness_dir / rel / "initial");
        art.write_dir(*opts.witness_dir / rel / "lemma1");
        rep.witnesses.push_back((rel / "initial").string());
        rep.witnesses.push_back((rel / "lemma1").string());
    }
    finish(rep, t0);
    return rep;
}

VerificationReport check_uga_violation(real T, const StepControl& ctrl, const CheckOptions& opts) {
    if (!(T > 1)) throw std::invalid_argument("check_uga_violation: T must exceed 1");
    const auto t0 = Clock::now();
    std::optional<EscapeCertificate> own;
    const EscapeCertificate& cert = certificate(opts, own);
    const real c = calibrate_c(cert, ctrl);
    const real expo = c * lambda0() * T;
    if (expo > 40)
        throw std::domain_error("check_uga_violation: c lambda0 T = " + format_real(expo) + " exceeds 40");

    UgaOptions uo;
    uo.lemma1 = opts.lemma1;
    uo.lemma1.ctrl = ctrl;
    const UgaWitness w = uga_adversary(T, cert, uo);
    const SolutionBundle sol = simulate(w.x0, Params{c}, T, ctrl);
    const real final_norm = sol.norm(T);
    const real n0 = w.x0.norm();

    // min |X| over [1, T] on knots and a uniform grid.
    real min_norm = std::numeric_limits<real>::infinity();
    for (int i = 0; i <= 1000; ++i) min_norm = std::min(min_norm, sol.norm(1 + (T - 1) * i / 1000));
    for (const TrajectoryKnot& k : sol.trajectory().knots())
        if (k.t >= 1) min_norm = std::min(min_norm, sol.norm(k.t));

    // Largest tau with |x| >= M on [1, 1 + tau].
    real tau = 0;
    {
        real prev = 1;
        for (const TrajectoryKnot& k : sol.trajectory().knots()) {
            if (k.t <= 1) continue;
            if (vnorm(sol.x(k.t)) < w.M) {
                real lo = prev, hi = k.t;
                for (int it = 0; it < 200; ++it) {
                    const real mid = lo + (hi - lo) / 2;
                    if (mid <= lo || mid >= hi) break;
                    (vnorm(sol.x(mid)) >= w.M ? lo : hi) = mid;
                }
                tau = lo - 1;
                break;
            }
            prev = k.t;
        }
    }
    // After the z20 ramp the dynamics are x' = c A0 x, so |x| decays at most
    // at rate c lambda0.
    const real t_lin = std::min(1 + w.eps, T);
    const real bound = std::exp(-lambda0() * c * (T - t_lin)) * vnorm(sol.x(t_lin));
    const bool lower_ok = vnorm(sol.x(T)) >= bound * (1 - 1e-8L);

    VerificationReport rep;
    rep.claim = "uga";
    rep.params.set("T", T);
    rep.params.set("c", c);
    rep.params.set("M", w.M);
    rep.params.set("eps", w.eps);
    rep.measured.set("initial_norm", n0);
    rep.measured.set("final_norm", final_norm);
    rep.measured.set("x_at_1", vnorm(sol.x(1)));
    rep.measured.set("min_norm_after_1", min_norm);
    rep.measured.set("tau_above_M", tau);
    rep.measured.set("linear_bound", bound);
    rep.measured.set("linear_bound_holds", std::string(lower_ok ? "true" : "false"));
    rep.measured.set("eps_attempts", static_cast<long>(w.trace.size()));
    rep.outcome = (n0 <= 2 && final_norm >= 1) ? Outcome::pass : Outcome::fail;
    if (opts.witness_dir) {
        const auto rel = std::filesystem::path("uga_T" + tag(T));
        w.x0.write_dir(*opts.witness_dir / rel / "initial");
        w.lemma1.write_dir(*opts.witness_dir / rel / "lemma1");
        rep.witnesses.push_back((rel / "initial").string());
        rep.witnesses.push_back((rel / "lemma1").string());
    }
    finish(rep, t0);
    return rep;
}

real wuga_metric(const InitialState& x0, real c, real T, const StepControl& ctrl) {
    if (!(T > 0)) throw std::invalid_argument("wuga_metric: T must be positive");
    const SolutionBundle sol = simulate(x0, Params{c}, T, ctrl);
    const int n = 1000;
    real best = sol.norm(0), at = 0;
    const auto consider = [&](real t) {
        const real v = sol.norm(t);
        if (v < best) best = v, at = t;
    };
    for (int i = 1; i <= n; ++i) consider(T * i / n);
    for (const TrajectoryKnot& k : sol.trajectory().knots()) consider(k.t);
    // Golden-section refinement around the best sample.
    real a = std::max(0.0L, at - T / n), b = std::min(T, at + T / n);
    const real g = (std::sqrt(5.0L) - 1) / 2;
    for (int it = 0; it < 100 && b - a > 0; ++it) {
        const real m1 = b - g * (b - a), m2 = a + g * (b - a);
        const real f1 = sol.norm(m1), f2 = sol.norm(m2);
        consider(m1);
        consider(m2);
        if (f1 < f2)
            b = m2;
        else
            a = m1;
    }
    return best;
}

real cross_check(const InitialState& x0, real c, real T, const StepControl& ctrl) {
    if (!(T > 0)) throw std::invalid_argument("cross_check: T must be positive");
    const SolutionBundle a = simulate(x0, Params{c}, T, ctrl);
    const SolutionBundle b = simulate_dde(x0, Params{c}, T, ctrl);
    real worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const real t = T * i / 999;
        const Vec4 xa = a.state(t), xb = b.state(t);
        const Vec4 d{xa[0] - xb[0], xa[1] - xb[1], xa[2] - xb[2], xa[3] - xb[3]};
        const real num = vnorm(d);
        if (num == 0) continue;
        worst = std::max(worst, num / std::max(vnorm(xa), std::numeric_limits<real>::min()));
    }
    return worst;
}

VerificationReport check_cross(real c, int n, real T, const StepControl& ctrl, const CheckOptions& opts) {
    if (n < 1) throw std::invalid_argument("check_cross: n must be at least 1");
    const auto t0 = Clock::now();
    std::mt19937_64 rng(opts.seed);
    std::vector<InitialState> samples;
    for (int i = 0; i < n; ++i) samples.push_back(random_initial_state(rng, 0.5L));

    struct Result {
        real dev;
        real zdev;
    };
    const std::vector<Result> res = parallel_map<Result>(samples.size(), [&](std::size_t i) {
        const InitialState& x0 = samples[i];
        Result r{cross_check(x0, c, T, ctrl), 0};
        const SolutionBundle b = simulate_dde(x0, Params{c}, T, ctrl);
        for (int j = 0; j < 1000; ++j) {
            const real t = T * j / 999;
            const Vec4 s = b.state(t);
            r.zdev = std::max({r.zdev, std::fabs(s[2] - z_eval(x0.z1, t)), std::fabs(s[3] - z_eval(x0.z2, t))});
        }
        return r;
    });
    real dev = 0, zdev = 0;
    for (const Result& r : res) dev = std::max(dev, r.dev), zdev = std::max(zdev, r.zdev);

    VerificationReport rep;
    rep.claim = "cross";
    rep.params.set("c", c);
    rep.params.set("n", static_cast<long>(n));
    rep.params.set("T", T);
    rep.params.set("seed", std::to_string(opts.seed));
    rep.measured.set("max_relative_deviation", dev);
    rep.measured.set("max_z_closed_form_deviation", zdev);
    rep.outcome = (dev <= 1e-6L && zdev <= 1e-8L) ? Outcome::pass : Outcome::fail;
    finish(rep, t0);
    return rep;
}

VerificationReport check_flow_properties(int n, const StepControl& ctrl, const CheckOptions& opts) {
    if (n < 1) throw std::invalid_argument("check_flow_properties: n must be at least 1");
    const auto t0 = Clock::now();
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> coord(-0.5, 0.5), gap(0.05, 0.4), time(0.2, 1.2), speed(0.5, 4);
    const auto at = [](const DenseTrajectory& tr, real t) { return Vec2{tr.eval(t, 0), tr.eval(t, 1)}; };
    const auto err = [](const Vec2& a, const Vec2& b) {
        return vnorm(Vec2{a[0] - b[0], a[1] - b[1]}) / std::max<real>(vnorm(b), 1);
    };
    constexpr real cap = 1e8L;
    real cocycle = 0, scaling = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<real> sw;
        for (real t = static_cast<real>(gap(rng)); t < 4; t += static_cast<real>(gap(rng))) sw.push_back(t);
        const SwitchingSignal u(static_cast<int>(rng() % 2), sw);
        const Vec2 w0{static_cast<real>(coord(rng)), static_cast<real>(coord(rng))};
        const real s = static_cast<real>(time(rng)), t = static_cast<real>(time(rng));
        const real c = static_cast<real>(speed(rng));

        // Restarting at s with the shifted input continues the same solution.
        const EventResult whole = w_simulate(w0, u, 1, 0, s + t, ctrl, cap);
        std::vector<real> shifted;
        for (real v : sw)
            if (v > s) shifted.push_back(v - s);
        const EventResult rest =
            w_simulate(at(whole.trajectory, s), SwitchingSignal(u.level(s), shifted), 1, 0, t, ctrl, cap);
        cocycle = std::max(cocycle, err(at(rest.trajectory, t), at(whole.trajectory, s + t)));

        // Speed c with input u(c .) is the unit-speed solution at c t.
        const EventResult fast = w_simulate(w0, u.time_scaled(c), c, 0, (s + t) / c, ctrl, cap);
        for (int j = 1; j <= 8; ++j) {
            const real tj = (s + t) * j / 8;
            scaling = std::max(scaling, err(at(fast.trajectory, tj / c), at(whole.trajectory, tj)));
        }
    }
    const real limit = 10 * ctrl.rel_tol;

    VerificationReport rep;
    rep.claim = "flow";
    rep.params.set("n", static_cast<long>(n));
    rep.params.set("seed", std::to_string(opts.seed));
    rep.params.set("limit", limit);
    rep.measured.set("max_cocycle_error", cocycle);
    rep.measured.set("max_scaling_error", scaling);
    rep.outcome = (cocycle <= limit && scaling <= limit) ? Outcome::pass : Outcome::fail;
    finish(rep, t0);
    return rep;
}

}  // namespace tdslab
