#include "tdslab/construct.hpp"

#include "tdslab/keyvalue.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace tdslab {

namespace {

// e^{A s} for a 2x2 matrix with complex eigenvalues mu +- i nu.
Mat2 expm_rotating(const Mat2& a, real s) {
    const real mu = a.trace() / 2;
    const real nu2 = a.det() - mu * mu;
    if (!(nu2 > 0)) throw std::logic_error("expm_rotating: eigenvalues are not complex");
    const real nu = std::sqrt(nu2);
    const real e = std::exp(mu * s), cs = std::cos(nu * s), sn = std::sin(nu * s) / nu;
    return {e * (cs + sn * (a.a11 - mu)), e * sn * a.a12, e * sn * a.a21, e * (cs + sn * (a.a22 - mu))};
}

// 8-point Gauss-Legendre nodes and weights on [-1, 1].
constexpr real kGaussX[8] = {-0.960289856497536231683560868569472990L, -0.796666477413626739591553936475830437L,
                             -0.525532409916328985817739049189246349L, -0.183434642495649804939476142360183981L,
                             0.183434642495649804939476142360183981L,  0.525532409916328985817739049189246349L,
                             0.796666477413626739591553936475830437L,  0.960289856497536231683560868569472990L};
constexpr real kGaussW[8] = {0.101228536290376259152531354309962190L, 0.222381034453374470544355994426240884L,
                             0.313706645877887287337962201986601313L, 0.362683783378361982965150449277195612L,
                             0.362683783378361982965150449277195612L, 0.313706645877887287337962201986601313L,
                             0.222381034453374470544355994426240884L, 0.101228536290376259152531354309962190L};

// Elapsed t over intrinsic time ds starting from w: integral of 1 / (1 + |w(s)|^2).
real elapsed_t(const Mat2& a, const Vec2& w, real ds) {
    real sum = 0;
    for (int i = 0; i < 8; ++i) {
        const Vec2 v = expm_rotating(a, ds / 2 * (1 + kGaussX[i])) * w;
        sum += kGaussW[i] / (1 + v[0] * v[0] + v[1] * v[1]);
    }
    return sum * ds / 2;
}

real vnorm(const Vec2& v) { return std::hypot(v[0], v[1]); }

// Neumaier-compensated running sum; t grows by increments far below ulp(t)
// near the cap.
struct CompensatedSum {
    real sum = 0, comp = 0;
    void add(real x) {
        const real t = sum + x;
        comp += std::fabs(sum) >= std::fabs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    real value() const { return sum + comp; }
};

struct SearchRun {
    bool escaped = false;
    real t_hit = 0;
    int initial = 0;
    std::vector<real> switches;
    real best = 0;
};

using Policy = std::function<int(long epoch, const Vec2& w)>;

// Switched linear dynamics in the intrinsic clock: w' = A_u w, dt/ds = 1/(1+|w|^2).
SearchRun run_policy(const EscapeOptions& o, const Policy& policy) {
    const Mat2 a[2] = {mat_a0(), mat_a1()};
    const Mat2 step[2] = {expm_rotating(a[0], o.dwell_min), expm_rotating(a[1], o.dwell_min)};
    SearchRun run;
    Vec2 w = o.w0;
    run.best = vnorm(w);
    CompensatedSum t;
    int cur = -1;
    const long max_epochs = 50'000'000;
    for (long k = 0; k < max_epochs && t.value() < o.budget; ++k) {
        const int u = policy(k, w);
        if (cur < 0)
            run.initial = u;
        else if (u != cur)
            run.switches.push_back(t.value());
        cur = u;
        const Vec2 next = step[u] * w;
        if (vnorm(next) >= o.cap) {
            real lo = 0, hi = o.dwell_min;
            for (int it = 0; it < 200; ++it) {
                const real mid = lo + (hi - lo) / 2;
                if (mid <= lo || mid >= hi) break;
                (vnorm(expm_rotating(a[u], mid) * w) >= o.cap ? hi : lo) = mid;
            }
            t.add(elapsed_t(a[u], w, hi));
            run.escaped = true;
            run.t_hit = t.value();
            run.best = o.cap;
            return run;
        }
        t.add(elapsed_t(a[u], w, o.dwell_min));
        w = next;
        run.best = std::max(run.best, vnorm(w));
        if (vnorm(w) == 0) break;
    }
    return run;
}

std::vector<GrowthRecord> growth_log(const DenseTrajectory& traj, const Vec2& w0, real cap) {
    std::vector<GrowthRecord> out;
    const real n0 = vnorm(w0);
    out.push_back({traj.t_min(), n0});
    real from = traj.t_min();
    for (real thr = 2 * n0; thr <= cap; thr *= 2) {
        const auto t = first_norm_crossing(traj, thr, from);
        if (!t) break;
        out.push_back({*t, thr});
        from = *t;
    }
    return out;
}

StepControl endgame_control(const StepControl& ctrl) {
    StepControl c = ctrl;
    c.rel_tol = std::max(ctrl.rel_tol, 1e-8L);
    c.abs_tol = std::max(ctrl.abs_tol, 1e-10L);
    return c;
}

}  // namespace

bool EscapeCertificate::escape_signature() const {
    if (growth.size() < 4) return false;
    std::vector<real> d;
    for (std::size_t i = 1; i < growth.size(); ++i) d.push_back(growth[i].t - growth[i - 1].t);
    std::size_t j = d.size() - 1;
    while (j > 0 && d[j - 1] > d[j]) --j;
    return d.size() - j >= (d.size() + 1) / 2;
}

void EscapeCertificate::write_file(const std::filesystem::path& path) const {
    KeyValueDoc doc;
    doc.set("method", method);
    doc.set("w0.1", w0[0]);
    doc.set("w0.2", w0[1]);
    doc.set("dwell_min", dwell_min);
    doc.set("cap", cap);
    doc.set("T_esc", T_esc);
    doc.set("u.initial", u.initial());
    doc.set("u.switches", static_cast<long>(u.switches().size()));
    for (std::size_t i = 0; i < u.switches().size(); ++i) doc.set("u.switch." + std::to_string(i), u.switches()[i]);
    doc.set("growth.count", static_cast<long>(growth.size()));
    for (std::size_t i = 0; i < growth.size(); ++i)
        doc.set("growth." + std::to_string(i), format_real(growth[i].t) + " " + format_real(growth[i].norm));
    doc.write_file(path);
}

EscapeCertificate EscapeCertificate::read_file(const std::filesystem::path& path) {
    const KeyValueDoc doc = KeyValueDoc::read_file(path);
    EscapeCertificate c;
    c.method = doc.get("method");
    c.w0 = {doc.get_real("w0.1"), doc.get_real("w0.2")};
    c.dwell_min = doc.get_real("dwell_min");
    c.cap = doc.get_real("cap");
    c.T_esc = doc.get_real("T_esc");
    std::vector<real> sw;
    const long n = doc.get_long("u.switches");
    for (long i = 0; i < n; ++i) sw.push_back(doc.get_real("u.switch." + std::to_string(i)));
    c.u = SwitchingSignal(static_cast<int>(doc.get_long("u.initial")), std::move(sw));
    const long m = doc.get_long("growth.count");
    for (long i = 0; i < m; ++i) {
        const std::string& s = doc.get("growth." + std::to_string(i));
        const auto sp = s.find(' ');
        if (sp == std::string::npos) throw std::invalid_argument("growth record needs 't norm'");
        c.growth.push_back({parse_real(s.substr(0, sp)), parse_real(s.substr(sp + 1))});
    }
    return c;
}

bool EscapeCertificate::operator==(const EscapeCertificate& o) const {
    if (growth.size() != o.growth.size()) return false;
    for (std::size_t i = 0; i < growth.size(); ++i)
        if (growth[i].t != o.growth[i].t || growth[i].norm != o.growth[i].norm) return false;
    return u.initial() == o.u.initial() && u.switches() == o.u.switches() && T_esc == o.T_esc && cap == o.cap &&
           w0 == o.w0 && dwell_min == o.dwell_min && method == o.method;
}

EscapeCertificate escape_search(const EscapeOptions& o) {
    if (vnorm(o.w0) == 0) throw std::invalid_argument("escape_search: w0 must be nonzero");
    if (!(o.cap >= 1e6L)) throw std::invalid_argument("escape_search: cap must be at least 1e6");
    if (!(o.dwell_min > 0) || !(o.budget > 0)) throw std::invalid_argument("escape_search: dwell and budget > 0");
    o.ctrl.validate();

    const SymMat2 s0 = sym_part(mat_a0()), s1 = sym_part(mat_a1());
    const Policy greedy = [&](long, const Vec2& w) {
        if (!o.allow_switching) return 0;
        return s1.quad(w) > s0.quad(w) ? 1 : 0;
    };
    SearchRun run = run_policy(o, greedy);
    std::string method = "greedy";
    real best = run.best;

    const auto try_periodic = [&] {
        for (long half : {50L, 79L, 100L, 120L, 158L, 200L, 250L})
            for (long off : {0L, half / 4, half / 2, 3 * half / 4})
                for (int start : {0, 1}) {
                    const Policy periodic = [=](long k, const Vec2&) {
                        return static_cast<int>(((k + off) / half + start) % 2);
                    };
                    SearchRun r = run_policy(o, periodic);
                    best = std::max(best, r.best);
                    if (r.escaped) {
                        run = std::move(r);
                        method = "periodic half=" + std::to_string(half) + " offset=" + std::to_string(off) +
                                 " start=" + std::to_string(start);
                        return;
                    }
                }
    };
    if (!run.escaped && o.allow_switching && o.allow_fallback) try_periodic();
    if (!run.escaped)
        throw ConstructionError("escape_search: no escape within budget (best |w| = " + format_real(best) + ")",
                                best);

    EscapeCertificate cert;
    cert.u = SwitchingSignal(run.initial, std::move(run.switches));
    cert.T_esc = run.t_hit;
    cert.cap = o.cap;
    cert.w0 = o.w0;
    cert.dwell_min = o.dwell_min;
    cert.method = method;

    const EventResult r = replay(cert, 1, o.ctrl);
    if (!r.hit || std::fabs(*r.hit - cert.T_esc) > 1e-3L * cert.T_esc)
        throw ConstructionError("escape_search: replay of the switching signal does not reach the cap at T_esc",
                                r.trajectory.knots().empty() ? 0 : norm2(r.trajectory.knots().back().x));
    cert.growth = growth_log(r.trajectory, cert.w0, cert.cap);
    return cert;
}

EventResult replay(const EscapeCertificate& cert, real c, const StepControl& ctrl) {
    const SwitchingSignal u = cert.u.time_scaled(c);
    const real t_max = cert.T_esc / c * 1.001L;
    const Vec2 w0 = cert.w0;
    const real mid_cap = cert.cap / 1000;
    EventResult first = w_simulate(w0, u, c, 0, t_max, ctrl, std::max(mid_cap, vnorm(w0)));
    if (!first.hit) return first;
    const TrajectoryKnot last = first.trajectory.knots().back();
    EventResult second = w_simulate({last.x[0], last.x[1]}, u, c, last.t, t_max, endgame_control(ctrl), cert.cap);
    std::vector<TrajectoryKnot> knots = first.trajectory.knots();
    const auto& k2 = second.trajectory.knots();
    knots.back().dx_after = k2.front().dx_after;
    knots.insert(knots.end(), k2.begin() + 1, k2.end());
    return {DenseTrajectory(std::move(knots), 0), second.hit};
}

std::optional<real> replay_crossing(const EscapeCertificate& cert, real c, const StepControl& ctrl) {
    return replay(cert, c, ctrl).hit;
}

real calibrate_c(const EscapeCertificate& cert, const StepControl& ctrl) {
    if (!(cert.T_esc > 0)) throw std::invalid_argument("calibrate_c: certificate has no escape time");
    const real c = cert.T_esc;
    const auto hit = replay_crossing(cert, c, ctrl);
    if (!hit || std::fabs(*hit - 1) > 1e-3L)
        throw ConstructionError("calibrate_c: rescaled replay does not reach the cap at t = 1", 0);
    return c;
}

BackwardExtension backward_extend(real c, const StepControl& ctrl, const Vec2& w0) {
    if (!(c > 0)) throw std::invalid_argument("backward_extend: c must be positive");
    if (vnorm(w0) > 1) throw std::invalid_argument("backward_extend: |w0| must not exceed 1");
    const ConstantSignal one(1);
    for (real tau = 0.25L; tau > 1e-12L; tau /= 2) {
        EventResult r = w_simulate(w0, one, c, 0, -tau, ctrl, std::nextafter(1.0L, 2.0L));
        if (!r.hit) return {tau, std::move(r.trajectory)};
    }
    throw ConstructionError("backward_extend: no admissible tau_bar", 0);
}

real pick_tau_M(const DenseTrajectory& traj, real M, real tau_bar) {
    if (!(M > 0)) throw std::invalid_argument("pick_tau_M: M must be positive");
    if (!(tau_bar > 0 && tau_bar < 1)) throw std::invalid_argument("pick_tau_M: tau_bar must lie in (0, 1)");
    const auto t = first_norm_crossing(traj, 3 * M, 1 - tau_bar);
    if (!t || !(*t < 1))
        throw ConstructionError("pick_tau_M: trajectory never reaches 3M before t = 1; enlarge the cap",
                                traj.knots().empty() ? 0 : norm2(traj.knots().back().x));
    return 1 - *t;
}

HistoryFn mollify(const SwitchingSignal& u, real delta, real t_end) {
    if (!(delta > 0)) throw std::invalid_argument("mollify: delta must be positive");
    if (!(t_end > u.t_start() && t_end <= u.t_end())) throw std::invalid_argument("mollify: t_end outside domain");
    const real dwell = u.min_dwell(u.t_start(), t_end);
    if (!(delta < dwell / 2))
        throw std::invalid_argument("mollify: delta " + format_real(delta) + " overlaps ramps (min dwell " +
                                    format_real(dwell) + ")");
    std::vector<Knot1> k;
    k.push_back({u.t_start(), u.value(u.t_start(), Side::after)});
    for (real s : u.switches()) {
        if (s >= t_end) break;
        const real before = u.value(s, Side::before);
        k.push_back({s, before});
        k.push_back({s + delta, 1 - before});
    }
    if (u.level(t_end, Side::before) == 1) k.push_back({t_end - delta, 1});
    k.push_back({t_end, 0});
    return HistoryFn::from_knots(k);
}

HistoryFn build_z10(const HistoryFn& u_K, real tau_M) {
    if (!(tau_M > 0 && tau_M < 1)) throw std::invalid_argument("build_z10: tau_M must lie in (0, 1)");
    const real shift = u_K.t_end();
    if (std::fabs(shift - (1 - tau_M)) > 1e-12L) throw std::invalid_argument("build_z10: u_K must end at 1 - tau_M");
    if (u_K.t_start() > -tau_M) throw std::invalid_argument("build_z10: u_K must start at or before -tau_M");
    const real left = u_K.eval(-tau_M);
    if (std::fabs(left - 1) > HistoryFn::kContinuityTol)
        throw ConstructionError("build_z10: discontinuity at -1 (u_K(-tau_M) = " + format_real(left) + ")", left);

    std::vector<Knot1> k{{-2, 1}, {-1, 1}};
    for (const Knot1& n : u_K.knots()) {
        if (n.t <= -tau_M || n.t >= shift) continue;
        const real t = n.t - shift;
        if (t <= k.back().t || t >= 0) continue;
        k.push_back({t, n.v});
    }
    k.push_back({0, u_K.eval(shift)});
    return HistoryFn::from_knots(k);
}

HistoryFn build_z20_eps(real eps) {
    if (!(eps > 0 && eps <= 1)) throw std::invalid_argument("build_z20_eps: eps must lie in (0, 1]");
    std::vector<Knot1> k{{-2, 1}, {-1, 1}, {-1 + eps, 0}};
    if (-1 + eps < 0) k.push_back({0, 0});
    return HistoryFn::from_knots(k);
}

void Lemma1Artifacts::write_dir(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    KeyValueDoc doc;
    doc.set("c", c);
    doc.set("tau_bar", tau_bar);
    doc.set("tau_M", tau_M);
    doc.set("M", M);
    doc.set("achieved", achieved);
    doc.set("dwell", dwell);
    doc.set("delta", delta);
    doc.set("cap", cap);
    doc.write_file(dir / "lemma1.manifest");
    u_K.write_file(dir / "u_K.hist");
    z10.write_file(dir / "z10.hist");
    x0_1.write_file(dir / "x0_1.hist");
    x0_2.write_file(dir / "x0_2.hist");
}

Lemma1Artifacts Lemma1Artifacts::read_dir(const std::filesystem::path& dir) {
    const KeyValueDoc doc = KeyValueDoc::read_file(dir / "lemma1.manifest");
    Lemma1Artifacts a;
    a.c = doc.get_real("c");
    a.tau_bar = doc.get_real("tau_bar");
    a.tau_M = doc.get_real("tau_M");
    a.M = doc.get_real("M");
    a.achieved = doc.get_real("achieved");
    a.dwell = doc.get_real("dwell");
    a.delta = doc.get_real("delta");
    a.cap = doc.get_real("cap");
    a.u_K = HistoryFn::read_file(dir / "u_K.hist");
    a.z10 = HistoryFn::read_file(dir / "z10.hist");
    a.x0_1 = HistoryFn::read_file(dir / "x0_1.hist");
    a.x0_2 = HistoryFn::read_file(dir / "x0_2.hist");
    return a;
}

real lemma1_cap(real M, real cap) { return std::max(cap, 30 * M); }

Lemma1Artifacts lemma1_construct(real M, const Lemma1Options& opts) {
    if (!(M > 0)) throw std::invalid_argument("lemma1_construct: M must be positive");
    EscapeOptions e = opts.escape;
    e.cap = lemma1_cap(M, e.cap);
    return lemma1_construct(M, escape_search(e), opts);
}

Lemma1Artifacts lemma1_construct(real M, const EscapeCertificate& cert_in, const Lemma1Options& opts) {
    if (!(M > 0) || !std::isfinite(M)) throw std::invalid_argument("lemma1_construct: M must be positive");
    if (!(opts.delta0 > 0)) throw std::invalid_argument("lemma1_construct: delta0 must be positive");
    if (cert_in.cap < lemma1_cap(M, 0)) {
        EscapeOptions e = opts.escape;
        e.w0 = cert_in.w0;
        e.dwell_min = cert_in.dwell_min;
        e.cap = lemma1_cap(M, cert_in.cap);
        return lemma1_construct(M, escape_search(e), opts);
    }
    const EscapeCertificate& cert = cert_in;
    const StepControl& ctrl = opts.ctrl;

    const real c = calibrate_c(cert, ctrl);
    const BackwardExtension ext = backward_extend(c, ctrl, cert.w0);
    const EventResult fwd = replay(cert, c, ctrl);
    const real tau_M = pick_tau_M(fwd.trajectory, M, ext.tau_bar);
    const real t_end = 1 - tau_M;
    const SwitchingSignal u = cert.u.time_scaled(c).extended_left(-ext.tau_bar, 1);
    const State xp = ext.w.eval(-tau_M);

    Lemma1Artifacts art;
    art.c = c;
    art.tau_bar = ext.tau_bar;
    art.tau_M = tau_M;
    art.M = M;
    art.dwell = cert.dwell_min;
    art.cap = cert.cap;
    art.x0_1 = HistoryFn::constant(xp[0]);
    art.x0_2 = HistoryFn::constant(xp[1]);

    real delta = std::min(opts.delta0, u.min_dwell(-ext.tau_bar, t_end) / 4);
    real best = 0;
    const HistoryFn z20 = HistoryFn::constant(1);
    for (int round = 0; round < opts.max_rounds; ++round, delta /= 2) {
        art.delta = delta;
        art.u_K = mollify(u, delta, t_end);
        art.z10 = build_z10(art.u_K, tau_M);
        real achieved = 0;
        try {
            const SolutionBundle sol = simulate(art.initial_state(z20), Params{c}, 1, ctrl);
            const Vec2 x1 = sol.x(1);
            achieved = vnorm(x1);
        } catch (const IntegrationError&) {
            achieved = 0;
        }
        best = std::max(best, achieved);
        if (achieved >= 2 * M) {
            art.achieved = achieved;
            return art;
        }
    }
    throw ConstructionError("lemma1_construct: refinement exhausted, best |x(1)| = " + format_real(best), best);
}

real lambda0() { return -sym_eig_bounds(sym_part(mat_a0())).lo; }

UgaWitness uga_adversary(real T, const UgaOptions& opts) {
    return uga_adversary(T, escape_search(opts.lemma1.escape), opts);
}

UgaWitness uga_adversary(real T, const EscapeCertificate& cert, const UgaOptions& opts) {
    if (!(T > 1) || !std::isfinite(T)) throw std::invalid_argument("uga_adversary: T must exceed 1");
    const StepControl& ctrl = opts.lemma1.ctrl;
    const real c = calibrate_c(cert, ctrl);
    const real expo = c * lambda0() * T;
    if (expo > 700)
        throw std::domain_error("uga_adversary: c lambda0 T = " + format_real(expo) +
                                " overflows the desk-scale range; use a smaller T");
    UgaWitness w;
    w.T = T;
    w.c = c;
    w.M = std::exp(expo);
    w.lemma1 = lemma1_construct(w.M, cert, opts.lemma1);
    real eps = 0.5L;
    for (int i = 0; i <= opts.max_halvings; ++i, eps /= 2) {
        const InitialState x0 = w.lemma1.initial_state(build_z20_eps(eps));
        real final_norm = std::numeric_limits<real>::infinity();
        try {
            final_norm = simulate(x0, Params{c}, T, ctrl).norm(T);
        } catch (const IntegrationError&) {
        }
        w.trace.emplace_back(eps, final_norm);
        if (std::isfinite(final_norm) && final_norm >= 1) {
            w.x0 = x0;
            w.eps = eps;
            return w;
        }
    }
    throw ConstructionError("uga_adversary: eps shrink loop exhausted", 0);
}

}  // namespace tdslab
