#include "tdslab/system.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tdslab {

real phi(real s) {
    if (s < 0) return 0;
    if (s > 1) return 1;
    return s;
}

Vec2 g(const Vec2& x, real u) {
    const real l = phi(u);
    const Mat2 a = mat_a1() * l + mat_a0() * (1 - l);
    const real r = 1 + x[0] * x[0] + x[1] * x[1];
    const Vec2 ax = a * x;
    return {r * ax[0], r * ax[1]};
}

real z_eval(const HistoryFn& z0, real t) {
    if (t < z0.t_start()) throw std::domain_error("z_eval: t = " + format_real(t) + " precedes the history");
    if (t <= 0) return z0.eval(t);
    return z0.eval(0) * std::exp(-t);
}

InitialState InitialState::zero() {
    const HistoryFn h = HistoryFn::constant(0);
    return {h, h, h, h};
}

void InitialState::validate() const {
    for (const HistoryFn* h : {&x1, &x2, &z1, &z2})
        if (h->empty() || h->t_start() != -2 || h->t_end() != 0)
            throw std::invalid_argument("InitialState: every channel must be defined on [-2, 0]");
}

real InitialState::norm() const {
    validate();
    const HistoryFn* ch[] = {&x1, &x2, &z1, &z2};
    return stacked_sup_norm(ch);
}

real InitialState::x_norm() const {
    validate();
    const HistoryFn* ch[] = {&x1, &x2};
    return stacked_sup_norm(ch);
}

Vec4 InitialState::at(real t) const { return {x1.eval(t), x2.eval(t), z1.eval(t), z2.eval(t)}; }

namespace {
constexpr const char* kChannelFiles[] = {"x1.hist", "x2.hist", "z1.hist", "z2.hist"};
}

void InitialState::write_dir(const std::filesystem::path& dir) const {
    validate();
    std::filesystem::create_directories(dir);
    const HistoryFn* ch[] = {&x1, &x2, &z1, &z2};
    for (int i = 0; i < 4; ++i) ch[i]->write_file(dir / kChannelFiles[i]);
}

InitialState InitialState::read_dir(const std::filesystem::path& dir) {
    InitialState s;
    HistoryFn* ch[] = {&s.x1, &s.x2, &s.z1, &s.z2};
    for (int i = 0; i < 4; ++i) *ch[i] = HistoryFn::read_file(dir / kChannelFiles[i]);
    s.validate();
    return s;
}

void Params::validate() const {
    if (!(c > 0) || !std::isfinite(c)) throw std::invalid_argument("Params: c must be positive and finite");
}

SolutionBundle::SolutionBundle(InitialState init, Params p, real horizon, DenseTrajectory traj,
                               std::vector<real> breakpoints)
    : init_(std::move(init)), p_(p), horizon_(horizon), traj_(std::move(traj)), breaks_(std::move(breakpoints)) {}

Vec4 SolutionBundle::state(real t) const {
    if (t < 0) return init_.at(t);
    if (t > horizon_) throw std::domain_error("SolutionBundle: t = " + format_real(t) + " past the horizon");
    const State s = traj_.eval(t);
    if (s.size() == 4) return {s[0], s[1], s[2], s[3]};
    return {s[0], s[1], z_eval(init_.z1, t), z_eval(init_.z2, t)};
}

real SolutionBundle::norm(real t) const {
    const Vec4 s = state(t);
    return std::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2] + s[3] * s[3]);
}

Vec2 SolutionBundle::x(real t) const {
    const Vec4 s = state(t);
    return {s[0], s[1]};
}

namespace {

// Kinks of the delayed inputs z1(t - 1), z2(t - 2) inside (0, horizon).
std::vector<real> rhs_breakpoints(const InitialState& x0, real horizon) {
    std::vector<real> out;
    auto add = [&](real t) {
        if (t > 0 && t < horizon) out.push_back(t);
    };
    for (real b : x0.z1.breakpoints()) add(b + Params::delay1);
    for (real b : x0.z2.breakpoints()) add(b + Params::delay2);
    add(Params::delay1);
    add(Params::delay2);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void x_field(real c, real z1d, real z2d, const State& x, State& dx) {
    const Vec2 xv{x[0], x[1]};
    const real s = phi(z2d);
    const Vec2 gv = s > 0 ? g(xv, z1d) : Vec2{0, 0};
    const Vec2 lin = mat_a0() * xv;
    dx[0] = c * (s * gv[0] + (1 - s) * lin[0]);
    dx[1] = c * (s * gv[1] + (1 - s) * lin[1]);
}

void check_inputs(const InitialState& x0, const Params& p, real horizon) {
    x0.validate();
    p.validate();
    if (!(horizon > 0) || !std::isfinite(horizon)) throw std::invalid_argument("simulate: horizon must be positive");
}

}  // namespace

SolutionBundle simulate(const InitialState& x0, const Params& p, real horizon, const StepControl& ctrl) {
    check_inputs(x0, p, horizon);
    const real c = p.c;
    const HistoryFn& z1 = x0.z1;
    const HistoryFn& z2 = x0.z2;
    VectorField f = [c, &z1, &z2](real t, const State& x, State& dx) {
        x_field(c, z_eval(z1, t - Params::delay1), z_eval(z2, t - Params::delay2), x, dx);
    };
    std::vector<real> breaks = rhs_breakpoints(x0, horizon);
    DenseTrajectory traj = integrate(f, 0, horizon, {x0.x1.eval(0), x0.x2.eval(0)}, ctrl, breaks);
    return SolutionBundle(x0, p, horizon, std::move(traj), std::move(breaks));
}

SolutionBundle simulate_dde(const InitialState& x0, const Params& p, real horizon, const StepControl& ctrl) {
    check_inputs(x0, p, horizon);
    const real c = p.c;
    DelayField rhs = [c](real t, const State& x, const PastAccessor& past, State& dx) {
        x_field(c, past(2, t - Params::delay1), past(3, t - Params::delay2), x, dx);
        dx[2] = -x[2];
        dx[3] = -x[3];
    };
    const std::vector<HistoryFn> init{x0.x1, x0.x2, x0.z1, x0.z2};
    const real delays[] = {Params::delay1, Params::delay2};
    DenseTrajectory traj = dde_integrate(rhs, delays, init, horizon, ctrl);
    return SolutionBundle(x0, p, horizon, std::move(traj), rhs_breakpoints(x0, horizon));
}

EventResult w_simulate(const Vec2& w0, const InputSignal& u, real c, real t0, real t1, const StepControl& ctrl,
                       real cap) {
    if (!(c > 0)) throw std::invalid_argument("w_simulate: c must be positive");
    if (!(cap > 0)) throw std::invalid_argument("w_simulate: cap must be positive");
    const Mat2 a0 = mat_a0(), a1 = mat_a1();
    VectorField f = [&u, c, a0, a1](real t, const State& w, State& dw, Side side) {
        const real l = phi(u.value(t, side));
        const real r = c * (1 + w[0] * w[0] + w[1] * w[1]);
        const Vec2 wv{w[0], w[1]};
        const Vec2 p = a0 * wv, q = a1 * wv;
        dw[0] = r * (l * q[0] + (1 - l) * p[0]);
        dw[1] = r * (l * q[1] + (1 - l) * p[1]);
    };
    const std::vector<real> breaks = u.breakpoints(t0, t1);
    return integrate_until(f, t0, {w0[0], w0[1]}, EventSpec{cap}, t1, ctrl, breaks);
}

std::optional<real> first_norm_crossing(const DenseTrajectory& traj, real threshold, real t_from) {
    const auto& k = traj.knots();
    if (k.empty() || t_from > traj.t_max()) return std::nullopt;
    t_from = std::max(t_from, traj.t_min());
    if (traj.norm(t_from) >= threshold) return t_from;
    for (std::size_t i = 0; i + 1 < k.size(); ++i) {
        if (k[i + 1].t <= t_from) continue;
        if (norm2(k[i + 1].x) < threshold) continue;
        real lo = std::max(k[i].t, t_from), hi = k[i + 1].t;
        if (traj.norm(lo) >= threshold) return lo;
        for (int it = 0; it < 400; ++it) {
            const real mid = lo + (hi - lo) / 2;
            if (mid <= lo || mid >= hi) break;
            (traj.norm(mid) >= threshold ? hi : lo) = mid;
        }
        return hi;
    }
    return std::nullopt;
}

}  // namespace tdslab
