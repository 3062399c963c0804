#pragma once

#include "tdslab/construct.hpp"
#include "tdslab/integrate.hpp"
#include "tdslab/keyvalue.hpp"
#include "tdslab/mat2.hpp"
#include "tdslab/system.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace tdslab {

struct StabilityConstants {
    real c = 0;
    SymMat2 P0, P1;
    real lambda_bar = 0;
    real lambda0 = 0;
    real alpha_lo = 0, alpha_hi = 0;
    real k = 0;
    real mu = 0;
};

StabilityConstants constants(real c);

enum class Outcome { pass, fail, inconclusive };
const char* outcome_name(Outcome o);

struct VerificationReport {
    std::string claim;
    Outcome outcome = Outcome::fail;
    KeyValueDoc params;
    KeyValueDoc measured;
    /// Paths of serialized witnesses, relative to the report.
    std::vector<std::string> witnesses;
    std::string note;
    double wall_seconds = 0;

    /// Flat `key = value` text with dotted keys. Wall-clock time is only
    /// emitted on request, so the default text is reproducible.
    std::string to_text(bool with_timing = false) const;
    void write_file(const std::filesystem::path& path, bool with_timing = false) const;
};

struct CheckOptions {
    std::uint64_t seed = 20240601;
    /// Witnesses are written below this directory when set.
    std::optional<std::filesystem::path> witness_dir;
    /// Reused instead of a fresh escape search when set.
    const EscapeCertificate* cert = nullptr;
    Lemma1Options lemma1{};
    /// Largest horizon a convergence check may try.
    real max_horizon = 1e5L;
};

/// Piecewise-linear histories with 8 uniform nodes on [-2, 0] per channel,
/// scaled so that the stacked sup norm equals `radius`.
InitialState random_initial_state(std::mt19937_64& rng, real radius);

/// V0(x) = x^T P0 x along a solution.
real v0(const StabilityConstants& k, const Vec2& x);

/// Exponential envelope and Lyapunov decay on n random states in the
/// lambda_bar ball.
VerificationReport check_les(real c, int n, const StepControl& ctrl, const CheckOptions& opts = {});

/// Convergence of |X(t)| below tol with doubling horizons. Inconclusive when
/// the horizon or step budget runs out first.
VerificationReport check_gas(const InitialState& x0, real c, real tol, const StepControl& ctrl,
                             const CheckOptions& opts = {});

/// Large transient |x(1)| >= 2M from an initial state of norm <= 2.
VerificationReport check_brs_violation(real M, const StepControl& ctrl, const CheckOptions& opts = {});

/// |X(T)| >= 1 from an initial state of norm <= 2. Requires c lambda0 T <= 40.
VerificationReport check_uga_violation(real T, const StepControl& ctrl, const CheckOptions& opts = {});

/// min over [0, T] of |X(t)| on a grid of spacing <= T / 1000, refined locally.
real wuga_metric(const InitialState& x0, real c, real T, const StepControl& ctrl);

/// Largest pointwise relative deviation |X_a - X_b| / |X_a| between simulate
/// and simulate_dde on a 1000-point grid over [0, T].
real cross_check(const InitialState& x0, real c, real T, const StepControl& ctrl);

/// cross_check on n random states of radius 0.5, plus the deviation of the
/// integrated z channels from their closed form.
VerificationReport check_cross(real c, int n, real T, const StepControl& ctrl, const CheckOptions& opts = {});

/// Cocycle and speed-rescaling identities of the planar switched system on
/// n random switching signals, both within 10 rel_tol.
VerificationReport check_flow_properties(int n, const StepControl& ctrl, const CheckOptions& opts = {});

/// Runs f(0), ..., f(n-1) on a small thread pool; results keep input order.
template <class R>
std::vector<R> parallel_map(std::size_t n, const std::function<R(std::size_t)>& f) {
    std::vector<std::optional<R>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(n, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) try {
                    slots[i].emplace(f(i));
                } catch (...) {
                    errors[i] = std::current_exception();
                }
        });
    for (auto& t : pool) t.join();
    std::vector<R> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        out.push_back(std::move(*slots[i]));
    }
    return out;
}

}  // namespace tdslab
