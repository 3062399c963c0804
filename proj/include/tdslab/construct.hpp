#pragma once

#include "tdslab/history.hpp"
#include "tdslab/integrate.hpp"
#include "tdslab/mat2.hpp"
#include "tdslab/real.hpp"
#include "tdslab/signal.hpp"
#include "tdslab/system.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tdslab {

/// Construction could not deliver its object; `best` is the closest value
/// reached (norm for escape searches, |x(1)| for the transient build).
class ConstructionError : public std::runtime_error {
public:
    ConstructionError(const std::string& what, real best) : std::runtime_error(what), best_(best) {}
    real best() const { return best_; }

private:
    real best_;
};

struct GrowthRecord {
    real t;
    real norm;
};

struct EscapeOptions {
    Vec2 w0{0, 0.5L};
    /// Decision interval in the intrinsic clock s, ds = (1 + |w|^2) dt.
    real dwell_min = 0.01L;
    real cap = 1e8L;
    /// Largest time (with c = 1) the search may spend.
    real budget = 50;
    bool allow_switching = true;
    bool allow_fallback = true;
    StepControl ctrl{};
};

struct EscapeCertificate {
    SwitchingSignal u;
    real T_esc = 0;
    real cap = 0;
    Vec2 w0{0, 0.5L};
    real dwell_min = 0;
    std::string method;
    /// First times at which |w| reaches |w0| 2^k.
    std::vector<GrowthRecord> growth;

    /// Doubling intervals strictly decrease from some point on, the tail
    /// covering at least half of the records.
    bool escape_signature() const;

    void write_file(const std::filesystem::path& path) const;
    static EscapeCertificate read_file(const std::filesystem::path& path);
    bool operator==(const EscapeCertificate&) const;
};

/// Greedy switching on the planar system with c = 1: at every decision epoch
/// pick the matrix with the larger w^T sym(A_u) w. Falls back to periodic
/// switching grids if greedy stalls. Throws ConstructionError without escape.
EscapeCertificate escape_search(const EscapeOptions& opts = {});

/// Runs w from w0 under u(c t) with speed c up to 1.001 T_esc / c, stopping at
/// the cap. Above cap / 1000 the relative tolerance is loosened to 1e-8 (if
/// tighter): steps there shrink to a few ulps of t, and errors at large |w|
/// barely move the crossing time.
EventResult replay(const EscapeCertificate& cert, real c, const StepControl& ctrl);
std::optional<real> replay_crossing(const EscapeCertificate& cert, real c, const StepControl& ctrl);

/// c = T_esc. Throws ConstructionError if the rescaled replay misses the cap
/// near t = 1.
real calibrate_c(const EscapeCertificate& cert, const StepControl& ctrl = {});

struct BackwardExtension {
    real tau_bar;
    DenseTrajectory w;  // on [-tau_bar, 0]
};

/// Backward run from w(0) = w0 with u = 1; tau_bar is halved from 0.25
/// until |w| <= 1 on [-tau_bar, 0].
BackwardExtension backward_extend(real c, const StepControl& ctrl = {}, const Vec2& w0 = {0, 0.5L});

/// 1 - t* for the first t* >= 1 - tau_bar with |w(t*)| >= 3 M. Throws
/// ConstructionError when the trajectory never gets there.
real pick_tau_M(const DenseTrajectory& traj, real M, real tau_bar);

/// Continuous version of `u` on [u.t_start(), t_end]: each jump becomes a
/// linear ramp of length delta starting at the jump, and a last ramp brings
/// the value to 0 at t_end. Throws std::invalid_argument if ramps would overlap.
HistoryFn mollify(const SwitchingSignal& u, real delta, real t_end);

/// 1 on [-2, -1], u_K(t + 1 - tau_M) on [-1, 0].
HistoryFn build_z10(const HistoryFn& u_K, real tau_M);

/// 1 on [-2, -1], linear down to 0 on [-1, -1 + eps], 0 afterwards.
HistoryFn build_z20_eps(real eps);

struct Lemma1Options {
    EscapeOptions escape{};
    StepControl ctrl{};
    real delta0 = 1e-3L;
    int max_rounds = 20;
};

struct Lemma1Artifacts {
    real c = 0;
    real tau_bar = 0;
    real tau_M = 0;
    real M = 0;
    real achieved = 0;
    real dwell = 0;
    real delta = 0;
    real cap = 0;
    HistoryFn u_K;
    HistoryFn z10;
    HistoryFn x0_1, x0_2;

    /// Initial state with the given z20.
    InitialState initial_state(const HistoryFn& z20) const { return {x0_1, x0_2, z10, z20}; }

    /// Writes lemma1.manifest, u_K.hist, z10.hist, x0_1.hist, x0_2.hist.
    void write_dir(const std::filesystem::path& dir) const;
    static Lemma1Artifacts read_dir(const std::filesystem::path& dir);
    bool operator==(const Lemma1Artifacts&) const = default;
};

/// Cap needed by lemma1_construct for a given M.
real lemma1_cap(real M, real cap);

/// Full pipeline; verifies |x(1)| >= 2M by simulating the delay system with
/// z20 = 1 and halves the ramp length until it holds.
Lemma1Artifacts lemma1_construct(real M, const Lemma1Options& opts = {});
/// Same with a precomputed certificate; the search is redone with a larger
/// cap if cert.cap < 30 M.
Lemma1Artifacts lemma1_construct(real M, const EscapeCertificate& cert, const Lemma1Options& opts = {});

struct UgaWitness {
    InitialState x0;
    real M = 0;
    real eps = 0;
    real c = 0;
    real T = 0;
    Lemma1Artifacts lemma1;
    /// (eps, |X(T)|) per attempt; |X(T)| is infinite where the run escaped.
    std::vector<std::pair<real, real>> trace;
};

struct UgaOptions {
    Lemma1Options lemma1{};
    int max_halvings = 60;
};

/// lambda0 from sym(A0).
real lambda0();

/// Initial state with norm <= 2 whose solution satisfies |X(T)| >= 1.
/// Throws std::domain_error when c lambda0 T > 700.
UgaWitness uga_adversary(real T, const UgaOptions& opts = {});
UgaWitness uga_adversary(real T, const EscapeCertificate& cert, const UgaOptions& opts = {});

}  // namespace tdslab
