#pragma once

#include "tdslab/history.hpp"
#include "tdslab/integrate.hpp"
#include "tdslab/mat2.hpp"
#include "tdslab/real.hpp"
#include "tdslab/signal.hpp"

#include <array>
#include <filesystem>
#include <vector>

namespace tdslab {

using Vec4 = std::array<real, 4>;

/// Saturation to [0, 1].
real phi(real s);

/// (1 + |x|^2) (phi(u) A1 + (1 - phi(u)) A0) x
Vec2 g(const Vec2& x, real u);

/// History value for t <= 0, z0(0) e^{-t} afterwards. Throws std::domain_error
/// before the start of the history.
real z_eval(const HistoryFn& z0, real t);

/// Initial histories (x1, x2, z1, z2) of the delay system on [-2, 0].
struct InitialState {
    HistoryFn x1, x2, z1, z2;

    static InitialState zero();
    /// Throws std::invalid_argument unless all four channels cover [-2, 0].
    void validate() const;
    /// sup over [-2, 0] of the Euclidean norm of the stacked 4-vector.
    real norm() const;
    /// sup over [-2, 0] of |(x1, x2)|.
    real x_norm() const;
    Vec4 at(real t) const;

    /// Files x1.hist, x2.hist, z1.hist, z2.hist inside `dir`.
    void write_dir(const std::filesystem::path& dir) const;
    static InitialState read_dir(const std::filesystem::path& dir);

    bool operator==(const InitialState&) const = default;
};

struct Params {
    real c = 1;
    static constexpr real delay1 = 1;
    static constexpr real delay2 = 2;
    void validate() const;
};

/// Solution of the delay system on [-2, horizon].
class SolutionBundle {
public:
    SolutionBundle() = default;
    /// `traj` carries (x1, x2) or, for the full delayed integration,
    /// (x1, x2, z1, z2).
    SolutionBundle(InitialState init, Params p, real horizon, DenseTrajectory traj, std::vector<real> breakpoints);

    const InitialState& initial() const { return init_; }
    const Params& params() const { return p_; }
    real horizon() const { return horizon_; }
    const DenseTrajectory& trajectory() const { return traj_; }
    /// Times where the right-hand side has a kink or jump.
    const std::vector<real>& breakpoints() const { return breaks_; }

    /// Throws std::domain_error outside [-2, horizon].
    Vec4 state(real t) const;
    real norm(real t) const;
    Vec2 x(real t) const;

private:
    InitialState init_;
    Params p_;
    real horizon_ = 0;
    DenseTrajectory traj_;
    std::vector<real> breaks_;
};

/// Cascade integration: z channels in closed form, x by the adaptive
/// integrator on the resulting nonautonomous planar field.
SolutionBundle simulate(const InitialState& x0, const Params& p, real horizon, const StepControl& ctrl);

/// All four channels by the method of steps with lags 1 and 2.
SolutionBundle simulate_dde(const InitialState& x0, const Params& p, real horizon, const StepControl& ctrl);

/// w' = c (1 + |w|^2) (u A1 + (1 - u) A0) w from t0 to t1 (either direction),
/// stopping when |w| reaches `cap`.
EventResult w_simulate(const Vec2& w0, const InputSignal& u, real c, real t0, real t1, const StepControl& ctrl,
                       real cap);

/// First time in [t_from, t_max()] at which the trajectory norm reaches
/// `threshold`, refined by bisection on the dense output.
std::optional<real> first_norm_crossing(const DenseTrajectory& traj, real threshold, real t_from);

}  // namespace tdslab
