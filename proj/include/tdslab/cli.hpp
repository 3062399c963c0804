#pragma once

#include "tdslab/construct.hpp"
#include "tdslab/integrate.hpp"
#include "tdslab/keyvalue.hpp"
#include "tdslab/system.hpp"
#include "tdslab/verify.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace tdslab::cli {

enum ExitCode : int { exit_pass = 0, exit_fail = 1, exit_inconclusive = 2, exit_usage = 3 };

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "TDSLAB_OUT_DIR";

struct RunConfig {
    real rel_tol = 1e-10L;
    real abs_tol = 1e-12L;
    real dwell_min = 0.01L;
    real cap = 1e8L;
    real delta0 = 1e-3L;
    std::uint64_t seed = 20240601;
    std::filesystem::path out_dir = "tdslab_out";

    /// Defaults, with out_dir taken from the environment when set.
    static RunConfig defaults();
    /// Overrides fields present in `doc`; unknown keys are rejected.
    void apply(const KeyValueDoc& doc);
    /// Throws std::invalid_argument when an invariant is broken.
    void validate() const;

    StepControl ctrl() const;
    EscapeOptions escape() const;
    Lemma1Options lemma1() const;
    CheckOptions check() const;
};

/// Uniform grid with `spacing` over [0, horizon] merged with the solution's
/// breakpoints, sorted and deduplicated.
std::vector<real> output_grid(const SolutionBundle& sol, real spacing);

/// Header `t,x1,x2,z1,z2,norm` and one row per grid time.
std::string trajectory_csv(const SolutionBundle& sol, const std::vector<real>& grid);

/// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tdslab::cli
