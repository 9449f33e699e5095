#pragma once

#include "lqmfg/coefficients.hpp"
#include "lqmfg/field.hpp"
#include "lqmfg/meanflow.hpp"
#include "lqmfg/riccati.hpp"
#include "lqmfg/time_grid.hpp"
#include "lqmfg/trajectory.hpp"

#include <string>
#include <vector>

namespace lqmfg {

enum class CheckStatus { Pass, Fail, Skipped };

const char* to_string(CheckStatus s);

struct CheckResult {
    std::string name;
    CheckStatus status = CheckStatus::Skipped;
    double worst_margin = 0.0;  // most-violating (value - bound); <= 0 passes
    double tolerance = 0.0;
    std::string location;  // node/probe/level of the worst margin
    std::string reason;    // machine-readable skip reason, empty otherwise
    std::vector<std::string> notes;
};

struct VerificationReport {
    std::string config_digest;
    std::vector<CheckResult> checks;

    bool pass() const;  // all non-skipped checks pass
    const CheckResult* find(const std::string& name) const;
};

/// Discrete residuals of the constrained FBSDE: the forward defect of dX^inf
/// against its stated drift and the backward defect of Y increments against
/// the integrated driver (martingale parts vanish). Both are trapezoidal
/// defects per unit time over consecutive nodes with t <= T - eps_T, and must
/// stay below C*(dt_max^2 + 1/L_max) with C calibrated on the zero-coupling
/// closed form.
CheckResult check_constrained_fbsde_residual(const TrajectoryBundle& limit,
                                             const CoefficientSet& c, const TimeGrid& g,
                                             double L_max, double calib_factor = 4.0);

/// E[Y X] and E[Y] E[X] must decrease monotonically (1e-9 slack) over the
/// last decile of nodes and end below final_ratio of their t = 0 values.
CheckResult check_product_decay(const TrajectoryBundle& limit, const TimeGrid& g,
                                double mono_slack = 1e-9, double final_ratio = 1e-3);

/// Cross-check Psi from its ODE against the central finite difference of
/// Phi(t, .) (two restarts, step fd_step) at the given (t, nu) probes;
/// tolerance max(1e-4, 1e-2 |Psi|).
struct SlopeProbe {
    double t = 0.0;
    double nu = 0.0;
};
CheckResult check_phi_slope_crosscheck(const CoefficientSet& c, double L, const RiccatiPath& p,
                                       const TimeGrid& g, const std::vector<SlopeProbe>& probes,
                                       double fd_step = 1e-4);

/// Everything the suite needs beyond the coefficient set.
struct SuiteInputs {
    std::vector<double> ladder_levels;
    InitialLaw law;
    FieldProbeSet probes;        // empty members -> defaults
    unsigned threads = 1;
    std::string config_digest;   // stamped into the report
    SolveOptions solve;
    double envelope_slack_rel = 1e-6;
    double mono_P_tol = 1e-9;
    double mono_u_tol = 1e-8;
    double mono_nu_tol = 1e-9;
    double u_nonneg_tol = 1e-10;
    double pinned_zero_tol = 0.0;
    double traj_shape_tol = 1e-10;
    double feedback_tol = 1e-6;
    double decay_slope_band = 0.15;
    double terminal_factor = 10.0;
    double cost_sandwich_rel = 1e-3;
    double product_final_ratio = 1e-3;
    double residual_calib_factor = 4.0;
    double phi_fd_step = 1e-4;
};

/// Execute, in order: assumption validation; Riccati envelopes +
/// L-monotonicity; Psi envelopes; BVP residuals; u-ladder monotonicity,
/// nonnegativity and pinned zero; trajectory shape invariants; terminal decay
/// fit; cost monotonicity; constrained residual; product decay; Phi-slope
/// cross-check. Property failures never abort; an assumption failure marks
/// all downstream checks skipped.
VerificationReport run_full_suite(const CoefficientSet& c, const SuiteInputs& in,
                                  const TimeGrid& g);

}  // namespace lqmfg
