#pragma once

#include "lqmfg/coefficients.hpp"
#include "lqmfg/meanflow.hpp"
#include "lqmfg/riccati.hpp"
#include "lqmfg/time_grid.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace lqmfg {

/// One solved penalty level.
struct LevelSolution {
    double L = 0.0;
    RiccatiPath riccati;
    MeanFlow mean;
    BoundReport riccati_envelope;
    BoundReport psi_envelope;
};

/// The discretized penalty ladder: strictly increasing levels, all solved on
/// one shared grid.
struct PenaltyLadder {
    TimeGrid grid;
    double mean0 = 0.0;
    std::vector<LevelSolution> levels;  // ascending in L

    const LevelSolution& top() const { return levels.back(); }
    const LevelSolution& find(double L) const;  // throws ConfigError if absent
};

/// Default ladder {10^0, ..., 10^6}.
std::vector<double> default_ladder_levels();

/// Solver-side tolerances threaded through ladder solves.
struct SolveOptions {
    double step_rel = 1e-10;  // half-step disagreement triggering bisection
    double shoot_rel = 1e-9;  // shooting residual, relative to max(1, L|nu_T|)
    double rho = 1e-12;       // population-response inversion tolerance
};

/// Decoupling field u^L(t, x, nu) = P^L_t x + Phi^L(t, nu). The nu-offset is
/// obtained by restarting the mean BVP at (t, nu) unless nu coincides with the
/// level's own mean path at t (then the stored phi is used). Requires
/// t <= T - eps_T for nu != 0.
double eval_uL(const CoefficientSet& c, const LevelSolution& level, const TimeGrid& g, double t,
               double x, double nu);

/// Solve every level (in parallel when threads > 1) and attach envelope
/// reports. Levels must be strictly increasing and positive. A level's solve
/// error aborts the ladder; previously solved levels are preserved in the
/// exception-safe partial result output when provided.
PenaltyLadder run_ladder(const CoefficientSet& c, const std::vector<double>& levels, double mean0,
                         const TimeGrid& g, unsigned threads = 1,
                         PenaltyLadder* partial_out = nullptr, const SolveOptions& opts = {});

/// Probe cloud for the limit-field estimate.
struct FieldProbeSet {
    std::vector<double> times;  // all <= T - eps_T
    std::vector<double> xs;
    std::vector<double> nus;

    /// Tensor grid {0, T/4, T/2, 3T/4, T-eps_T} x {0, 1/2, 1, 2} x {0, 1/2, 1, 2}.
    static FieldProbeSet make_default(const TimeGrid& g);
};

struct FieldProbeValue {
    double t = 0.0, x = 0.0, nu = 0.0;
    std::vector<double> u_per_level;  // aligned with ladder levels
    double u_limit = 0.0;             // largest level
    double cauchy_gap = 0.0;          // |u(L_max) - u(L_max_prev)|
    /// The paper proves bounds and monotonicity for x, nu > 0 only; x = 0
    /// columns with nu > 0 are evaluated but carry this marker instead of
    /// hard assertions.
    bool outside_proved_region = false;
};

/// Pointwise limit estimate with a Cauchy-gap certificate.
struct LimitField {
    std::vector<FieldProbeValue> probes;
    double cauchy_gap = 0.0;  // max over probes
    std::vector<double> p_inf_tail;  // P^{L_max} over the last decile of nodes

    const FieldProbeValue* find(double t, double x, double nu) const;
};

/// Estimate u^infinity over the probe set from a solved ladder (>= 3 levels).
/// Asserts monotone non-decreasing u across levels at every probe inside the
/// proved region (violation beyond mono_tol throws PropertyError naming the
/// probe: an implementation bug, not user error).
LimitField estimate_u_infinity(const CoefficientSet& c, const PenaltyLadder& ladder,
                               const FieldProbeSet& probes, double mono_tol = 1e-8,
                               unsigned threads = 1);

}  // namespace lqmfg
