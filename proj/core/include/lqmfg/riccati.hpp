#pragma once

#include "lqmfg/coefficients.hpp"
#include "lqmfg/time_grid.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace lqmfg {

/// Backward Riccati solution P^L on a grid: values at nodes and interval
/// midpoints; piecewise-linear interpolation between stored abscissae.
struct RiccatiPath {
    double L = 0.0;
    std::vector<double> values;  // per node; values.back() == L exactly
    std::vector<double> mids;    // per interval

    double value_at(const TimeGrid& g, double t) const;
};

/// Solve dP = (B^2 R^-1 P^2 - 2 A P - Q) dt backward from P_T = L.
///
/// Classical RK4 over the grid intervals with automatic bisection of any step
/// whose half-step disagreement exceeds step_rel_tol. For L above the
/// stabilization threshold the reciprocal variable 1/P is integrated over the
/// last 5% of the horizon and inverted.
RiccatiPath solve_riccati(const CoefficientSet& c, double L, const TimeGrid& g,
                          double step_rel_tol = 1e-10);

/// Closed-form comparison envelopes from the uniform-bound lemma.
/// hatP_t = (e^{2K(T-t)}/L + (K^2/delta)(T-t)(e^{2K(T-t)}-1)/(2K(T-t)))^-1
double lower_envelope_hatP(const CoefficientSet& c, double L, double t);

/// barP_t = sqrt(K1/K2)(1 + 2/((1 + 2(L sqrt(K2/K1) - 1)^-1) e^{2 sqrt(K1 K2)(T-t)} - 1))
/// with K1 = K + 2K^3/delta^2, K2 = delta^2/(2K). Throws DomainError when
/// L sqrt(K2/K1) <= 1 (the formula requires L above sqrt(K1/K2)).
double upper_envelope_barP(const CoefficientSet& c, double L, double t);

/// Smallest L for which the barP formula is defined.
double barP_level_threshold(const CoefficientSet& c);

struct BoundReport {
    bool pass = true;
    bool upper_skipped = false;
    std::string skip_reason;
    /// Most-violating values of (bound - value) resp. (value - bound); a
    /// positive margin beyond slack is a failure.
    double worst_lower_margin = 0.0;
    double worst_upper_margin = 0.0;
    std::size_t worst_lower_node = 0;
    std::size_t worst_upper_node = 0;
    std::size_t nodes_checked = 0;
};

/// Assert hatP_t - slack <= P_t <= barP_t + slack at every node with
/// t <= T - eps_T, slack = slack_rel*(1 + |P_t|). Failures are carried in the
/// report, never thrown. The upper check is skipped (with reason) for L below
/// the barP domain threshold.
BoundReport check_riccati_envelope(const RiccatiPath& p, const CoefficientSet& c, const TimeGrid& g,
                                   double slack_rel = 1e-6);

}  // namespace lqmfg
