#pragma once

#include "lqmfg/coefficients.hpp"
#include "lqmfg/field.hpp"
#include "lqmfg/meanflow.hpp"
#include "lqmfg/riccati.hpp"
#include "lqmfg/time_grid.hpp"

#include <optional>
#include <vector>

namespace lqmfg {

/// Per-sample optimal paths for one penalty level (or the constrained limit).
///
/// Y is the feedback value P X + phi by construction; Z and Z^0 vanish
/// identically under deterministic coefficients and F_0-measurable xi and are
/// not stored.
struct TrajectoryBundle {
    std::optional<double> L;  // nullopt marks the limit bundle
    std::vector<double> samples;
    std::vector<std::vector<double>> X;      // [sample][node]
    std::vector<std::vector<double>> X_mid;  // [sample][interval]
    std::vector<std::vector<double>> Y;
    std::vector<std::vector<double>> alpha;
    std::vector<double> X_mean, Y_mean, alpha_mean;  // per node
    std::vector<double> terminal_state;              // X_T per sample

    // limit-bundle certificates
    double cauchy_gap_paths = 0.0;  // sup-norm gap between the top two levels
    double u_bound = 0.0;           // realized sup |Y|
    double tol_terminal = 0.0;      // 10 * u_bound / L_max

    std::size_t sample_count() const { return samples.size(); }
};

/// Integrate the per-sample closed-loop state equation
///   dX = [A X - B^2 R^-1 Y - B h(rho(-R^-1 B m)) + f(nu) + b(rho(-R^-1 B m))] dt
/// with Y_t = P_t X_t + phi_t and control
///   alpha_t = -R^-1 B Y_t - h(rho(-R^-1 B m_t)).
/// All inputs must be solved on the same grid; samples must be nonnegative.
TrajectoryBundle simulate_level(const CoefficientSet& c, double L, const InitialLaw& law,
                                const RiccatiPath& p, const MeanFlow& mf, const TimeGrid& g,
                                unsigned threads = 1);

/// Constrained limit objects (X^inf, Y^inf, alpha^inf) from a solved ladder
/// with L_max >= 1e4: the top level's feedback drives the paths, alpha_T is
/// pinned to 0, and the sup-norm gap against the second-largest level is
/// attached as the convergence certificate. Throws DomainError if any
/// per-sample X_T exceeds tol_terminal = terminal_factor * u_bound / L_max.
TrajectoryBundle build_constrained_solution(const CoefficientSet& c, const PenaltyLadder& ladder,
                                            const InitialLaw& law, const TimeGrid& g,
                                            unsigned threads = 1, double terminal_factor = 10.0);

struct CostReport {
    std::vector<double> per_sample;  // realized cost J per sample
    double expectation = 0.0;
    double running_expectation = 0.0;  // without the terminal penalty
    double penalty_expectation = 0.0;  // (L/2) E[X_T^2]; zero for limit bundles
};

/// Trapezoidal quadrature of (1/2) [Q (X + l(nu))^2 + R (alpha + h(mu))^2]
/// with mu_t = rho(-R^-1 B m_t), plus (L/2) X_T^2 for finite-L bundles.
CostReport evaluate_costs(const TrajectoryBundle& bundle, const CoefficientSet& c,
                          const MeanFlow& mf, const TimeGrid& g);

}  // namespace lqmfg
