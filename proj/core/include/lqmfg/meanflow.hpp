#pragma once

#include "lqmfg/coefficients.hpp"
#include "lqmfg/riccati.hpp"
#include "lqmfg/time_grid.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace lqmfg {

/// Deterministic mean-field curves for one penalty level: the mean state nu,
/// the mean adjoint m = E[Y], the decoupling offset phi = m - P*nu (so
/// phi_T = 0), and the slope process Psi = P + Phi_nu.
struct MeanFlow {
    double L = 0.0;
    std::vector<double> nu, m, phi, psi;        // per node
    std::vector<double> nu_mid, m_mid, phi_mid; // per interval
    double shooting_residual = 0.0;             // |m_T - L*nu_T|

    double nu_at(const TimeGrid& g, double t) const;
    double m_at(const TimeGrid& g, double t) const;
    double phi_at(const TimeGrid& g, double t) const;
};

enum class BvpMethod {
    Shooting,       // safeguarded secant on m_0, Picard fallback if it stalls
    Picard,         // damped fixed-point iteration (relaxation 0.5)
    ShootingStrict  // shooting only; ConvergenceError instead of fallback
};

/// Solve the coupled forward-backward mean system
///   dnu = [A nu - B^2 R^-1 m - B h(rho(-R^-1 B m)) + f(nu) + b(rho(-R^-1 B m))] dt
///   dm  = -[A m + Q nu + Q l(nu)] dt
/// from nu_0 = mean0 with terminal coupling m_T = L nu_T, then derive phi and
/// integrate the Psi comparison ODE backward from Psi_T = L along the solved
/// curves. Residual tolerance: tol_rel * max(1, L|nu_T|).
MeanFlow solve_mean_bvp(const CoefficientSet& c, double L, double mean0, const RiccatiPath& p,
                        const TimeGrid& g, BvpMethod method = BvpMethod::Shooting,
                        double tol_rel = 1e-9, double tol_rho = 1e-12, double step_rel = 1e-10);

/// Psi comparison envelopes (hatPsi, barPsi) with
///   K3 = K^2/delta + (K^2+K^3)/(delta eps0),
///   K4 = 2K^3/delta + K + K^2,  K5 = delta^2/(2K);
/// hatPsi has the hatP functional form with K3, barPsi the barP form with
/// (K4, K5). barPsi throws DomainError for L <= sqrt(K4/K5).
double lower_envelope_hatPsi(const CoefficientSet& c, double L, double t);
double upper_envelope_barPsi(const CoefficientSet& c, double L, double t);
double barPsi_level_threshold(const CoefficientSet& c);
std::pair<double, double> psi_envelopes(const CoefficientSet& c, double L, double t);

/// Envelope report for the Psi path (same slack convention as the Riccati
/// envelope check).
BoundReport check_psi_envelope(const MeanFlow& mf, const CoefficientSet& c, const TimeGrid& g,
                               double slack_rel = 1e-6);

/// Phi^L(t0, nu0): restart the BVP at (t0, nu0) on the sub-grid and return
/// m_{t0} - P_{t0} nu0. Requires t0 <= T - eps_T.
double phi_decoupling(const CoefficientSet& c, double L, double t0, double nu0,
                      const RiccatiPath& p, const TimeGrid& g);

/// Slope process along the flow restarted at (t0, nu0):
/// Psi(t0) = P_{t0} + Phi_nu(t0, nu0). For (0, mean0) this equals the main
/// flow's psi[0].
double psi_at_restart(const CoefficientSet& c, double L, double t0, double nu0,
                      const RiccatiPath& p, const TimeGrid& g);

}  // namespace lqmfg
