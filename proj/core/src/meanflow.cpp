#include "lqmfg/meanflow.hpp"

#include "lqmfg/errors.hpp"
#include "lqmfg/numerics.hpp"
#include "march.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lqmfg {

namespace {

constexpr double kReciprocalThreshold = 1e6;
constexpr double kReciprocalWindow = 0.05;
constexpr int kMaxPicardIterations = 300;
constexpr double kPicardRelaxation = 0.5;

struct FlowCurves {
    std::vector<double> nu, m;          // per node
    std::vector<double> nu_mid, m_mid;  // per interval
    double residual = 0.0;              // |m_T - L nu_T|
};

/// Raw coupled (nu, m) system used by the shooting passes; rho is warm-started
/// between stage evaluations.
struct CoupledRhs {
    const CoefficientSet* c;
    double tol_rho;
    mutable double mu_hint = 0.0;

    std::array<double, 2> operator()(double t, const std::array<double, 2>& y) const {
        const double nu = y[0], m = y[1];
        const double A = c->A(t), B = c->B(t), Q = c->Q(t), R = c->R(t);
        double hterm = 0.0, bterm = 0.0;
        if (!c->control_coupling_free()) {
            const double mu = invert_population_response(*c, t, -B / R * m, tol_rho, mu_hint);
            mu_hint = mu;
            hterm = c->h.value(t, mu);
            bterm = c->b.value(t, mu);
        }
        return {A * nu - B * B / R * m - B * hterm + c->f.value(t, nu) + bterm,
                -(A * m + Q * nu + Q * c->l.value(t, nu))};
    }
};

FlowCurves integrate_coupled(const CoefficientSet& c, const TimeGrid& g, double nu0, double m0,
                             double L, const num::StepOptions& opt, double tol_rho) {
    const std::size_t n = g.size();
    FlowCurves fc;
    fc.nu.assign(n, 0.0);
    fc.m.assign(n, 0.0);
    fc.nu_mid.assign(n - 1, 0.0);
    fc.m_mid.assign(n - 1, 0.0);
    fc.nu[0] = nu0;
    fc.m[0] = m0;
    CoupledRhs rhs{&c, tol_rho, 0.0};
    detail::march_forward<2>(g, {nu0, m0}, rhs, opt,
                             [&](std::size_t i, const std::array<double, 2>& mid,
                                 const std::array<double, 2>& end) {
                                 fc.nu_mid[i] = mid[0];
                                 fc.m_mid[i] = mid[1];
                                 fc.nu[i + 1] = end[0];
                                 fc.m[i + 1] = end[1];
                             });
    fc.residual = std::abs(fc.m.back() - L * fc.nu.back());
    return fc;
}

double scaled_residual(const FlowCurves& fc, double L) {
    return (fc.m.back() - L * fc.nu.back()) / std::max(1.0, L * std::abs(fc.nu.back()));
}

/// Single shooting on m_0: geometric bracket expansion around the P_0 nu_0
/// guess, then safeguarded secant on the scaled terminal defect.
bool shoot(const CoefficientSet& c, const TimeGrid& g, double L, double nu0, double P0,
           double tol_rel, const num::StepOptions& opt, double tol_rho, FlowCurves& out,
           std::string* diag) {
    auto residual = [&](double m0) {
        out = integrate_coupled(c, g, nu0, m0, L, opt, tol_rho);
        return scaled_residual(out, L);
    };

    const double guess = P0 * nu0;
    double r_guess = residual(guess);
    if (std::abs(r_guess) <= tol_rel) return true;

    double lo = guess, hi = guess;
    double rlo = r_guess, rhi = r_guess;
    double width = 0.1 * std::max(1.0, std::abs(guess));
    bool bracketed = false;
    for (int i = 0; i < 80; ++i) {
        lo = guess - width;
        hi = guess + width;
        rlo = residual(lo);
        if (rlo * r_guess <= 0.0) {
            hi = guess;
            rhi = r_guess;
            bracketed = true;
            break;
        }
        rhi = residual(hi);
        if (rhi * r_guess <= 0.0) {
            lo = guess;
            rlo = r_guess;
            bracketed = true;
            break;
        }
        if (rlo * rhi <= 0.0) {
            bracketed = true;
            break;
        }
        width *= 2.0;
    }
    if (!bracketed) {
        if (diag) *diag = "shooting bracket not found after geometric widening";
        return false;
    }

    std::vector<std::pair<double, double>> trace;
    const double root =
        num::secant_bisect(residual, lo, hi, rlo, rhi, tol_rel, 120, &trace);
    if (std::isnan(root)) {
        if (diag) {
            std::ostringstream os;
            os << "shooting stalled; residual curve:";
            for (const auto& [x, r] : trace) os << " (" << x << ", " << r << ")";
            *diag = os.str();
        }
        return false;
    }
    if (std::abs(scaled_residual(out, L)) > tol_rel) out = integrate_coupled(c, g, nu0, root, L, opt, tol_rho);
    return std::abs(scaled_residual(out, L)) <= tol_rel;
}

/// Damped Picard iteration in the decoupled offset phi = m - P nu, which is
/// stable uniformly in L (the P-feedback damping in the forward pass cancels
/// the L-amplification of the terminal coupling). phi_T = 0 by construction.
bool picard(const CoefficientSet& c, const TimeGrid& g, double L, double nu0,
            const RiccatiPath& p, const TimeGrid& main_g, double tol_rel,
            const num::StepOptions& opt, double tol_rho, FlowCurves& out, std::string* diag) {
    const std::size_t n = g.size();
    std::vector<double> phi(n, 0.0), phi_mid(n - 1, 0.0);

    detail::CurveView phi_view{&g, &phi, &phi_mid};
    auto P_at = [&](double t) { return p.value_at(main_g, t); };

    FlowCurves fc;
    double prev_change = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < kMaxPicardIterations; ++iter) {
        // forward nu under feedback m = P nu + phi^k
        fc.nu.assign(n, 0.0);
        fc.nu_mid.assign(n - 1, 0.0);
        fc.nu[0] = nu0;
        struct {
            const CoefficientSet* c;
            decltype(P_at)* P;
            detail::CurveView* phi;
            double tol_rho;
            mutable double mu_hint = 0.0;
            std::array<double, 1> operator()(double t, const std::array<double, 1>& y) const {
                const double nu = y[0];
                const double A = c->A(t), B = c->B(t), R = c->R(t);
                const double m = (*P)(t)*nu + (*phi)(t);
                double hterm = 0.0, bterm = 0.0;
                if (!c->control_coupling_free()) {
                    const double mu = invert_population_response(*c, t, -B / R * m, tol_rho, mu_hint);
                    mu_hint = mu;
                    hterm = c->h.value(t, mu);
                    bterm = c->b.value(t, mu);
                }
                return {A * nu - B * B / R * m - B * hterm + c->f.value(t, nu) + bterm};
            }
        } nu_rhs{&c, &P_at, &phi_view, tol_rho};
        detail::march_forward<1>(g, {nu0}, nu_rhs, opt,
                                 [&](std::size_t i, const std::array<double, 1>& mid,
                                     const std::array<double, 1>& end) {
                                     fc.nu_mid[i] = mid[0];
                                     fc.nu[i + 1] = end[0];
                                 });

        // backward m from m_T = L nu_T given the fresh nu curve
        fc.m.assign(n, 0.0);
        fc.m_mid.assign(n - 1, 0.0);
        fc.m.back() = L * fc.nu.back();
        detail::CurveView nu_view{&g, &fc.nu, &fc.nu_mid};
        auto m_rhs = [&](double t, const std::array<double, 1>& y) {
            const double nu = nu_view(t);
            return std::array<double, 1>{-(c.A(t) * y[0] + c.Q(t) * nu + c.Q(t) * c.l.value(t, nu))};
        };
        detail::march_backward<1>(g, {fc.m.back()}, m_rhs, opt,
                                  [&](std::size_t i, const std::array<double, 1>& mid,
                                      const std::array<double, 1>& start) {
                                      fc.m_mid[i] = mid[0];
                                      fc.m[i] = start[0];
                                  });

        // relaxed offset update
        double change = 0.0;
        double scale = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double target = fc.m[i] - P_at(g.node(i)) * fc.nu[i];
            change = std::max(change, std::abs(target - phi[i]));
            scale = std::max(scale, std::abs(fc.m[i]));
            phi[i] = (1.0 - kPicardRelaxation) * phi[i] + kPicardRelaxation * target;
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double target = fc.m_mid[i] - P_at(g.mid(i)) * fc.nu_mid[i];
            phi_mid[i] = (1.0 - kPicardRelaxation) * phi_mid[i] + kPicardRelaxation * target;
        }

        fc.residual = std::abs(fc.m.back() - L * fc.nu.back());
        if (change <= 1e-13 * scale) {
            out = fc;
            return true;
        }
        if (iter > 50 && change > 10.0 * prev_change) break;  // diverging
        prev_change = change;
    }
    if (diag) *diag = "Picard iteration did not contract within the iteration cap";
    return false;
}

FlowCurves solve_curves(const CoefficientSet& c, double L, double nu0, const RiccatiPath& p,
                        const TimeGrid& main_g, const TimeGrid& g, BvpMethod method,
                        double tol_rel, const num::StepOptions& opt, double tol_rho) {
    const double P0 = p.value_at(main_g, g.node(0));
    FlowCurves fc;
    std::string diag;
    switch (method) {
        case BvpMethod::Picard: {
            if (picard(c, g, L, nu0, p, main_g, tol_rel, opt, tol_rho, fc, &diag)) return fc;
            throw ConvergenceError("solve_mean_bvp (picard): " + diag);
        }
        case BvpMethod::ShootingStrict: {
            if (shoot(c, g, L, nu0, P0, tol_rel, opt, tol_rho, fc, &diag)) return fc;
            throw ConvergenceError("solve_mean_bvp (shooting): " + diag);
        }
        case BvpMethod::Shooting: {
            if (shoot(c, g, L, nu0, P0, tol_rel, opt, tol_rho, fc, &diag)) return fc;
            std::string diag2;
            if (picard(c, g, L, nu0, p, main_g, tol_rel, opt, tol_rho, fc, &diag2)) return fc;
            throw ConvergenceError("solve_mean_bvp: " + diag + "; fallback " + diag2);
        }
    }
    throw ConvergenceError("solve_mean_bvp: unreachable");
}

/// Backward slope ODE dPsi = [G Psi^2 - 2 A Psi - Q(1 + l'(nu))] dt from
/// Psi_T = L along the solved curves; reciprocal variable near T for huge L.
std::vector<double> integrate_psi(const CoefficientSet& c, double L, const TimeGrid& g,
                                  const FlowCurves& fc, const num::StepOptions& opt,
                                  double tol_rho) {
    const std::size_t n = g.size();
    std::vector<double> psi(n, 0.0);
    psi[n - 1] = L;
    detail::CurveView nu_view{&g, &fc.nu, &fc.nu_mid};
    detail::CurveView m_view{&g, &fc.m, &fc.m_mid};

    double mu_hint = 0.0;
    auto G_and_q = [&](double t) {
        const double B = c.B(t), R = c.R(t);
        double G = B * B / R;
        if (!c.control_coupling_free()) {
            const double mu = invert_population_response(c, t, -B / R * m_view(t), tol_rho, mu_hint);
            mu_hint = mu;
            const double hp = c.h.slope(t, mu);
            G += B / R * (c.b.slope(t, mu) - B * hp) / (1.0 + hp);
        }
        const double q = c.Q(t) * (1.0 + c.l.slope(t, nu_view(t)));
        return std::pair<double, double>{G, q};
    };

    const bool use_reciprocal = L > kReciprocalThreshold;
    const double switch_time = g.horizon() * (1.0 - kReciprocalWindow);
    bool reciprocal = use_reciprocal;
    std::array<double, 1> state{reciprocal ? 1.0 / L : L};

    auto rhs_psi = [&](double t, const std::array<double, 1>& y) {
        const auto [G, q] = G_and_q(t);
        return std::array<double, 1>{G * y[0] * y[0] - 2.0 * c.A(t) * y[0] - q};
    };
    auto rhs_w = [&](double t, const std::array<double, 1>& y) {
        const auto [G, q] = G_and_q(t);
        return std::array<double, 1>{-G + 2.0 * c.A(t) * y[0] + q * y[0] * y[0]};
    };

    const auto& nodes = g.nodes();
    for (std::size_t i = n - 1; i-- > 0;) {
        if (reciprocal && nodes[i] < switch_time) {
            state[0] = 1.0 / state[0];
            reciprocal = false;
        }
        const auto step = reciprocal
                              ? num::rk4_interval<1>(rhs_w, nodes[i + 1], nodes[i] - nodes[i + 1],
                                                     state, opt)
                              : num::rk4_interval<1>(rhs_psi, nodes[i + 1], nodes[i] - nodes[i + 1],
                                                     state, opt);
        state = step.end;
        psi[i] = reciprocal ? 1.0 / state[0] : state[0];
        if (!std::isfinite(psi[i])) {
            std::ostringstream os;
            os << "psi integration lost finiteness at t = " << nodes[i] << " (L = " << L << ")";
            throw SingularityError(os.str());
        }
    }
    return psi;
}

}  // namespace

double MeanFlow::nu_at(const TimeGrid& g, double t) const {
    return detail::CurveView{&g, &nu, &nu_mid}(t);
}
double MeanFlow::m_at(const TimeGrid& g, double t) const {
    return detail::CurveView{&g, &m, &m_mid}(t);
}
double MeanFlow::phi_at(const TimeGrid& g, double t) const {
    return detail::CurveView{&g, &phi, &phi_mid}(t);
}

MeanFlow solve_mean_bvp(const CoefficientSet& c, double L, double mean0, const RiccatiPath& p,
                        const TimeGrid& g, BvpMethod method, double tol_rel, double tol_rho,
                        double step_rel) {
    if (!(L > 0.0)) throw DomainError("solve_mean_bvp: penalty level must be positive");
    if (!(mean0 >= 0.0)) throw DomainError("solve_mean_bvp: mean0 must be nonnegative");
    if (p.values.size() != g.size())
        throw ConfigError("solve_mean_bvp: Riccati path solved on a different grid");
    if (p.L != L) throw ConfigError("solve_mean_bvp: Riccati path solved for a different level");

    num::StepOptions opt;
    opt.rel_tol = step_rel;
    const FlowCurves fc = solve_curves(c, L, mean0, p, g, g, method, tol_rel, opt, tol_rho);

    MeanFlow mf;
    mf.L = L;
    mf.nu = fc.nu;
    mf.m = fc.m;
    mf.nu_mid = fc.nu_mid;
    mf.m_mid = fc.m_mid;
    mf.shooting_residual = fc.residual;
    mf.phi.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) mf.phi[i] = fc.m[i] - p.values[i] * fc.nu[i];
    mf.phi_mid.resize(g.size() - 1);
    for (std::size_t i = 0; i + 1 < g.size(); ++i)
        mf.phi_mid[i] = fc.m_mid[i] - p.mids[i] * fc.nu_mid[i];
    mf.psi = integrate_psi(c, L, g, fc, opt, tol_rho);
    return mf;
}

double lower_envelope_hatPsi(const CoefficientSet& c, double L, double t) {
    const double K3 = c.K * c.K / c.delta +
                      (c.K * c.K + std::pow(c.K, 3)) / (c.delta * c.eps0);
    const double tau = c.T - t;
    const double x = 2.0 * c.K * tau;
    return 1.0 / (std::exp(x) / L + K3 * tau * num::expm1_over_x(x));
}

double barPsi_level_threshold(const CoefficientSet& c) {
    const double K4 = 2.0 * std::pow(c.K, 3) / c.delta + c.K + c.K * c.K;
    const double K5 = c.delta * c.delta / (2.0 * c.K);
    return std::sqrt(K4 / K5);
}

double upper_envelope_barPsi(const CoefficientSet& c, double L, double t) {
    const double K4 = 2.0 * std::pow(c.K, 3) / c.delta + c.K + c.K * c.K;
    const double K5 = c.delta * c.delta / (2.0 * c.K);
    const double r = L * std::sqrt(K5 / K4);
    if (!(r > 1.0)) {
        std::ostringstream os;
        os << "barPsi undefined: requires L > " << std::sqrt(K4 / K5) << " (got L = " << L << ")";
        throw DomainError(os.str());
    }
    const double tau = c.T - t;
    const double expo = std::exp(2.0 * std::sqrt(K4 * K5) * tau);
    return std::sqrt(K4 / K5) * (1.0 + 2.0 / ((1.0 + 2.0 / (r - 1.0)) * expo - 1.0));
}

std::pair<double, double> psi_envelopes(const CoefficientSet& c, double L, double t) {
    return {lower_envelope_hatPsi(c, L, t), upper_envelope_barPsi(c, L, t)};
}

BoundReport check_psi_envelope(const MeanFlow& mf, const CoefficientSet& c, const TimeGrid& g,
                               double slack_rel) {
    BoundReport report;
    const double threshold = barPsi_level_threshold(c);
    const bool upper_ok = mf.L > threshold;
    if (!upper_ok) {
        report.upper_skipped = true;
        std::ostringstream os;
        os << "barPsi formula requires L > " << threshold;
        report.skip_reason = os.str();
    }
    const std::size_t last = g.last_checked_index();
    report.nodes_checked = last + 1;
    for (std::size_t i = 0; i <= last; ++i) {
        const double t = g.node(i);
        const double Psi = mf.psi[i];
        const double slack = slack_rel * (1.0 + std::abs(Psi));
        const double lower = lower_envelope_hatPsi(c, mf.L, t) - Psi;
        if (i == 0 || lower > report.worst_lower_margin) {
            report.worst_lower_margin = lower;
            report.worst_lower_node = i;
        }
        if (lower > slack) report.pass = false;
        if (upper_ok) {
            const double upper = Psi - upper_envelope_barPsi(c, mf.L, t);
            if (i == 0 || upper > report.worst_upper_margin) {
                report.worst_upper_margin = upper;
                report.worst_upper_node = i;
            }
            if (upper > slack) report.pass = false;
        }
    }
    return report;
}

double phi_decoupling(const CoefficientSet& c, double L, double t0, double nu0,
                      const RiccatiPath& p, const TimeGrid& g) {
    if (!(t0 <= g.horizon() - g.eps_T() + 1e-12 * g.horizon()))
        throw DomainError("phi_decoupling: restart time must satisfy t0 <= T - eps_T");
    if (!(nu0 >= 0.0)) throw DomainError("phi_decoupling: nu0 must be nonnegative");
    if (nu0 == 0.0) return 0.0;  // the flow restarted at zero is identically zero
    const TimeGrid sub = g.restarted_at(t0);
    num::StepOptions opt;
    const FlowCurves fc =
        solve_curves(c, L, nu0, p, g, sub, BvpMethod::Shooting, 1e-9, opt, 1e-12);
    return fc.m.front() - p.value_at(g, t0) * nu0;
}

double psi_at_restart(const CoefficientSet& c, double L, double t0, double nu0,
                      const RiccatiPath& p, const TimeGrid& g) {
    if (!(t0 <= g.horizon() - g.eps_T() + 1e-12 * g.horizon()))
        throw DomainError("psi_at_restart: restart time must satisfy t0 <= T - eps_T");
    const TimeGrid sub = g.restarted_at(t0);
    num::StepOptions opt;
    const FlowCurves fc =
        solve_curves(c, L, nu0, p, g, sub, BvpMethod::Shooting, 1e-9, opt, 1e-12);
    const std::vector<double> psi = integrate_psi(c, L, sub, fc, opt, 1e-12);
    return psi.front();
}

}  // namespace lqmfg
