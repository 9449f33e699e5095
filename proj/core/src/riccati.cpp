#include "lqmfg/riccati.hpp"

#include "lqmfg/errors.hpp"
#include "lqmfg/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lqmfg {

namespace {

constexpr double kReciprocalThreshold = 1e6;  // integrate 1/P near T above this L
constexpr double kReciprocalWindow = 0.05;    // fraction of the horizon

double riccati_rhs(const CoefficientSet& c, double t, double p) {
    const double B = c.B(t);
    return B * B / c.R(t) * p * p - 2.0 * c.A(t) * p - c.Q(t);
}

// dW/dt for W = 1/P: -B^2/R + 2 A W + Q W^2
double reciprocal_rhs(const CoefficientSet& c, double t, double w) {
    const double B = c.B(t);
    return -B * B / c.R(t) + 2.0 * c.A(t) * w + c.Q(t) * w * w;
}

}  // namespace

double RiccatiPath::value_at(const TimeGrid& g, double t) const {
    const auto& nodes = g.nodes();
    if (t <= nodes.front()) return values.front();
    if (t >= nodes.back()) return values.back();
    const std::size_t i = g.index_at_or_before(t);
    // stored abscissae are node, mid, node, ...: interpolate in the half-interval
    const double tm = g.mid(i);
    if (t <= tm) {
        const double w = (t - nodes[i]) / (tm - nodes[i]);
        return (1.0 - w) * values[i] + w * mids[i];
    }
    const double w = (t - tm) / (nodes[i + 1] - tm);
    return (1.0 - w) * mids[i] + w * values[i + 1];
}

RiccatiPath solve_riccati(const CoefficientSet& c, double L, const TimeGrid& g,
                          double step_rel_tol) {
    if (!(L > 0.0)) throw DomainError("solve_riccati: penalty level must be positive");

    const auto& nodes = g.nodes();
    const std::size_t n = nodes.size();
    RiccatiPath path;
    path.L = L;
    path.values.assign(n, 0.0);
    path.mids.assign(n - 1, 0.0);
    path.values[n - 1] = L;  // terminal pinning by assignment

    num::StepOptions opt;
    opt.rel_tol = step_rel_tol;

    const bool use_reciprocal = L > kReciprocalThreshold;
    const double switch_time = g.horizon() * (1.0 - kReciprocalWindow);

    bool reciprocal = use_reciprocal;
    std::array<double, 1> state{reciprocal ? 1.0 / L : L};

    auto rhs_p = [&](double t, const std::array<double, 1>& y) {
        return std::array<double, 1>{riccati_rhs(c, t, y[0])};
    };
    auto rhs_w = [&](double t, const std::array<double, 1>& y) {
        return std::array<double, 1>{reciprocal_rhs(c, t, y[0])};
    };

    for (std::size_t i = n - 1; i-- > 0;) {
        const double t_hi = nodes[i + 1];
        const double h = nodes[i] - t_hi;  // negative
        if (reciprocal && nodes[i] < switch_time) {
            // switch back to the direct variable at the interval boundary
            state[0] = 1.0 / state[0];
            reciprocal = false;
        }
        num::IntervalResult<1> step;
        try {
            step = reciprocal ? num::rk4_interval<1>(rhs_w, t_hi, h, state, opt)
                              : num::rk4_interval<1>(rhs_p, t_hi, h, state, opt);
        } catch (const SingularityError&) {
            std::ostringstream os;
            os << "solve_riccati: step-size underflow between t = " << nodes[i] << " and t = "
               << t_hi << " at L = " << L << "; refine the grid tail";
            throw SingularityError(os.str());
        }
        state = step.end;
        path.values[i] = reciprocal ? 1.0 / state[0] : state[0];
        path.mids[i] = reciprocal ? 1.0 / step.mid[0] : step.mid[0];
        if (!(path.values[i] > 0.0) || !std::isfinite(path.values[i])) {
            std::ostringstream os;
            os << "solve_riccati: lost positivity at t = " << nodes[i] << " (L = " << L << ")";
            throw SingularityError(os.str());
        }
    }
    return path;
}

double lower_envelope_hatP(const CoefficientSet& c, double L, double t) {
    const double tau = c.T - t;
    const double x = 2.0 * c.K * tau;
    const double denom = std::exp(x) / L + c.K * c.K / c.delta * tau * num::expm1_over_x(x);
    return 1.0 / denom;
}

double barP_level_threshold(const CoefficientSet& c) {
    const double K1 = c.K + 2.0 * std::pow(c.K, 3) / (c.delta * c.delta);
    const double K2 = c.delta * c.delta / (2.0 * c.K);
    return std::sqrt(K1 / K2);
}

namespace {

double bar_form(double K_hi, double K_lo, double L, double tau) {
    // sqrt(K_hi/K_lo) (1 + 2/((1 + 2(L sqrt(K_lo/K_hi) - 1)^-1) e^{2 sqrt(K_hi K_lo) tau} - 1))
    const double r = L * std::sqrt(K_lo / K_hi);
    if (!(r > 1.0)) {
        std::ostringstream os;
        os << "upper envelope undefined: requires L > " << std::sqrt(K_hi / K_lo)
           << " (got L = " << L << ")";
        throw DomainError(os.str());
    }
    const double expo = std::exp(2.0 * std::sqrt(K_hi * K_lo) * tau);
    return std::sqrt(K_hi / K_lo) * (1.0 + 2.0 / ((1.0 + 2.0 / (r - 1.0)) * expo - 1.0));
}

}  // namespace

double upper_envelope_barP(const CoefficientSet& c, double L, double t) {
    const double K1 = c.K + 2.0 * std::pow(c.K, 3) / (c.delta * c.delta);
    const double K2 = c.delta * c.delta / (2.0 * c.K);
    return bar_form(K1, K2, L, c.T - t);
}

BoundReport check_riccati_envelope(const RiccatiPath& p, const CoefficientSet& c,
                                   const TimeGrid& g, double slack_rel) {
    BoundReport report;
    const double threshold = barP_level_threshold(c);
    const bool upper_ok = p.L > threshold;
    if (!upper_ok) {
        report.upper_skipped = true;
        std::ostringstream os;
        os << "barP formula requires L > " << threshold;
        report.skip_reason = os.str();
    }
    const std::size_t last = g.last_checked_index();
    report.nodes_checked = last + 1;
    for (std::size_t i = 0; i <= last; ++i) {
        const double t = g.node(i);
        const double P = p.values[i];
        const double slack = slack_rel * (1.0 + std::abs(P));
        const double lower = lower_envelope_hatP(c, p.L, t) - P;  // > slack violates
        if (i == 0 || lower > report.worst_lower_margin) {
            report.worst_lower_margin = lower;
            report.worst_lower_node = i;
        }
        if (lower > slack) report.pass = false;
        if (upper_ok) {
            const double upper = P - upper_envelope_barP(c, p.L, t);
            if (i == 0 || upper > report.worst_upper_margin) {
                report.worst_upper_margin = upper;
                report.worst_upper_node = i;
            }
            if (upper > slack) report.pass = false;
        }
    }
    return report;
}

}  // namespace lqmfg
