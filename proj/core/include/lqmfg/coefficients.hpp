#pragma once

#include "lqmfg/time_grid.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lqmfg {

/// Deterministic time-indexed coefficient (A, B, Q, R): constant or affine in t.
class TimeFn {
public:
    static TimeFn constant(double value);
    static TimeFn affine(double value_at_0, double slope);

    double operator()(double t) const { return value_ + slope_ * t; }
    bool is_constant() const { return slope_ == 0.0; }
    double value0() const { return value_; }
    double slope() const { return slope_; }

private:
    TimeFn(double v, double s) : value_(v), slope_(s) {}
    double value_ = 0.0;
    double slope_ = 0.0;
};

/// Mean-field coupling (f, b, l, h): parametric catalog with closed-form
/// x-derivatives, plus a tabulated escape hatch with central finite
/// differences (relative step 1e-5).
///
/// Families:
///   zero            g(x) = 0
///   linear          g(x) = gain*x
///   saturating      g(x) = gain*scale*tanh(x/scale)
///   clipped_cubic   g(x) = gain*(x - x^3/(3 scale^2)) for |x| <= scale,
///                   constant continuation beyond (C^1, slope clipped to 0)
///   tabulated       bilinear in (t, x) over a rectangular table
class CouplingFn {
public:
    static CouplingFn zero();
    static CouplingFn linear(double gain);
    static CouplingFn saturating(double gain, double scale);
    static CouplingFn clipped_cubic(double gain, double scale);
    static CouplingFn tabulated(std::vector<double> times, std::vector<double> points,
                                std::vector<std::vector<double>> values);

    double value(double t, double x) const;
    double slope(double t, double x) const;  // d/dx
    bool is_zero() const { return family_ == Family::Zero; }
    const std::string& family_name() const;

private:
    enum class Family { Zero, Linear, Saturating, ClippedCubic, Tabulated };
    CouplingFn(Family f, double gain, double scale) : family_(f), gain_(gain), scale_(scale) {}
    Family family_ = Family::Zero;
    double gain_ = 0.0;
    double scale_ = 1.0;
    std::vector<double> tab_t_, tab_x_;
    std::vector<std::vector<double>> tab_v_;
    double tab_value(double t, double x) const;
};

/// Model data of the game: state/cost coefficients, couplings, and the
/// constants (K, delta, eps0) bounding them.
struct CoefficientSet {
    TimeFn A = TimeFn::constant(0.0);
    TimeFn B = TimeFn::constant(1.0);
    TimeFn Q = TimeFn::constant(1.0);
    TimeFn R = TimeFn::constant(1.0);
    CouplingFn f = CouplingFn::zero();
    CouplingFn b = CouplingFn::zero();
    CouplingFn l = CouplingFn::zero();
    CouplingFn h = CouplingFn::zero();
    double K = 1.0;
    double delta = 1.0;
    double eps0 = 1.0;
    double T = 1.0;

    /// True when the control-side couplings vanish, in which case the
    /// population response map is the identity and rho-inversion is skipped.
    bool control_coupling_free() const { return h.is_zero() && b.is_zero(); }
};

/// Initial distribution of xi: a finite sample cloud plus its mean.
struct InitialLaw {
    std::vector<double> samples;
    double mean = 0.0;
    std::uint64_t seed = 0;

    static InitialLaw from_samples(std::vector<double> samples, std::uint64_t seed = 0);
    static InitialLaw uniform(double low, double high, std::size_t count, std::uint64_t seed);
    static InitialLaw mean_only(double mean);
};

/// Rectangular probe cloud for the sampled verification of assumption (H).
struct AssumptionProbes {
    std::vector<double> times;
    std::vector<double> points;  // x values, symmetric around 0

    /// Default 101x101 grid on [0,T] x [-xbar, xbar].
    static AssumptionProbes make_default(double T, double xbar);
};

struct ClauseResult {
    std::string clause;
    bool pass = true;
    double worst_margin = 0.0;  // most-violating value of (quantity - bound); <= 0 passes
    double worst_t = 0.0;
    double worst_x = 0.0;
};

struct ValidationReport {
    std::vector<ClauseResult> clauses;
    bool pass = false;
    /// Pointwise conditions can only be sampled for black-box coefficients.
    std::string note = "sampled verification";

    const ClauseResult* find(const std::string& clause) const;
};

/// Check every clause of assumption (H)(i)-(iv) on the probe cloud.
/// (H)(i) is evaluated when a law is supplied, otherwise reported as a
/// passing no-op clause. Throws DomainError on empty probes and NumericError
/// on non-finite coefficient evaluations (naming the probe).
ValidationReport validate_assumptions(const CoefficientSet& c, const AssumptionProbes& probes,
                                      const InitialLaw* law = nullptr);

/// rho(t, a): the inverse of the population response map m -> m + h(t, m).
/// Safeguarded Newton with a geometrically widened bisection bracket around
/// [a - K|a| - 1, a + K|a| + 1]; absolute tolerance tol on the defect.
double invert_population_response(const CoefficientSet& c, double t, double a, double tol = 1e-12);

/// Same solver with a warm-start hint (used inside integrators where the
/// argument drifts slowly between calls).
double invert_population_response(const CoefficientSet& c, double t, double a, double tol,
                                  double hint);

}  // namespace lqmfg
