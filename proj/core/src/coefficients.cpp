#include "lqmfg/coefficients.hpp"

#include "lqmfg/errors.hpp"
#include "lqmfg/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace lqmfg {

namespace {

constexpr double kClauseSlack = 1e-12;  // absorbs roundoff in closed inequalities
constexpr double kFdRelStep = 1e-5;     // tabulated-derivative step, relative

std::string probe_str(double t, double x) {
    std::ostringstream os;
    os << "(t=" << t << ", x=" << x << ")";
    return os.str();
}

}  // namespace

TimeFn TimeFn::constant(double value) { return TimeFn(value, 0.0); }
TimeFn TimeFn::affine(double value_at_0, double slope) { return TimeFn(value_at_0, slope); }

CouplingFn CouplingFn::zero() { return CouplingFn(Family::Zero, 0.0, 1.0); }
CouplingFn CouplingFn::linear(double gain) { return CouplingFn(Family::Linear, gain, 1.0); }

CouplingFn CouplingFn::saturating(double gain, double scale) {
    if (!(scale > 0.0)) throw ConfigError("saturating coupling: scale must be positive");
    return CouplingFn(Family::Saturating, gain, scale);
}

CouplingFn CouplingFn::clipped_cubic(double gain, double scale) {
    if (!(scale > 0.0)) throw ConfigError("clipped_cubic coupling: scale must be positive");
    return CouplingFn(Family::ClippedCubic, gain, scale);
}

CouplingFn CouplingFn::tabulated(std::vector<double> times, std::vector<double> points,
                                 std::vector<std::vector<double>> values) {
    if (times.size() < 2 || points.size() < 2)
        throw ConfigError("tabulated coupling: need at least a 2x2 table");
    if (values.size() != times.size())
        throw ConfigError("tabulated coupling: one value row per time required");
    for (const auto& row : values) {
        if (row.size() != points.size())
            throw ConfigError("tabulated coupling: ragged value rows");
    }
    if (!std::is_sorted(times.begin(), times.end()) || !std::is_sorted(points.begin(), points.end()))
        throw ConfigError("tabulated coupling: abscissae must be sorted");
    CouplingFn fn(Family::Tabulated, 0.0, 1.0);
    fn.tab_t_ = std::move(times);
    fn.tab_x_ = std::move(points);
    fn.tab_v_ = std::move(values);
    return fn;
}

double CouplingFn::tab_value(double t, double x) const {
    auto locate = [](const std::vector<double>& a, double v) {
        auto it = std::upper_bound(a.begin(), a.end(), v);
        std::size_t hi = static_cast<std::size_t>(std::distance(a.begin(), it));
        hi = std::clamp<std::size_t>(hi, 1, a.size() - 1);
        return hi;
    };
    const std::size_t it = locate(tab_t_, t);
    const std::size_t ix = locate(tab_x_, x);
    const double wt = (t - tab_t_[it - 1]) / (tab_t_[it] - tab_t_[it - 1]);
    const double wx = (x - tab_x_[ix - 1]) / (tab_x_[ix] - tab_x_[ix - 1]);
    const double v00 = tab_v_[it - 1][ix - 1], v01 = tab_v_[it - 1][ix];
    const double v10 = tab_v_[it][ix - 1], v11 = tab_v_[it][ix];
    return (1 - wt) * ((1 - wx) * v00 + wx * v01) + wt * ((1 - wx) * v10 + wx * v11);
}

double CouplingFn::value(double t, double x) const {
    switch (family_) {
        case Family::Zero:
            return 0.0;
        case Family::Linear:
            return gain_ * x;
        case Family::Saturating:
            return gain_ * scale_ * std::tanh(x / scale_);
        case Family::ClippedCubic: {
            const double s = scale_;
            if (x > s) return gain_ * (s - s / 3.0);
            if (x < -s) return -gain_ * (s - s / 3.0);
            return gain_ * (x - x * x * x / (3.0 * s * s));
        }
        case Family::Tabulated:
            return tab_value(t, x);
    }
    return 0.0;
}

double CouplingFn::slope(double t, double x) const {
    switch (family_) {
        case Family::Zero:
            return 0.0;
        case Family::Linear:
            return gain_;
        case Family::Saturating: {
            const double c = std::cosh(x / scale_);
            return gain_ / (c * c);
        }
        case Family::ClippedCubic: {
            if (std::abs(x) > scale_) return 0.0;
            return gain_ * (1.0 - x * x / (scale_ * scale_));
        }
        case Family::Tabulated: {
            const double h = kFdRelStep * std::max(1.0, std::abs(x));
            return (tab_value(t, x + h) - tab_value(t, x - h)) / (2.0 * h);
        }
    }
    return 0.0;
}

const std::string& CouplingFn::family_name() const {
    static const std::string names[] = {"zero", "linear", "saturating", "clipped_cubic",
                                        "tabulated"};
    return names[static_cast<int>(family_)];
}

InitialLaw InitialLaw::from_samples(std::vector<double> samples, std::uint64_t seed) {
    InitialLaw law;
    law.samples = std::move(samples);
    law.seed = seed;
    if (law.samples.empty()) throw ConfigError("initial law: empty sample list");
    double sum = 0.0;
    for (double s : law.samples) {
        if (!(s >= 0.0)) throw DomainError("initial law: samples must be nonnegative");
        if (!std::isfinite(s)) throw DomainError("initial law: samples must be finite");
        sum += s;
    }
    law.mean = sum / static_cast<double>(law.samples.size());
    return law;
}

InitialLaw InitialLaw::uniform(double low, double high, std::size_t count, std::uint64_t seed) {
    if (!(low >= 0.0 && high >= low)) throw DomainError("initial law: need 0 <= low <= high");
    if (count == 0) throw ConfigError("initial law: count must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(low, high);
    std::vector<double> samples(count);
    for (auto& s : samples) s = dist(rng);
    auto law = from_samples(std::move(samples), seed);
    return law;
}

InitialLaw InitialLaw::mean_only(double mean) {
    if (!(mean >= 0.0)) throw DomainError("initial law: mean must be nonnegative");
    InitialLaw law;
    law.mean = mean;
    return law;
}

AssumptionProbes AssumptionProbes::make_default(double T, double xbar) {
    AssumptionProbes p;
    constexpr std::size_t kSide = 101;
    p.times.resize(kSide);
    p.points.resize(kSide);
    for (std::size_t i = 0; i < kSide; ++i) {
        p.times[i] = T * static_cast<double>(i) / static_cast<double>(kSide - 1);
        p.points[i] = -xbar + 2.0 * xbar * static_cast<double>(i) / static_cast<double>(kSide - 1);
    }
    return p;
}

const ClauseResult* ValidationReport::find(const std::string& clause) const {
    for (const auto& c : clauses) {
        if (c.clause == clause) return &c;
    }
    return nullptr;
}

namespace {

struct ClauseTracker {
    ClauseResult r;
    bool seen = false;
    explicit ClauseTracker(std::string name) { r.clause = std::move(name); }
    // violation > 0 beyond roundoff slack fails; keep the worst probe
    void update(double violation, double t, double x) {
        if (!seen || violation > r.worst_margin) {
            r.worst_margin = violation;
            r.worst_t = t;
            r.worst_x = x;
            seen = true;
        }
        if (violation > kClauseSlack) r.pass = false;
    }
};

void require_finite(double v, const char* what, double t, double x) {
    if (!std::isfinite(v)) {
        throw NumericError(std::string("non-finite evaluation of ") + what + " at " +
                           probe_str(t, x));
    }
}

}  // namespace

ValidationReport validate_assumptions(const CoefficientSet& c, const AssumptionProbes& probes,
                                      const InitialLaw* law) {
    if (probes.times.empty() || probes.points.empty())
        throw DomainError("validate_assumptions: probe grid must be nonempty");

    ClauseTracker xi_nonneg("(H)(i) xi >= 0 and bounded");
    ClauseTracker bounded("(H)(ii) |A|,|B|,|Q|,|R| <= K");
    ClauseTracker q_pos("(H)(ii) Q > 0");
    ClauseTracker a_nonpos("(H)(ii) A <= 0");
    ClauseTracker r_lower("(H)(ii) R >= delta");
    ClauseTracker b_lower("(H)(ii) |B| >= delta");
    ClauseTracker zero_at_zero("(H)(iii) f,b,l,h vanish at x = 0");
    ClauseTracker deriv_bound("(H)(iv) |f'|,|b'|,|l'|,|h'| <= K");
    ClauseTracker response("(H)(iv) |1 + h'| >= eps0");
    ClauseTracker f_sign("(H)(iv) f' <= 0");
    ClauseTracker l_sign("(H)(iv) l' >= 0");
    ClauseTracker mono_combo("(H)(iv) B R^-1 (b' - B h')/(1 + h') >= 0");

    if (law != nullptr) {
        for (double s : law->samples) {
            require_finite(s, "xi sample", 0.0, s);
            xi_nonneg.update(-s, 0.0, s);
        }
    }

    for (double t : probes.times) {
        const double A = c.A(t), B = c.B(t), Q = c.Q(t), R = c.R(t);
        require_finite(A, "A", t, 0.0);
        require_finite(B, "B", t, 0.0);
        require_finite(Q, "Q", t, 0.0);
        require_finite(R, "R", t, 0.0);
        bounded.update(std::abs(A) - c.K, t, 0.0);
        bounded.update(std::abs(B) - c.K, t, 0.0);
        bounded.update(std::abs(Q) - c.K, t, 0.0);
        bounded.update(std::abs(R) - c.K, t, 0.0);
        q_pos.update(-Q, t, 0.0);  // Q > 0: violation when Q <= 0
        a_nonpos.update(A, t, 0.0);
        r_lower.update(c.delta - R, t, 0.0);
        b_lower.update(c.delta - std::abs(B), t, 0.0);

        const CouplingFn* fns[] = {&c.f, &c.b, &c.l, &c.h};
        const char* names[] = {"f", "b", "l", "h"};
        for (int k = 0; k < 4; ++k) {
            const double at0 = fns[k]->value(t, 0.0);
            require_finite(at0, names[k], t, 0.0);
            zero_at_zero.update(std::abs(at0), t, 0.0);
        }

        for (double x : probes.points) {
            const double fp = c.f.slope(t, x);
            const double bp = c.b.slope(t, x);
            const double lp = c.l.slope(t, x);
            const double hp = c.h.slope(t, x);
            require_finite(c.f.value(t, x), "f", t, x);
            require_finite(c.b.value(t, x), "b", t, x);
            require_finite(c.l.value(t, x), "l", t, x);
            require_finite(c.h.value(t, x), "h", t, x);
            require_finite(fp, "f'", t, x);
            require_finite(bp, "b'", t, x);
            require_finite(lp, "l'", t, x);
            require_finite(hp, "h'", t, x);
            deriv_bound.update(std::abs(fp) - c.K, t, x);
            deriv_bound.update(std::abs(bp) - c.K, t, x);
            deriv_bound.update(std::abs(lp) - c.K, t, x);
            deriv_bound.update(std::abs(hp) - c.K, t, x);
            response.update(c.eps0 - std::abs(1.0 + hp), t, x);
            f_sign.update(fp, t, x);
            l_sign.update(-lp, t, x);
            const double combo = B / R * (bp - B * hp) / (1.0 + hp);
            require_finite(combo, "B R^-1 (b' - B h')/(1+h')", t, x);
            mono_combo.update(-combo, t, x);
        }
    }

    ValidationReport report;
    report.clauses = {xi_nonneg.r, bounded.r,    q_pos.r,  a_nonpos.r, r_lower.r,   b_lower.r,
                      zero_at_zero.r, deriv_bound.r, response.r, f_sign.r,   l_sign.r, mono_combo.r};
    report.pass = true;
    for (const auto& cl : report.clauses) report.pass = report.pass && cl.pass;
    return report;
}

double invert_population_response(const CoefficientSet& c, double t, double a, double tol) {
    return invert_population_response(c, t, a, tol, a);
}

double invert_population_response(const CoefficientSet& c, double t, double a, double tol,
                                  double hint) {
    if (c.h.is_zero()) return a;
    auto defect = [&](double m) { return m + c.h.value(t, m) - a; };
    auto slope = [&](double m) { return 1.0 + c.h.slope(t, m); };

    double lo = a - c.K * std::abs(a) - 1.0;
    double hi = a + c.K * std::abs(a) + 1.0;
    double width = hi - lo;
    for (int i = 0; i < 64 && defect(lo) * defect(hi) > 0.0; ++i) {
        width *= 2.0;
        lo -= width;
        hi += width;
    }
    num::RootOptions opt;
    opt.tol = tol;
    const double x0 = std::clamp(hint, lo, hi);
    return num::newton_bisect(defect, slope, lo, hi, x0, opt, "invert_population_response");
}

}  // namespace lqmfg
