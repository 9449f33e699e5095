#pragma once

#include "lqmfg/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace lqmfg::num {

/// One classical 4th-order Runge-Kutta step. h may be negative.
template <std::size_t N, class F>
std::array<double, N> rk4_step(F&& f, double t, double h, const std::array<double, N>& y) {
    std::array<double, N> k1 = f(t, y);
    std::array<double, N> tmp;
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    std::array<double, N> k2 = f(t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    std::array<double, N> k3 = f(t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * k3[i];
    std::array<double, N> k4 = f(t + h, tmp);
    std::array<double, N> out;
    for (std::size_t i = 0; i < N; ++i)
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

struct StepOptions {
    double rel_tol = 1e-10;  // half-step disagreement triggering bisection
    int max_depth = 40;
};

/// Result of advancing one grid interval: the endpoint state and the state at
/// the interval midpoint.
template <std::size_t N>
struct IntervalResult {
    std::array<double, N> end;
    std::array<double, N> mid;
};

/// Advance [t, t+h] by two half-steps, bisecting any step whose embedded
/// half-step disagreement exceeds rel_tol. Throws SingularityError on
/// step-size underflow (depth exhaustion with persistent disagreement).
template <std::size_t N, class F>
IntervalResult<N> rk4_interval(F&& f, double t, double h, const std::array<double, N>& y,
                               const StepOptions& opt, int depth = 0) {
    const std::array<double, N> full = rk4_step(f, t, h, y);
    const std::array<double, N> mid = rk4_step(f, t, 0.5 * h, y);
    const std::array<double, N> two = rk4_step(f, t + 0.5 * h, 0.5 * h, mid);
    double worst = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const double scale = 1.0 + std::abs(two[i]);
        worst = std::max(worst, std::abs(full[i] - two[i]) / scale);
    }
    if (worst <= opt.rel_tol) return {two, mid};
    if (depth >= opt.max_depth) {
        throw SingularityError("step-size underflow near t = " + std::to_string(t + h) +
                               " (half-step disagreement " + std::to_string(worst) + ")");
    }
    const IntervalResult<N> first = rk4_interval(f, t, 0.5 * h, y, opt, depth + 1);
    const IntervalResult<N> second = rk4_interval(f, t + 0.5 * h, 0.5 * h, first.end, opt, depth + 1);
    return {second.end, first.end};
}

struct RootOptions {
    double tol = 1e-12;  // absolute tolerance on the residual
    int max_iter = 200;
};

/// Safeguarded Newton on a monotone scalar equation g(x) = 0 with derivative
/// dg. Falls back to bisection whenever the Newton step leaves the bracket
/// [lo, hi]; the bracket must satisfy g(lo)*g(hi) <= 0.
template <class G, class DG>
double newton_bisect(G&& g, DG&& dg, double lo, double hi, double x0, const RootOptions& opt,
                     const char* what) {
    double flo = g(lo);
    double fhi = g(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (flo * fhi > 0.0) throw NumericError(std::string(what) + ": bracket does not straddle a root");
    double x = std::clamp(x0, lo, hi);
    for (int it = 0; it < opt.max_iter; ++it) {
        const double fx = g(x);
        if (std::abs(fx) <= opt.tol) return x;
        if ((fx < 0.0) == (flo < 0.0)) {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        const double d = dg(x);
        double next = (d != 0.0) ? x - fx / d : std::numeric_limits<double>::quiet_NaN();
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == x) next = 0.5 * (lo + hi);
        x = next;
        if (hi - lo <= std::numeric_limits<double>::epsilon() * (std::abs(lo) + std::abs(hi))) {
            const double fm = g(x);
            if (std::abs(fm) <= opt.tol * 1e3) return x;
            break;
        }
    }
    throw NumericError(std::string(what) + ": no convergence within max iterations");
}

/// Safeguarded secant on a bracketed root: secant steps while they stay inside
/// the bracket, bisection otherwise. Returns the abscissa once |g| <= tol.
template <class G>
double secant_bisect(G&& g, double lo, double hi, double flo, double fhi, double tol, int max_iter,
                     std::vector<std::pair<double, double>>* trace = nullptr) {
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    double a = lo, b = hi, fa = flo, fb = fhi;
    double x = b, fx = fb;
    for (int it = 0; it < max_iter; ++it) {
        double next;
        const double denom = fb - fa;
        if (denom != 0.0) {
            next = b - fb * (b - a) / denom;
            if (!(next > std::min(a, b) && next < std::max(a, b))) next = 0.5 * (a + b);
        } else {
            next = 0.5 * (a + b);
        }
        x = next;
        fx = g(x);
        if (trace) trace->emplace_back(x, fx);
        if (std::abs(fx) <= tol) return x;
        if ((fx < 0.0) == (fa < 0.0)) {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        if (std::abs(b - a) <= std::numeric_limits<double>::epsilon() * (std::abs(a) + std::abs(b) + 1.0))
            return x;
    }
    return std::numeric_limits<double>::quiet_NaN();  // caller decides how to report
}

/// Trapezoidal quadrature of samples y over abscissae t.
inline double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < t.size(); ++i)
        acc += 0.5 * (t[i + 1] - t[i]) * (y[i] + y[i + 1]);
    return acc;
}

/// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// (e^x - 1)/x with the removable singularity filled at 0.
inline double expm1_over_x(double x) {
    if (x == 0.0) return 1.0;
    return std::expm1(x) / x;
}

/// FNV-1a 64-bit digest, used for config provenance stamps.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : s) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

}  // namespace lqmfg::num
