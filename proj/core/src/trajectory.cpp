#include "lqmfg/trajectory.hpp"

#include "lqmfg/errors.hpp"
#include "lqmfg/numerics.hpp"
#include "march.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <sstream>

namespace lqmfg {

namespace {

/// Per-sample closed-loop state drift: the feedback Y = P x + phi plus the
/// population terms driven by the solved mean curves.
struct StateRhs {
    const CoefficientSet* c;
    detail::CurveView P, phi, m, nu;
    double tol_rho;
    mutable double mu_hint = 0.0;

    std::array<double, 1> operator()(double t, const std::array<double, 1>& y) const {
        const double x = y[0];
        const double A = c->A(t), B = c->B(t), R = c->R(t);
        const double Y = P(t) * x + phi(t);
        double hterm = 0.0, bterm = 0.0;
        if (!c->control_coupling_free()) {
            const double mu = invert_population_response(*c, t, -B / R * m(t), tol_rho, mu_hint);
            mu_hint = mu;
            hterm = c->h.value(t, mu);
            bterm = c->b.value(t, mu);
        }
        return {A * x - B * B / R * Y - B * hterm + c->f.value(t, nu(t)) + bterm};
    }
};

struct MeanControlTerm {
    const CoefficientSet* c;
    detail::CurveView m;
    double tol_rho;
    mutable double mu_hint = 0.0;
    double mu(double t) const {
        if (c->control_coupling_free()) return -c->B(t) / c->R(t) * m(t);
        const double v = invert_population_response(*c, t, -c->B(t) / c->R(t) * m(t), tol_rho,
                                                    mu_hint);
        mu_hint = v;
        return v;
    }
};

}  // namespace

TrajectoryBundle simulate_level(const CoefficientSet& c, double L, const InitialLaw& law,
                                const RiccatiPath& p, const MeanFlow& mf, const TimeGrid& g,
                                unsigned threads) {
    if (p.values.size() != g.size() || mf.nu.size() != g.size())
        throw ConfigError("simulate_level: inputs solved on a different grid");
    if (p.L != L || mf.L != L)
        throw ConfigError("simulate_level: inputs solved for a different level");
    if (law.samples.empty()) throw ConfigError("simulate_level: initial law carries no samples");
    for (double s : law.samples) {
        if (!(s >= 0.0)) throw DomainError("simulate_level: negative initial sample");
    }

    const std::size_t n = g.size();
    const std::size_t ns = law.samples.size();

    TrajectoryBundle bundle;
    bundle.L = L;
    bundle.samples = law.samples;
    bundle.X.assign(ns, std::vector<double>(n, 0.0));
    bundle.X_mid.assign(ns, std::vector<double>(n - 1, 0.0));
    bundle.Y.assign(ns, std::vector<double>(n, 0.0));
    bundle.alpha.assign(ns, std::vector<double>(n, 0.0));

    num::StepOptions opt;
    auto run_sample = [&](std::size_t s) {
        StateRhs rhs{&c,
                     detail::CurveView{&g, &p.values, &p.mids},
                     detail::CurveView{&g, &mf.phi, &mf.phi_mid},
                     detail::CurveView{&g, &mf.m, &mf.m_mid},
                     detail::CurveView{&g, &mf.nu, &mf.nu_mid},
                     1e-12,
                     0.0};
        auto& X = bundle.X[s];
        auto& Xm = bundle.X_mid[s];
        X[0] = law.samples[s];
        detail::march_forward<1>(g, {X[0]}, rhs, opt,
                                 [&](std::size_t i, const std::array<double, 1>& mid,
                                     const std::array<double, 1>& end) {
                                     Xm[i] = mid[0];
                                     X[i + 1] = end[0];
                                 });
        MeanControlTerm mc{&c, detail::CurveView{&g, &mf.m, &mf.m_mid}, 1e-12, 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            const double t = g.node(i);
            bundle.Y[s][i] = p.values[i] * X[i] + mf.phi[i];
            const double mu = mc.mu(t);
            bundle.alpha[s][i] =
                -c.B(t) / c.R(t) * bundle.Y[s][i] - c.h.value(t, mu);
        }
    };

    if (threads <= 1 || ns == 1) {
        for (std::size_t s = 0; s < ns; ++s) run_sample(s);
    } else {
        std::vector<std::future<void>> futures;
        const unsigned workers = std::min<unsigned>(threads, static_cast<unsigned>(ns));
        std::atomic<std::size_t> next{0};
        for (unsigned w = 0; w < workers; ++w) {
            futures.push_back(std::async(std::launch::async, [&]() {
                for (std::size_t s = next.fetch_add(1); s < ns; s = next.fetch_add(1))
                    run_sample(s);
            }));
        }
        for (auto& f : futures) f.get();
    }

    bundle.X_mean.assign(n, 0.0);
    bundle.Y_mean.assign(n, 0.0);
    bundle.alpha_mean.assign(n, 0.0);
    for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            bundle.X_mean[i] += bundle.X[s][i];
            bundle.Y_mean[i] += bundle.Y[s][i];
            bundle.alpha_mean[i] += bundle.alpha[s][i];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        bundle.X_mean[i] /= static_cast<double>(ns);
        bundle.Y_mean[i] /= static_cast<double>(ns);
        bundle.alpha_mean[i] /= static_cast<double>(ns);
    }
    bundle.terminal_state.resize(ns);
    for (std::size_t s = 0; s < ns; ++s) bundle.terminal_state[s] = bundle.X[s].back();
    return bundle;
}

TrajectoryBundle build_constrained_solution(const CoefficientSet& c, const PenaltyLadder& ladder,
                                            const InitialLaw& law, const TimeGrid& g,
                                            unsigned threads, double terminal_factor) {
    if (ladder.levels.size() < 2)
        throw ConfigError("build_constrained_solution: need at least two solved levels");
    const LevelSolution& top = ladder.top();
    if (!(top.L >= 1e4))
        throw DomainError("build_constrained_solution: largest level must be at least 1e4");

    TrajectoryBundle limit = simulate_level(c, top.L, law, top.riccati, top.mean, g, threads);
    const LevelSolution& prev = ladder.levels[ladder.levels.size() - 2];
    TrajectoryBundle prev_bundle =
        simulate_level(c, prev.L, law, prev.riccati, prev.mean, g, threads);

    limit.L.reset();  // mark as the constrained limit
    // alpha_T := 0 exactly; the t < T formula applies up to the last interior node
    for (auto& a : limit.alpha) a.back() = 0.0;
    limit.alpha_mean.back() = 0.0;

    double gap = 0.0;
    for (std::size_t s = 0; s < limit.X.size(); ++s) {
        for (std::size_t i = 0; i < limit.X[s].size(); ++i)
            gap = std::max(gap, std::abs(limit.X[s][i] - prev_bundle.X[s][i]));
    }
    limit.cauchy_gap_paths = gap;

    double u_bound = 0.0;
    for (const auto& y : limit.Y) {
        for (double v : y) u_bound = std::max(u_bound, std::abs(v));
    }
    limit.u_bound = u_bound;
    limit.tol_terminal = terminal_factor * u_bound / top.L;

    for (std::size_t s = 0; s < limit.terminal_state.size(); ++s) {
        if (std::abs(limit.terminal_state[s]) > limit.tol_terminal) {
            std::ostringstream os;
            os << "limit quality: |X_T| = " << std::abs(limit.terminal_state[s]) << " for sample "
               << s << " exceeds tol_terminal = " << limit.tol_terminal
               << "; increase the largest ladder level";
            throw DomainError(os.str());
        }
    }
    return limit;
}

CostReport evaluate_costs(const TrajectoryBundle& bundle, const CoefficientSet& c,
                          const MeanFlow& mf, const TimeGrid& g) {
    const std::size_t n = g.size();
    const std::size_t ns = bundle.sample_count();
    if (bundle.X.empty() || bundle.X[0].size() != n)
        throw ConfigError("evaluate_costs: bundle and grid disagree");

    MeanControlTerm mc{&c, detail::CurveView{&g, &mf.m, &mf.m_mid}, 1e-12, 0.0};
    std::vector<double> mu(n);
    for (std::size_t i = 0; i < n; ++i) mu[i] = mc.mu(g.node(i));

    CostReport report;
    report.per_sample.resize(ns);
    std::vector<double> integrand(n);
    for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            const double t = g.node(i);
            const double xl = bundle.X[s][i] + c.l.value(t, mf.nu[i]);
            const double ah = bundle.alpha[s][i] + c.h.value(t, mu[i]);
            integrand[i] = c.Q(t) * xl * xl + c.R(t) * ah * ah;
        }
        double J = 0.5 * num::trapezoid(g.nodes(), integrand);
        const double running = J;
        if (bundle.L.has_value()) {
            const double xT = bundle.X[s].back();
            J += 0.5 * (*bundle.L) * xT * xT;
        }
        report.per_sample[s] = J;
        report.expectation += J;
        report.running_expectation += running;
    }
    report.expectation /= static_cast<double>(ns);
    report.running_expectation /= static_cast<double>(ns);
    report.penalty_expectation = report.expectation - report.running_expectation;
    return report;
}

}  // namespace lqmfg
