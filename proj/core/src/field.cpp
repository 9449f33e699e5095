#include "lqmfg/field.hpp"

#include "lqmfg/errors.hpp"
#include "march.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>
#include <thread>

namespace lqmfg {

namespace {

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * (1.0 + std::abs(a) + std::abs(b)); }

}  // namespace

const LevelSolution& PenaltyLadder::find(double L) const {
    for (const auto& lvl : levels) {
        if (close(lvl.L, L)) return lvl;
    }
    std::ostringstream os;
    os << "ladder does not contain level L = " << L;
    throw ConfigError(os.str());
}

std::vector<double> default_ladder_levels() {
    return {1.0, 10.0, 100.0, 1000.0, 10000.0, 100000.0, 1000000.0};
}

double eval_uL(const CoefficientSet& c, const LevelSolution& level, const TimeGrid& g, double t,
               double x, double nu) {
    if (!std::isfinite(x) || !std::isfinite(nu)) throw DomainError("eval_uL: x and nu must be finite");
    const double P = level.riccati.value_at(g, t);
    if (nu == 0.0) return P * x;  // Phi(t, 0) = 0
    const double nu_path = level.mean.nu_at(g, t);
    if (close(nu, nu_path)) return P * x + level.mean.phi_at(g, t);
    const double Phi = phi_decoupling(c, level.L, t, nu, level.riccati, g);
    return P * x + Phi;
}

PenaltyLadder run_ladder(const CoefficientSet& c, const std::vector<double>& levels, double mean0,
                         const TimeGrid& g, unsigned threads, PenaltyLadder* partial_out,
                         const SolveOptions& opts) {
    if (levels.empty()) throw ConfigError("run_ladder: empty level list");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!(levels[i] > 0.0)) throw ConfigError("run_ladder: levels must be positive");
        if (i > 0 && !(levels[i] > levels[i - 1]))
            throw ConfigError("run_ladder: levels must be strictly increasing");
    }

    PenaltyLadder ladder;
    ladder.grid = g;
    ladder.mean0 = mean0;
    ladder.levels.resize(levels.size());

    auto solve_one = [&](std::size_t i) {
        LevelSolution sol;
        sol.L = levels[i];
        sol.riccati = solve_riccati(c, levels[i], g, opts.step_rel);
        sol.mean = solve_mean_bvp(c, levels[i], mean0, sol.riccati, g, BvpMethod::Shooting,
                                  opts.shoot_rel, opts.rho, opts.step_rel);
        sol.riccati_envelope = check_riccati_envelope(sol.riccati, c, g);
        sol.psi_envelope = check_psi_envelope(sol.mean, c, g);
        return sol;
    };

    if (threads <= 1 || levels.size() == 1) {
        for (std::size_t i = 0; i < levels.size(); ++i) {
            try {
                ladder.levels[i] = solve_one(i);
            } catch (...) {
                if (partial_out != nullptr) {
                    partial_out->grid = g;
                    partial_out->mean0 = mean0;
                    partial_out->levels.assign(ladder.levels.begin(),
                                               ladder.levels.begin() + static_cast<long>(i));
                }
                throw;
            }
        }
        return ladder;
    }

    std::vector<std::future<LevelSolution>> futures;
    futures.reserve(levels.size());
    for (std::size_t i = 0; i < levels.size(); ++i)
        futures.push_back(std::async(std::launch::async, solve_one, i));
    std::exception_ptr first_error;
    std::size_t solved = 0;
    for (std::size_t i = 0; i < futures.size(); ++i) {
        try {
            ladder.levels[i] = futures[i].get();
            if (!first_error) solved = i + 1;
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) {
        if (partial_out != nullptr) {
            partial_out->grid = g;
            partial_out->mean0 = mean0;
            partial_out->levels.assign(ladder.levels.begin(),
                                       ladder.levels.begin() + static_cast<long>(solved));
        }
        std::rethrow_exception(first_error);
    }
    return ladder;
}

FieldProbeSet FieldProbeSet::make_default(const TimeGrid& g) {
    FieldProbeSet p;
    const double T = g.horizon();
    p.times = {0.0, 0.25 * T, 0.5 * T, 0.75 * T, T - g.eps_T()};
    p.xs = {0.0, 0.5, 1.0, 2.0};
    p.nus = {0.0, 0.5, 1.0, 2.0};
    return p;
}

const FieldProbeValue* LimitField::find(double t, double x, double nu) const {
    for (const auto& p : probes) {
        if (close(p.t, t) && close(p.x, x) && close(p.nu, nu)) return &p;
    }
    return nullptr;
}

LimitField estimate_u_infinity(const CoefficientSet& c, const PenaltyLadder& ladder,
                               const FieldProbeSet& probes, double mono_tol, unsigned threads) {
    if (ladder.levels.size() < 3)
        throw ConfigError("estimate_u_infinity: need a ladder with at least 3 solved levels");
    for (double t : probes.times) {
        if (!(t <= ladder.grid.horizon() - ladder.grid.eps_T() + 1e-12))
            throw DomainError("estimate_u_infinity: probe times must satisfy t <= T - eps_T");
    }

    const TimeGrid& g = ladder.grid;
    const std::size_t n_levels = ladder.levels.size();

    // Phi(t, nu) per (level, time, nu); the x-dimension is free by affinity.
    std::vector<std::vector<std::vector<double>>> Phi(
        n_levels, std::vector<std::vector<double>>(probes.times.size(),
                                                   std::vector<double>(probes.nus.size(), 0.0)));
    auto fill_level = [&](std::size_t li) {
        const auto& lvl = ladder.levels[li];
        for (std::size_t ti = 0; ti < probes.times.size(); ++ti) {
            for (std::size_t ni = 0; ni < probes.nus.size(); ++ni) {
                const double nu = probes.nus[ni];
                if (nu == 0.0) continue;  // pinned Phi(t,0) = 0
                const double nu_path = lvl.mean.nu_at(g, probes.times[ti]);
                Phi[li][ti][ni] = close(nu, nu_path)
                                      ? lvl.mean.phi_at(g, probes.times[ti])
                                      : phi_decoupling(c, lvl.L, probes.times[ti], nu,
                                                       lvl.riccati, g);
            }
        }
    };
    if (threads <= 1) {
        for (std::size_t li = 0; li < n_levels; ++li) fill_level(li);
    } else {
        std::vector<std::future<void>> futures;
        for (std::size_t li = 0; li < n_levels; ++li)
            futures.push_back(std::async(std::launch::async, fill_level, li));
        for (auto& f : futures) f.get();
    }

    LimitField field;
    field.probes.reserve(probes.times.size() * probes.xs.size() * probes.nus.size());
    for (std::size_t ti = 0; ti < probes.times.size(); ++ti) {
        const double t = probes.times[ti];
        for (double x : probes.xs) {
            for (std::size_t ni = 0; ni < probes.nus.size(); ++ni) {
                const double nu = probes.nus[ni];
                FieldProbeValue pv;
                pv.t = t;
                pv.x = x;
                pv.nu = nu;
                pv.outside_proved_region = (x == 0.0 && nu > 0.0);
                pv.u_per_level.resize(n_levels);
                for (std::size_t li = 0; li < n_levels; ++li) {
                    const double P = ladder.levels[li].riccati.value_at(g, t);
                    pv.u_per_level[li] = P * x + Phi[li][ti][ni];
                }
                pv.u_limit = pv.u_per_level.back();
                pv.cauchy_gap = std::abs(pv.u_per_level[n_levels - 1] - pv.u_per_level[n_levels - 2]);
                if (!pv.outside_proved_region && x > 0.0 && nu > 0.0) {
                    for (std::size_t li = 0; li + 1 < n_levels; ++li) {
                        const double gap = pv.u_per_level[li] - pv.u_per_level[li + 1];
                        if (gap > mono_tol) {
                            std::ostringstream os;
                            os << "estimate_u_infinity: monotonicity violated at probe (t=" << t
                               << ", x=" << x << ", nu=" << nu << ") between L = "
                               << ladder.levels[li].L << " and L = " << ladder.levels[li + 1].L
                               << " (gap " << gap << ")";
                            throw PropertyError(os.str());
                        }
                    }
                }
                field.cauchy_gap = std::max(field.cauchy_gap, pv.cauchy_gap);
                field.probes.push_back(std::move(pv));
            }
        }
    }

    const std::size_t n_nodes = g.size();
    const std::size_t decile = n_nodes - n_nodes / 10;
    const auto& topP = ladder.top().riccati.values;
    field.p_inf_tail.assign(topP.begin() + static_cast<long>(decile), topP.end());
    return field;
}

}  // namespace lqmfg
