#pragma once

#include "lqmfg/numerics.hpp"
#include "lqmfg/time_grid.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace lqmfg::detail {

/// Piecewise-linear view of a curve stored at grid nodes and interval
/// midpoints. Integration stages of the fixed two-half-step RK4 scheme fall
/// between knots only when a step gets bisected; the resulting interpolation
/// error is second order with knot spacing h/2.
struct CurveView {
    const TimeGrid* grid = nullptr;
    const std::vector<double>* at_nodes = nullptr;
    const std::vector<double>* at_mids = nullptr;

    double operator()(double t) const {
        const auto& nodes = grid->nodes();
        if (t <= nodes.front()) return at_nodes->front();
        if (t >= nodes.back()) return at_nodes->back();
        const std::size_t i = grid->index_at_or_before(t);
        if (i + 1 >= nodes.size()) return at_nodes->back();
        const double tm = grid->mid(i);
        if (t <= tm) {
            const double denom = tm - nodes[i];
            const double w = denom > 0.0 ? (t - nodes[i]) / denom : 0.0;
            return (1.0 - w) * (*at_nodes)[i] + w * (*at_mids)[i];
        }
        const double denom = nodes[i + 1] - tm;
        const double w = denom > 0.0 ? (t - tm) / denom : 0.0;
        return (1.0 - w) * (*at_mids)[i] + w * (*at_nodes)[i + 1];
    }
};

/// Forward march over every grid interval with the guarded RK4 stepper.
/// record(i, mid_state, end_state) fires once per interval i.
template <std::size_t N, class F, class R>
std::array<double, N> march_forward(const TimeGrid& g, std::array<double, N> y, F&& rhs,
                                    const num::StepOptions& opt, R&& record) {
    const auto& nodes = g.nodes();
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        const auto step = num::rk4_interval<N>(rhs, nodes[i], nodes[i + 1] - nodes[i], y, opt);
        record(i, step.mid, step.end);
        y = step.end;
    }
    return y;
}

/// Backward march from the last node to the first.
/// record(i, mid_state, start_state) fires once per interval i, descending.
template <std::size_t N, class F, class R>
std::array<double, N> march_backward(const TimeGrid& g, std::array<double, N> y, F&& rhs,
                                     const num::StepOptions& opt, R&& record) {
    const auto& nodes = g.nodes();
    for (std::size_t i = nodes.size() - 1; i-- > 0;) {
        const auto step = num::rk4_interval<N>(rhs, nodes[i + 1], nodes[i] - nodes[i + 1], y, opt);
        record(i, step.mid, step.end);
        y = step.end;
    }
    return y;
}

}  // namespace lqmfg::detail
