#include "lqmfg/time_grid.hpp"

#include "lqmfg/errors.hpp"

#include <algorithm>
#include <cmath>

namespace lqmfg {

TimeGrid TimeGrid::make(double T, std::size_t uniform_nodes, std::size_t tail_nodes,
                        double tail_fraction, double min_tail_offset, double eps_t) {
    if (!(T > 0.0)) throw ConfigError("grid: horizon must be positive");
    if (uniform_nodes < 2) throw ConfigError("grid: need at least 2 uniform nodes");
    if (!(tail_fraction > 0.0 && tail_fraction < 0.5))
        throw ConfigError("grid: tail_fraction must lie in (0, 0.5)");
    if (!(min_tail_offset > 0.0 && min_tail_offset < tail_fraction))
        throw ConfigError("grid: min_tail_offset must lie in (0, tail_fraction)");

    TimeGrid g;
    g.T_ = T;
    g.uniform_nodes_ = uniform_nodes;
    g.tail_nodes_ = tail_nodes;
    g.tail_fraction_ = tail_fraction;
    g.min_tail_offset_ = min_tail_offset;
    g.eps_T_ = (eps_t > 0.0) ? eps_t : kDefaultEpsTFraction * T;
    if (!(g.eps_T_ > 0.0 && g.eps_T_ < T / 10.0 + 1e-15))
        throw ConfigError("grid: eps_T must lie in (0, T/10)");

    const double tail_start = T * (1.0 - tail_fraction);
    g.nodes_.reserve(uniform_nodes + tail_nodes + 1);
    for (std::size_t i = 0; i < uniform_nodes; ++i)
        g.nodes_.push_back(tail_start * static_cast<double>(i) / static_cast<double>(uniform_nodes - 1));

    if (tail_nodes > 0) {
        // offsets from T shrink geometrically from tail_fraction*T down to
        // min_tail_offset*T, then the node T itself
        const double ratio = std::pow(min_tail_offset / tail_fraction,
                                      1.0 / static_cast<double>(tail_nodes));
        double offset = tail_fraction * T;
        for (std::size_t k = 1; k <= tail_nodes; ++k) {
            offset *= ratio;
            g.nodes_.push_back(T - offset);
        }
    }
    g.nodes_.push_back(T);

    g.nodes_.erase(std::unique(g.nodes_.begin(), g.nodes_.end()), g.nodes_.end());
    for (std::size_t i = 0; i + 1 < g.nodes_.size(); ++i) {
        if (!(g.nodes_[i] < g.nodes_[i + 1])) throw ConfigError("grid: nodes not strictly increasing");
    }

    g.mids_.resize(g.nodes_.size() - 1);
    for (std::size_t i = 0; i + 1 < g.nodes_.size(); ++i)
        g.mids_[i] = 0.5 * (g.nodes_[i] + g.nodes_[i + 1]);
    return g;
}

TimeGrid TimeGrid::refined() const {
    return make(T_, uniform_nodes_ * 2, tail_nodes_ * 2, tail_fraction_, min_tail_offset_, eps_T_);
}

std::size_t TimeGrid::index_at_or_before(double t) const {
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
    if (it == nodes_.begin()) return 0;
    return static_cast<std::size_t>(std::distance(nodes_.begin(), it)) - 1;
}

std::size_t TimeGrid::last_checked_index() const {
    return index_at_or_before(T_ - eps_T_ + 1e-14 * T_);
}

bool TimeGrid::same_as(const TimeGrid& other) const {
    return nodes_ == other.nodes_ && eps_T_ == other.eps_T_;
}

TimeGrid TimeGrid::restarted_at(double t0) const {
    if (!(t0 >= 0.0 && t0 < T_)) throw ConfigError("grid: restart time outside [0, T)");
    TimeGrid g;
    g.T_ = T_;
    g.eps_T_ = eps_T_;
    g.uniform_nodes_ = uniform_nodes_;
    g.tail_nodes_ = tail_nodes_;
    g.tail_fraction_ = tail_fraction_;
    g.min_tail_offset_ = min_tail_offset_;
    g.nodes_.push_back(t0);
    for (double t : nodes_) {
        if (t > t0 + 1e-15 * T_) g.nodes_.push_back(t);
    }
    g.mids_.resize(g.nodes_.size() - 1);
    for (std::size_t i = 0; i + 1 < g.nodes_.size(); ++i)
        g.mids_[i] = 0.5 * (g.nodes_[i] + g.nodes_[i + 1]);
    return g;
}

}  // namespace lqmfg
