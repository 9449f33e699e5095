#pragma once

#include <cstddef>
#include <vector>

namespace lqmfg {

/// Partition of [0, T] with a geometrically graded tail near T.
///
/// The decoupling-field slope steepens like 1/(T-t) under large penalty
/// levels, so the last tail_fraction of the horizon is refined down to a
/// smallest node offset of min_tail_offset*T from T. Quantities with a
/// 1/(T-t) singularity are only checked for t <= T - eps_T.
///
/// Solvers store values at the nodes and at interval midpoints; value_at-style
/// lookups between stored abscissae are piecewise linear.
class TimeGrid {
public:
    TimeGrid() = default;  // empty grid; fill via make()

    static constexpr std::size_t kDefaultUniformNodes = 2000;
    static constexpr std::size_t kDefaultTailNodes = 200;
    static constexpr double kDefaultTailFraction = 0.01;
    static constexpr double kDefaultMinTailOffset = 1e-7;
    static constexpr double kDefaultEpsTFraction = 0.01;

    /// Uniform nodes on [0, T*(1-tail_fraction)] plus tail_nodes geometric
    /// intervals filling the tail. eps_t is absolute (time units).
    static TimeGrid make(double T, std::size_t uniform_nodes = kDefaultUniformNodes,
                         std::size_t tail_nodes = kDefaultTailNodes,
                         double tail_fraction = kDefaultTailFraction,
                         double min_tail_offset = kDefaultMinTailOffset, double eps_t = -1.0);

    /// Same spacing policy with every density parameter doubled; used by the
    /// residual-convergence checks.
    TimeGrid refined() const;

    double horizon() const { return T_; }
    double eps_T() const { return eps_T_; }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& mids() const { return mids_; }
    std::size_t size() const { return nodes_.size(); }
    double node(std::size_t i) const { return nodes_[i]; }
    double mid(std::size_t i) const { return mids_[i]; }

    /// Largest index i with nodes[i] <= t (clamped to the last node).
    std::size_t index_at_or_before(double t) const;

    /// Index of the last node with node <= T - eps_T.
    std::size_t last_checked_index() const;

    /// True if both grids share identical nodes (same solve family).
    bool same_as(const TimeGrid& other) const;

    /// Sub-grid starting at t0: node t0 followed by all grid nodes > t0.
    TimeGrid restarted_at(double t0) const;

private:
    double T_ = 0.0;
    double eps_T_ = 0.0;
    std::size_t uniform_nodes_ = 0, tail_nodes_ = 0;
    double tail_fraction_ = 0.0, min_tail_offset_ = 0.0;
    std::vector<double> nodes_;
    std::vector<double> mids_;
};

}  // namespace lqmfg
