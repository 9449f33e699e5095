#pragma once

#include "lqmfg/coefficients.hpp"
#include "lqmfg/field.hpp"
#include "lqmfg/time_grid.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lqmfg {

/// Grid declaration (see TimeGrid::make for semantics).
struct GridConfig {
    std::size_t uniform_nodes = TimeGrid::kDefaultUniformNodes;
    std::size_t tail_nodes = TimeGrid::kDefaultTailNodes;
    double tail_fraction = TimeGrid::kDefaultTailFraction;
    double min_tail_offset = TimeGrid::kDefaultMinTailOffset;
    std::optional<double> eps_t;  // absolute; default 0.01*T
};

/// Tolerance overrides; every default matches the solver/check signatures.
struct Tolerances {
    double rho = 1e-12;
    double shoot_rel = 1e-9;
    double step_rel = 1e-10;
    double envelope_slack_rel = 1e-6;
    double mono_P = 1e-9;
    double mono_u = 1e-8;
    double mono_nu = 1e-9;
    double traj_shape = 1e-10;
    double decay_slope_band = 0.15;
    double terminal_factor = 10.0;
    double cost_sandwich_rel = 1e-3;
    double product_final_ratio = 1e-3;
    double residual_calib_factor = 4.0;
    double phi_fd_step = 1e-4;
};

struct LawConfig {
    std::string kind;  // "samples" | "uniform" | "mean_only"
    std::vector<double> samples;
    double low = 0.0, high = 0.0, mean = 0.0;
    std::size_t count = 64;
    std::uint64_t seed = 0;

    InitialLaw realize() const;
};

struct ProbeConfig {
    std::vector<double> times;  // empty -> default {0, T/4, T/2, 3T/4, T-eps_T}
    std::vector<double> xs;     // empty -> {0, 0.5, 1, 2}
    std::vector<double> nus;    // empty -> {0, 0.5, 1, 2}

    FieldProbeSet realize(const TimeGrid& g) const;
};

/// The parsed experiment definition. Parsing is total: unknown keys, type
/// mismatches and missing required fields raise ConfigError with the JSON
/// pointer of the offending field (plus line/column for syntax errors).
struct RunConfig {
    CoefficientSet coefficients;
    GridConfig grid;
    std::vector<double> ladder;
    LawConfig law;
    ProbeConfig probes;
    Tolerances tol;
    std::string output_dir = "out";
    bool per_sample_output = false;
    std::string digest;  // FNV-1a of the canonical serialization

    TimeGrid make_grid() const;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_json_text(const std::string& text, const std::string& origin = "<memory>");
};

}  // namespace lqmfg
