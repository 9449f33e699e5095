#include "lqmfg/config.hpp"

#include "lqmfg/errors.hpp"
#include "lqmfg/numerics.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace lqmfg {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& pointer, const std::string& message) {
    throw ConfigError("config " + (pointer.empty() ? std::string("/") : pointer) + ": " + message);
}

void expect_keys(const json& j, const std::string& pointer, const std::set<std::string>& allowed) {
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) fail(pointer + "/" + key, "unknown key");
    }
}

double get_number(const json& j, const std::string& pointer, const char* key,
                  std::optional<double> fallback = std::nullopt) {
    if (!j.contains(key)) {
        if (fallback) return *fallback;
        fail(pointer + "/" + key, "required number missing");
    }
    const auto& v = j.at(key);
    if (!v.is_number()) fail(pointer + "/" + key, "expected a number");
    return v.get<double>();
}

std::uint64_t get_uint(const json& j, const std::string& pointer, const char* key,
                       std::uint64_t fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_unsigned()) fail(pointer + "/" + key, "expected a nonnegative integer");
    return v.get<std::uint64_t>();
}

std::vector<double> get_number_array(const json& v, const std::string& pointer) {
    if (!v.is_array()) fail(pointer, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_number()) fail(pointer, "expected an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

TimeFn parse_timefn(const json& j, const std::string& pointer) {
    if (!j.is_object()) fail(pointer, "expected an object with a 'family' tag");
    if (!j.contains("family")) fail(pointer + "/family", "required");
    const std::string family = j.at("family").get<std::string>();
    if (family == "constant") {
        expect_keys(j, pointer, {"family", "value"});
        return TimeFn::constant(get_number(j, pointer, "value"));
    }
    if (family == "affine") {
        expect_keys(j, pointer, {"family", "value", "slope"});
        return TimeFn::affine(get_number(j, pointer, "value"), get_number(j, pointer, "slope"));
    }
    fail(pointer + "/family", "unknown time-coefficient family '" + family +
                                  "' (constant|affine)");
}

CouplingFn parse_coupling(const json& j, const std::string& pointer) {
    if (!j.is_object()) fail(pointer, "expected an object with a 'family' tag");
    if (!j.contains("family")) fail(pointer + "/family", "required");
    const std::string family = j.at("family").get<std::string>();
    if (family == "zero") {
        expect_keys(j, pointer, {"family"});
        return CouplingFn::zero();
    }
    if (family == "linear") {
        expect_keys(j, pointer, {"family", "gain"});
        return CouplingFn::linear(get_number(j, pointer, "gain"));
    }
    if (family == "saturating") {
        expect_keys(j, pointer, {"family", "gain", "scale"});
        return CouplingFn::saturating(get_number(j, pointer, "gain"),
                                      get_number(j, pointer, "scale", 1.0));
    }
    if (family == "clipped_cubic") {
        expect_keys(j, pointer, {"family", "gain", "scale"});
        return CouplingFn::clipped_cubic(get_number(j, pointer, "gain"),
                                         get_number(j, pointer, "scale", 1.0));
    }
    if (family == "tabulated") {
        expect_keys(j, pointer, {"family", "times", "points", "values"});
        if (!j.contains("times") || !j.contains("points") || !j.contains("values"))
            fail(pointer, "tabulated coupling requires times, points, values");
        std::vector<std::vector<double>> values;
        for (std::size_t i = 0; i < j.at("values").size(); ++i) {
            values.push_back(get_number_array(j.at("values").at(i),
                                              pointer + "/values/" + std::to_string(i)));
        }
        return CouplingFn::tabulated(get_number_array(j.at("times"), pointer + "/times"),
                                     get_number_array(j.at("points"), pointer + "/points"),
                                     std::move(values));
    }
    fail(pointer + "/family",
         "unknown coupling family '" + family +
             "' (zero|linear|saturating|clipped_cubic|tabulated)");
}

void locate(const std::string& text, std::size_t byte, std::size_t& line, std::size_t& col) {
    line = 1;
    col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
}

}  // namespace

InitialLaw LawConfig::realize() const {
    if (kind == "samples") return InitialLaw::from_samples(samples, seed);
    if (kind == "uniform") return InitialLaw::uniform(low, high, count, seed);
    if (kind == "mean_only") return InitialLaw::mean_only(mean);
    throw ConfigError("initial_law: unknown kind '" + kind + "'");
}

FieldProbeSet ProbeConfig::realize(const TimeGrid& g) const {
    FieldProbeSet def = FieldProbeSet::make_default(g);
    FieldProbeSet out;
    out.times = times.empty() ? def.times : times;
    out.xs = xs.empty() ? def.xs : xs;
    out.nus = nus.empty() ? def.nus : nus;
    for (double t : out.times) {
        if (!(t >= 0.0 && t <= g.horizon() - g.eps_T() + 1e-12))
            throw ConfigError("probes: times must lie in [0, T - eps_T]");
    }
    return out;
}

TimeGrid RunConfig::make_grid() const {
    return TimeGrid::make(coefficients.T, grid.uniform_nodes, grid.tail_nodes, grid.tail_fraction,
                          grid.min_tail_offset, grid.eps_t.value_or(-1.0));
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str(), path);
}

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& origin) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 0, col = 0;
        locate(text, e.byte > 0 ? e.byte - 1 : 0, line, col);
        std::ostringstream os;
        os << "config " << origin << ":" << line << ":" << col << ": " << e.what();
        throw ConfigError(os.str());
    }
    if (!root.is_object()) throw ConfigError("config " + origin + ": top level must be an object");

    expect_keys(root, "",
                {"horizon", "constants", "coefficients", "grid", "ladder", "initial_law", "probes",
                 "tolerances", "output"});

    RunConfig cfg;
    cfg.coefficients.T = get_number(root, "", "horizon");
    if (!(cfg.coefficients.T > 0.0)) fail("/horizon", "must be positive");

    if (!root.contains("constants")) fail("/constants", "required object missing");
    {
        const auto& k = root.at("constants");
        expect_keys(k, "/constants", {"K", "delta", "eps0"});
        cfg.coefficients.K = get_number(k, "/constants", "K");
        cfg.coefficients.delta = get_number(k, "/constants", "delta");
        cfg.coefficients.eps0 = get_number(k, "/constants", "eps0");
        if (!(cfg.coefficients.K > 0.0)) fail("/constants/K", "must be positive");
        if (!(cfg.coefficients.delta > 0.0)) fail("/constants/delta", "must be positive");
        if (!(cfg.coefficients.eps0 > 0.0)) fail("/constants/eps0", "must be positive");
    }

    if (!root.contains("coefficients")) fail("/coefficients", "required object missing");
    {
        const auto& co = root.at("coefficients");
        expect_keys(co, "/coefficients", {"A", "B", "Q", "R", "f", "b", "l", "h"});
        for (const char* sym : {"A", "B", "Q", "R", "f", "b", "l", "h"}) {
            if (!co.contains(sym)) fail(std::string("/coefficients/") + sym, "required");
        }
        cfg.coefficients.A = parse_timefn(co.at("A"), "/coefficients/A");
        cfg.coefficients.B = parse_timefn(co.at("B"), "/coefficients/B");
        cfg.coefficients.Q = parse_timefn(co.at("Q"), "/coefficients/Q");
        cfg.coefficients.R = parse_timefn(co.at("R"), "/coefficients/R");
        cfg.coefficients.f = parse_coupling(co.at("f"), "/coefficients/f");
        cfg.coefficients.b = parse_coupling(co.at("b"), "/coefficients/b");
        cfg.coefficients.l = parse_coupling(co.at("l"), "/coefficients/l");
        cfg.coefficients.h = parse_coupling(co.at("h"), "/coefficients/h");
    }

    if (root.contains("grid")) {
        const auto& gj = root.at("grid");
        expect_keys(gj, "/grid",
                    {"uniform_nodes", "tail_nodes", "tail_fraction", "min_tail_offset", "eps_t"});
        cfg.grid.uniform_nodes =
            static_cast<std::size_t>(get_uint(gj, "/grid", "uniform_nodes",
                                              TimeGrid::kDefaultUniformNodes));
        cfg.grid.tail_nodes = static_cast<std::size_t>(
            get_uint(gj, "/grid", "tail_nodes", TimeGrid::kDefaultTailNodes));
        cfg.grid.tail_fraction =
            get_number(gj, "/grid", "tail_fraction", TimeGrid::kDefaultTailFraction);
        cfg.grid.min_tail_offset =
            get_number(gj, "/grid", "min_tail_offset", TimeGrid::kDefaultMinTailOffset);
        if (gj.contains("eps_t")) cfg.grid.eps_t = get_number(gj, "/grid", "eps_t");
    }

    cfg.ladder = default_ladder_levels();
    if (root.contains("ladder")) {
        cfg.ladder = get_number_array(root.at("ladder"), "/ladder");
        if (cfg.ladder.empty()) fail("/ladder", "must not be empty");
        for (std::size_t i = 0; i < cfg.ladder.size(); ++i) {
            if (!(cfg.ladder[i] > 0.0)) fail("/ladder", "levels must be positive");
            if (i > 0 && !(cfg.ladder[i] > cfg.ladder[i - 1]))
                fail("/ladder", "levels must be strictly increasing");
        }
    }

    if (!root.contains("initial_law")) fail("/initial_law", "required object missing");
    {
        const auto& lj = root.at("initial_law");
        expect_keys(lj, "/initial_law", {"kind", "samples", "low", "high", "mean", "count", "seed"});
        if (!lj.contains("kind")) fail("/initial_law/kind", "required");
        cfg.law.kind = lj.at("kind").get<std::string>();
        if (cfg.law.kind == "samples") {
            if (!lj.contains("samples")) fail("/initial_law/samples", "required for kind=samples");
            cfg.law.samples = get_number_array(lj.at("samples"), "/initial_law/samples");
        } else if (cfg.law.kind == "uniform") {
            cfg.law.low = get_number(lj, "/initial_law", "low");
            cfg.law.high = get_number(lj, "/initial_law", "high");
            cfg.law.count = static_cast<std::size_t>(get_uint(lj, "/initial_law", "count", 64));
        } else if (cfg.law.kind == "mean_only") {
            cfg.law.mean = get_number(lj, "/initial_law", "mean");
        } else {
            fail("/initial_law/kind", "unknown kind '" + cfg.law.kind +
                                          "' (samples|uniform|mean_only)");
        }
        cfg.law.seed = get_uint(lj, "/initial_law", "seed", 0);
    }

    if (root.contains("probes")) {
        const auto& pj = root.at("probes");
        expect_keys(pj, "/probes", {"times", "x", "nu"});
        if (pj.contains("times")) cfg.probes.times = get_number_array(pj.at("times"), "/probes/times");
        if (pj.contains("x")) cfg.probes.xs = get_number_array(pj.at("x"), "/probes/x");
        if (pj.contains("nu")) cfg.probes.nus = get_number_array(pj.at("nu"), "/probes/nu");
    }

    if (root.contains("tolerances")) {
        const auto& tj = root.at("tolerances");
        expect_keys(tj, "/tolerances",
                    {"rho", "shoot_rel", "step_rel", "envelope_slack_rel", "mono_P", "mono_u",
                     "mono_nu", "traj_shape", "decay_slope_band", "terminal_factor",
                     "cost_sandwich_rel", "product_final_ratio", "residual_calib_factor",
                     "phi_fd_step"});
        Tolerances& t = cfg.tol;
        t.rho = get_number(tj, "/tolerances", "rho", t.rho);
        t.shoot_rel = get_number(tj, "/tolerances", "shoot_rel", t.shoot_rel);
        t.step_rel = get_number(tj, "/tolerances", "step_rel", t.step_rel);
        t.envelope_slack_rel =
            get_number(tj, "/tolerances", "envelope_slack_rel", t.envelope_slack_rel);
        t.mono_P = get_number(tj, "/tolerances", "mono_P", t.mono_P);
        t.mono_u = get_number(tj, "/tolerances", "mono_u", t.mono_u);
        t.mono_nu = get_number(tj, "/tolerances", "mono_nu", t.mono_nu);
        t.traj_shape = get_number(tj, "/tolerances", "traj_shape", t.traj_shape);
        t.decay_slope_band = get_number(tj, "/tolerances", "decay_slope_band", t.decay_slope_band);
        t.terminal_factor = get_number(tj, "/tolerances", "terminal_factor", t.terminal_factor);
        t.cost_sandwich_rel =
            get_number(tj, "/tolerances", "cost_sandwich_rel", t.cost_sandwich_rel);
        t.product_final_ratio =
            get_number(tj, "/tolerances", "product_final_ratio", t.product_final_ratio);
        t.residual_calib_factor =
            get_number(tj, "/tolerances", "residual_calib_factor", t.residual_calib_factor);
        t.phi_fd_step = get_number(tj, "/tolerances", "phi_fd_step", t.phi_fd_step);
    }

    if (root.contains("output")) {
        const auto& oj = root.at("output");
        expect_keys(oj, "/output", {"dir", "per_sample"});
        if (oj.contains("dir")) {
            if (!oj.at("dir").is_string()) fail("/output/dir", "expected a string");
            cfg.output_dir = oj.at("dir").get<std::string>();
        }
        if (oj.contains("per_sample")) {
            if (!oj.at("per_sample").is_boolean()) fail("/output/per_sample", "expected a boolean");
            cfg.per_sample_output = oj.at("per_sample").get<bool>();
        }
    }

    {
        std::ostringstream os;
        os << std::hex << num::fnv1a(root.dump());
        cfg.digest = os.str();
    }
    return cfg;
}

}  // namespace lqmfg
