#include "lqmfg/io.hpp"

#include "lqmfg/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

namespace lqmfg {

namespace {

using ojson = nlohmann::ordered_json;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw Error("write failed for '" + path + "'");
}

ojson bound_report_json(const BoundReport& r) {
    ojson j;
    j["pass"] = r.pass;
    j["worst_lower_margin"] = r.worst_lower_margin;
    j["worst_lower_node"] = r.worst_lower_node;
    if (r.upper_skipped) {
        j["upper_skipped"] = true;
        j["skip_reason"] = r.skip_reason;
    } else {
        j["worst_upper_margin"] = r.worst_upper_margin;
        j["worst_upper_node"] = r.worst_upper_node;
    }
    j["nodes_checked"] = r.nodes_checked;
    return j;
}

}  // namespace

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string level_label(double L) {
    if (L == std::floor(L) && std::abs(L) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", L);
        return buf;
    }
    std::string s = format_g17(L);
    for (auto& ch : s) {
        if (ch == '.') ch = 'p';
        if (ch == '+') ch = '_';
        if (ch == '-') ch = 'm';
    }
    return s;
}

CsvWriter::CsvWriter(std::string path, std::string digest, std::vector<std::string> header)
    : path_(std::move(path)), columns_(header.size()) {
    buffer_ = "# config_digest " + digest + "\n";
    for (std::size_t i = 0; i < header.size(); ++i) {
        buffer_ += header[i];
        buffer_ += (i + 1 < header.size()) ? ',' : '\n';
    }
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != columns_) throw Error("CSV row width mismatch for '" + path_ + "'");
    for (std::size_t i = 0; i < values.size(); ++i) {
        buffer_ += format_g17(values[i]);
        buffer_ += (i + 1 < values.size()) ? ',' : '\n';
    }
}

void CsvWriter::close() {
    if (closed_) return;
    closed_ = true;
    write_text(path_, buffer_);
}

CsvWriter::~CsvWriter() {
    try {
        close();
    } catch (...) {
        // destructor must not throw; callers that care invoke close() directly
    }
}

void write_level_csv(const std::string& path, const std::string& digest, const TimeGrid& g,
                     const LevelSolution& level, const TrajectoryBundle& bundle, bool per_sample) {
    std::vector<std::string> header = {"t",   "P",      "nu",     "m",
                                       "phi", "psi",    "X_mean", "Y_mean",
                                       "alpha_mean"};
    if (per_sample) {
        for (std::size_t s = 0; s < bundle.sample_count(); ++s)
            header.push_back("X_" + std::to_string(s));
    }
    CsvWriter csv(path, digest, header);
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::vector<double> row = {g.node(i),
                                   level.riccati.values[i],
                                   level.mean.nu[i],
                                   level.mean.m[i],
                                   level.mean.phi[i],
                                   level.mean.psi[i],
                                   bundle.X_mean[i],
                                   bundle.Y_mean[i],
                                   bundle.alpha_mean[i]};
        if (per_sample) {
            for (std::size_t s = 0; s < bundle.sample_count(); ++s) row.push_back(bundle.X[s][i]);
        }
        csv.row(row);
    }
    csv.close();
}

void write_level_json(const std::string& path, const std::string& digest,
                      const LevelSolution& level) {
    ojson j;
    j["config_digest"] = digest;
    j["L"] = level.L;
    j["shooting_residual"] = level.mean.shooting_residual;
    j["riccati_envelope"] = bound_report_json(level.riccati_envelope);
    j["psi_envelope"] = bound_report_json(level.psi_envelope);
    write_text(path, j.dump(2) + "\n");
}

void write_ladder_csv(const std::string& path, const std::string& digest,
                      const PenaltyLadder& ladder, const std::vector<double>& terminal_means,
                      const std::vector<double>& costs, const LimitField& field) {
    std::vector<std::string> header = {"L", "X_T_mean", "J"};
    for (const auto& p : field.probes) {
        header.push_back("u__t" + format_g17(p.t) + "__x" + format_g17(p.x) + "__nu" +
                         format_g17(p.nu));
    }
    CsvWriter csv(path, digest, header);
    for (std::size_t li = 0; li < ladder.levels.size(); ++li) {
        std::vector<double> row = {ladder.levels[li].L, terminal_means[li], costs[li]};
        for (const auto& p : field.probes) row.push_back(p.u_per_level[li]);
        csv.row(row);
    }
    csv.close();
}

void write_limit_csv(const std::string& path, const std::string& digest, const TimeGrid& g,
                     const TrajectoryBundle& limit, bool per_sample) {
    std::vector<std::string> header = {"t", "X_mean", "Y_mean", "alpha_mean"};
    if (per_sample) {
        for (std::size_t s = 0; s < limit.sample_count(); ++s)
            header.push_back("X_" + std::to_string(s));
    }
    CsvWriter csv(path, digest, header);
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::vector<double> row = {g.node(i), limit.X_mean[i], limit.Y_mean[i],
                                   limit.alpha_mean[i]};
        if (per_sample) {
            for (std::size_t s = 0; s < limit.sample_count(); ++s) row.push_back(limit.X[s][i]);
        }
        csv.row(row);
    }
    csv.close();
}

void write_limit_json(const std::string& path, const std::string& digest,
                      const TrajectoryBundle& limit, const LimitField& field, double decay_slope,
                      const std::vector<std::string>& warnings) {
    ojson j;
    j["config_digest"] = digest;
    j["cauchy_gap_paths"] = limit.cauchy_gap_paths;
    j["cauchy_gap_field"] = field.cauchy_gap;
    j["u_bound"] = limit.u_bound;
    j["tol_terminal"] = limit.tol_terminal;
    j["terminal_states"] = limit.terminal_state;
    j["decay_fit_slope"] = decay_slope;
    j["warnings"] = warnings;
    write_text(path, j.dump(2) + "\n");
}

std::string report_to_json_text(const VerificationReport& report) {
    ojson j;
    j["config_digest"] = report.config_digest;
    j["pass"] = report.pass();
    ojson checks = ojson::array();
    for (const auto& c : report.checks) {
        ojson cj;
        cj["name"] = c.name;
        cj["status"] = to_string(c.status);
        cj["worst_margin"] = c.worst_margin;
        cj["tolerance"] = c.tolerance;
        cj["location"] = c.location;
        if (!c.reason.empty()) cj["reason"] = c.reason;
        if (!c.notes.empty()) cj["notes"] = c.notes;
        checks.push_back(std::move(cj));
    }
    j["checks"] = std::move(checks);
    return j.dump(2) + "\n";
}

void write_report_json(const std::string& path, const VerificationReport& report) {
    write_text(path, report_to_json_text(report));
}

}  // namespace lqmfg
