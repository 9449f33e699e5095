#pragma once

#include "lqmfg/config.hpp"
#include "lqmfg/field.hpp"
#include "lqmfg/trajectory.hpp"
#include "lqmfg/verify.hpp"

#include <string>
#include <vector>

namespace lqmfg {

/// Format a double with 17 significant digits ('.' separator, no locale),
/// byte-stable across runs.
std::string format_g17(double v);

/// File-name label for a level: integral levels print as integers.
std::string level_label(double L);

/// CSV writer: '#'-prefixed provenance line (config digest), mandatory header
/// row, 17-significant-digit numbers, newline-terminated rows.
class CsvWriter {
public:
    CsvWriter(std::string path, std::string digest, std::vector<std::string> header);
    void row(const std::vector<double>& values);
    void close();  // flush + fsync-free close; throws Error on I/O failure
    ~CsvWriter();

private:
    std::string path_;
    std::string buffer_;
    std::size_t columns_ = 0;
    bool closed_ = false;
};

/// level_<L>.csv: t, P, nu, m, phi, psi, X_mean, Y_mean, alpha_mean
/// (+ X_<i> per sample when requested).
void write_level_csv(const std::string& path, const std::string& digest, const TimeGrid& g,
                     const LevelSolution& level, const TrajectoryBundle& bundle, bool per_sample);

/// level_<L>.json: shooting residual and envelope margins.
void write_level_json(const std::string& path, const std::string& digest,
                      const LevelSolution& level);

/// ladder.csv: per level L, X_T mean, J^L, u at every probe.
void write_ladder_csv(const std::string& path, const std::string& digest,
                      const PenaltyLadder& ladder, const std::vector<double>& terminal_means,
                      const std::vector<double>& costs, const LimitField& field);

/// limit.csv: t, X_mean, Y_mean, alpha_mean (+ X_<i> when requested).
void write_limit_csv(const std::string& path, const std::string& digest, const TimeGrid& g,
                     const TrajectoryBundle& limit, bool per_sample);

/// limit.json: Cauchy gaps, per-sample terminal states, decay-fit slope and
/// limit-quality warnings.
void write_limit_json(const std::string& path, const std::string& digest,
                      const TrajectoryBundle& limit, const LimitField& field, double decay_slope,
                      const std::vector<std::string>& warnings);

/// report.json for the verification suite.
void write_report_json(const std::string& path, const VerificationReport& report);
std::string report_to_json_text(const VerificationReport& report);

}  // namespace lqmfg
