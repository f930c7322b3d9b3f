#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rdr/config.hpp"

namespace rdr {

/// One (cell, replicate) outcome. `seed` alone regenerates the sample.
struct Row {
    StudyKind study = StudyKind::Gap;
    int n_index = 0;
    int n = 0;
    int d = 0;
    double lambda = 0.0;
    double sigma = 0.0;
    WindowFamily loss = WindowFamily::Welsch;
    int replicate = 0;
    std::uint64_t seed = 0;
    double err_rdr = 0.0;   // test L2 distance to the noiseless target
    double err_ls = 0.0;
    double gap = 0.0;       // test L2 distance between the two estimators
    double gap_bound = 0.0;
    bool fdcon_ok = true;   // norm bound on both the LS and the robust fit
    bool ees_ok = true;
    int iters = 0;
    double stat_resid = 0.0;
    bool gap_ok = true;
    bool converged = true;
    double wall_ms = 0.0;   // kept out of rows.csv so that file stays byte-stable

    // Diagnostic values behind the pass/fail flags.
    double norm_rdr = 0.0;
    double norm_ls = 0.0;
    double norm_rhs = 0.0;
    double e_norm = 0.0;
    double e_bound = 0.0;
};

struct CellSummary {
    int n = 0;
    int d = 0;
    double lambda = 0.0;
    double sigma = 0.0;
    int replicates = 0;
    double mean_err_rdr = 0.0;
    double mean_err_ls = 0.0;
    double mean_gap = 0.0;
    double mean_gap_bound = 0.0;
    double win_rate = 0.0;    // share of replicates with err_rdr < err_ls
    double mean_diff = 0.0;   // mean of err_ls - err_rdr
    int converged = 0;
    int fdcon_pass = 0;
    int ees_pass = 0;
    int gap_pass = 0;
    bool failed = false;      // more than 20% non-converged fits
};

struct PilotInfo {
    int n = 0;
    int d = 0;
    std::uint64_t seed = 0;
    std::vector<double> lambda_grid;
    double beta_hat = 0.0;
    double raw_slope = 0.0;
    double residual = 0.0;
    bool clipped = false;
};

struct Hygiene {
    int grams = 0;
    double worst_eig_ratio = 0.0;      // min over Grams of min eigenvalue / max eigenvalue
    double worst_raw_distance = 0.0;   // most negative squared H-distance before clamping
    bool ok = true;
};

struct SlopeFit {
    std::string axis;   // "n" or "sigma"
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;
};

struct ExperimentRecord {
    StudyKind study = StudyKind::Gap;
    std::vector<Row> rows;            // ordered by (n, sigma, replicate)
    std::vector<CellSummary> cells;   // ordered by (n, sigma)
    std::optional<PilotInfo> pilot;
    std::optional<SlopeFit> slope;    // empty when the grid has a single point
    Hygiene hygiene;
    bool study_failed = false;

    bool bounds_ok() const;
    /// Rows with any failed bound check.
    std::vector<Row> violations() const;
};

/// Per-n schedule actually used by a study.
struct CellPlan {
    int n;
    int d;
    double lambda;
    std::vector<double> sigmas;
};

/// Resolves lambda, d and sigma for every n of the grid, running the pilot
/// when a schedule needs beta.
std::vector<CellPlan> plan_cells(const ExperimentConfig& cfg, std::optional<PilotInfo>* pilot_out = nullptr);

/// Runs every (n, replicate) unit on up to `jobs` threads and aggregates.
/// Does not check study preconditions.
ExperimentRecord run_cells(StudyKind study, const ExperimentConfig& cfg, int jobs = 1);

ExperimentRecord run_rate_study(const ExperimentConfig& cfg, int jobs = 1);
ExperimentRecord run_gap_study(const ExperimentConfig& cfg, int jobs = 1);
ExperimentRecord run_robustness_study(const ExperimentConfig& cfg, int jobs = 1);
ExperimentRecord run_study(StudyKind study, const ExperimentConfig& cfg, int jobs = 1);

std::string rows_csv(const ExperimentRecord& record);
nlohmann::json summary_json(const ExperimentRecord& record, const ExperimentConfig& cfg);
std::string plot_svg(const ExperimentRecord& record);

/// Writes rows.csv, timings.csv, summary.json, plot.svg (rates and gap, when
/// cfg.plot) and failures.json (only when a bound check failed).
void emit_outputs(const ExperimentRecord& record, const ExperimentConfig& cfg, const std::filesystem::path& dir);

std::string tool_version();

}  // namespace rdr
