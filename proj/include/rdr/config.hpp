#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rdr/kernels.hpp"
#include "rdr/robust_loss.hpp"
#include "rdr/solvers.hpp"
#include "rdr/synthetic.hpp"

namespace rdr {

enum class StudyKind { Rates, Gap, Robustness };
enum class SigmaPolicy { Fixed, Corollary, Sweep };
enum class LambdaPolicy { Fixed, Theorem };
enum class AtomCountPolicy { Fixed, Theorem };

struct ExperimentConfig {
    TaskSpec task;
    BaseKernel base_kernel = BaseKernel::gaussian(1.0);
    SecondLevelKernel second_kernel = SecondLevelKernel::gaussian_on_h(1.0);
    WindowingLoss loss = WindowingLoss::welsch();

    SigmaPolicy sigma_policy = SigmaPolicy::Fixed;
    std::vector<double> sigma_values{1.0};  // one value for Fixed, the grid for Sweep
    LambdaPolicy lambda_policy = LambdaPolicy::Fixed;
    double lambda = 0.1;
    double regime_r = 0.5;  // nominal regularity index used by the schedules

    std::vector<int> n_grid{100};
    AtomCountPolicy d_policy = AtomCountPolicy::Fixed;
    int d = 50;
    int n_test = 500;
    int replicates = 20;

    // Pilot sample used to estimate beta when a schedule needs it.
    std::vector<double> pilot_lambda_grid;  // empty: 9 log-spaced points in [min(1/n_max, 1e-2), 1]
    int pilot_d = 0;                        // 0: use the largest n of the grid

    SolverOptions solver;
    std::string output_dir = "out";
    std::uint64_t master_seed = 1;
    bool plot = true;

    bool needs_pilot() const;
    std::vector<double> effective_pilot_grid() const;
    int effective_pilot_d() const;
    int n_max() const;

    void validate() const;
};

/// Parses the structured config document. Unknown keys are rejected so typos
/// do not silently fall back to defaults.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

std::string to_string(StudyKind k);
StudyKind parse_study_kind(std::string_view s);

}  // namespace rdr
