#include "rdr/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <memory>
#include <set>
#include <thread>

#include "rdr/diagnostics.hpp"
#include "rdr/errors.hpp"
#include "rdr/solvers.hpp"
#include "rdr/synthetic.hpp"

namespace rdr {

namespace {

constexpr std::uint64_t kPilotStream = 0xB17A;
constexpr double kMaxNonConverged = 0.2;

std::uint64_t unit_seed(std::uint64_t master, int n_index, int replicate) {
    return mix_seed(mix_seed(master, static_cast<std::uint64_t>(n_index)), static_cast<std::uint64_t>(replicate));
}

struct UnitResult {
    std::vector<Row> rows;  // one per sigma
    double eig_ratio = 0.0;
    double raw_distance = 0.0;
};

UnitResult run_unit(StudyKind study, const ExperimentConfig& cfg, const CellPlan& plan, int n_index, int replicate) {
    UnitResult out;
    const auto seed = unit_seed(cfg.master_seed, n_index, replicate);
    TaskSpec spec = cfg.task;
    spec.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    const TwoStageSample sample = generate(spec, plan.n, plan.d, cfg.n_test);

    const EmbeddingGram egram(cfg.base_kernel, sample.train);
    const auto& K = cfg.second_kernel;
    auto G = std::make_shared<const Eigen::MatrixXd>(second_level_gram(K, egram));
    const Eigen::MatrixXd cross = cross_gram(K, egram, sample.test);
    const SpectralSummary spectrum = SpectralSummary::from_gram(*G);
    out.eig_ratio = spectrum.raw_max > 0.0 ? spectrum.raw_min / spectrum.raw_max : 0.0;
    out.raw_distance = egram.min_raw_distance_sq();

    const double n = static_cast<double>(plan.n);
    const AQuantities aq = a_quantities(spectrum, plan.lambda, K.kappa(), n);

    const RepresenterModel ls = fit_ls(G, sample.y, plan.lambda);
    const Eigen::VectorXd pred_ls = predict(ls, cross);
    const double err_ls = empirical_l2_distance(pred_ls, sample.test_target);
    const BoundCheck ls_norm = rkhs_norm_bound_check(ls, cfg.task.M);
    const double setup_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    for (double sigma : plan.sigmas) {
        const auto t1 = std::chrono::steady_clock::now();
        const auto [model, report] = fit_rdr(G, sample.y, plan.lambda, sigma, cfg.loss, cfg.solver);
        const Eigen::VectorXd pred = predict(model, cross);
        const BoundCheck norm = rkhs_norm_bound_check(model, cfg.task.M);
        const ETermCheck eterm = e_term_norm(model, sample.y, cfg.task.M, K.kappa());

        GapBoundInputs in{};
        in.p = cfg.loss.p;
        in.c_p = cfg.loss.c_p;
        in.C_V = cfg.loss.C_V;
        in.M = cfg.task.M;
        in.kappa = K.kappa();
        in.alpha = K.holder_alpha();
        in.L_holder = K.holder_L();
        in.B_k = BaseKernel::bound();
        in.lambda = plan.lambda;
        in.d = plan.d;
        in.sigma = sigma;
        in.a_hat = aq.a_hat;

        Row row;
        row.study = study;
        row.n_index = n_index;
        row.n = plan.n;
        row.d = plan.d;
        row.lambda = plan.lambda;
        row.sigma = sigma;
        row.loss = cfg.loss.family;
        row.replicate = replicate;
        row.seed = seed;
        row.err_rdr = empirical_l2_distance(pred, sample.test_target);
        row.err_ls = err_ls;
        row.gap = empirical_l2_distance(pred, pred_ls);
        row.gap_bound = gap_bound_rhs(in);
        row.fdcon_ok = norm.ok && ls_norm.ok;
        row.ees_ok = eterm.ok;
        row.iters = report.iterations;
        row.stat_resid = report.stationarity_residual;
        row.gap_ok = row.gap <= row.gap_bound + 1e-12;
        row.converged = report.converged;
        row.norm_rdr = norm.lhs;
        row.norm_ls = ls_norm.lhs;
        row.norm_rhs = norm.rhs;
        row.e_norm = eterm.norm;
        row.e_bound = eterm.bound;
        row.wall_ms =
            setup_ms + std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t1).count();
        out.rows.push_back(row);
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

void summarize(ExperimentRecord& rec) {
    // rows are grouped by (n_index, sigma) in plan order
    std::size_t i = 0;
    while (i < rec.rows.size()) {
        const Row& head = rec.rows[i];
        std::size_t j = i;
        while (j < rec.rows.size() && rec.rows[j].n_index == head.n_index && rec.rows[j].sigma == head.sigma) ++j;
        CellSummary c;
        c.n = head.n;
        c.d = head.d;
        c.lambda = head.lambda;
        c.sigma = head.sigma;
        c.replicates = static_cast<int>(j - i);
        std::vector<double> er, el, gp, gb;
        int wins = 0;
        for (std::size_t k = i; k < j; ++k) {
            const Row& r = rec.rows[k];
            er.push_back(r.err_rdr);
            el.push_back(r.err_ls);
            gp.push_back(r.gap);
            gb.push_back(r.gap_bound);
            wins += r.err_rdr < r.err_ls;
            c.converged += r.converged;
            c.fdcon_pass += r.fdcon_ok;
            c.ees_pass += r.ees_ok;
            c.gap_pass += r.gap_ok;
        }
        c.mean_err_rdr = mean_of(er);
        c.mean_err_ls = mean_of(el);
        c.mean_gap = mean_of(gp);
        c.mean_gap_bound = mean_of(gb);
        c.win_rate = static_cast<double>(wins) / c.replicates;
        c.mean_diff = c.mean_err_ls - c.mean_err_rdr;
        c.failed = (c.replicates - c.converged) > kMaxNonConverged * c.replicates;
        rec.study_failed = rec.study_failed || c.failed;
        rec.cells.push_back(c);
        i = j;
    }
}

std::optional<SlopeFit> fit_slope(const ExperimentRecord& rec) {
    std::vector<double> x, y;
    SlopeFit fit;
    if (rec.study == StudyKind::Rates) {
        fit.axis = "n";
        std::set<int> seen;
        for (const auto& c : rec.cells) {
            if (!seen.insert(c.n).second) continue;
            x.push_back(c.n);
            y.push_back(c.mean_err_rdr);
        }
    } else if (rec.study == StudyKind::Gap) {
        fit.axis = "sigma";
        for (const auto& c : rec.cells) {
            x.push_back(c.sigma);
            y.push_back(c.mean_gap);
        }
    } else {
        return std::nullopt;
    }
    if (x.size() < 2) return std::nullopt;
    for (double v : y)
        if (!(v > 0.0)) return std::nullopt;
    const LogLogFit line = log_log_fit(x, y);
    fit.slope = line.slope;
    fit.intercept = line.intercept;
    fit.residual = line.residual;
    return fit;
}

}  // namespace

bool ExperimentRecord::bounds_ok() const {
    return std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.fdcon_ok && r.ees_ok && r.gap_ok; });
}

std::vector<Row> ExperimentRecord::violations() const {
    std::vector<Row> out;
    for (const auto& r : rows)
        if (!(r.fdcon_ok && r.ees_ok && r.gap_ok)) out.push_back(r);
    return out;
}

std::vector<CellPlan> plan_cells(const ExperimentConfig& cfg, std::optional<PilotInfo>* pilot_out) {
    cfg.validate();
    std::optional<PilotInfo> pilot;
    if (cfg.needs_pilot()) {
        PilotInfo info;
        info.n = cfg.n_max();
        info.d = cfg.effective_pilot_d();
        info.seed = mix_seed(cfg.master_seed, kPilotStream);
        info.lambda_grid = cfg.effective_pilot_grid();
        TaskSpec spec = cfg.task;
        spec.seed = info.seed;
        const TwoStageSample sample = generate(spec, info.n, info.d, 1);
        const EmbeddingGram egram(cfg.base_kernel, sample.train);
        const SpectralSummary spectrum = SpectralSummary::from_gram(second_level_gram(cfg.second_kernel, egram));
        const BetaFit fit = fit_beta_rate(spectrum, info.lambda_grid);
        info.beta_hat = fit.beta_hat;
        info.raw_slope = fit.raw_slope;
        info.residual = fit.residual;
        info.clipped = fit.clipped;
        pilot = info;
    }
    const double alpha = cfg.second_kernel.holder_alpha();
    std::vector<CellPlan> plans;
    for (int n : cfg.n_grid) {
        CellPlan p{n, cfg.d, cfg.lambda, cfg.sigma_values};
        if (pilot) {
            const Schedule s = schedule_from_theorem(cfg.regime_r, pilot->beta_hat, alpha, n);
            if (cfg.lambda_policy == LambdaPolicy::Theorem) p.lambda = s.lambda;
            if (cfg.d_policy == AtomCountPolicy::Theorem) p.d = s.d;
            if (cfg.sigma_policy == SigmaPolicy::Corollary) {
                p.sigmas = {sigma_from_corollary(cfg.regime_r, pilot->beta_hat, cfg.loss.p, n)};
            }
        }
        plans.push_back(std::move(p));
    }
    if (pilot_out) *pilot_out = pilot;
    return plans;
}

ExperimentRecord run_cells(StudyKind study, const ExperimentConfig& cfg, int jobs) {
    if (jobs < 1) throw InputError("jobs must be >= 1");
    ExperimentRecord rec;
    rec.study = study;
    const std::vector<CellPlan> plans = plan_cells(cfg, &rec.pilot);

    const int reps = cfg.replicates;
    const auto units = plans.size() * static_cast<std::size_t>(reps);
    std::vector<UnitResult> results(units);
    std::vector<std::exception_ptr> errors(units);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t u = next++; u < units; u = next++) {
            const auto n_index = static_cast<int>(u / reps);
            const auto replicate = static_cast<int>(u % reps);
            try {
                results[u] = run_unit(study, cfg, plans[n_index], n_index, replicate);
            } catch (...) {
                errors[u] = std::current_exception();
            }
        }
    };
    const int threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(jobs), units));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    // (n, sigma, replicate) order regardless of which thread finished first
    for (std::size_t ni = 0; ni < plans.size(); ++ni) {
        for (std::size_t si = 0; si < plans[ni].sigmas.size(); ++si) {
            for (int r = 0; r < reps; ++r) rec.rows.push_back(results[ni * reps + r].rows[si]);
        }
    }
    for (const auto& u : results) {
        ++rec.hygiene.grams;
        if (rec.hygiene.grams == 1 || u.eig_ratio < rec.hygiene.worst_eig_ratio) rec.hygiene.worst_eig_ratio = u.eig_ratio;
        rec.hygiene.worst_raw_distance = std::min(rec.hygiene.worst_raw_distance, u.raw_distance);
    }
    rec.hygiene.ok = rec.hygiene.worst_eig_ratio >= -1e-10 && rec.hygiene.worst_raw_distance >= -kDistanceClamp;
    summarize(rec);
    rec.slope = fit_slope(rec);
    return rec;
}

ExperimentRecord run_rate_study(const ExperimentConfig& cfg, int jobs) {
    if (cfg.lambda_policy != LambdaPolicy::Theorem || cfg.d_policy != AtomCountPolicy::Theorem ||
        cfg.sigma_policy != SigmaPolicy::Corollary) {
        throw InputError("rates study needs theorem lambda and d schedules and the corollary sigma rule");
    }
    return run_cells(StudyKind::Rates, cfg, jobs);
}

ExperimentRecord run_gap_study(const ExperimentConfig& cfg, int jobs) {
    if (cfg.sigma_policy != SigmaPolicy::Sweep) throw InputError("gap study needs a sigma sweep");
    if (cfg.n_grid.size() != 1) throw InputError("gap study needs a single n");
    if (cfg.lambda_policy != LambdaPolicy::Fixed || cfg.d_policy != AtomCountPolicy::Fixed) {
        throw InputError("gap study needs fixed lambda and d");
    }
    const auto [lo, hi] = std::minmax_element(cfg.sigma_values.begin(), cfg.sigma_values.end());
    if (cfg.sigma_values.size() < 3 || *hi / *lo < 10.0) {
        throw InputError("gap study needs at least three sigma values spanning a decade or more");
    }
    return run_cells(StudyKind::Gap, cfg, jobs);
}

ExperimentRecord run_robustness_study(const ExperimentConfig& cfg, int jobs) {
    if (cfg.task.noise.kind != NoiseKind::OutlierMix) throw InputError("robustness study needs outlier_mix noise");
    if (cfg.sigma_policy == SigmaPolicy::Corollary) throw InputError("robustness study needs explicit sigma values");
    return run_cells(StudyKind::Robustness, cfg, jobs);
}

ExperimentRecord run_study(StudyKind study, const ExperimentConfig& cfg, int jobs) {
    switch (study) {
        case StudyKind::Rates: return run_rate_study(cfg, jobs);
        case StudyKind::Gap: return run_gap_study(cfg, jobs);
        case StudyKind::Robustness: return run_robustness_study(cfg, jobs);
    }
    throw InputError("unknown study");
}

}  // namespace rdr
