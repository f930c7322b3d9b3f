#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rdr/errors.hpp"
#include "rdr/experiment.hpp"

#ifndef RDRKIT_VERSION
#define RDRKIT_VERSION "0.0.0"
#endif

namespace rdr {

using nlohmann::json;

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json row_json(const Row& r) {
    return {{"n", r.n},
            {"d", r.d},
            {"lambda", r.lambda},
            {"sigma", r.sigma},
            {"replicate", r.replicate},
            {"seed", r.seed},
            {"err_rdr", r.err_rdr},
            {"err_ls", r.err_ls},
            {"gap", r.gap},
            {"gap_bound", finite_or_null(r.gap_bound)},
            {"gap_ok", r.gap_ok},
            {"fdcon_ok", r.fdcon_ok},
            {"norm_rdr", r.norm_rdr},
            {"norm_ls", r.norm_ls},
            {"norm_rhs", r.norm_rhs},
            {"ees_ok", r.ees_ok},
            {"e_norm", r.e_norm},
            {"e_bound", finite_or_null(r.e_bound)}};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

std::string tool_version() { return RDRKIT_VERSION; }

std::string rows_csv(const ExperimentRecord& record) {
    std::ostringstream os;
    os << "study,n,d,lambda,sigma,loss,replicate,seed,err_rdr,err_ls,gap,gap_bound,fdcon_ok,ees_ok,iters,stat_resid,"
          "gap_ok,converged\n";
    for (const Row& r : record.rows) {
        os << to_string(r.study) << ',' << r.n << ',' << r.d << ',' << num(r.lambda) << ',' << num(r.sigma) << ','
           << to_string(r.loss) << ',' << r.replicate << ',' << r.seed << ',' << num(r.err_rdr) << ','
           << num(r.err_ls) << ',' << num(r.gap) << ',' << num(r.gap_bound) << ',' << int(r.fdcon_ok) << ','
           << int(r.ees_ok) << ',' << r.iters << ',' << num(r.stat_resid) << ',' << int(r.gap_ok) << ','
           << int(r.converged) << '\n';
    }
    return os.str();
}

json summary_json(const ExperimentRecord& record, const ExperimentConfig& cfg) {
    json cells = json::array();
    for (const auto& c : record.cells) {
        cells.push_back({{"n", c.n},
                         {"d", c.d},
                         {"lambda", c.lambda},
                         {"sigma", c.sigma},
                         {"replicates", c.replicates},
                         {"mean_err_rdr", c.mean_err_rdr},
                         {"mean_err_ls", c.mean_err_ls},
                         {"mean_gap", c.mean_gap},
                         {"mean_gap_bound", finite_or_null(c.mean_gap_bound)},
                         {"win_rate", c.win_rate},
                         {"mean_diff", c.mean_diff},
                         {"converged", c.converged},
                         {"fdcon_pass", c.fdcon_pass},
                         {"ees_pass", c.ees_pass},
                         {"gap_pass", c.gap_pass},
                         {"failed", c.failed}});
    }
    json doc;
    doc["tool"] = "rdr-kit";
    doc["version"] = tool_version();
    doc["study"] = to_string(record.study);
    doc["note"] = "grid sizes, replicate counts and tolerances are empirical choices of this harness";
    doc["config"] = to_json(cfg);
    doc["cells"] = cells;
    if (record.pilot) {
        const auto& p = *record.pilot;
        doc["pilot"] = {{"n", p.n},           {"d", p.d},
                        {"seed", p.seed},     {"lambda_grid", p.lambda_grid},
                        {"beta_hat", p.beta_hat}, {"raw_slope", p.raw_slope},
                        {"residual", p.residual}, {"clipped", p.clipped}};
    } else {
        doc["pilot"] = nullptr;
    }
    if (record.slope) {
        doc["slope"] = {{"axis", record.slope->axis},
                        {"value", record.slope->slope},
                        {"intercept", record.slope->intercept},
                        {"residual", record.slope->residual},
                        {"kind", "empirical"}};
    } else {
        doc["slope"] = nullptr;
    }
    int fd = 0, ee = 0, gp = 0, conv = 0, wins = 0;
    double diff = 0.0;
    for (const auto& r : record.rows) {
        fd += r.fdcon_ok;
        ee += r.ees_ok;
        gp += r.gap_ok;
        conv += r.converged;
        wins += r.err_rdr < r.err_ls;
        diff += r.err_ls - r.err_rdr;
    }
    const auto rows = static_cast<int>(record.rows.size());
    doc["bound_checks"] = {{"rows", rows}, {"fdcon_pass", fd}, {"ees_pass", ee}, {"gap_pass", gp}};
    doc["converged"] = conv;
    if (record.study == StudyKind::Robustness && rows > 0) {
        doc["paired"] = {{"win_rate", static_cast<double>(wins) / rows}, {"mean_diff", diff / rows}};
    }
    doc["hygiene"] = {{"grams", record.hygiene.grams},
                      {"worst_eig_ratio", record.hygiene.worst_eig_ratio},
                      {"worst_raw_distance", record.hygiene.worst_raw_distance},
                      {"ok", record.hygiene.ok}};
    doc["study_failed"] = record.study_failed;
    doc["bounds_ok"] = record.bounds_ok();
    return doc;
}

std::string plot_svg(const ExperimentRecord& record) {
    std::vector<double> x, y, y2;
    std::string xlabel, ylabel;
    if (record.study == StudyKind::Rates) {
        xlabel = "n";
        ylabel = "mean test error";
        for (const auto& c : record.cells) {
            x.push_back(c.n);
            y.push_back(c.mean_err_rdr);
            y2.push_back(c.mean_err_ls);
        }
    } else {
        xlabel = "sigma";
        ylabel = "mean L2 gap to LS";
        for (const auto& c : record.cells) {
            if (!(c.mean_gap > 0.0)) continue;
            x.push_back(c.sigma);
            y.push_back(c.mean_gap);
        }
    }
    constexpr double W = 640, H = 420, L = 70, R = 20, T = 20, B = 50;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">log10 " << xlabel
       << "</text>\n";
    os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << (T + H - B) / 2 << ")\">log10 " << ylabel << "</text>\n";
    if (!x.empty()) {
        std::vector<double> lx, ly;
        for (double v : x) lx.push_back(std::log10(v));
        for (double v : y) ly.push_back(std::log10(v));
        for (double v : y2)
            if (v > 0.0) ly.push_back(std::log10(v));
        auto [x0, x1] = std::minmax_element(lx.begin(), lx.end());
        auto [y0, y1] = std::minmax_element(ly.begin(), ly.end());
        double ax = *x0, bx = *x1, ay = *y0, by = *y1;
        if (bx - ax < 1e-9) { ax -= 0.5; bx += 0.5; }
        if (by - ay < 1e-9) { ay -= 0.5; by += 0.5; }
        auto px = [&](double v) { return L + (v - ax) / (bx - ax) * (W - L - R); };
        auto py = [&](double v) { return H - B - (v - ay) / (by - ay) * (H - T - B); };
        auto series = [&](const std::vector<double>& ys, const char* colour) {
            for (std::size_t i = 0; i < x.size() && i < ys.size(); ++i) {
                if (!(ys[i] > 0.0)) continue;
                os << "<circle cx=\"" << px(std::log10(x[i])) << "\" cy=\"" << py(std::log10(ys[i]))
                   << "\" r=\"4\" fill=\"" << colour << "\"/>\n";
            }
        };
        series(y, "steelblue");
        series(y2, "darkorange");
        if (record.slope) {
            const double s = record.slope->slope, c = record.slope->intercept / std::log(10.0);
            os << "<polyline fill=\"none\" stroke=\"steelblue\" points=\"" << px(ax) << ',' << py(c + s * ax) << ' '
               << px(bx) << ',' << py(c + s * bx) << "\"/>\n";
            os << "<text x=\"" << W - R << "\" y=\"" << T + 14 << "\" text-anchor=\"end\">slope " << num(s)
               << "</text>\n";
        }
        os << "<text x=\"" << L + 6 << "\" y=\"" << H - B - 6 << "\" font-size=\"11\">" << num(std::pow(10, ax))
           << "</text>\n";
        os << "<text x=\"" << W - R << "\" y=\"" << H - B - 6 << "\" font-size=\"11\" text-anchor=\"end\">"
           << num(std::pow(10, bx)) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void emit_outputs(const ExperimentRecord& record, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    if (record.rows.empty()) throw InputError("nothing to emit: record has no rows");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

    write_file(dir / "rows.csv", rows_csv(record));

    std::ostringstream timings;
    timings << "n,sigma,replicate,seed,wall_ms\n";
    for (const auto& r : record.rows) {
        timings << r.n << ',' << num(r.sigma) << ',' << r.replicate << ',' << r.seed << ',' << num(r.wall_ms) << '\n';
    }
    write_file(dir / "timings.csv", timings.str());
    write_file(dir / "summary.json", summary_json(record, cfg).dump(2) + "\n");

    if (cfg.plot && record.study != StudyKind::Robustness) write_file(dir / "plot.svg", plot_svg(record));

    const auto bad = record.violations();
    if (!bad.empty()) {
        json dump = json::array();
        for (const auto& r : bad) dump.push_back(row_json(r));
        write_file(dir / "failures.json", json{{"study", to_string(record.study)}, {"violations", dump}}.dump(2) + "\n");
    } else {
        std::filesystem::remove(dir / "failures.json", ec);
    }
}

}  // namespace rdr
