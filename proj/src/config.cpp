#include "rdr/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>

#include "rdr/errors.hpp"

namespace rdr {

using nlohmann::json;

namespace {

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) throw InputError("config: '" + where + "' must be an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, _] : obj.items()) {
        if (!allowed.count(k)) throw InputError("config: unknown key '" + k + "' in '" + where + "'");
    }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InputError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

template <class T>
T require(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw InputError("config: '" + where + "' needs '" + key + "'");
    return get_or<T>(obj, key, T{});
}

TaskSpec parse_task(const json& t) {
    allow_keys(t, "task", {"dim", "M", "meta", "atoms", "target", "noise"});
    TaskSpec task;
    task.dim = get_or(t, "dim", task.dim);
    task.M = get_or(t, "M", task.M);
    if (t.contains("meta")) {
        const auto& m = t.at("meta");
        allow_keys(m, "task.meta", {"kind", "low", "high", "mean", "sd"});
        task.meta.kind = parse_meta_kind(require<std::string>(m, "kind", "task.meta"));
        task.meta.low = get_or(m, "low", task.meta.low);
        task.meta.high = get_or(m, "high", task.meta.high);
        task.meta.mean = get_or(m, "mean", task.meta.mean);
        task.meta.sd = get_or(m, "sd", task.meta.sd);
    }
    if (t.contains("atoms")) {
        const auto& a = t.at("atoms");
        allow_keys(a, "task.atoms", {"kind", "spread"});
        task.atoms.kind = parse_atom_kind(require<std::string>(a, "kind", "task.atoms"));
        task.atoms.spread = get_or(a, "spread", task.atoms.spread);
    }
    if (t.contains("target")) {
        const auto& g = t.at("target");
        allow_keys(g, "task.target", {"kind", "amplitude", "frequency", "anchors", "coef_scale", "anchor_seed"});
        task.target.kind = parse_target_kind(require<std::string>(g, "kind", "task.target"));
        task.target.amplitude = get_or(g, "amplitude", task.target.amplitude);
        task.target.frequency = get_or(g, "frequency", task.target.frequency);
        task.target.anchors = get_or(g, "anchors", task.target.anchors);
        task.target.coef_scale = get_or(g, "coef_scale", task.target.coef_scale);
        task.target.anchor_seed = get_or(g, "anchor_seed", task.target.anchor_seed);
    }
    if (t.contains("noise")) {
        const auto& e = t.at("noise");
        allow_keys(e, "task.noise", {"kind", "sd", "df", "scale", "fraction", "magnitude"});
        task.noise.kind = parse_noise_kind(require<std::string>(e, "kind", "task.noise"));
        task.noise.sd = get_or(e, "sd", task.noise.sd);
        task.noise.df = get_or(e, "df", task.noise.df);
        task.noise.scale = get_or(e, "scale", task.noise.scale);
        task.noise.fraction = get_or(e, "fraction", task.noise.fraction);
        task.noise.magnitude = get_or(e, "magnitude", task.noise.magnitude);
    }
    return task;
}

std::vector<double> log_grid(double lo, double hi, int points) {
    std::vector<double> grid;
    const double a = std::log10(lo), b = std::log10(hi);
    for (int i = 0; i < points; ++i) grid.push_back(std::pow(10.0, a + (b - a) * i / (points - 1)));
    return grid;
}

}  // namespace

bool ExperimentConfig::needs_pilot() const {
    return lambda_policy == LambdaPolicy::Theorem || d_policy == AtomCountPolicy::Theorem ||
           sigma_policy == SigmaPolicy::Corollary;
}

int ExperimentConfig::n_max() const { return *std::max_element(n_grid.begin(), n_grid.end()); }

std::vector<double> ExperimentConfig::effective_pilot_grid() const {
    if (!pilot_lambda_grid.empty()) return pilot_lambda_grid;
    return log_grid(std::min(1.0 / n_max(), 1e-2), 1.0, 9);
}

int ExperimentConfig::effective_pilot_d() const { return pilot_d > 0 ? pilot_d : n_max(); }

void ExperimentConfig::validate() const {
    task.validate();
    if (n_grid.empty()) throw InputError("config: n grid is empty");
    for (int n : n_grid)
        if (n < 1) throw InputError("config: every n must be >= 1");
    if (replicates < 1) throw InputError("config: replicates must be >= 1");
    if (n_test < 1) throw InputError("config: n_test must be >= 1");
    if (d_policy == AtomCountPolicy::Fixed && d < 1) throw InputError("config: d must be >= 1");
    if (lambda_policy == LambdaPolicy::Fixed && !(lambda > 0.0)) throw InputError("config: lambda must be positive");
    if (sigma_policy != SigmaPolicy::Corollary) {
        if (sigma_values.empty()) throw InputError("config: sigma grid is empty");
        if (sigma_policy == SigmaPolicy::Fixed && sigma_values.size() != 1) {
            throw InputError("config: fixed sigma takes exactly one value");
        }
        for (double s : sigma_values)
            if (!(s > 0.0)) throw InputError("config: sigma values must be positive");
    }
    if (needs_pilot()) regime_of(regime_r);
    if (solver.max_iter < 1 || !(solver.tol > 0.0) || !(solver.stat_tol > 0.0)) {
        throw InputError("config: solver options must be positive");
    }
}

ExperimentConfig parse_config(const json& doc) {
    allow_keys(doc, "<root>",
               {"seed", "output", "plot", "task", "kernels", "loss", "sigma", "lambda", "regime_r", "sizes", "pilot",
                "solver", "comment"});
    ExperimentConfig cfg;
    cfg.master_seed = get_or(doc, "seed", cfg.master_seed);
    cfg.output_dir = get_or(doc, "output", cfg.output_dir);
    cfg.plot = get_or(doc, "plot", cfg.plot);
    cfg.regime_r = get_or(doc, "regime_r", cfg.regime_r);
    if (doc.contains("task")) cfg.task = parse_task(doc.at("task"));

    if (doc.contains("kernels")) {
        const auto& k = doc.at("kernels");
        allow_keys(k, "kernels", {"base", "second"});
        if (k.contains("base")) {
            const auto& b = k.at("base");
            allow_keys(b, "kernels.base", {"family", "bandwidth"});
            cfg.base_kernel = BaseKernel(parse_base_family(require<std::string>(b, "family", "kernels.base")),
                                         get_or(b, "bandwidth", 1.0));
        }
        if (k.contains("second")) {
            const auto& s = k.at("second");
            allow_keys(s, "kernels.second", {"family", "bandwidth"});
            const auto fam = parse_second_level_family(require<std::string>(s, "family", "kernels.second"));
            cfg.second_kernel = fam == SecondLevelFamily::GaussianOnH
                                    ? SecondLevelKernel::gaussian_on_h(get_or(s, "bandwidth", 1.0))
                                    : SecondLevelKernel::linear_on_h();
        }
    }
    cfg.task.base_kernel = cfg.base_kernel;
    cfg.task.second_kernel = cfg.second_kernel;

    if (doc.contains("loss")) {
        const auto& l = doc.at("loss");
        allow_keys(l, "loss", {"family"});
        cfg.loss = WindowingLoss::make(parse_window_family(require<std::string>(l, "family", "loss")));
    }
    if (doc.contains("sigma")) {
        const auto& s = doc.at("sigma");
        allow_keys(s, "sigma", {"policy", "value", "values"});
        const auto policy = require<std::string>(s, "policy", "sigma");
        if (policy == "fixed") {
            cfg.sigma_policy = SigmaPolicy::Fixed;
            cfg.sigma_values = {require<double>(s, "value", "sigma")};
        } else if (policy == "sweep") {
            cfg.sigma_policy = SigmaPolicy::Sweep;
            cfg.sigma_values = require<std::vector<double>>(s, "values", "sigma");
        } else if (policy == "corollary") {
            cfg.sigma_policy = SigmaPolicy::Corollary;
            cfg.sigma_values.clear();
        } else {
            throw InputError("config: unknown sigma policy '" + policy + "'");
        }
    }
    if (doc.contains("lambda")) {
        const auto& l = doc.at("lambda");
        allow_keys(l, "lambda", {"policy", "value"});
        const auto policy = require<std::string>(l, "policy", "lambda");
        if (policy == "fixed") {
            cfg.lambda_policy = LambdaPolicy::Fixed;
            cfg.lambda = require<double>(l, "value", "lambda");
        } else if (policy == "theorem") {
            cfg.lambda_policy = LambdaPolicy::Theorem;
        } else {
            throw InputError("config: unknown lambda policy '" + policy + "'");
        }
    }
    if (doc.contains("sizes")) {
        const auto& z = doc.at("sizes");
        allow_keys(z, "sizes", {"n", "d", "n_test", "replicates"});
        if (z.contains("n")) {
            cfg.n_grid = z.at("n").is_array() ? get_or<std::vector<int>>(z, "n", {}) : std::vector<int>{z.at("n").get<int>()};
        }
        if (z.contains("d")) {
            const auto& d = z.at("d");
            if (d.is_number_integer()) {
                cfg.d_policy = AtomCountPolicy::Fixed;
                cfg.d = d.get<int>();
            } else {
                allow_keys(d, "sizes.d", {"policy", "value"});
                const auto policy = require<std::string>(d, "policy", "sizes.d");
                if (policy == "fixed") {
                    cfg.d_policy = AtomCountPolicy::Fixed;
                    cfg.d = require<int>(d, "value", "sizes.d");
                } else if (policy == "theorem") {
                    cfg.d_policy = AtomCountPolicy::Theorem;
                } else {
                    throw InputError("config: unknown d policy '" + policy + "'");
                }
            }
        }
        cfg.n_test = get_or(z, "n_test", cfg.n_test);
        cfg.replicates = get_or(z, "replicates", cfg.replicates);
    }
    if (doc.contains("pilot")) {
        const auto& p = doc.at("pilot");
        allow_keys(p, "pilot", {"lambda_grid", "d"});
        cfg.pilot_lambda_grid = get_or(p, "lambda_grid", cfg.pilot_lambda_grid);
        cfg.pilot_d = get_or(p, "d", cfg.pilot_d);
    }
    if (doc.contains("solver")) {
        const auto& s = doc.at("solver");
        allow_keys(s, "solver", {"tol", "stat_tol", "max_iter"});
        cfg.solver.tol = get_or(s, "tol", cfg.solver.tol);
        cfg.solver.stat_tol = get_or(s, "stat_tol", cfg.solver.stat_tol);
        cfg.solver.max_iter = get_or(s, "max_iter", cfg.solver.max_iter);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw InputError("config " + path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

json to_json(const ExperimentConfig& cfg) {
    const auto& t = cfg.task;
    json task = {
        {"dim", t.dim},
        {"M", t.M},
        {"meta", {{"kind", to_string(t.meta.kind)}, {"low", t.meta.low}, {"high", t.meta.high}, {"mean", t.meta.mean},
                  {"sd", t.meta.sd}}},
        {"atoms", {{"kind", to_string(t.atoms.kind)}, {"spread", t.atoms.spread}}},
        {"target", {{"kind", to_string(t.target.kind)}, {"amplitude", t.target.amplitude},
                    {"frequency", t.target.frequency}, {"anchors", t.target.anchors},
                    {"coef_scale", t.target.coef_scale}, {"anchor_seed", t.target.anchor_seed}}},
        {"noise", {{"kind", to_string(t.noise.kind)}, {"sd", t.noise.sd}, {"df", t.noise.df},
                   {"scale", t.noise.scale}, {"fraction", t.noise.fraction}, {"magnitude", t.noise.magnitude}}},
    };
    json second = {{"family", to_string(cfg.second_kernel.family())}};
    if (cfg.second_kernel.family() == SecondLevelFamily::GaussianOnH) second["bandwidth"] = cfg.second_kernel.bandwidth();

    json sigma;
    switch (cfg.sigma_policy) {
        case SigmaPolicy::Fixed: sigma = {{"policy", "fixed"}, {"value", cfg.sigma_values.front()}}; break;
        case SigmaPolicy::Sweep: sigma = {{"policy", "sweep"}, {"values", cfg.sigma_values}}; break;
        case SigmaPolicy::Corollary: sigma = {{"policy", "corollary"}}; break;
    }
    json lambda = cfg.lambda_policy == LambdaPolicy::Fixed ? json{{"policy", "fixed"}, {"value", cfg.lambda}}
                                                           : json{{"policy", "theorem"}};
    json d = cfg.d_policy == AtomCountPolicy::Fixed ? json{{"policy", "fixed"}, {"value", cfg.d}}
                                                    : json{{"policy", "theorem"}};
    json pilot = {{"d", cfg.pilot_d}};
    if (!cfg.pilot_lambda_grid.empty()) pilot["lambda_grid"] = cfg.pilot_lambda_grid;

    return {
        {"seed", cfg.master_seed},
        {"output", cfg.output_dir},
        {"plot", cfg.plot},
        {"regime_r", cfg.regime_r},
        {"task", task},
        {"kernels", {{"base", {{"family", to_string(cfg.base_kernel.family())}, {"bandwidth", cfg.base_kernel.bandwidth()}}},
                     {"second", second}}},
        {"loss", {{"family", to_string(cfg.loss.family)}}},
        {"sigma", sigma},
        {"lambda", lambda},
        {"sizes", {{"n", cfg.n_grid}, {"d", d}, {"n_test", cfg.n_test}, {"replicates", cfg.replicates}}},
        {"pilot", pilot},
        {"solver", {{"tol", cfg.solver.tol}, {"stat_tol", cfg.solver.stat_tol}, {"max_iter", cfg.solver.max_iter}}},
    };
}

std::string to_string(StudyKind k) {
    switch (k) {
        case StudyKind::Rates: return "rates";
        case StudyKind::Gap: return "gap";
        case StudyKind::Robustness: return "robustness";
    }
    return "?";
}

StudyKind parse_study_kind(std::string_view s) {
    if (s == "rates") return StudyKind::Rates;
    if (s == "gap") return StudyKind::Gap;
    if (s == "robustness") return StudyKind::Robustness;
    throw InputError("unknown study '" + std::string(s) + "'");
}

}  // namespace rdr
