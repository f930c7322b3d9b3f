#include "rdr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "rdr/errors.hpp"

namespace rdr {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + (stream + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void TaskSpec::validate() const {
    if (dim < 1) throw InputError("task: dim must be >= 1");
    if (!(M > 0.0)) throw InputError("task: response bound M must be positive");
    if (meta.kind == MetaKind::UniformMeans && !(meta.high > meta.low)) throw InputError("task: meta range is empty");
    if (meta.kind == MetaKind::GaussianMeans && !(meta.sd > 0.0)) throw InputError("task: meta sd must be positive");
    if (!(atoms.spread > 0.0)) throw InputError("task: atom spread must be positive");
    switch (noise.kind) {
        case NoiseKind::GaussianTrunc:
            if (!(noise.sd >= 0.0)) throw InputError("task: noise sd must be nonnegative");
            break;
        case NoiseKind::StudentT:
            if (!(noise.df > 0.0) || !(noise.scale >= 0.0)) throw InputError("task: Student-t needs df > 0, scale >= 0");
            break;
        case NoiseKind::OutlierMix:
            if (!(noise.fraction >= 0.0 && noise.fraction < 0.5)) {
                throw InputError("task: outlier fraction must lie in [0, 0.5)");
            }
            if (!(noise.magnitude > 0.0) || noise.magnitude > M) {
                throw InputError("task: outlier magnitude must lie in (0, M]");
            }
            if (!(noise.sd >= 0.0)) throw InputError("task: noise sd must be nonnegative");
            break;
    }
    if (target.kind == TargetKind::RKHSExpansion) {
        if (target.anchors < 1) throw InputError("task: RKHS expansion needs at least one anchor");
        if (!(target.coef_scale >= 0.0)) throw InputError("task: coefficient scale must be nonnegative");
        if (atoms.kind != AtomKind::GaussianAtoms) {
            throw InputError("task: RKHS expansion targets need Gaussian atoms (closed-form embeddings)");
        }
    }
}

namespace {

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// E exp(-|X| / h) for X ~ N(delta, v).
double laplace_gauss_mean(double delta, double v, double h) {
    const double sv = std::sqrt(v);
    const double base = v / (2.0 * h * h);
    const double left = std_normal_cdf((delta - v / h) / sv);
    const double right = std_normal_cdf((-delta - v / h) / sv);
    double out = 0.0;
    if (left > 0.0) out += std::exp(base - delta / h + std::log(left));
    if (right > 0.0) out += std::exp(base + delta / h + std::log(right));
    return out;
}

std::vector<double> draw_theta(const TaskSpec& spec, std::mt19937_64& rng) {
    std::vector<double> theta(static_cast<std::size_t>(spec.dim));
    if (spec.meta.kind == MetaKind::UniformMeans) {
        std::uniform_real_distribution<double> u(spec.meta.low, spec.meta.high);
        for (double& t : theta) t = u(rng);
    } else {
        std::normal_distribution<double> g(spec.meta.mean, spec.meta.sd);
        for (double& t : theta) t = g(rng);
    }
    return theta;
}

EmpiricalDistribution draw_atoms(const TaskSpec& spec, const std::vector<double>& theta, int d, std::mt19937_64& rng) {
    Eigen::MatrixXd atoms(spec.dim, d);
    if (spec.atoms.kind == AtomKind::GaussianAtoms) {
        std::normal_distribution<double> g(0.0, spec.atoms.spread);
        for (int s = 0; s < d; ++s)
            for (int k = 0; k < spec.dim; ++k) atoms(k, s) = theta[static_cast<std::size_t>(k)] + g(rng);
    } else {
        std::uniform_real_distribution<double> u(-spec.atoms.spread, spec.atoms.spread);
        for (int s = 0; s < d; ++s)
            for (int k = 0; k < spec.dim; ++k) atoms(k, s) = theta[static_cast<std::size_t>(k)] + u(rng);
    }
    return EmpiricalDistribution(std::move(atoms));
}

double mean_of(std::span<const double> theta) {
    double acc = 0.0;
    for (double t : theta) acc += t;
    return acc / static_cast<double>(theta.size());
}

}  // namespace

double population_inner(const BaseKernel& kernel, double spread, std::span<const double> theta_a,
                        std::span<const double> theta_b) {
    if (theta_a.size() != theta_b.size()) throw InputError("population_inner: dimension mismatch");
    const double h = kernel.bandwidth();
    const double v = 2.0 * spread * spread;
    double out = 1.0;
    for (std::size_t k = 0; k < theta_a.size(); ++k) {
        const double delta = theta_a[k] - theta_b[k];
        if (kernel.family() == BaseFamily::Gaussian) {
            const double w = h * h + v;
            out *= std::sqrt(h * h / w) * std::exp(-delta * delta / (2.0 * w));
        } else {
            out *= laplace_gauss_mean(delta, v, h);
        }
    }
    return out;
}

RegressionTarget::RegressionTarget(const TaskSpec& spec) : spec_(spec) {
    spec_.validate();
    if (spec_.target.kind != TargetKind::RKHSExpansion) return;
    std::mt19937_64 rng(mix_seed(spec_.target.anchor_seed, 0xA17C));
    std::uniform_real_distribution<double> coef(-spec_.target.coef_scale, spec_.target.coef_scale);
    for (int j = 0; j < spec_.target.anchors; ++j) {
        anchors_.push_back(draw_theta(spec_, rng));
        coefficients_.push_back(coef(rng));
    }
    const std::vector<double> origin(static_cast<std::size_t>(spec_.dim), 0.0);
    self_inner_ = population_inner(spec_.base_kernel, spec_.atoms.spread, origin, origin);
}

double RegressionTarget::operator()(std::span<const double> theta) const {
    switch (spec_.target.kind) {
        case TargetKind::LinearInMean: return spec_.target.amplitude * mean_of(theta);
        case TargetKind::SineOfMean: return spec_.target.amplitude * std::sin(spec_.target.frequency * mean_of(theta));
        case TargetKind::RKHSExpansion: {
            double acc = 0.0;
            for (std::size_t j = 0; j < anchors_.size(); ++j) {
                const double ab = population_inner(spec_.base_kernel, spec_.atoms.spread, anchors_[j], theta);
                acc += coefficients_[j] * spec_.second_kernel.from_inner(self_inner_, self_inner_, ab);
            }
            return acc;
        }
    }
    return 0.0;
}

TwoStageSample generate(const TaskSpec& spec, int n, int d, int n_test) {
    spec.validate();
    if (n < 1 || d < 1 || n_test < 1) throw InputError("generate: n, d and n_test must all be >= 1");
    const RegressionTarget g(spec);
    const double M = spec.M;

    TwoStageSample out;
    out.d = d;
    out.y.resize(n);
    out.train_target.resize(n);
    out.is_outlier.assign(static_cast<std::size_t>(n), false);
    out.train.reserve(static_cast<std::size_t>(n));

    std::mt19937_64 rng(mix_seed(spec.seed, 1));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        auto theta = draw_theta(spec, rng);
        const double clean = g(theta);
        double y = clean;
        switch (spec.noise.kind) {
            case NoiseKind::GaussianTrunc:
                if (spec.noise.sd > 0.0) y += std::normal_distribution<double>(0.0, spec.noise.sd)(rng);
                break;
            case NoiseKind::StudentT:
                y += spec.noise.scale * std::student_t_distribution<double>(spec.noise.df)(rng);
                break;
            case NoiseKind::OutlierMix: {
                const double u = unit(rng);
                const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
                const double eps =
                    spec.noise.sd > 0.0 ? std::normal_distribution<double>(0.0, spec.noise.sd)(rng) : 0.0;
                if (u < spec.noise.fraction) {
                    y = sign * spec.noise.magnitude;
                    out.is_outlier[static_cast<std::size_t>(i)] = true;
                } else {
                    y += eps;
                }
                break;
            }
        }
        out.y(i) = std::clamp(y, -M, M);
        out.train_target(i) = clean;
        out.train.push_back(draw_atoms(spec, theta, d, rng));
        out.train_theta.push_back(std::move(theta));
    }

    std::mt19937_64 test_rng(mix_seed(spec.seed, 2));
    out.test_target.resize(n_test);
    out.test.reserve(static_cast<std::size_t>(n_test));
    for (int t = 0; t < n_test; ++t) {
        auto theta = draw_theta(spec, test_rng);
        out.test_target(t) = g(theta);
        out.test.push_back(draw_atoms(spec, theta, d, test_rng));
        out.test_theta.push_back(std::move(theta));
    }
    return out;
}

int regime_of(double regime_r) {
    if (!(regime_r > 0.0) || !std::isfinite(regime_r)) throw InputError("regularity index r must be positive");
    if (regime_r < 0.5) return 1;
    if (regime_r <= 1.0) return 2;
    return 3;
}

namespace {
void validate_schedule_inputs(double beta, int n) {
    if (!(beta > 0.0 && beta <= 1.0)) throw InputError("capacity index beta must lie in (0, 1]");
    if (n < 1) throw InputError("sample size must be >= 1");
}

// Ceiling that ignores the last few ulps, so 64^{4/3} gives 256 rather than 257.
int ceil_count(double x) { return static_cast<int>(std::ceil(x * (1.0 - 1e-12))); }
}  // namespace

Schedule schedule_from_theorem(double regime_r, double beta, double alpha, int n) {
    const int regime = regime_of(regime_r);
    validate_schedule_inputs(beta, n);
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("Hölder exponent alpha must lie in (0, 1]");
    const double N = static_cast<double>(n);
    double lambda_exp = 0.0, d_exp = 0.0;
    switch (regime) {
        case 1:
            lambda_exp = 1.0 / (1.0 + beta);
            d_exp = 2.0 / (alpha * (1.0 + beta));
            break;
        case 2:
            lambda_exp = 1.0 / (2.0 * regime_r + beta);
            d_exp = (1.0 + 2.0 * regime_r) / (alpha * (2.0 * regime_r + beta));
            break;
        default:
            lambda_exp = 1.0 / (2.0 + beta);
            d_exp = 3.0 / (alpha * (2.0 + beta));
            break;
    }
    const double d = std::pow(N, d_exp);
    if (d > 1e9) throw InputError("schedule asks for more than 1e9 atoms per distribution");
    return {std::pow(N, -lambda_exp), std::max(1, ceil_count(d)), regime};
}

double sigma_from_corollary(double regime_r, double beta, double p, int n) {
    const int regime = regime_of(regime_r);
    validate_schedule_inputs(beta, n);
    if (!(p > 0.0) || !std::isfinite(p)) throw InputError("window exponent p must be positive");
    const double denom = regime == 1 ? 1.0 + beta : regime == 2 ? 2.0 * regime_r + beta : 2.0 + beta;
    return std::pow(static_cast<double>(n), (p + 1.0 + regime_r) / (2.0 * p * denom));
}

std::string to_string(MetaKind k) { return k == MetaKind::UniformMeans ? "uniform_means" : "gaussian_means"; }
std::string to_string(AtomKind k) { return k == AtomKind::GaussianAtoms ? "gaussian" : "uniform"; }
std::string to_string(TargetKind k) {
    switch (k) {
        case TargetKind::LinearInMean: return "linear_in_mean";
        case TargetKind::SineOfMean: return "sine_of_mean";
        case TargetKind::RKHSExpansion: return "rkhs_expansion";
    }
    return "?";
}
std::string to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::GaussianTrunc: return "gaussian_trunc";
        case NoiseKind::StudentT: return "student_t";
        case NoiseKind::OutlierMix: return "outlier_mix";
    }
    return "?";
}

MetaKind parse_meta_kind(std::string_view s) {
    if (s == "uniform_means") return MetaKind::UniformMeans;
    if (s == "gaussian_means") return MetaKind::GaussianMeans;
    throw InputError("unknown meta kind '" + std::string(s) + "'");
}
AtomKind parse_atom_kind(std::string_view s) {
    if (s == "gaussian") return AtomKind::GaussianAtoms;
    if (s == "uniform") return AtomKind::UniformAtoms;
    throw InputError("unknown atom kind '" + std::string(s) + "'");
}
TargetKind parse_target_kind(std::string_view s) {
    if (s == "linear_in_mean") return TargetKind::LinearInMean;
    if (s == "sine_of_mean") return TargetKind::SineOfMean;
    if (s == "rkhs_expansion") return TargetKind::RKHSExpansion;
    throw InputError("unknown target kind '" + std::string(s) + "'");
}
NoiseKind parse_noise_kind(std::string_view s) {
    if (s == "gaussian_trunc") return NoiseKind::GaussianTrunc;
    if (s == "student_t") return NoiseKind::StudentT;
    if (s == "outlier_mix") return NoiseKind::OutlierMix;
    throw InputError("unknown noise kind '" + std::string(s) + "'");
}

}  // namespace rdr
