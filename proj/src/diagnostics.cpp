#include "rdr/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "rdr/errors.hpp"

namespace rdr {

namespace {
constexpr double kEigenTolerance = 1e-10;

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError(std::string(name) + " must be positive and finite");
}
}  // namespace

SpectralSummary SpectralSummary::from_gram(const Eigen::MatrixXd& G) {
    if (G.rows() != G.cols() || G.rows() == 0) throw InputError("spectral summary needs a square nonempty Gram");
    const double n = static_cast<double>(G.rows());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G / n, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& ev = es.eigenvalues();
    std::vector<double> values(ev.data(), ev.data() + ev.size());
    return from_eigenvalues(std::move(values), static_cast<int>(G.rows()));
}

SpectralSummary SpectralSummary::from_eigenvalues(std::vector<double> values, int n) {
    if (n < 1) throw InputError("spectral summary needs n >= 1");
    SpectralSummary s;
    s.n = n;
    std::sort(values.begin(), values.end(), std::greater<>());
    s.raw_max = values.empty() ? 0.0 : values.front();
    s.raw_min = values.empty() ? 0.0 : values.back();
    if (s.raw_min < -kEigenTolerance) {
        std::ostringstream os;
        os << "operator spectrum has eigenvalue " << s.raw_min << " below -1e-10";
        throw NumericalError(os.str());
    }
    for (double& v : values) v = std::max(v, 0.0);
    s.eigenvalues = std::move(values);
    return s;
}

double effective_dimension(const SpectralSummary& spec, double lambda) {
    require_positive(lambda, "lambda");
    double total = 0.0;
    for (double v : spec.eigenvalues) total += v / (v + lambda);
    return total;
}

LogLogFit log_log_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InputError("log-log fit needs two or more paired points");
    const auto k = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InputError("log-log fit needs positive values");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= k;
    my /= k;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(y[i]) - my);
    }
    if (!(sxx > 0.0)) throw InputError("log-log fit needs at least two distinct abscissae");
    LogLogFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = std::log(y[i]) - (fit.intercept + fit.slope * std::log(x[i]));
        rss += e * e;
    }
    fit.residual = std::sqrt(rss / k);
    return fit;
}

BetaFit fit_beta_rate(const SpectralSummary& spec, std::span<const double> lambda_grid) {
    if (lambda_grid.size() < 4) throw InputError("beta-rate fit needs at least four grid points");
    const auto [lo, hi] = std::minmax_element(lambda_grid.begin(), lambda_grid.end());
    if (!(*lo > 0.0)) throw InputError("beta-rate grid must be positive");
    if (*hi / *lo < 100.0 * (1.0 - 1e-12)) throw InputError("beta-rate grid must span at least two decades");
    std::vector<double> inv_lambda, dims;
    for (double lambda : lambda_grid) {
        const double nd = effective_dimension(spec, lambda);
        if (!(nd > 0.0)) throw InputError("effective dimension vanishes on the grid (zero spectrum)");
        inv_lambda.push_back(1.0 / lambda);
        dims.push_back(nd);
    }
    const LogLogFit line = log_log_fit(inv_lambda, dims);
    BetaFit out;
    out.raw_slope = line.slope;
    out.beta_hat = std::clamp(line.slope, kMinBeta, 1.0);
    out.clipped = out.beta_hat != line.slope;
    out.c0_hat = std::exp(line.intercept);
    out.residual = line.residual;
    return out;
}

double empirical_l2_distance(std::span<const double> f1, std::span<const double> f2) {
    if (f1.size() != f2.size()) throw InputError("L2 distance: length mismatch");
    if (f1.empty()) throw InputError("L2 distance: need at least one evaluation point");
    double acc = 0.0;
    for (std::size_t i = 0; i < f1.size(); ++i) acc += (f1[i] - f2[i]) * (f1[i] - f2[i]);
    return std::sqrt(acc / static_cast<double>(f1.size()));
}

double empirical_l2_distance(const Eigen::VectorXd& f1, const Eigen::VectorXd& f2) {
    return empirical_l2_distance(std::span<const double>(f1.data(), static_cast<std::size_t>(f1.size())),
                                 std::span<const double>(f2.data(), static_cast<std::size_t>(f2.size())));
}

AQuantities a_quantities(double eff_dim, double lambda, double kappa, double n) {
    require_positive(lambda, "lambda");
    if (!(n >= 1.0)) throw InputError("sample count must be at least 1");
    const double root_n = std::sqrt(n);
    const double root_dim = std::sqrt(std::max(eff_dim, 0.0));
    AQuantities q;
    q.a_hat = 2.0 * kappa / root_n * (kappa / std::sqrt(n * lambda) + root_dim);
    q.a_prime_hat = 1.0 / (n * std::sqrt(lambda)) + root_dim / root_n;
    q.b_hat = q.a_hat / std::sqrt(lambda) + 1.0;
    return q;
}

AQuantities a_quantities(const SpectralSummary& spec, double lambda, double kappa, double n) {
    return a_quantities(effective_dimension(spec, lambda), lambda, kappa, n);
}

namespace {
void validate(const GapBoundInputs& in) {
    // c_p = 0 is the least-squares window; the bound then collapses to zero.
    if (!(in.c_p >= 0.0)) throw InputError("c_p must be nonnegative");
    require_positive(in.p, "p");
    require_positive(in.C_V, "C_V");
    require_positive(in.M, "M");
    require_positive(in.kappa, "kappa");
    require_positive(in.alpha, "alpha");
    require_positive(in.L_holder, "L");
    require_positive(in.B_k, "B_k");
    require_positive(in.lambda, "lambda");
    require_positive(in.d, "d");
    require_positive(in.sigma, "sigma");
    if (!(in.a_hat >= 0.0)) throw InputError("a_hat must be nonnegative");
}
}  // namespace

double gap_bound_constant(const GapBoundInputs& in) {
    validate(in);
    const double q = 2.0 * in.p + 1.0;
    const double ln2 = std::numbers::ln2;
    const double loss_part = std::pow(2.0, 2.0 * in.p) * in.c_p * in.kappa *
                             (std::pow(in.kappa, q) * std::pow(std::sqrt(in.C_V) * in.M, q) + std::pow(in.M, q));
    const double sampling_part =
        std::sqrt(2.0) * std::sqrt(2.0 + std::sqrt(std::numbers::pi)) * in.L_holder *
            std::pow(2.0, (in.alpha + 2.0) / 2.0) * std::pow(in.B_k, in.alpha / 2.0) *
            (2.0 * std::tgamma(3.0) + ln2 * ln2) +
        std::sqrt(2.0) * (2.0 * std::tgamma(2.0) + ln2);
    return loss_part * sampling_part;
}

double gap_bound_rhs(const GapBoundInputs& in) {
    const double C = gap_bound_constant(in);
    const double B = in.a_hat / std::sqrt(in.lambda) + 1.0;
    const double reg = std::pow(in.lambda, -(in.p + 0.5)) + 1.0;
    const double sampling =
        std::pow(in.lambda, -1.5) * std::pow(in.d, -in.alpha / 2.0) * B * B + std::pow(in.lambda, -0.5) * B;
    return C * reg * sampling / std::pow(in.sigma, 2.0 * in.p);
}

}  // namespace rdr
