#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace rdr {

/// Spectrum of (1/n) G, the empirical counterpart of the integral operator L_K.
struct SpectralSummary {
    std::vector<double> eigenvalues;  // nonincreasing, clamped to >= 0
    int n = 0;
    double raw_min = 0.0;             // smallest eigenvalue before clamping
    double raw_max = 0.0;

    /// Eigen-decomposes (1/n) G. Eigenvalues below -1e-10 * max(1, top) are an error.
    static SpectralSummary from_gram(const Eigen::MatrixXd& G);
    /// Wraps a given spectrum (used for synthetic spectra); values are sorted and checked.
    static SpectralSummary from_eigenvalues(std::vector<double> values, int n);
};

/// sum_i s_i / (s_i + lambda): the plug-in estimate of Tr((lambda I + L_K)^{-1} L_K).
double effective_dimension(const SpectralSummary& spec, double lambda);

struct LogLogFit {
    double slope;
    double intercept;
    double residual;  // RMS residual of the line in log space
};

/// Least-squares line through (log x_i, log y_i). Needs two distinct x and positive values.
LogLogFit log_log_fit(std::span<const double> x, std::span<const double> y);

struct BetaFit {
    double beta_hat;   // clipped to [kMinBeta, 1]
    double c0_hat;     // N(lambda) ~ c0 lambda^{-beta}
    double raw_slope;
    double residual;
    bool clipped;
};

inline constexpr double kMinBeta = 1e-3;

/// Fits log N(lambda) against -log lambda over a grid of at least four points
/// spanning at least two decades.
BetaFit fit_beta_rate(const SpectralSummary& spec, std::span<const double> lambda_grid);

/// sqrt((1/n) sum (f1_i - f2_i)^2), the Monte Carlo estimate of an L^2 distance.
double empirical_l2_distance(std::span<const double> f1, std::span<const double> f2);
double empirical_l2_distance(const Eigen::VectorXd& f1, const Eigen::VectorXd& f2);

struct AQuantities {
    double a_hat;        // (2 kappa / sqrt n)(kappa / sqrt(n lambda) + sqrt N)
    double a_prime_hat;  // 1/(n sqrt lambda) + sqrt N / sqrt n
    double b_hat;        // a_hat / sqrt lambda + 1
};

AQuantities a_quantities(double eff_dim, double lambda, double kappa, double n);
AQuantities a_quantities(const SpectralSummary& spec, double lambda, double kappa, double n);

struct GapBoundInputs {
    double p;
    double c_p;
    double C_V;
    double M;
    double kappa;
    double alpha;
    double L_holder;
    double B_k;
    double lambda;
    double d;
    double sigma;
    double a_hat;
};

/// The constant C~ multiplying the robust-gap bound.
double gap_bound_constant(const GapBoundInputs& in);

/// C~ (lambda^{-(p+1/2)} + 1)(lambda^{-3/2} d^{-alpha/2} B^2 + lambda^{-1/2} B) / sigma^{2p},
/// with B = a_hat / sqrt(lambda) + 1.
double gap_bound_rhs(const GapBoundInputs& in);

}  // namespace rdr
