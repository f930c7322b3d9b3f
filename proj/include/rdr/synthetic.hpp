#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rdr/kernels.hpp"

namespace rdr {

/// splitmix64 finalizer applied to seed + stream * golden ratio; used to derive
/// independent RNG streams (train/test, cell, replicate) from one master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

enum class MetaKind { UniformMeans, GaussianMeans };
enum class AtomKind { GaussianAtoms, UniformAtoms };
enum class TargetKind { LinearInMean, SineOfMean, RKHSExpansion };
enum class NoiseKind { GaussianTrunc, StudentT, OutlierMix };

/// Law of the distribution parameter theta in R^m.
struct MetaSpec {
    MetaKind kind = MetaKind::UniformMeans;
    double low = -1.0;    // UniformMeans: theta_k ~ U[low, high]
    double high = 1.0;
    double mean = 0.0;    // GaussianMeans: theta_k ~ N(mean, sd^2)
    double sd = 1.0;
};

/// Law of the atoms given theta.
struct AtomSpec {
    AtomKind kind = AtomKind::GaussianAtoms;
    double spread = 0.5;  // Gaussian: N(theta, spread^2 I); Uniform: U[theta - spread, theta + spread]^m
};

/// Noiseless regression function g(theta).
///   LinearInMean:  amplitude * mean_k theta_k
///   SineOfMean:    amplitude * sin(frequency * mean_k theta_k)
///   RKHSExpansion: sum_j a_j K(mu_{theta_j}, mu_theta) over population embeddings,
///                  anchors theta_j drawn from the meta law, a_j ~ U[-coef_scale, coef_scale].
struct TargetSpec {
    TargetKind kind = TargetKind::SineOfMean;
    double amplitude = 0.8;
    double frequency = 1.0;
    int anchors = 8;
    double coef_scale = 0.5;
    std::uint64_t anchor_seed = 7;
};

/// Response noise.
///   GaussianTrunc: y = clamp(g + N(0, sd^2))
///   StudentT:      y = clamp(g + scale * t_df)
///   OutlierMix:    with probability fraction, y = +-magnitude (random sign);
///                  otherwise y = clamp(g + N(0, sd^2))
struct NoiseSpec {
    NoiseKind kind = NoiseKind::GaussianTrunc;
    double sd = 0.1;
    double df = 3.0;
    double scale = 0.1;
    double fraction = 0.0;
    double magnitude = 1.0;
};

struct TaskSpec {
    int dim = 1;
    MetaSpec meta;
    AtomSpec atoms;
    TargetSpec target;
    NoiseSpec noise;
    double M = 1.0;
    std::uint64_t seed = 0;
    // Kernels under which an RKHSExpansion target is defined.
    BaseKernel base_kernel = BaseKernel::gaussian(1.0);
    SecondLevelKernel second_kernel = SecondLevelKernel::gaussian_on_h(1.0);

    /// Throws InputError when a field is out of range.
    void validate() const;
};

/// Closed-form population inner product <mu_theta, mu_theta'>_H for GaussianAtoms.
double population_inner(const BaseKernel& kernel, double spread, std::span<const double> theta_a,
                        std::span<const double> theta_b);

/// The regression function of a task; anchors are fixed by TargetSpec::anchor_seed.
class RegressionTarget {
public:
    explicit RegressionTarget(const TaskSpec& spec);

    double operator()(std::span<const double> theta) const;

    const std::vector<std::vector<double>>& anchors() const { return anchors_; }
    const std::vector<double>& anchor_coefficients() const { return coefficients_; }

private:
    TaskSpec spec_;
    std::vector<std::vector<double>> anchors_;
    std::vector<double> coefficients_;
    double self_inner_ = 1.0;
};

struct TwoStageSample {
    DistributionList train;
    Eigen::VectorXd y;
    Eigen::VectorXd train_target;     // noiseless g(theta_i)
    std::vector<bool> is_outlier;
    std::vector<std::vector<double>> train_theta;
    DistributionList test;
    Eigen::VectorXd test_target;      // noiseless g(theta) on the held-out set
    std::vector<std::vector<double>> test_theta;
    int d = 0;
};

/// Two-stage sampling: theta_i from the meta law, y_i from g and the noise
/// model, then d atoms from the theta_i law. Deterministic in spec.seed.
TwoStageSample generate(const TaskSpec& spec, int n, int d, int n_test);

struct Schedule {
    double lambda;
    int d;
    int regime;  // 1: r < 1/2, 2: 1/2 <= r <= 1, 3: r > 1
};

/// Regularization and second-stage size from the regime containing r:
///   lambda = n^{-1/(1+b)},          d = n^{2/(a(1+b))}          r in (0, 1/2)
///   lambda = n^{-1/(2r+b)},         d = n^{(1+2r)/(a(2r+b))}    r in [1/2, 1]
///   lambda = n^{-1/(2+b)},          d = n^{3/(a(2+b))}          r in (1, inf)
/// with d rounded up.
Schedule schedule_from_theorem(double regime_r, double beta, double alpha, int n);

/// Smallest admissible sigma: n^{(p+1+r)/(2p D)} with D = 1+b, 2r+b or 2+b by regime.
double sigma_from_corollary(double regime_r, double beta, double p, int n);

int regime_of(double regime_r);

std::string to_string(MetaKind k);
std::string to_string(AtomKind k);
std::string to_string(TargetKind k);
std::string to_string(NoiseKind k);
MetaKind parse_meta_kind(std::string_view s);
AtomKind parse_atom_kind(std::string_view s);
TargetKind parse_target_kind(std::string_view s);
NoiseKind parse_noise_kind(std::string_view s);

}  // namespace rdr
