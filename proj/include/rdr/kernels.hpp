#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace rdr {

enum class BaseFamily { Gaussian, Laplacian };

/// Normalized translation-invariant kernel on R^m, so k(v, v) = 1 and B_k = 1.
///   Gaussian:  exp(-|u - v|_2^2 / (2 h^2))
///   Laplacian: exp(-|u - v|_1 / h)
class BaseKernel {
public:
    BaseKernel(BaseFamily family, double bandwidth);

    static BaseKernel gaussian(double bandwidth) { return {BaseFamily::Gaussian, bandwidth}; }
    static BaseKernel laplacian(double bandwidth) { return {BaseFamily::Laplacian, bandwidth}; }

    BaseFamily family() const { return family_; }
    double bandwidth() const { return bandwidth_; }

    /// sup_v k(v, v).
    static constexpr double bound() { return 1.0; }

    double operator()(std::span<const double> u, std::span<const double> v) const;

private:
    BaseFamily family_;
    double bandwidth_;
};

/// A bag of atoms in R^m standing in for one unobserved distribution.
/// Atoms are stored column-wise (m x d).
class EmpiricalDistribution {
public:
    explicit EmpiricalDistribution(Eigen::MatrixXd atoms);

    static EmpiricalDistribution from_points(const std::vector<std::vector<double>>& points);

    int dim() const { return static_cast<int>(atoms_.rows()); }
    int size() const { return static_cast<int>(atoms_.cols()); }
    std::span<const double> atom(int s) const {
        return {atoms_.col(s).data(), static_cast<std::size_t>(atoms_.rows())};
    }
    const Eigen::MatrixXd& atoms() const { return atoms_; }

private:
    Eigen::MatrixXd atoms_;
};

using DistributionList = std::vector<EmpiricalDistribution>;

double eval_base_kernel(const BaseKernel& kernel, std::span<const double> u, std::span<const double> v);

/// <mu_a, mu_b>_H as the plain double sum (1/(d_a d_b)) sum_s sum_t k(a_s, b_t).
double embedding_inner(const BaseKernel& kernel, const EmpiricalDistribution& a,
                       const EmpiricalDistribution& b);

/// |mu_a - mu_b|_H^2, clamped to zero when cancellation leaves it in [-1e-12, 0).
double embedding_distance_sq(const BaseKernel& kernel, const EmpiricalDistribution& a,
                             const EmpiricalDistribution& b);

/// Values in [-kDistanceClamp, 0) are rounding noise; anything lower is an error.
inline constexpr double kDistanceClamp = 1e-12;

/// Clamps a raw squared distance or throws NumericalError.
double clamp_distance_sq(double raw);

/// Pairwise H-inner products of a fixed set of empirical embeddings.
///
/// Entries are assembled upper-triangle first and mirrored, so the matrix is
/// exactly symmetric. For one-dimensional atoms under the Laplacian kernel the
/// double sum is evaluated through a sorted prefix-sum rewrite that costs
/// O(d_a + d_b) per pair instead of O(d_a d_b); it is the same finite sum,
/// only reassociated.
class EmbeddingGram {
public:
    EmbeddingGram(const BaseKernel& kernel, DistributionList distributions);

    const Eigen::MatrixXd& inner() const { return inner_; }
    const BaseKernel& base_kernel() const { return kernel_; }
    const DistributionList& distributions() const { return distributions_; }
    std::size_t size() const { return distributions_.size(); }

    double distance_sq(std::size_t i, std::size_t j) const;

    /// Most negative squared distance seen before clamping (0 when none).
    double min_raw_distance_sq() const { return min_raw_distance_sq_; }

private:
    BaseKernel kernel_;
    DistributionList distributions_;
    Eigen::MatrixXd inner_;
    double min_raw_distance_sq_ = 0.0;
};

/// Cross inner products <mu_test_t, mu_train_i>_H plus the test self inner
/// products, computed with the same evaluation route as EmbeddingGram.
struct CrossInner {
    Eigen::MatrixXd inner;          // n_test x n_train
    Eigen::VectorXd test_self;      // <mu_test_t, mu_test_t>
};

CrossInner cross_inner(const EmbeddingGram& train, const DistributionList& test);

enum class SecondLevelFamily { GaussianOnH, LinearOnH };

/// Mercer kernel K on embeddings. Carries the Hölder pair (alpha, L) that
/// K_(.) satisfies for embeddings of norm at most 1:
///   GaussianOnH: K = exp(-|mu - nu|_H^2 / (2 g^2)), alpha = 1, L = 1/g
///   LinearOnH:   K = <mu, nu>_H,                   alpha = 1, L = 1
class SecondLevelKernel {
public:
    static SecondLevelKernel gaussian_on_h(double bandwidth);
    static SecondLevelKernel linear_on_h();

    SecondLevelFamily family() const { return family_; }
    double bandwidth() const { return bandwidth_; }
    double holder_alpha() const { return holder_alpha_; }
    double holder_L() const { return holder_L_; }

    /// sqrt(sup K(mu, mu)); 1 for both families since |mu|_H <= sqrt(B_k) = 1.
    double kappa() const { return 1.0; }

    /// K(mu_a, mu_b) from the three H-inner products.
    double from_inner(double aa, double bb, double ab) const;

private:
    SecondLevelKernel(SecondLevelFamily family, double bandwidth, double alpha, double L);

    SecondLevelFamily family_;
    double bandwidth_;
    double holder_alpha_;
    double holder_L_;
};

Eigen::MatrixXd second_level_gram(const SecondLevelKernel& K, const EmbeddingGram& gram);

/// n_test x n_train matrix of K(mu_test_t, mu_train_i).
Eigen::MatrixXd cross_gram(const SecondLevelKernel& K, const EmbeddingGram& train,
                           const DistributionList& test);
Eigen::MatrixXd cross_gram(const SecondLevelKernel& K, const BaseKernel& kernel,
                           const DistributionList& train, const DistributionList& test);

// Names used in config files and records.
std::string to_string(BaseFamily f);
std::string to_string(SecondLevelFamily f);
BaseFamily parse_base_family(std::string_view name);
SecondLevelFamily parse_second_level_family(std::string_view name);

// Row-major CSV with 17 significant digits per entry.
std::string matrix_to_csv(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_csv(std::string_view text);

// {"dim": m, "atoms": [[x_1..x_m], ...]}
nlohmann::json to_json(const EmpiricalDistribution& dist);
EmpiricalDistribution distribution_from_json(const nlohmann::json& doc);

}  // namespace rdr
