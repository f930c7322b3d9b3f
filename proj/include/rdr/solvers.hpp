#pragma once

#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rdr/kernels.hpp"
#include "rdr/robust_loss.hpp"

namespace rdr {

struct SolverOptions {
    double tol = 1e-10;       // relative change in coefficients
    double stat_tol = 1e-8;   // RKHS norm of the first-order residual
    int max_iter = 200;
};

/// f = sum_i c_i K(mu_i, .) over the training embeddings.
struct RepresenterModel {
    Eigen::VectorXd coefficients;
    std::shared_ptr<const Eigen::MatrixXd> train_gram;
    std::shared_ptr<const DistributionList> train_refs;  // may be null when fitted from a bare Gram
    double lambda = 0.0;
    double sigma = std::numeric_limits<double>::infinity();
    WindowingLoss loss = WindowingLoss::least_squares();

    /// f(mu_j) on the training embeddings, i.e. G c.
    Eigen::VectorXd fitted() const { return *train_gram * coefficients; }
    /// |f|_K = sqrt(c' G c).
    double rkhs_norm() const;
};

struct FitReport {
    int iterations = 0;
    std::vector<double> objective_trace;
    double stationarity_residual = 0.0;
    bool converged = false;
    double rkhs_norm = 0.0;
};

/// (1/n) sum_i l_sigma((Gc)_i - y_i) + lambda c'Gc, or the squared loss when
/// the window is LeastSquares.
double objective(const Eigen::MatrixXd& G, const Eigen::VectorXd& y, const Eigen::VectorXd& c, double lambda,
                 double sigma, const WindowingLoss& loss);

/// Least-squares distribution regression: solves (G + lambda n I) c = y.
RepresenterModel fit_ls(std::shared_ptr<const Eigen::MatrixXd> G, const Eigen::VectorXd& y, double lambda);
RepresenterModel fit_ls(const Eigen::MatrixXd& G, const Eigen::VectorXd& y, double lambda);

/// Robust distribution regression by half-quadratic reweighting.
///
/// Starting from the least-squares solution, each step freezes the weights
/// w_i = V'(r_i^2 / sigma^2) at the current residuals r = Gc - y and solves the
/// weighted ridge problem through the symmetric positive definite system
///
///   (W^{1/2} G W^{1/2} + lambda n I) z = W^{1/2} y,   c = W^{1/2} z.
///
/// A fixed point satisfies W r + lambda n c = 0, which is the representer form
/// of the first-order condition (1/n) sum_i V'(.) r_i K_{mu_i} + lambda f = 0.
/// For concave V the frozen-weight quadratic majorizes the loss, so the
/// objective never increases.
std::pair<RepresenterModel, FitReport> fit_rdr(std::shared_ptr<const Eigen::MatrixXd> G, const Eigen::VectorXd& y,
                                               double lambda, double sigma, const WindowingLoss& loss,
                                               const SolverOptions& opts = {});
std::pair<RepresenterModel, FitReport> fit_rdr(const Eigen::MatrixXd& G, const Eigen::VectorXd& y, double lambda,
                                               double sigma, const WindowingLoss& loss,
                                               const SolverOptions& opts = {});

/// cross * c, with cross of shape n_test x n_train.
Eigen::VectorXd predict(const RepresenterModel& model, const Eigen::MatrixXd& cross);

/// sqrt(a' G a) with a = (1/n) diag(V'(r_i^2/sigma^2)) r + lambda c and r = Gc - y.
double stationarity_residual(const RepresenterModel& model, const Eigen::VectorXd& y);

struct BoundCheck {
    double lhs;
    double rhs;
    bool ok;
};

/// |f|_K <= sqrt(C_V) M lambda^{-1/2}.
BoundCheck rkhs_norm_bound_check(const RepresenterModel& model, double M);

/// RKHS norm of E = (1/n) sum_i [V'(r_i^2/sigma^2) - 1] r_i K_{mu_i}, with the
/// closed-form ceiling
///   2^{2p} c_p kappa sigma^{-2p} [kappa^{2p+1} (sqrt(C_V) M)^{2p+1} lambda^{-(p+1/2)} + M^{2p+1}].
struct ETermCheck {
    double norm;
    double bound;
    bool ok;
};

ETermCheck e_term_norm(const RepresenterModel& model, const Eigen::VectorXd& y, double M, double kappa);

/// Checks symmetry and eigenvalues >= -1e-10 * max eigenvalue.
void validate_gram(const Eigen::MatrixXd& G);

nlohmann::json to_json(const RepresenterModel& model);
nlohmann::json to_json(const FitReport& report);

/// Hex FNV-1a digest of the Gram's raw bytes; identifies which Gram a model was fitted on.
std::string gram_digest(const Eigen::MatrixXd& G);

}  // namespace rdr
