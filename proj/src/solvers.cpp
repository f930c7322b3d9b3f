#include "rdr/solvers.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "rdr/errors.hpp"

namespace rdr {

namespace {

constexpr double kPsdTolerance = 1e-10;

void validate_problem(const Eigen::MatrixXd& G, const Eigen::VectorXd& y, double lambda) {
    validate_gram(G);
    if (y.size() != G.rows()) {
        throw InputError("response vector has length " + std::to_string(y.size()) + " but the Gram is " +
                         std::to_string(G.rows()) + "x" + std::to_string(G.cols()));
    }
    if (!y.allFinite()) throw InputError("responses must be finite");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be positive and finite");
}

// Solves (S G S + lambda n I) z = S y and returns S z, with S = diag(sqrt_w).
// With sqrt_w = 1 every scaling is exact, so this is the plain ridge solve.
Eigen::VectorXd solve_weighted(const Eigen::MatrixXd& G, const Eigen::VectorXd& sqrt_w, const Eigen::VectorXd& y,
                               double lambda) {
    const auto n = G.rows();
    Eigen::MatrixXd A = sqrt_w.asDiagonal() * G * sqrt_w.asDiagonal();
    A.diagonal().array() += lambda * static_cast<double>(n);
    const Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("Cholesky factorization of the regularized system failed (lambda too small?)");
    }
    const Eigen::VectorXd z = llt.solve(sqrt_w.cwiseProduct(y));
    if (!z.allFinite()) throw NumericalError("regularized solve produced non-finite coefficients");
    return sqrt_w.cwiseProduct(z);
}

Eigen::VectorXd weights(const WindowingLoss& loss, const Eigen::VectorXd& residual, double sigma) {
    Eigen::VectorXd w(residual.size());
    for (Eigen::Index i = 0; i < residual.size(); ++i) {
        const double s = loss.family == WindowFamily::LeastSquares ? 0.0
                                                                    : (residual(i) / sigma) * (residual(i) / sigma);
        w(i) = v_prime(loss, s);
        if (!(w(i) > 0.0) || !std::isfinite(w(i))) {
            throw NumericalError("reweighting produced a non-positive weight; V' must stay positive");
        }
    }
    return w;
}

double quad_form(const Eigen::MatrixXd& G, const Eigen::VectorXd& a) { return std::max(a.dot(G * a), 0.0); }

}  // namespace

double RepresenterModel::rkhs_norm() const { return std::sqrt(quad_form(*train_gram, coefficients)); }

void validate_gram(const Eigen::MatrixXd& G) {
    if (G.rows() != G.cols() || G.rows() == 0) throw InputError("Gram matrix must be square and nonempty");
    if (!G.allFinite()) throw InputError("Gram matrix has non-finite entries");
    const double scale = std::max(G.cwiseAbs().maxCoeff(), 1e-300);
    if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw InputError("Gram matrix is not symmetric");
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().maxCoeff();
    const double bottom = es.eigenvalues().minCoeff();
    if (bottom < -kPsdTolerance * std::max(top, 0.0)) {
        std::ostringstream os;
        os << "Gram matrix is not positive semidefinite (min eigenvalue " << bottom << ", max " << top << ")";
        throw InputError(os.str());
    }
}

double objective(const Eigen::MatrixXd& G, const Eigen::VectorXd& y, const Eigen::VectorXd& c, double lambda,
                 double sigma, const WindowingLoss& loss) {
    const Eigen::VectorXd r = G * c - y;
    double data = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        data += loss.family == WindowFamily::LeastSquares ? r(i) * r(i) : loss_value(loss, r(i), sigma);
    }
    return data / static_cast<double>(r.size()) + lambda * quad_form(G, c);
}

RepresenterModel fit_ls(std::shared_ptr<const Eigen::MatrixXd> G, const Eigen::VectorXd& y, double lambda) {
    if (!G) throw InputError("fit_ls: null Gram");
    validate_problem(*G, y, lambda);
    RepresenterModel model;
    model.coefficients = solve_weighted(*G, Eigen::VectorXd::Ones(G->rows()), y, lambda);
    model.train_gram = std::move(G);
    model.lambda = lambda;
    return model;
}

RepresenterModel fit_ls(const Eigen::MatrixXd& G, const Eigen::VectorXd& y, double lambda) {
    return fit_ls(std::make_shared<const Eigen::MatrixXd>(G), y, lambda);
}

std::pair<RepresenterModel, FitReport> fit_rdr(std::shared_ptr<const Eigen::MatrixXd> G, const Eigen::VectorXd& y,
                                               double lambda, double sigma, const WindowingLoss& loss,
                                               const SolverOptions& opts) {
    if (!(sigma > 0.0)) throw InputError("sigma must be positive");
    if (opts.max_iter < 1) throw InputError("max_iter must be at least 1");
    RepresenterModel model = fit_ls(std::move(G), y, lambda);
    model.sigma = sigma;
    model.loss = loss;
    const Eigen::MatrixXd& gram = *model.train_gram;

    FitReport report;
    report.objective_trace.push_back(objective(gram, y, model.coefficients, lambda, sigma, loss));
    double rel_change = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= opts.max_iter; ++it) {
        const Eigen::VectorXd r = gram * model.coefficients - y;
        const Eigen::VectorXd w = weights(loss, r, sigma);
        Eigen::VectorXd next = solve_weighted(gram, w.cwiseSqrt(), y, lambda);
        const double step = (next - model.coefficients).norm();
        const double size = model.coefficients.norm();
        rel_change = step == 0.0 ? 0.0 : step / std::max(size, std::numeric_limits<double>::min());
        model.coefficients = std::move(next);
        report.objective_trace.push_back(objective(gram, y, model.coefficients, lambda, sigma, loss));
        report.iterations = it;
        if (rel_change < opts.tol) break;
    }
    report.stationarity_residual = stationarity_residual(model, y);
    report.converged = rel_change < opts.tol && report.stationarity_residual <= opts.stat_tol;
    report.rkhs_norm = model.rkhs_norm();
    return {std::move(model), std::move(report)};
}

std::pair<RepresenterModel, FitReport> fit_rdr(const Eigen::MatrixXd& G, const Eigen::VectorXd& y, double lambda,
                                               double sigma, const WindowingLoss& loss, const SolverOptions& opts) {
    return fit_rdr(std::make_shared<const Eigen::MatrixXd>(G), y, lambda, sigma, loss, opts);
}

Eigen::VectorXd predict(const RepresenterModel& model, const Eigen::MatrixXd& cross) {
    if (cross.cols() != model.coefficients.size()) {
        throw InputError("predict: cross Gram has " + std::to_string(cross.cols()) + " columns, model has " +
                         std::to_string(model.coefficients.size()) + " coefficients");
    }
    return cross * model.coefficients;
}

double stationarity_residual(const RepresenterModel& model, const Eigen::VectorXd& y) {
    const Eigen::MatrixXd& G = *model.train_gram;
    const Eigen::VectorXd r = G * model.coefficients - y;
    const Eigen::VectorXd w = weights(model.loss, r, model.sigma);
    const double n = static_cast<double>(y.size());
    const Eigen::VectorXd a = w.cwiseProduct(r) / n + model.lambda * model.coefficients;
    return std::sqrt(quad_form(G, a));
}

BoundCheck rkhs_norm_bound_check(const RepresenterModel& model, double M) {
    const double lhs = model.rkhs_norm();
    const double rhs = std::sqrt(model.loss.C_V) * M / std::sqrt(model.lambda);
    return {lhs, rhs, lhs <= rhs + 1e-9};
}

ETermCheck e_term_norm(const RepresenterModel& model, const Eigen::VectorXd& y, double M, double kappa) {
    const Eigen::MatrixXd& G = *model.train_gram;
    const Eigen::VectorXd r = G * model.coefficients - y;
    const Eigen::VectorXd w = weights(model.loss, r, model.sigma);
    const double n = static_cast<double>(y.size());
    const Eigen::VectorXd b = (w.array() - 1.0).matrix().cwiseProduct(r) / n;
    const double norm = std::sqrt(quad_form(G, b));

    const auto& L = model.loss;
    double bound = 0.0;
    if (L.c_p > 0.0) {
        const double q = 2.0 * L.p + 1.0;
        bound = std::pow(2.0, 2.0 * L.p) * L.c_p * kappa * std::pow(model.sigma, -2.0 * L.p) *
                (std::pow(kappa, q) * std::pow(std::sqrt(L.C_V) * M, q) * std::pow(model.lambda, -(L.p + 0.5)) +
                 std::pow(M, q));
    }
    return {norm, bound, norm <= bound + 1e-12};
}

std::string gram_digest(const Eigen::MatrixXd& G) {
    std::uint64_t h = 1469598103934665603ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(G.data());
    const auto count = static_cast<std::size_t>(G.size()) * sizeof(double);
    for (std::size_t i = 0; i < count; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

nlohmann::json to_json(const RepresenterModel& model) {
    nlohmann::json doc;
    doc["lambda"] = model.lambda;
    if (std::isfinite(model.sigma)) {
        doc["sigma"] = model.sigma;
    } else {
        doc["sigma"] = "inf";
    }
    doc["loss_family"] = to_string(model.loss.family);
    doc["coefficients"] = std::vector<double>(model.coefficients.data(),
                                              model.coefficients.data() + model.coefficients.size());
    doc["gram_digest"] = model.train_gram ? gram_digest(*model.train_gram) : std::string();
    return doc;
}

nlohmann::json to_json(const FitReport& report) {
    return {{"iterations", report.iterations},
            {"objective_trace", report.objective_trace},
            {"stationarity_residual", report.stationarity_residual},
            {"converged", report.converged}};
}

}  // namespace rdr
