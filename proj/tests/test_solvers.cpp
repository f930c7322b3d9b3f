#include <cmath>
#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rdr/errors.hpp"
#include "rdr/solvers.hpp"

using namespace rdr;

namespace {

const WindowingLoss kRobust[] = {WindowingLoss::welsch(), WindowingLoss::cauchy(), WindowingLoss::fair()};

Eigen::MatrixXd well_conditioned(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B(i, j) = nd(rng);
    Eigen::MatrixXd G = B * B.transpose() / n + 0.5 * Eigen::MatrixXd::Identity(n, n);
    return G / G.diagonal().maxCoeff();
}

}  // namespace

TEST(FitLs, ScalarExample) {
    Eigen::MatrixXd G(1, 1);
    G << 1.0;
    Eigen::VectorXd y(1);
    y << 2.0;
    const auto m = fit_ls(G, y, 0.5);
    EXPECT_NEAR(m.coefficients(0), 4.0 / 3.0, 1e-15);
}

TEST(FitLs, ZeroData) {
    const auto in = oracle::random_instance(1, 6);
    const auto m = fit_ls(in.G, Eigen::VectorXd::Zero(6), 0.1);
    EXPECT_EQ(m.coefficients.norm(), 0.0);
}

TEST(FitLs, MatchesGradientDescentOracle) {
    oracle::Instance in{well_conditioned(3, 7), Eigen::VectorXd(3)};
    in.y << 0.3, -0.8, 0.5;
    const double lambda = 0.1;
    const auto m = fit_ls(in.G, in.y, lambda);
    const Eigen::VectorXd c =
        oracle::descend(in, Eigen::VectorXd::Zero(3), lambda, 1.0, WindowFamily::LeastSquares, 200000);
    EXPECT_LE((m.coefficients - c).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FitLs, RejectsBadInput) {
    const auto in = oracle::random_instance(2, 4);
    EXPECT_THROW(fit_ls(in.G, in.y, 0.0), InputError);
    EXPECT_THROW(fit_ls(in.G, Eigen::VectorXd::Zero(3), 0.1), InputError);
    Eigen::MatrixXd asym = in.G;
    asym(0, 1) += 0.1;
    EXPECT_THROW(fit_ls(asym, in.y, 0.1), InputError);
}

TEST(FitRdr, LeastSquaresWindowIsLs) {
    for (int trial = 0; trial < 20; ++trial) {
        const auto in = oracle::random_instance(100 + trial, 5 + trial);
        const auto ls = fit_ls(in.G, in.y, 0.05);
        for (double sigma : {0.1, 1.0, 1e3}) {
            const auto [m, rep] = fit_rdr(in.G, in.y, 0.05, sigma, WindowingLoss::least_squares());
            EXPECT_LE((m.coefficients - ls.coefficients).cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_EQ(rep.iterations, 1);
            EXPECT_TRUE(rep.converged);
        }
    }
}

TEST(FitRdr, LargeSigmaApproachesLs) {
    for (int trial = 0; trial < 10; ++trial) {
        const auto in = oracle::random_instance(200 + trial, 6);
        const auto ls = fit_ls(in.G, in.y, 0.1);
        const auto [m, rep] = fit_rdr(in.G, in.y, 0.1, 1e6, WindowingLoss::welsch());
        EXPECT_LE((m.coefficients - ls.coefficients).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(FitRdr, MatchesMultistartOracle) {
    for (int trial = 0; trial < 8; ++trial) {
        const auto in = oracle::random_instance(300 + trial, 2 + trial % 5);
        const auto [m, rep] = fit_rdr(in.G, in.y, 0.05, 1.0, WindowingLoss::welsch());
        ASSERT_TRUE(rep.converged);
        const double mine = oracle::objective(in, m.coefficients, 0.05, 1.0, WindowFamily::Welsch);
        const double best = oracle::multistart_best(in, 0.05, 1.0, WindowFamily::Welsch, 20, 900 + trial);
        EXPECT_LE(mine, best + 1e-6);
    }
}

TEST(FitRdr, DescentAndStationarity) {
    for (const auto& loss : kRobust) {
        for (int trial = 0; trial < 15; ++trial) {
            const auto in = oracle::random_instance(400 + trial, 10 + trial);
            const SolverOptions opts;
            const auto [m, rep] = fit_rdr(in.G, in.y, 0.02, 0.3, loss, opts);
            ASSERT_TRUE(rep.converged) << to_string(loss.family);
            EXPECT_LE(rep.stationarity_residual, opts.stat_tol);
            EXPECT_NEAR(rep.stationarity_residual, stationarity_residual(m, in.y), 1e-15);
            for (std::size_t k = 1; k < rep.objective_trace.size(); ++k) {
                const double prev = rep.objective_trace[k - 1];
                EXPECT_LE(rep.objective_trace[k], prev + 1e-12 * std::max(1.0, std::abs(prev)));
            }
            EXPECT_NEAR(rep.objective_trace.back(), objective(in.G, in.y, m.coefficients, 0.02, 0.3, loss),
                        1e-14);
            EXPECT_NEAR(rep.objective_trace.back(), oracle::objective(in, m.coefficients, 0.02, 0.3, loss.family),
                        1e-13);
        }
    }
}

TEST(FitRdr, NonConvergenceReported) {
    const auto in = oracle::random_instance(7, 12);
    SolverOptions opts;
    opts.max_iter = 1;
    const auto [m, rep] = fit_rdr(in.G, in.y, 0.01, 0.2, WindowingLoss::welsch(), opts);
    EXPECT_FALSE(rep.converged);
    EXPECT_EQ(rep.iterations, 1);
}

TEST(FitRdr, RejectsBadInput) {
    const auto in = oracle::random_instance(8, 4);
    EXPECT_THROW(fit_rdr(in.G, in.y, 0.1, 0.0, WindowingLoss::welsch()), InputError);
    EXPECT_THROW(fit_rdr(in.G, in.y, -0.1, 1.0, WindowingLoss::welsch()), InputError);
    Eigen::MatrixXd bad = in.G;
    bad(0, 0) = std::nan("");
    EXPECT_THROW(fit_rdr(bad, in.y, 0.1, 1.0, WindowingLoss::welsch()), InputError);
}

TEST(Predict, Examples) {
    const auto in = oracle::random_instance(9, 5);
    const auto m = fit_ls(in.G, in.y, 0.1);
    EXPECT_LE((predict(m, in.G) - in.G * m.coefficients).norm(), 0.0);
    EXPECT_LE((predict(m, in.G) - m.fitted()).norm(), 0.0);

    RepresenterModel zero = m;
    zero.coefficients.setZero();
    EXPECT_EQ(predict(zero, in.G).norm(), 0.0);

    Eigen::MatrixXd G1(1, 1), cross(1, 1);
    G1 << 1.0;
    cross << 0.37;
    RepresenterModel one = fit_ls(G1, Eigen::VectorXd::Ones(1), 1.0);
    one.coefficients << 2.0;
    EXPECT_DOUBLE_EQ(predict(one, cross)(0), 0.74);
    EXPECT_THROW(predict(m, Eigen::MatrixXd::Zero(2, 3)), InputError);
}

TEST(Stationarity, ExactLsAndPerturbation) {
    const auto in = oracle::random_instance(10, 9);
    EXPECT_LE(stationarity_residual(fit_ls(in.G, in.y, 0.1), in.y), 1e-10);

    const auto [m, rep] = fit_rdr(in.G, in.y, 0.1, 0.5, WindowingLoss::welsch());
    ASSERT_TRUE(rep.converged);
    const double base = stationarity_residual(m, in.y);
    EXPECT_LE(base, 1e-8);
    for (int i = 0; i < 9; ++i) {
        RepresenterModel moved = m;
        moved.coefficients(i) += 0.1;
        EXPECT_GT(stationarity_residual(moved, in.y), base);
    }
}

TEST(NormBound, Examples) {
    const auto in = oracle::random_instance(11, 10);
    const auto zero = fit_ls(in.G, Eigen::VectorXd::Zero(10), 0.25);
    const auto z = rkhs_norm_bound_check(zero, 1.0);
    EXPECT_EQ(z.lhs, 0.0);
    EXPECT_TRUE(z.ok);

    const auto [m, rep] = fit_rdr(in.G, in.y, 0.25, 0.5, WindowingLoss::welsch());
    const auto b = rkhs_norm_bound_check(m, 1.0);
    EXPECT_DOUBLE_EQ(b.rhs, 2.0);
    EXPECT_TRUE(b.ok);
    EXPECT_LE(b.lhs, 2.0);
    const auto l = rkhs_norm_bound_check(fit_ls(in.G, in.y, 0.25), 1.0);
    EXPECT_TRUE(l.ok);
    EXPECT_LE(l.lhs, 2.0);
}

TEST(NormBound, HoldsOnEveryFit) {
    for (int trial = 0; trial < 30; ++trial) {
        const auto in = oracle::random_instance(500 + trial, 3 + trial % 20);
        for (const auto& loss : kRobust) {
            for (double lambda : {1e-4, 1e-2, 1.0}) {
                for (double sigma : {0.1, 1.0, 10.0}) {
                    const auto [m, rep] = fit_rdr(in.G, in.y, lambda, sigma, loss);
                    EXPECT_TRUE(rkhs_norm_bound_check(m, 1.0).ok);
                    EXPECT_TRUE(e_term_norm(m, in.y, 1.0, 1.0).ok);
                }
            }
        }
    }
}

TEST(ETerm, Examples) {
    const auto in = oracle::random_instance(12, 8);
    const auto [lsm, lsr] = fit_rdr(in.G, in.y, 0.1, 3.0, WindowingLoss::least_squares());
    EXPECT_EQ(e_term_norm(lsm, in.y, 1.0, 1.0).norm, 0.0);

    const auto [m1, r1] = fit_rdr(in.G, in.y, 0.1, 100.0, WindowingLoss::welsch());
    const auto e1 = e_term_norm(m1, in.y, 1.0, 1.0);
    EXPECT_TRUE(e1.ok);
    EXPECT_LE(e1.norm, e1.bound);

    const auto [m2, r2] = fit_rdr(in.G, in.y, 0.1, 50.0, WindowingLoss::welsch());
    const auto e2 = e_term_norm(m2, in.y, 1.0, 1.0);
    EXPECT_GE(e2.norm, e1.norm);
    EXPECT_NEAR(e2.bound / e1.bound, 4.0, 1e-12);
}

TEST(Model, NormAndJson) {
    const auto in = oracle::random_instance(13, 4);
    const auto [m, rep] = fit_rdr(in.G, in.y, 0.1, 1.0, WindowingLoss::cauchy());
    EXPECT_NEAR(m.rkhs_norm(), std::sqrt(m.coefficients.dot(in.G * m.coefficients)), 1e-15);
    const auto doc = nlohmann::json::parse(to_json(m).dump());
    EXPECT_EQ(doc.at("loss_family"), "cauchy");
    EXPECT_EQ(doc.at("coefficients").size(), 4u);
    EXPECT_EQ(doc.at("gram_digest"), gram_digest(in.G));
    for (int i = 0; i < 4; ++i) EXPECT_EQ(doc.at("coefficients")[i].get<double>(), m.coefficients(i));
    EXPECT_EQ(to_json(fit_ls(in.G, in.y, 0.1)).at("sigma"), "inf");
    EXPECT_TRUE(to_json(rep).contains("objective_trace"));
}

TEST(ValidateGram, RejectsIndefinite) {
    Eigen::MatrixXd G(2, 2);
    G << 1, 2, 2, 1;
    EXPECT_THROW(validate_gram(G), InputError);
    EXPECT_NO_THROW(validate_gram(oracle::random_instance(14, 6).G));
}
