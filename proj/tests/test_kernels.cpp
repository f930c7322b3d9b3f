#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "rdr/errors.hpp"
#include "rdr/kernels.hpp"

using namespace rdr;

namespace {

// Oracle: the plain quadruple loop written out, with the kernel formula inlined.
double oracle_inner(BaseFamily fam, double h, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double acc = 0.0;
    for (int s = 0; s < a.cols(); ++s) {
        for (int t = 0; t < b.cols(); ++t) {
            double d2 = 0.0, d1 = 0.0;
            for (int k = 0; k < a.rows(); ++k) {
                const double diff = a(k, s) - b(k, t);
                d2 += diff * diff;
                d1 += std::abs(diff);
            }
            acc += fam == BaseFamily::Gaussian ? std::exp(-d2 / (2 * h * h)) : std::exp(-d1 / h);
        }
    }
    return acc / (a.cols() * b.cols());
}

EmpiricalDistribution bag(std::mt19937_64& rng, int m, int d, double centre, double spread) {
    std::normal_distribution<double> nd(centre, spread);
    Eigen::MatrixXd x(m, d);
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < m; ++k) x(k, j) = nd(rng);
    return EmpiricalDistribution(x);
}

EmpiricalDistribution points1d(std::initializer_list<double> xs) {
    std::vector<std::vector<double>> pts;
    for (double x : xs) pts.push_back({x});
    return EmpiricalDistribution::from_points(pts);
}

double min_eig_ratio(const Eigen::MatrixXd& G) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() / es.eigenvalues().maxCoeff();
}

}  // namespace

TEST(BaseKernel, ClosedForms) {
    const std::vector<double> zero2{0, 0}, one2{1, 1}, z{0}, two{2};
    EXPECT_DOUBLE_EQ(eval_base_kernel(BaseKernel::gaussian(1), zero2, zero2), 1.0);
    EXPECT_NEAR(eval_base_kernel(BaseKernel::gaussian(1), z, two), 0.135335283236612691, 1e-15);
    EXPECT_NEAR(eval_base_kernel(BaseKernel::laplacian(2), zero2, one2), 0.367879441171442322, 1e-15);
}

TEST(BaseKernel, RejectsBadInput) {
    EXPECT_THROW(BaseKernel::gaussian(0.0), InputError);
    EXPECT_THROW(BaseKernel::laplacian(-1.0), InputError);
    const std::vector<double> a{0}, b{0, 1};
    EXPECT_THROW(eval_base_kernel(BaseKernel::gaussian(1), a, b), InputError);
}

TEST(BaseKernel, NormalizedAndSymmetric) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-3, 3);
    for (auto k : {BaseKernel::gaussian(0.7), BaseKernel::laplacian(1.3)}) {
        for (int i = 0; i < 50; ++i) {
            std::vector<double> a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)};
            EXPECT_DOUBLE_EQ(k(a, a), 1.0);
            EXPECT_EQ(k(a, b), k(b, a));
            EXPECT_GT(k(a, b), 0.0);
            EXPECT_LE(k(a, b), 1.0);
        }
    }
}

TEST(Embedding, InnerProductExamples) {
    const auto g = BaseKernel::gaussian(1);
    EXPECT_DOUBLE_EQ(embedding_inner(g, points1d({0}), points1d({0})), 1.0);
    EXPECT_NEAR(embedding_inner(g, points1d({0, 2}), points1d({0, 2})), (1 + std::exp(-2.0)) / 2, 1e-15);
    EXPECT_NEAR(embedding_inner(g, points1d({0}), points1d({2})), std::exp(-2.0), 1e-15);
}

TEST(Embedding, DistanceExamples) {
    const auto g = BaseKernel::gaussian(1);
    const auto a = points1d({0, 2});
    EXPECT_DOUBLE_EQ(embedding_distance_sq(g, a, a), 0.0);
    EXPECT_NEAR(embedding_distance_sq(g, points1d({0}), points1d({2})), 2 - 2 * std::exp(-2.0), 1e-14);
    EXPECT_NEAR(embedding_distance_sq(g, points1d({0}), points1d({2})), 1.729329433526774, 1e-12);

    const auto b = points1d({1});
    const Eigen::MatrixXd A = a.atoms(), B = b.atoms();
    const double oracle = oracle_inner(BaseFamily::Gaussian, 1, A, A) + oracle_inner(BaseFamily::Gaussian, 1, B, B) -
                          2 * oracle_inner(BaseFamily::Gaussian, 1, A, B);
    EXPECT_NEAR(embedding_distance_sq(g, a, b), oracle, 1e-14);
}

TEST(Embedding, ClampPolicy) {
    EXPECT_EQ(clamp_distance_sq(-5e-13), 0.0);
    EXPECT_EQ(clamp_distance_sq(0.25), 0.25);
    EXPECT_THROW(clamp_distance_sq(-1e-9), NumericalError);
}

TEST(Embedding, BilinearInAtomMixtures) {
    std::mt19937_64 rng(11);
    for (auto k : {BaseKernel::gaussian(0.8), BaseKernel::laplacian(0.6)}) {
        for (int trial = 0; trial < 20; ++trial) {
            const auto a1 = bag(rng, 2, 3, 0.0, 1.0), a2 = bag(rng, 2, 5, 0.5, 1.0), b = bag(rng, 2, 4, -0.3, 1.0);
            Eigen::MatrixXd joined(2, 8);
            joined << a1.atoms(), a2.atoms();
            const double lhs = embedding_inner(k, EmpiricalDistribution(joined), b);
            const double rhs = (3 * embedding_inner(k, a1, b) + 5 * embedding_inner(k, a2, b)) / 8;
            EXPECT_NEAR(lhs, rhs, 1e-14);
        }
    }
}

TEST(Embedding, SortedRouteMatchesBruteForce) {
    // 1-D Laplacian bags take the prefix-sum route inside EmbeddingGram.
    std::mt19937_64 rng(5);
    const auto k = BaseKernel::laplacian(0.4);
    DistributionList list;
    for (int i = 0; i < 12; ++i) list.push_back(bag(rng, 1, 20 + 7 * i, 0.3 * i - 1.5, 0.8));
    list.push_back(points1d({0.5, 0.5, 0.5}));  // ties
    const EmbeddingGram gram(k, list);
    for (std::size_t i = 0; i < list.size(); ++i) {
        for (std::size_t j = 0; j < list.size(); ++j) {
            const double oracle = oracle_inner(BaseFamily::Laplacian, 0.4, list[i].atoms(), list[j].atoms());
            EXPECT_NEAR(gram.inner()(i, j), oracle, 1e-13) << i << "," << j;
        }
    }
    DistributionList test;
    for (int t = 0; t < 4; ++t) test.push_back(bag(rng, 1, 33, 0.2 * t, 1.1));
    const CrossInner ci = cross_inner(gram, test);
    for (int t = 0; t < 4; ++t) {
        EXPECT_NEAR(ci.test_self(t), oracle_inner(BaseFamily::Laplacian, 0.4, test[t].atoms(), test[t].atoms()), 1e-13);
        for (std::size_t i = 0; i < list.size(); ++i) {
            EXPECT_NEAR(ci.inner(t, i), oracle_inner(BaseFamily::Laplacian, 0.4, test[t].atoms(), list[i].atoms()),
                        1e-13);
        }
    }
}

TEST(Embedding, SortedRouteWideSpread) {
    // Atoms far apart relative to the bandwidth exercise the overflow fallback.
    const auto k = BaseKernel::laplacian(0.01);
    DistributionList list{points1d({-5, 0, 5}), points1d({-4.99, 4.99}), points1d({7})};
    const EmbeddingGram gram(k, list);
    for (std::size_t i = 0; i < list.size(); ++i)
        for (std::size_t j = 0; j < list.size(); ++j)
            EXPECT_NEAR(gram.inner()(i, j),
                        oracle_inner(BaseFamily::Laplacian, 0.01, list[i].atoms(), list[j].atoms()), 1e-14);
}

TEST(EmbeddingGram, SymmetricPsdAndDistances) {
    std::mt19937_64 rng(17);
    for (auto k : {BaseKernel::gaussian(1.0), BaseKernel::laplacian(1.0)}) {
        for (int m : {1, 2}) {
            DistributionList list;
            for (int i = 0; i < 40; ++i) list.push_back(bag(rng, m, 15, 0.1 * i - 2, 0.5));
            const EmbeddingGram gram(k, list);
            const auto& G = gram.inner();
            EXPECT_EQ((G - G.transpose()).norm(), 0.0);
            for (int i = 0; i < G.rows(); ++i) {
                EXPECT_GT(G(i, i), 0.0);
                EXPECT_LE(G(i, i), 1.0 + 1e-12);
            }
            EXPECT_GE(min_eig_ratio(G), -1e-10);
            EXPECT_GE(gram.min_raw_distance_sq(), -1e-12);
            for (auto K : {SecondLevelKernel::gaussian_on_h(0.5), SecondLevelKernel::linear_on_h()}) {
                const Eigen::MatrixXd S = second_level_gram(K, gram);
                EXPECT_EQ((S - S.transpose()).norm(), 0.0);
                EXPECT_GE(min_eig_ratio(S), -1e-10);
            }
        }
    }
}

TEST(SecondLevel, Examples) {
    const auto g = BaseKernel::gaussian(1);
    const EmbeddingGram gram(g, {points1d({0}), points1d({2})});
    const Eigen::MatrixXd S = second_level_gram(SecondLevelKernel::gaussian_on_h(1.0), gram);
    EXPECT_DOUBLE_EQ(S(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(S(1, 1), 1.0);
    EXPECT_NEAR(S(0, 1), std::exp(-(2 - 2 * std::exp(-2.0)) / 2), 1e-15);
    EXPECT_NEAR(S(0, 1), 0.421193, 1e-6);
    const Eigen::MatrixXd Lin = second_level_gram(SecondLevelKernel::linear_on_h(), gram);
    EXPECT_EQ((Lin - gram.inner()).norm(), 0.0);
}

TEST(SecondLevel, HolderConstants) {
    const auto gk = SecondLevelKernel::gaussian_on_h(0.5);
    EXPECT_EQ(gk.holder_alpha(), 1.0);
    EXPECT_EQ(gk.holder_L(), 2.0);
    EXPECT_EQ(gk.kappa(), 1.0);
    EXPECT_EQ(SecondLevelKernel::linear_on_h().holder_L(), 1.0);
    EXPECT_THROW(SecondLevelKernel::gaussian_on_h(0.0), InputError);
}

TEST(SecondLevel, HolderPropertyOnRandomPairs) {
    std::mt19937_64 rng(23);
    const auto base = BaseKernel::gaussian(0.7);
    for (auto K : {SecondLevelKernel::gaussian_on_h(0.3), SecondLevelKernel::gaussian_on_h(2.0),
                   SecondLevelKernel::linear_on_h()}) {
        for (int pair = 0; pair < 200; ++pair) {
            const auto a = bag(rng, 1, 6, 0.0, 1.0), b = bag(rng, 1, 6, 0.5, 1.0);
            const double aa = embedding_inner(base, a, a), bb = embedding_inner(base, b, b);
            const double ab = embedding_inner(base, a, b);
            const double lhs = K.from_inner(aa, aa, aa) + K.from_inner(bb, bb, bb) - 2 * K.from_inner(aa, bb, ab);
            const double dist = std::sqrt(std::max(0.0, aa + bb - 2 * ab));
            const double rhs = std::pow(K.holder_L() * std::pow(dist, K.holder_alpha()), 2);
            EXPECT_LE(lhs, rhs + 1e-9);
        }
    }
}

TEST(CrossGram, IdentityAndOracle) {
    std::mt19937_64 rng(29);
    const auto base = BaseKernel::gaussian(1.0);
    const auto K = SecondLevelKernel::gaussian_on_h(0.8);
    DistributionList train, test;
    for (int i = 0; i < 3; ++i) train.push_back(bag(rng, 2, 4, 0.4 * i, 1.0));
    for (int i = 0; i < 2; ++i) test.push_back(bag(rng, 2, 5, -0.4 * i, 1.0));

    const EmbeddingGram gram(base, train);
    EXPECT_LE((cross_gram(K, base, train, train) - second_level_gram(K, gram)).cwiseAbs().maxCoeff(), 1e-15);

    const Eigen::MatrixXd C = cross_gram(K, base, train, test);
    ASSERT_EQ(C.rows(), 2);
    ASSERT_EQ(C.cols(), 3);
    for (int t = 0; t < 2; ++t) {
        for (int i = 0; i < 3; ++i) {
            const double tt = oracle_inner(BaseFamily::Gaussian, 1.0, test[t].atoms(), test[t].atoms());
            const double ii = oracle_inner(BaseFamily::Gaussian, 1.0, train[i].atoms(), train[i].atoms());
            const double ti = oracle_inner(BaseFamily::Gaussian, 1.0, test[t].atoms(), train[i].atoms());
            EXPECT_NEAR(C(t, i), std::exp(-(tt + ii - 2 * ti) / (2 * 0.8 * 0.8)), 1e-14);
        }
    }
    const Eigen::MatrixXd single = cross_gram(K, base, {train[0]}, {train[0]});
    EXPECT_DOUBLE_EQ(single(0, 0), 1.0);
}

TEST(Serialization, CsvRoundTrip) {
    Eigen::MatrixXd m(2, 3);
    m << 1.0 / 3, -2.5e-17, 7, std::exp(1.0), 0, -1e300;
    const Eigen::MatrixXd back = matrix_from_csv(matrix_to_csv(m));
    EXPECT_EQ((back - m).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(matrix_from_csv("1,2\n3\n"), InputError);
}

TEST(Serialization, JsonRoundTrip) {
    std::mt19937_64 rng(31);
    const auto d = bag(rng, 3, 4, 0.0, 1.0);
    const auto back = distribution_from_json(nlohmann::json::parse(to_json(d).dump()));
    EXPECT_EQ((back.atoms() - d.atoms()).norm(), 0.0);
    EXPECT_THROW(distribution_from_json(nlohmann::json{{"dim", 2}, {"atoms", {{1.0}}}}), InputError);
}

TEST(Names, RoundTrip) {
    for (auto f : {BaseFamily::Gaussian, BaseFamily::Laplacian}) EXPECT_EQ(parse_base_family(to_string(f)), f);
    for (auto f : {SecondLevelFamily::GaussianOnH, SecondLevelFamily::LinearOnH})
        EXPECT_EQ(parse_second_level_family(to_string(f)), f);
    EXPECT_THROW(parse_base_family("cosine"), InputError);
}

TEST(EmpiricalDistribution, Validation) {
    EXPECT_THROW(EmpiricalDistribution(Eigen::MatrixXd(1, 0)), InputError);
    Eigen::MatrixXd bad(1, 2);
    bad << 0, std::nan("");
    EXPECT_THROW(EmpiricalDistribution{bad}, InputError);
}
