#include "rdr/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "rdr/errors.hpp"

namespace rdr {

BaseKernel::BaseKernel(BaseFamily family, double bandwidth) : family_(family), bandwidth_(bandwidth) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
        throw InputError("base kernel bandwidth must be positive and finite");
    }
}

double BaseKernel::operator()(std::span<const double> u, std::span<const double> v) const {
    if (u.size() != v.size()) {
        throw InputError("base kernel: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()) + ")");
    }
    double acc = 0.0;
    if (family_ == BaseFamily::Gaussian) {
        for (std::size_t k = 0; k < u.size(); ++k) {
            const double diff = u[k] - v[k];
            acc += diff * diff;
        }
        return std::exp(-acc / (2.0 * bandwidth_ * bandwidth_));
    }
    for (std::size_t k = 0; k < u.size(); ++k) acc += std::abs(u[k] - v[k]);
    return std::exp(-acc / bandwidth_);
}

EmpiricalDistribution::EmpiricalDistribution(Eigen::MatrixXd atoms) : atoms_(std::move(atoms)) {
    if (atoms_.rows() < 1) throw InputError("empirical distribution needs dimension >= 1");
    if (atoms_.cols() < 1) throw InputError("empirical distribution needs at least one atom");
    if (!atoms_.allFinite()) throw InputError("empirical distribution has non-finite coordinates");
}

EmpiricalDistribution EmpiricalDistribution::from_points(const std::vector<std::vector<double>>& points) {
    if (points.empty()) throw InputError("empirical distribution needs at least one atom");
    const auto m = points.front().size();
    Eigen::MatrixXd atoms(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(points.size()));
    for (std::size_t s = 0; s < points.size(); ++s) {
        if (points[s].size() != m) throw InputError("empirical distribution: ragged atom dimensions");
        for (std::size_t k = 0; k < m; ++k) atoms(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(s)) = points[s][k];
    }
    return EmpiricalDistribution(std::move(atoms));
}

double eval_base_kernel(const BaseKernel& kernel, std::span<const double> u, std::span<const double> v) {
    return kernel(u, v);
}

double embedding_inner(const BaseKernel& kernel, const EmpiricalDistribution& a,
                       const EmpiricalDistribution& b) {
    if (a.dim() != b.dim()) {
        throw InputError("embedding_inner: atoms of dimension " + std::to_string(a.dim()) + " and " +
                         std::to_string(b.dim()));
    }
    const int m = a.dim();
    const double* pa = a.atoms().data();
    const double* pb = b.atoms().data();
    const double h = kernel.bandwidth();
    double total = 0.0;
    if (kernel.family() == BaseFamily::Gaussian) {
        const double scale = 1.0 / (2.0 * h * h);
        for (int s = 0; s < a.size(); ++s) {
            const double* u = pa + static_cast<std::ptrdiff_t>(s) * m;
            double row = 0.0;
            for (int t = 0; t < b.size(); ++t) {
                const double* v = pb + static_cast<std::ptrdiff_t>(t) * m;
                double sq = 0.0;
                for (int k = 0; k < m; ++k) sq += (u[k] - v[k]) * (u[k] - v[k]);
                row += std::exp(-sq * scale);
            }
            total += row;
        }
    } else {
        const double scale = 1.0 / h;
        for (int s = 0; s < a.size(); ++s) {
            const double* u = pa + static_cast<std::ptrdiff_t>(s) * m;
            double row = 0.0;
            for (int t = 0; t < b.size(); ++t) {
                const double* v = pb + static_cast<std::ptrdiff_t>(t) * m;
                double l1 = 0.0;
                for (int k = 0; k < m; ++k) l1 += std::abs(u[k] - v[k]);
                row += std::exp(-l1 * scale);
            }
            total += row;
        }
    }
    return total / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

double clamp_distance_sq(double raw) {
    if (raw < -kDistanceClamp) {
        std::ostringstream os;
        os << "squared H-distance " << raw << " is below the cancellation tolerance";
        throw NumericalError(os.str());
    }
    return std::max(raw, 0.0);
}

double embedding_distance_sq(const BaseKernel& kernel, const EmpiricalDistribution& a,
                             const EmpiricalDistribution& b) {
    const double raw =
        embedding_inner(kernel, a, a) + embedding_inner(kernel, b, b) - 2.0 * embedding_inner(kernel, a, b);
    return clamp_distance_sq(raw);
}

namespace {

// Exponents stay within +-300 after centering, far from overflow.
constexpr double kMaxHalfSpan = 300.0;

// One-dimensional bag prepared for the Laplacian prefix-sum route.
//   sum_{s,t} exp(-|a_s - b_t| / h)
//     = sum_t [ e^{-(b_t-c)/h} sum_{a_s <= b_t} e^{(a_s-c)/h}
//             + e^{(b_t-c)/h} sum_{a_s > b_t} e^{-(a_s-c)/h} ]
struct SortedBag {
    std::vector<double> x;
    std::vector<double> up;
    std::vector<double> down;
    std::vector<double> prefix_up;    // prefix_up[k] = sum_{s<k} up[s]
    std::vector<double> suffix_down;  // suffix_down[k] = sum_{s>=k} down[s]
};

SortedBag prepare(const EmpiricalDistribution& dist, double center, double h) {
    SortedBag bag;
    const auto d = static_cast<std::size_t>(dist.size());
    bag.x.assign(dist.atoms().data(), dist.atoms().data() + d);
    std::sort(bag.x.begin(), bag.x.end());
    bag.up.resize(d);
    bag.down.resize(d);
    for (std::size_t s = 0; s < d; ++s) {
        const double z = (bag.x[s] - center) / h;
        bag.up[s] = std::exp(z);
        bag.down[s] = std::exp(-z);
    }
    bag.prefix_up.assign(d + 1, 0.0);
    for (std::size_t s = 0; s < d; ++s) bag.prefix_up[s + 1] = bag.prefix_up[s] + bag.up[s];
    bag.suffix_down.assign(d + 1, 0.0);
    for (std::size_t s = d; s-- > 0;) bag.suffix_down[s] = bag.suffix_down[s + 1] + bag.down[s];
    return bag;
}

double sorted_pair_inner(const SortedBag& a, const SortedBag& b) {
    const std::size_t da = a.x.size();
    std::size_t k = 0;
    double total = 0.0;
    for (std::size_t t = 0; t < b.x.size(); ++t) {
        while (k < da && a.x[k] <= b.x[t]) ++k;
        total += b.down[t] * a.prefix_up[k] + b.up[t] * a.suffix_down[k];
    }
    return total / (static_cast<double>(da) * static_cast<double>(b.x.size()));
}

// Evaluates H-inner products among a fixed collection of bags, choosing the
// prefix-sum route when it applies.
class InnerEngine {
public:
    InnerEngine(const BaseKernel& kernel, std::vector<const EmpiricalDistribution*> bags)
        : kernel_(kernel), bags_(std::move(bags)) {
        if (bags_.empty()) return;
        const int m = bags_.front()->dim();
        for (const auto* b : bags_) {
            if (b->dim() != m) throw InputError("embedding Gram: distributions of mixed dimension");
        }
        if (kernel_.family() != BaseFamily::Laplacian || m != 1) return;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto* b : bags_) {
            lo = std::min(lo, b->atoms().minCoeff());
            hi = std::max(hi, b->atoms().maxCoeff());
        }
        const double h = kernel_.bandwidth();
        if ((hi - lo) / (2.0 * h) > kMaxHalfSpan) return;
        const double center = 0.5 * (lo + hi);
        sorted_.reserve(bags_.size());
        for (const auto* b : bags_) sorted_.push_back(prepare(*b, center, h));
    }

    double operator()(std::size_t i, std::size_t j) const {
        if (!sorted_.empty()) return sorted_pair_inner(sorted_[i], sorted_[j]);
        return embedding_inner(kernel_, *bags_[i], *bags_[j]);
    }

private:
    BaseKernel kernel_;
    std::vector<const EmpiricalDistribution*> bags_;
    std::vector<SortedBag> sorted_;
};

}  // namespace

EmbeddingGram::EmbeddingGram(const BaseKernel& kernel, DistributionList distributions)
    : kernel_(kernel), distributions_(std::move(distributions)) {
    const auto n = distributions_.size();
    if (n == 0) throw InputError("embedding Gram needs at least one distribution");
    std::vector<const EmpiricalDistribution*> bags;
    bags.reserve(n);
    for (const auto& d : distributions_) bags.push_back(&d);
    const InnerEngine engine(kernel_, std::move(bags));

    const auto ni = static_cast<Eigen::Index>(n);
    inner_.resize(ni, ni);
    for (Eigen::Index j = 0; j < ni; ++j) {
        for (Eigen::Index i = 0; i <= j; ++i) {
            const double v = engine(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            inner_(i, j) = v;
            inner_(j, i) = v;
        }
    }
    for (Eigen::Index j = 0; j < ni; ++j) {
        if (!(inner_(j, j) > 0.0) || inner_(j, j) > 1.0 + 1e-12) {
            throw NumericalError("embedding Gram: self inner product outside (0, 1]");
        }
        for (Eigen::Index i = 0; i < j; ++i) {
            const double raw = inner_(i, i) + inner_(j, j) - 2.0 * inner_(i, j);
            min_raw_distance_sq_ = std::min(min_raw_distance_sq_, raw);
        }
    }
    clamp_distance_sq(min_raw_distance_sq_);
}

double EmbeddingGram::distance_sq(std::size_t i, std::size_t j) const {
    const auto a = static_cast<Eigen::Index>(i);
    const auto b = static_cast<Eigen::Index>(j);
    return clamp_distance_sq(inner_(a, a) + inner_(b, b) - 2.0 * inner_(a, b));
}

CrossInner cross_inner(const EmbeddingGram& train, const DistributionList& test) {
    const auto& tr = train.distributions();
    if (!test.empty() && test.front().dim() != tr.front().dim()) {
        throw InputError("cross Gram: train and test atoms differ in dimension");
    }
    std::vector<const EmpiricalDistribution*> bags;
    bags.reserve(tr.size() + test.size());
    for (const auto& d : tr) bags.push_back(&d);
    for (const auto& d : test) bags.push_back(&d);
    const InnerEngine engine(train.base_kernel(), std::move(bags));

    const auto n = tr.size();
    CrossInner out;
    out.inner.resize(static_cast<Eigen::Index>(test.size()), static_cast<Eigen::Index>(n));
    out.test_self.resize(static_cast<Eigen::Index>(test.size()));
    for (std::size_t t = 0; t < test.size(); ++t) {
        out.test_self(static_cast<Eigen::Index>(t)) = engine(n + t, n + t);
        for (std::size_t i = 0; i < n; ++i) {
            out.inner(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = engine(n + t, i);
        }
    }
    return out;
}

SecondLevelKernel::SecondLevelKernel(SecondLevelFamily family, double bandwidth, double alpha, double L)
    : family_(family), bandwidth_(bandwidth), holder_alpha_(alpha), holder_L_(L) {}

SecondLevelKernel SecondLevelKernel::gaussian_on_h(double bandwidth) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
        throw InputError("second-level kernel bandwidth must be positive and finite");
    }
    return {SecondLevelFamily::GaussianOnH, bandwidth, 1.0, 1.0 / bandwidth};
}

SecondLevelKernel SecondLevelKernel::linear_on_h() { return {SecondLevelFamily::LinearOnH, 1.0, 1.0, 1.0}; }

double SecondLevelKernel::from_inner(double aa, double bb, double ab) const {
    if (family_ == SecondLevelFamily::LinearOnH) return ab;
    const double dist_sq = clamp_distance_sq(aa + bb - 2.0 * ab);
    return std::exp(-dist_sq / (2.0 * bandwidth_ * bandwidth_));
}

Eigen::MatrixXd second_level_gram(const SecondLevelKernel& K, const EmbeddingGram& gram) {
    const auto& in = gram.inner();
    if (K.family() == SecondLevelFamily::LinearOnH) return in;
    const auto n = in.rows();
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        g(j, j) = 1.0;
        for (Eigen::Index i = 0; i < j; ++i) {
            const double v = K.from_inner(in(i, i), in(j, j), in(i, j));
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return g;
}

Eigen::MatrixXd cross_gram(const SecondLevelKernel& K, const EmbeddingGram& train, const DistributionList& test) {
    const CrossInner ci = cross_inner(train, test);
    if (K.family() == SecondLevelFamily::LinearOnH) return ci.inner;
    const auto& in = train.inner();
    Eigen::MatrixXd out(ci.inner.rows(), ci.inner.cols());
    for (Eigen::Index t = 0; t < out.rows(); ++t) {
        for (Eigen::Index i = 0; i < out.cols(); ++i) {
            out(t, i) = K.from_inner(ci.test_self(t), in(i, i), ci.inner(t, i));
        }
    }
    return out;
}

Eigen::MatrixXd cross_gram(const SecondLevelKernel& K, const BaseKernel& kernel, const DistributionList& train,
                           const DistributionList& test) {
    return cross_gram(K, EmbeddingGram(kernel, train), test);
}

std::string to_string(BaseFamily f) { return f == BaseFamily::Gaussian ? "gaussian" : "laplacian"; }

std::string to_string(SecondLevelFamily f) {
    return f == SecondLevelFamily::GaussianOnH ? "gaussian_on_h" : "linear_on_h";
}

BaseFamily parse_base_family(std::string_view name) {
    if (name == "gaussian") return BaseFamily::Gaussian;
    if (name == "laplacian") return BaseFamily::Laplacian;
    throw InputError("unknown base kernel family '" + std::string(name) + "'");
}

SecondLevelFamily parse_second_level_family(std::string_view name) {
    if (name == "gaussian_on_h") return SecondLevelFamily::GaussianOnH;
    if (name == "linear_on_h") return SecondLevelFamily::LinearOnH;
    throw InputError("unknown second-level kernel family '" + std::string(name) + "'");
}

std::string matrix_to_csv(const Eigen::MatrixXd& m) {
    std::string out;
    char buf[32];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out += ',';
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            out += buf;
        }
        out += '\n';
    }
    return out;
}

Eigen::MatrixXd matrix_from_csv(std::string_view text) {
    std::vector<std::vector<double>> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw InputError("trailing characters");
            } catch (const std::exception&) {
                throw InputError("matrix CSV: cannot parse '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) throw InputError("matrix CSV: ragged rows");
        rows.push_back(std::move(row));
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

nlohmann::json to_json(const EmpiricalDistribution& dist) {
    nlohmann::json atoms = nlohmann::json::array();
    for (int s = 0; s < dist.size(); ++s) {
        const auto a = dist.atom(s);
        atoms.push_back(std::vector<double>(a.begin(), a.end()));
    }
    return {{"dim", dist.dim()}, {"atoms", std::move(atoms)}};
}

EmpiricalDistribution distribution_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("dim") || !doc.contains("atoms")) {
        throw InputError("distribution document needs 'dim' and 'atoms'");
    }
    const int dim = doc.at("dim").get<int>();
    const auto points = doc.at("atoms").get<std::vector<std::vector<double>>>();
    auto dist = EmpiricalDistribution::from_points(points);
    if (dist.dim() != dim) throw InputError("distribution document: 'dim' disagrees with atoms");
    return dist;
}

}  // namespace rdr
