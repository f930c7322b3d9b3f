#include "rdr/robust_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rdr/errors.hpp"

namespace rdr {

WindowingLoss WindowingLoss::make(WindowFamily family) {
    switch (family) {
        case WindowFamily::LeastSquares: return {family, 1.0, 0.0, 1.0};
        case WindowFamily::Welsch: return {family, 1.0, 0.5, 1.0};
        case WindowFamily::Cauchy: return {family, 1.0, 0.5, 1.0};
        case WindowFamily::Fair: return {family, 0.5, 1.0, 1.0};
    }
    throw InputError("unknown window family");
}

namespace {
void require_nonnegative(double s) {
    if (!(s >= 0.0)) throw InputError("windowing function evaluated at negative argument");
}
}  // namespace

double v_value(const WindowingLoss& loss, double s) {
    require_nonnegative(s);
    switch (loss.family) {
        case WindowFamily::LeastSquares: return s;
        case WindowFamily::Welsch: return -2.0 * std::expm1(-0.5 * s);
        case WindowFamily::Cauchy: return 2.0 * std::log1p(0.5 * s);
        case WindowFamily::Fair: {
            const double r = std::sqrt(s);
            return 2.0 * (r - std::log1p(r));
        }
    }
    return 0.0;
}

double v_prime(const WindowingLoss& loss, double s) {
    require_nonnegative(s);
    switch (loss.family) {
        case WindowFamily::LeastSquares: return 1.0;
        // e^{-s/2} underflows past s ~ 1490; keep the weight strictly positive
        case WindowFamily::Welsch: return std::max(std::exp(-0.5 * s), std::numeric_limits<double>::min());
        case WindowFamily::Cauchy: return 1.0 / (1.0 + 0.5 * s);
        case WindowFamily::Fair: return 1.0 / (1.0 + std::sqrt(s));
    }
    return 1.0;
}

double loss_value(const WindowingLoss& loss, double u, double sigma) {
    if (!(sigma > 0.0)) throw InputError("loss scale sigma must be positive");
    if (loss.family == WindowFamily::LeastSquares) return u * u;
    const double s = (u / sigma) * (u / sigma);
    return sigma * sigma * v_value(loss, s);
}

CertifiedConstants certified_constants(const WindowingLoss& loss) { return {loss.p, loss.c_p, loss.C_V}; }

std::string to_string(WindowFamily family) {
    switch (family) {
        case WindowFamily::LeastSquares: return "least_squares";
        case WindowFamily::Welsch: return "welsch";
        case WindowFamily::Cauchy: return "cauchy";
        case WindowFamily::Fair: return "fair";
    }
    return "?";
}

WindowFamily parse_window_family(std::string_view name) {
    if (name == "least_squares") return WindowFamily::LeastSquares;
    if (name == "welsch") return WindowFamily::Welsch;
    if (name == "cauchy") return WindowFamily::Cauchy;
    if (name == "fair") return WindowFamily::Fair;
    throw InputError("unknown loss family '" + std::string(name) + "'");
}

}  // namespace rdr
