#pragma once

#include <string>
#include <string_view>

namespace rdr {

enum class WindowFamily { LeastSquares, Welsch, Cauchy, Fair };

/// Windowing function V generating the loss l_sigma(u) = sigma^2 V(u^2 / sigma^2).
///
/// Every family is normalized so that V'(0+) = 1, and carries constants for
/// which  |V'(s) - 1| <= c_p s^p  and  0 < V'(s) <= C_V  hold for all s > 0:
///
///   family        V(s)                    V'(s)            p     c_p   C_V
///   LeastSquares  s                       1                1     0     1
///   Welsch        2(1 - e^{-s/2})         e^{-s/2}         1     1/2   1
///   Cauchy        2 ln(1 + s/2)           1/(1 + s/2)      1     1/2   1
///   Fair          2(sqrt s - ln(1+sqrt s)) 1/(1 + sqrt s)  1/2   1     1
///
/// Welsch, Cauchy and Fair are concave on [0, inf), which is what makes the
/// reweighting solver a majorize-minimize scheme.
struct WindowingLoss {
    WindowFamily family;
    double p;
    double c_p;
    double C_V;

    static WindowingLoss make(WindowFamily family);
    static WindowingLoss least_squares() { return make(WindowFamily::LeastSquares); }
    static WindowingLoss welsch() { return make(WindowFamily::Welsch); }
    static WindowingLoss cauchy() { return make(WindowFamily::Cauchy); }
    static WindowingLoss fair() { return make(WindowFamily::Fair); }

    bool is_concave() const { return family != WindowFamily::LeastSquares; }
};

struct CertifiedConstants {
    double p;
    double c_p;
    double C_V;
};

double v_value(const WindowingLoss& loss, double s);
double v_prime(const WindowingLoss& loss, double s);

/// sigma^2 V(u^2 / sigma^2).
double loss_value(const WindowingLoss& loss, double u, double sigma);

CertifiedConstants certified_constants(const WindowingLoss& loss);

std::string to_string(WindowFamily family);
WindowFamily parse_window_family(std::string_view name);

}  // namespace rdr
