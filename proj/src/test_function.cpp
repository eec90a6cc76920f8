#include "freesum/test_function.hpp"

#include <cmath>

#include "freesum/errors.hpp"

namespace freesum {

namespace {

// Quintic smoothstep s(t) = 6t^5 - 15t^4 + 10t^3 on [0,1]; s' = s'' = 0 at
// both ends, so compositions stay C^2.
double smoothstep(double t) { return ((6.0 * t - 15.0) * t + 10.0) * t * t * t; }
double smoothstep1(double t) { return ((30.0 * t - 60.0) * t + 30.0) * t * t; }
double smoothstep2(double t) { return ((120.0 * t - 180.0) * t + 60.0) * t; }

} // namespace

double chi_cutoff(double y) {
    double a = std::abs(y);
    if (a <= 1.0) return 1.0;
    if (a >= 2.0) return 0.0;
    return 1.0 - smoothstep(a - 1.0);
}

TestFunction make_test_function(const std::string& name,
                                const std::vector<double>& params,
                                double e0, double eta0) {
    if (!(eta0 > 0.0)) throw ConfigInvalid("test function: eta0 must be > 0");
    TestFunction tf;
    tf.name = name;
    tf.params = params;
    tf.e0 = e0;
    tf.eta0 = eta0;
    if (name == "gaussian" || name == "gaussian_scaled") {
        double s = 1.0;
        if (name == "gaussian_scaled") {
            if (params.size() != 1 || !(params[0] > 0.0))
                throw ConfigInvalid("gaussian_scaled requires one positive scale");
            s = params[0];
        } else if (!params.empty()) {
            throw ConfigInvalid("gaussian takes no parameters");
        }
        double cut = 8.5 * s;
        tf.lo = -cut;
        tf.hi = cut;
        tf.g = [s, cut](double u) {
            return std::abs(u) >= cut ? 0.0 : std::exp(-u * u / (2.0 * s * s));
        };
        tf.g1 = [s, cut](double u) {
            return std::abs(u) >= cut
                       ? 0.0
                       : -u / (s * s) * std::exp(-u * u / (2.0 * s * s));
        };
        tf.g2 = [s, cut](double u) {
            if (std::abs(u) >= cut) return 0.0;
            double s2 = s * s;
            return (u * u / s2 - 1.0) / s2 * std::exp(-u * u / (2.0 * s2));
        };
    } else if (name == "bump") {
        if (!params.empty()) throw ConfigInvalid("bump takes no parameters");
        tf.lo = -1.0;
        tf.hi = 1.0;
        tf.g = [](double u) {
            double d = 1.0 - u * u;
            return d <= 0.0 ? 0.0 : std::exp(-1.0 / d);
        };
        tf.g1 = [](double u) {
            double d = 1.0 - u * u;
            if (d <= 0.0) return 0.0;
            return -2.0 * u / (d * d) * std::exp(-1.0 / d);
        };
        tf.g2 = [](double u) {
            double d = 1.0 - u * u;
            if (d <= 0.0) return 0.0;
            double p1 = -2.0 * u / (d * d);
            double p2 = -2.0 * (1.0 + 3.0 * u * u) / (d * d * d);
            return (p2 + p1 * p1) * std::exp(-1.0 / d);
        };
    } else if (name == "plateau") {
        if (!params.empty()) throw ConfigInvalid("plateau takes no parameters");
        tf.lo = -2.0;
        tf.hi = 2.0;
        tf.g = [](double u) {
            double a = std::abs(u);
            if (a <= 1.0) return 1.0;
            if (a >= 2.0) return 0.0;
            return 1.0 - smoothstep(a - 1.0);
        };
        tf.g1 = [](double u) {
            double a = std::abs(u);
            if (a <= 1.0 || a >= 2.0) return 0.0;
            double sgn = u > 0.0 ? 1.0 : -1.0;
            return -sgn * smoothstep1(a - 1.0);
        };
        tf.g2 = [](double u) {
            double a = std::abs(u);
            if (a <= 1.0 || a >= 2.0) return 0.0;
            return -smoothstep2(a - 1.0);
        };
    } else if (name == "zero") {
        tf.lo = -1.0;
        tf.hi = 1.0;
        tf.g = [](double) { return 0.0; };
        tf.g1 = tf.g;
        tf.g2 = tf.g;
    } else {
        throw ConfigInvalid("unknown test function: " + name);
    }
    return tf;
}

cplx almost_analytic(const TestFunction& tf, cplx z) {
    double x = z.real(), y = z.imag();
    double c = chi_cutoff(y);
    if (c == 0.0) return 0.0;
    return (cplx(tf.f(x), 0.0) + cplx(0.0, y) * tf.f1(x)) * c;
}

} // namespace freesum
