#pragma once

#include <functional>
#include <string>
#include <vector>

#include "freesum/measure.hpp"

namespace freesum {

/*
 * Mesoscopic test function: a compactly supported C^2 bump g in the scaled
 * variable u, applied on the spectrum as f(x) = g((x - e0)/eta0).
 *
 * g, g1, g2 are g and its first two derivatives (closed form for the
 * built-ins); [lo, hi] is the support in u units.  chi is the smooth cutoff
 * of the almost-analytic extension: 1 on |y| <= 1, 0 on |y| >= 2, quintic
 * smoothstep in between.
 */
struct TestFunction {
    std::string name;
    std::vector<double> params;
    std::function<double(double)> g, g1, g2;
    double lo = 0.0, hi = 0.0; // support in u units
    double e0 = 0.0;
    double eta0 = 0.0;

    double f(double x) const { return g((x - e0) / eta0); }
    double f1(double x) const { return g1((x - e0) / eta0) / eta0; }
    double support_lo_x() const { return e0 + eta0 * lo; }
    double support_hi_x() const { return e0 + eta0 * hi; }
};

// Smooth cutoff chi(y): 1 on |y|<=1, 0 on |y|>=2, quintic smoothstep between.
double chi_cutoff(double y);

/*
 * Built-in families (params in parentheses):
 *   "gaussian"        ()   : exp(-u^2/2), truncated at |u| = 8.5
 *   "gaussian_scaled" (s)  : exp(-u^2/(2 s^2))
 *   "bump"            ()   : exp(-1/(1-u^2)) on (-1,1), C-infinity
 *   "plateau"         ()   : 1 on [-1,1], quintic C^2 ramp to 0 at |u| = 2
 *   "zero"            ()   : identically 0
 */
TestFunction make_test_function(const std::string& name,
                                const std::vector<double>& params,
                                double e0, double eta0);

// Almost-analytic extension (f(x) + i y f'(x)) chi(y) at z = x + iy.
cplx almost_analytic(const TestFunction& tf, cplx z);

} // namespace freesum
