#pragma once

#include "freesum/subordination.hpp"
#include "freesum/test_function.hpp"

namespace freesum {

/*
 * Rectangular contour pair for the variance quadrature: Gamma_1 at height
 * gamma1_height = N^{-tau} eta0, Gamma_2 at exactly half that, both spanning
 * x_range (the scaled test-function support plus a margin).  Counterclockwise
 * orientation; the vertical sides lie outside the support of the
 * almost-analytic extension and are omitted.
 */
struct ContourSpec {
    double tau = 0.05;
    int n_points = 4096; // nodes per horizontal side
    double gamma1_height = 0.0;
    double gamma2_height = 0.0;
    std::pair<double, double> x_range{0.0, 0.0};
};

// Derive the contour from the test function and matrix size N; validates
// 0 < tau <= c0/6 with c0 = -log eta0 / log N.
ContourSpec make_contour_spec(const TestFunction& tf, int n_matrix, double tau,
                              int n_points = 4096);

/*
 * Variance kernel K(z1, z2) = -d^2/dz1 dz2 log Delta(z1, z2).
 *
 * Away from the diagonal degeneracies (all of |z1-z2|, |omega_A(z1)-
 * omega_A(z2)|, |omega_B(z1)-omega_B(z2)|, |m_fc(z1)-m_fc(z2)| above 1e-3)
 * the explicit four-term form is used:
 *
 *   K = w'A1 w'A2/(wA1-wA2)^2 + w'B1 w'B2/(wB1-wB2)^2 - 1/(z1-z2)^2
 *       - m'1 m'2/(m1-m2)^2;
 *
 * otherwise log Delta(z1,z2) is differentiated analytically through the
 * exact atom sums (no finite differences).  States must carry derivatives.
 */
cplx kernel_k(const TwoPointState& tp,
              const SubordinationState& s1, const SubordinationState& s2,
              const EmpiricalMeasure& mu_a, const EmpiricalMeasure& mu_b);

// V(f) = -(1/(2 beta pi^2)) oint_G1 oint_G2 f~(z1) f~(z2) K(z1,z2) dz1 dz2
// by trapezoid quadrature on the horizontal contour sides.
double contour_variance(const TestFunction& tf, const ContourSpec& spec,
                        const EmpiricalMeasure& mu_a,
                        const EmpiricalMeasure& mu_b, int beta);

// Universal bulk variance of g: computes both the double-integral form
// (1/(2 beta pi^2)) iint (g(x1)-g(x2))^2/(x1-x2)^2 dx1 dx2 and the Fourier
// form (1/(beta pi)) int |xi| |g^(xi)|^2 dxi, asserts 1e-6 relative
// agreement, returns the Fourier value.
double universal_variance(const TestFunction& g, int beta);

// Bias b(z) = -1/2 (2/beta - 1) (d/dz log Delta)(z) via exact atom-sum
// derivatives; identically 0 at beta = 2.
cplx bias_b(const SubordinationState& s, int beta,
            const EmpiricalMeasure& mu_a, const EmpiricalMeasure& mu_b);

// Deterministic centering N int g((E-E0)/eta0) rho_fc(E) dE, Simpson with
// grid doubling to relative tolerance 1e-8.
double expected_statistic(const TestFunction& tf, const EmpiricalMeasure& mu_a,
                          const EmpiricalMeasure& mu_b, int n_matrix);

// phi(lambda) = exp(-lambda^2 v/2), the solution of phi' = -lambda v phi.
cplx predicted_char_function(double v, double lambda);

} // namespace freesum
