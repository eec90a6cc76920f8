#pragma once

#include <vector>

#include "freesum/measure.hpp"

namespace freesum {

/*
 * Solution of the finite-N subordination system at one spectral point z:
 *
 *   F_A(omega_B) = F_B(omega_A),   omega_A + omega_B - z = F_A(omega_B).
 *
 * m_fc = m_A(omega_B) = m_B(omega_A) is the Stieltjes transform of the free
 * additive convolution; delta = Delta(z) is the stability determinant
 *   Delta = 1 - (F'_A(omega_B)-1)(F'_B(omega_A)-1),
 * and the primes come from the exact 2x2 linear system (never finite
 * differences): (omega'_A, omega'_B) = Delta^{-1} m_fc^{-2} (m'_A(omega_B),
 * m'_B(omega_A)), m'_fc = omega'_B m'_A(omega_B).
 */
struct SubordinationState {
    cplx z{};
    cplx omega_a{};
    cplx omega_b{};
    cplx m_fc{};
    cplx delta{};
    cplx omega_a_prime{};
    cplx omega_b_prime{};
    cplx m_fc_prime{};
    double residual = 0.0;
    int iterations = 0;
    bool has_derivatives = false;

    cplx f_fc() const { return -1.0 / m_fc; }
};

// Two-point quantities at (z1, z2):
//   L_A = sum_j w_j/((b_j-omega_A(z1))(b_j-omega_A(z2))),  L_B likewise over a_j,
//   Delta(z1,z2) = 1 - (L_A/(m1 m2) - 1)(L_B/(m1 m2) - 1),
//   T_B = (z1-omega_B(z1)) m1 - (z2-omega_B(z2)) m2,  T_A role-swapped.
struct TwoPointState {
    cplx z1{}, z2{};
    cplx l_a{}, l_b{};
    cplx delta2{};
    cplx t_a{}, t_b{};
};

// Solve the subordination system at z (Im z != 0).  For Im z < 0 the system is
// solved at conj(z) and the result conjugated.  Derivatives are NOT filled;
// call derivatives() for that.  Throws NonConvergence if max_iter exceeded.
SubordinationState solve_subordination(const EmpiricalMeasure& mu_a,
                                       const EmpiricalMeasure& mu_b,
                                       cplx z,
                                       double tol = 1e-12,
                                       int max_iter = 10000);

// Same, with a warm start for omega_a (used by grid sweeps; pass the previous
// grid point's omega_a).
SubordinationState solve_subordination_warm(const EmpiricalMeasure& mu_a,
                                            const EmpiricalMeasure& mu_b,
                                            cplx z,
                                            cplx omega_a_start,
                                            double tol = 1e-12,
                                            int max_iter = 10000);

// Fill omega'_A, omega'_B, m'_fc and Delta from the exact linear system.
// Throws DegenerateJacobian if |Delta| < 1e-8.
SubordinationState derivatives(SubordinationState state,
                               const EmpiricalMeasure& mu_a,
                               const EmpiricalMeasure& mu_b);

TwoPointState two_point(const EmpiricalMeasure& mu_a,
                        const EmpiricalMeasure& mu_b,
                        const SubordinationState& s1,
                        const SubordinationState& s2);

// Density of mu_a boxplus mu_b at the probe height: Im m_fc(E+i eta)/pi.
double density(const EmpiricalMeasure& mu_a, const EmpiricalMeasure& mu_b,
               double energy, double eta_probe = 1e-7);

struct BulkPoint {
    double energy = 0.0;
    double rho = 0.0;
    double abs_f_fc = 0.0;
    double abs_delta = 0.0;
    double abs_m_fc_prime = 0.0;
};

struct BulkScanResult {
    std::vector<std::pair<double, double>> windows; // maximal good subintervals
    std::vector<BulkPoint> points;                  // full grid diagnostics
};

// Scan [interval.first, interval.second] with the given step; a grid point is
// "bulk" when rho >= rho_min, |F_fc| >= f_min and |Delta| >= 1e-4.  Windows
// are the maximal runs of bulk points.
BulkScanResult bulk_scan(const EmpiricalMeasure& mu_a,
                         const EmpiricalMeasure& mu_b,
                         std::pair<double, double> interval,
                         double grid_step,
                         double rho_min,
                         double f_min,
                         double eta_probe = 1e-7);

} // namespace freesum
