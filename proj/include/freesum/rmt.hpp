#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "freesum/subordination.hpp"

namespace freesum {

// splitmix64-style mixing of (master_seed, sample_index) into a per-sample
// seed, so Monte Carlo results are independent of worker scheduling.
std::uint64_t mix_seed(std::uint64_t master_seed, std::uint64_t index);

// Deterministic standard-normal stream: mt19937_64 bits + Box-Muller, with no
// reliance on implementation-defined std:: distributions.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}
    double uniform(); // U(0,1), open at 0
    double next();    // N(0,1)

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Haar-distributed unitary/orthogonal matrices: Ginibre ensemble + QR with
// the R-diagonal phase (resp. sign) correction.
Eigen::MatrixXcd sample_haar_unitary(int n, std::uint64_t seed);
Eigen::MatrixXd sample_haar_orthogonal(int n, std::uint64_t seed);

/*
 * One realization of H = A + U B U* (beta = 2) or A + O B O^T (beta = 1) with
 * A = diag(a), B = diag(b).  Eigenvalues sorted ascending.  The conjugator is
 * stored only when Green-function diagnostics are requested.
 */
struct FreeSumSample {
    int n = 0;
    int beta = 2;
    std::uint64_t seed = 0;
    std::vector<double> a_diag, b_diag;
    std::vector<double> eigenvalues;
    std::optional<Eigen::MatrixXcd> u;
    std::optional<Eigen::MatrixXd> o;

    // U B U* (resp. O B O^T) as a complex matrix; requires the conjugator.
    Eigen::MatrixXcd conjugated_b() const;
    Eigen::MatrixXcd hamiltonian() const;
};

FreeSumSample build_sample(const std::vector<double>& a,
                           const std::vector<double>& b,
                           int beta, std::uint64_t seed,
                           bool keep_conjugator = false);

/*
 * Partial randomness decomposition U = -e^{i theta_i} R_i U^{<i>}: v_i is the
 * i-th column of U, theta_i = arg(v_ii), R_i = I - r_i r_i* the Householder
 * reflection sending e_i to -e^{-i theta_i} v_i, and u_minor = U^{<i>} has
 * e_i as its i-th column.
 */
struct HaarDecomposition {
    int i = 0;
    Eigen::VectorXcd v_i;
    double theta_i = 0.0;
    Eigen::VectorXcd r_i;
    Eigen::MatrixXcd u_minor;
};

HaarDecomposition decompose_haar(const Eigen::MatrixXcd& u, int i);

/*
 * One-point local-law diagnostics at z (states and sample must match):
 *   psi            = (N |eta|)^{-1/2}
 *   max_diag_error = max_i |G_ii - 1/(a_i - omega_B)|
 *   trace_error    = |m_N - m_fc|
 *   bg_trace_error = |N^{-1} Tr(B~ G) - (z - omega_B) m_fc|
 *   y_identity     = |u(B~G) - u(B~G)^2 + u(B~GB~) u(G)|,  u(X) = N^{-1} Tr X
 */
struct LocalLawReport {
    cplx z{};
    double psi = 0.0;
    double max_diag_error = 0.0;
    double trace_error = 0.0;
    double bg_trace_error = 0.0;
    double y_identity = 0.0;
    double two_point_max_error = 0.0;
};

LocalLawReport green_diagnostics(const FreeSumSample& sample,
                                 const SubordinationState& state);

// Two-point local law check.  For z1 != z2 compares (G(z2) B~ G(z1))_jj with
// T_B/((z1-z2)(a_j-omega_B(z1))(a_j-omega_B(z2)) L_B); for z1 == z2 (the
// beta = 1 diagnostic) compares (G B~ G)_jj with
// [(z-omega_B) m_fc]'/((a_j-omega_B)^2 L_B(z)).  Returns the max_j error.
double two_point_diagnostic(const FreeSumSample& sample,
                            const SubordinationState& s1,
                            const SubordinationState& s2,
                            const TwoPointState& tp);

// Control parameters Xi_1, Xi_2 of the two-point error bound.
double xi1_control(cplx z1, cplx z2, int n);
double xi2_control(cplx z1, cplx z2, int n);

// Eigenvalue persistence: little-endian f64 array at <prefix>.f64 plus a JSON
// sidecar <prefix>.json recording n, beta, seed and hashes of the input
// measures.
void persist_eigenvalues(const FreeSumSample& sample, const std::string& prefix);
std::vector<double> load_eigenvalues(const std::string& prefix);

} // namespace freesum
