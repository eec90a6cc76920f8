#include "freesum/rmt.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "freesum/errors.hpp"

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace freesum {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Pin OpenBLAS to one thread before any BLAS/LAPACK call: samples are already
// parallelized across worker threads, and a fixed thread count keeps
// reductions bit-reproducible regardless of --workers.
const bool kBlasPinned = [] {
    setenv("OPENBLAS_NUM_THREADS", "1", 0);
    return true;
}();

void check_info(lapack_int info, const char* routine) {
    if (info != 0)
        throw SolverError(std::string(routine) + " failed with info = " +
                          std::to_string(info));
}

} // namespace

std::uint64_t mix_seed(std::uint64_t master_seed, std::uint64_t index) {
    std::uint64_t x = master_seed + 0x9E3779B97F4A7C15ull * (index + 1);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

double GaussianStream::uniform() {
    double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return u > 0.0 ? u : 0x1.0p-53;
}

double GaussianStream::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double r = std::sqrt(-2.0 * std::log(uniform()));
    double phi = 2.0 * kPi * uniform();
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
}

Eigen::MatrixXcd sample_haar_unitary(int n, std::uint64_t seed) {
    if (n < 1) throw ConfigInvalid("sample_haar_unitary: n must be >= 1");
    (void)kBlasPinned;
    GaussianStream gs(seed);
    Eigen::MatrixXcd a(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            a(i, j) = cplx(gs.next(), gs.next());
    std::vector<cplx> tau(n);
    check_info(LAPACKE_zgeqrf(LAPACK_COL_MAJOR, n, n, a.data(), n, tau.data()),
               "zgeqrf");
    std::vector<cplx> rdiag(n);
    for (int j = 0; j < n; ++j) rdiag[j] = a(j, j);
    check_info(LAPACKE_zungqr(LAPACK_COL_MAJOR, n, n, n, a.data(), n, tau.data()),
               "zungqr");
    // Phase correction: Q <- Q diag(r_jj/|r_jj|) makes the decomposition
    // unique (R with positive diagonal) and the law exactly Haar.
    for (int j = 0; j < n; ++j) {
        cplx phase = rdiag[j] / std::abs(rdiag[j]);
        a.col(j) *= phase;
    }
    return a;
}

Eigen::MatrixXd sample_haar_orthogonal(int n, std::uint64_t seed) {
    if (n < 1) throw ConfigInvalid("sample_haar_orthogonal: n must be >= 1");
    (void)kBlasPinned;
    GaussianStream gs(seed);
    Eigen::MatrixXd a(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) a(i, j) = gs.next();
    std::vector<double> tau(n);
    check_info(LAPACKE_dgeqrf(LAPACK_COL_MAJOR, n, n, a.data(), n, tau.data()),
               "dgeqrf");
    std::vector<double> rdiag(n);
    for (int j = 0; j < n; ++j) rdiag[j] = a(j, j);
    check_info(LAPACKE_dorgqr(LAPACK_COL_MAJOR, n, n, n, a.data(), n, tau.data()),
               "dorgqr");
    for (int j = 0; j < n; ++j)
        if (rdiag[j] < 0.0) a.col(j) = -a.col(j);
    return a;
}

Eigen::MatrixXcd FreeSumSample::conjugated_b() const {
    if (beta == 2) {
        if (!u) throw ConfigInvalid("sample does not retain its conjugator");
        Eigen::MatrixXcd t = *u;
        for (int j = 0; j < n; ++j) t.col(j) *= b_diag[j];
        return t * u->adjoint();
    }
    if (!o) throw ConfigInvalid("sample does not retain its conjugator");
    Eigen::MatrixXd t = *o;
    for (int j = 0; j < n; ++j) t.col(j) *= b_diag[j];
    Eigen::MatrixXd bt = t * o->transpose();
    return bt.cast<cplx>();
}

Eigen::MatrixXcd FreeSumSample::hamiltonian() const {
    Eigen::MatrixXcd h = conjugated_b();
    for (int i = 0; i < n; ++i) h(i, i) += a_diag[i];
    return h;
}

FreeSumSample build_sample(const std::vector<double>& a,
                           const std::vector<double>& b,
                           int beta, std::uint64_t seed, bool keep_conjugator) {
    if (a.size() != b.size() || a.empty())
        throw ConfigInvalid("build_sample: a and b must be nonempty, equal length");
    if (beta != 1 && beta != 2) throw ConfigInvalid("build_sample: beta must be 1 or 2");
    const int n = static_cast<int>(a.size());
    FreeSumSample s;
    s.n = n;
    s.beta = beta;
    s.seed = seed;
    s.a_diag = a;
    s.b_diag = b;
    s.eigenvalues.resize(n);
    if (beta == 2) {
        Eigen::MatrixXcd u = sample_haar_unitary(n, seed);
        Eigen::MatrixXcd t = u;
        for (int j = 0; j < n; ++j) t.col(j) *= b[j];
        Eigen::MatrixXcd h = t * u.adjoint();
        for (int i = 0; i < n; ++i) h(i, i) += a[i];
        check_info(LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'L', n, h.data(), n,
                                  s.eigenvalues.data()),
                   "zheevd");
        if (keep_conjugator) s.u = std::move(u);
    } else {
        Eigen::MatrixXd o = sample_haar_orthogonal(n, seed);
        Eigen::MatrixXd t = o;
        for (int j = 0; j < n; ++j) t.col(j) *= b[j];
        Eigen::MatrixXd h = t * o.transpose();
        for (int i = 0; i < n; ++i) h(i, i) += a[i];
        check_info(LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'L', n, h.data(), n,
                                  s.eigenvalues.data()),
                   "dsyevd");
        if (keep_conjugator) s.o = std::move(o);
    }
    return s;
}

HaarDecomposition decompose_haar(const Eigen::MatrixXcd& u, int i) {
    const int n = static_cast<int>(u.rows());
    if (i < 0 || i >= n) throw ConfigInvalid("decompose_haar: index out of range");
    HaarDecomposition d;
    d.i = i;
    d.v_i = u.col(i);
    cplx vii = d.v_i(i);
    if (std::abs(vii) < 1e-14)
        throw PhaseDegenerate("decompose_haar: |v_ii| < 1e-14, theta ill-defined");
    d.theta_i = std::arg(vii);
    if (d.theta_i < 0.0) d.theta_i += 2.0 * kPi;
    cplx em = std::exp(cplx(0.0, -d.theta_i));
    Eigen::VectorXcd w = em * d.v_i;
    w(i) += 1.0;
    d.r_i = std::sqrt(2.0) * w / w.norm();
    // u_minor = -e^{-i theta} (I - r r*) u
    Eigen::RowVectorXcd proj = d.r_i.adjoint() * u;
    d.u_minor = -em * (u - d.r_i * proj);
    return d;
}

namespace {

Eigen::MatrixXcd green_function(const Eigen::MatrixXcd& h, cplx z) {
    const int n = static_cast<int>(h.rows());
    Eigen::MatrixXcd m = h;
    for (int i = 0; i < n; ++i) m(i, i) -= z;
    std::vector<lapack_int> ipiv(n);
    check_info(LAPACKE_zgetrf(LAPACK_COL_MAJOR, n, n, m.data(), n, ipiv.data()),
               "zgetrf");
    check_info(LAPACKE_zgetri(LAPACK_COL_MAJOR, n, m.data(), n, ipiv.data()),
               "zgetri");
    return m;
}

} // namespace

LocalLawReport green_diagnostics(const FreeSumSample& sample,
                                 const SubordinationState& state) {
    const int n = sample.n;
    LocalLawReport rep;
    rep.z = state.z;
    rep.psi = 1.0 / std::sqrt(n * std::abs(state.z.imag()));
    Eigen::MatrixXcd bt = sample.conjugated_b();
    Eigen::MatrixXcd h = bt;
    for (int i = 0; i < n; ++i) h(i, i) += sample.a_diag[i];
    Eigen::MatrixXcd g = green_function(h, state.z);

    double max_diag = 0.0;
    for (int i = 0; i < n; ++i)
        max_diag = std::max(max_diag,
                            std::abs(g(i, i) - 1.0 / (sample.a_diag[i] - state.omega_b)));
    rep.max_diag_error = max_diag;
    cplx m_n = g.trace() / static_cast<double>(n);
    rep.trace_error = std::abs(m_n - state.m_fc);

    Eigen::MatrixXcd bg = bt * g;
    cplx u_bg = bg.trace() / static_cast<double>(n);
    rep.bg_trace_error = std::abs(u_bg - (state.z - state.omega_b) * state.m_fc);
    // u(B~ G B~) = Tr(BG * B~)/N without a second full product.
    cplx u_bgb = (bg.transpose().cwiseProduct(bt)).sum() / static_cast<double>(n);
    rep.y_identity = std::abs(u_bg - u_bg * u_bg + u_bgb * m_n);
    return rep;
}

double xi1_control(cplx z1, cplx z2, int n) {
    double e1 = std::abs(z1.imag()), e2 = std::abs(z2.imag());
    return 1.0 / (std::sqrt(n * e1) * e2) + 1.0 / (std::sqrt(n * e2) * e1);
}

double xi2_control(cplx z1, cplx z2, int n) {
    double e1 = std::abs(z1.imag()), e2 = std::abs(z2.imag());
    return 1.0 / (n * e1 * e1) + 1.0 / (n * e1 * e2);
}

namespace {

std::uint64_t fnv1a_doubles(const std::vector<double>& v) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (double d : v) {
        std::uint64_t bits;
        static_assert(sizeof bits == sizeof d);
        std::memcpy(&bits, &d, sizeof bits);
        for (int k = 0; k < 8; ++k) {
            h ^= (bits >> (8 * k)) & 0xff;
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

} // namespace

void persist_eigenvalues(const FreeSumSample& sample, const std::string& prefix) {
    // Little-endian f64 payload (x86-64 native order).
    std::ofstream bin(prefix + ".f64", std::ios::binary | std::ios::trunc);
    if (!bin) throw FreesumError("cannot open " + prefix + ".f64");
    bin.write(reinterpret_cast<const char*>(sample.eigenvalues.data()),
              static_cast<std::streamsize>(sample.eigenvalues.size() * sizeof(double)));
    if (!bin.good()) throw FreesumError("write failed for " + prefix + ".f64");
    bin.close();
    nlohmann::json side;
    side["n"] = sample.n;
    side["beta"] = sample.beta;
    side["seed"] = sample.seed;
    side["a_hash"] = fnv1a_doubles(sample.a_diag);
    side["b_hash"] = fnv1a_doubles(sample.b_diag);
    std::ofstream js(prefix + ".json", std::ios::trunc);
    if (!js) throw FreesumError("cannot open " + prefix + ".json");
    js << side.dump(2) << "\n";
}

std::vector<double> load_eigenvalues(const std::string& prefix) {
    std::ifstream js(prefix + ".json");
    if (!js) throw FreesumError("cannot open " + prefix + ".json");
    nlohmann::json side;
    js >> side;
    int n = side.at("n").get<int>();
    std::vector<double> v(n);
    std::ifstream bin(prefix + ".f64", std::ios::binary);
    if (!bin) throw FreesumError("cannot open " + prefix + ".f64");
    bin.read(reinterpret_cast<char*>(v.data()),
             static_cast<std::streamsize>(n * sizeof(double)));
    if (bin.gcount() != static_cast<std::streamsize>(n * sizeof(double)))
        throw FreesumError("truncated eigenvalue dump " + prefix + ".f64");
    return v;
}

double two_point_diagnostic(const FreeSumSample& sample,
                            const SubordinationState& s1,
                            const SubordinationState& s2,
                            const TwoPointState& tp) {
    const int n = sample.n;
    if (std::abs(tp.l_b) < 1e-8)
        throw DegenerateKernel("two_point_diagnostic: |L_B| < 1e-8");
    Eigen::MatrixXcd bt = sample.conjugated_b();
    Eigen::MatrixXcd h = bt;
    for (int i = 0; i < n; ++i) h(i, i) += sample.a_diag[i];
    Eigen::MatrixXcd g1 = green_function(h, s1.z);
    Eigen::MatrixXcd g2;
    if (s2.z == s1.z)
        g2 = g1;
    else if (s2.z == std::conj(s1.z))
        g2 = g1.adjoint();
    else
        g2 = green_function(h, s2.z);

    Eigen::MatrixXcd x = bt * g1;
    // diag(G(z2) B~ G(z1))_j = sum_k G2(j,k) X(k,j)
    Eigen::VectorXcd diag = (g2.cwiseProduct(x.transpose())).rowwise().sum();

    bool same_point = s1.z == s2.z;
    double max_err = 0.0;
    for (int j = 0; j < n; ++j) {
        cplx rhs;
        if (same_point) {
            if (!s1.has_derivatives)
                throw ConfigInvalid("two_point_diagnostic: state needs derivatives "
                                    "for the equal-point formula");
            cplx num = (1.0 - s1.omega_b_prime) * s1.m_fc +
                       (s1.z - s1.omega_b) * s1.m_fc_prime;
            cplx dj = sample.a_diag[j] - s1.omega_b;
            rhs = num / (dj * dj * tp.l_b);
        } else {
            rhs = tp.t_b / ((s1.z - s2.z) * (sample.a_diag[j] - s1.omega_b) *
                            (sample.a_diag[j] - s2.omega_b) * tp.l_b);
        }
        max_err = std::max(max_err, std::abs(diag(j) - rhs));
    }
    return max_err;
}

} // namespace freesum
