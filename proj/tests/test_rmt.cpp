#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "freesum/errors.hpp"
#include "freesum/rmt.hpp"

using namespace freesum;

TEST_CASE("seed mixing is deterministic and spreads") {
    CHECK(mix_seed(1, 0) == mix_seed(1, 0));
    CHECK(mix_seed(1, 0) != mix_seed(1, 1));
    CHECK(mix_seed(1, 0) != mix_seed(2, 0));
    // No collisions over a modest grid.
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 30; ++s)
        for (std::uint64_t k = 0; k < 30; ++k) seen.insert(mix_seed(s, k));
    CHECK(seen.size() == 900);
}

TEST_CASE("gaussian stream moments and determinism") {
    GaussianStream g1(42), g2(42), g3(43);
    CHECK(g1.next() == g2.next());
    CHECK(g1.next() == g2.next());
    CHECK(g1.next() != g3.next());
    GaussianStream g(7);
    const int m = 200000;
    double s = 0.0, s2 = 0.0, s4 = 0.0;
    for (int i = 0; i < m; ++i) {
        double x = g.next();
        s += x;
        s2 += x * x;
        s4 += x * x * x * x;
    }
    CHECK(std::abs(s / m) < 0.01);
    CHECK(s2 / m == doctest::Approx(1.0).epsilon(0.01));
    CHECK(s4 / m == doctest::Approx(3.0).epsilon(0.05));
    GaussianStream u(9);
    for (int i = 0; i < 1000; ++i) {
        double x = u.uniform();
        CHECK(x > 0.0);
        CHECK(x < 1.0);
    }
}

TEST_CASE("haar unitary sampling") {
    int n = 64;
    Eigen::MatrixXcd u = sample_haar_unitary(n, 123);
    CHECK((u.adjoint() * u - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK(sample_haar_unitary(n, 123).isApprox(u, 1e-15));
    CHECK(!sample_haar_unitary(n, 124).isApprox(u, 1e-6));
}

TEST_CASE("haar orthogonal sampling") {
    int n = 48;
    Eigen::MatrixXd o = sample_haar_orthogonal(n, 9);
    CHECK((o.transpose() * o - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK(std::abs(std::abs(o.determinant()) - 1.0) < 1e-10);
}

TEST_CASE("haar entries have mean square 1/N") {
    const int n = 4, m = 2000;
    double acc = 0.0, acc2 = 0.0;
    for (int k = 0; k < m; ++k) {
        Eigen::MatrixXcd u = sample_haar_unitary(n, 1000 + k);
        double v = std::norm(u(1, 2));
        acc += v;
        acc2 += v * v;
    }
    double mean = acc / m;
    double se = std::sqrt((acc2 / m - mean * mean) / m);
    CHECK(std::abs(mean - 1.0 / n) < 3.0 * se);
}

TEST_CASE("free sum sample against a 2x2 closed-form eigensolve") {
    std::vector<double> a{-1.0, 1.0}, b{-0.5, 0.5};
    for (int beta : {1, 2}) {
        FreeSumSample s = build_sample(a, b, beta, 77, true);
        Eigen::MatrixXcd h = s.hamiltonian();
        CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() < 1e-13);
        double tr = h(0, 0).real() + h(1, 1).real();
        double det = (h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0)).real();
        double disc = std::sqrt(tr * tr - 4.0 * det);
        CHECK(s.eigenvalues[0] == doctest::Approx(0.5 * (tr - disc)).epsilon(1e-12));
        CHECK(s.eigenvalues[1] == doctest::Approx(0.5 * (tr + disc)).epsilon(1e-12));
    }
}

TEST_CASE("free sum sample trace identities and sorting") {
    auto mu = quantile_discretize(DensityFamily::semicircle, {1.0}, 150);
    FreeSumSample s = build_sample(mu.atoms, mu.atoms, 2, 5, true);
    double tra = 0.0, trb = 0.0, trl = 0.0;
    for (int i = 0; i < s.n; ++i) {
        tra += s.a_diag[i];
        trb += s.b_diag[i];
        trl += s.eigenvalues[i];
        if (i > 0) CHECK(s.eigenvalues[i] >= s.eigenvalues[i - 1]);
    }
    CHECK(trl == doctest::Approx(tra + trb).epsilon(1e-9));
    // Tr H^2 = Tr A^2 + Tr B^2 + 2 Tr(A UBU*): check against the dense H.
    Eigen::MatrixXcd h = s.hamiltonian();
    double tr2_dense = (h * h).trace().real();
    double tr2_eig = 0.0;
    for (double l : s.eigenvalues) tr2_eig += l * l;
    CHECK(tr2_eig == doctest::Approx(tr2_dense).epsilon(1e-10));
    // beta = 1 uses a real conjugator.
    FreeSumSample r = build_sample(mu.atoms, mu.atoms, 1, 5, true);
    CHECK(r.o.has_value());
    CHECK(!r.u.has_value());
}

TEST_CASE("partial randomness decomposition reconstructs the column") {
    int n = 64;
    Eigen::MatrixXcd u = sample_haar_unitary(n, 31);
    for (int i = 0; i < n; i += 9) {
        HaarDecomposition d = decompose_haar(u, i);
        // R_i = I - r_i r_i^* is an involutive reflection.
        Eigen::MatrixXcd r =
            Eigen::MatrixXcd::Identity(n, n) - d.r_i * d.r_i.adjoint();
        CHECK((r * r - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff() <
              1e-12);
        // u_minor has e_i as its i-th column (exactly, by construction).
        for (int k = 0; k < n; ++k)
            CHECK(std::abs(d.u_minor(k, i) - (k == i ? 1.0 : 0.0)) < 1e-13);
        // u_minor is unitary.
        CHECK((d.u_minor.adjoint() * d.u_minor -
               Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);
        // Reconstruction U = -e^{i theta_i} R_i U^{<i>}.
        Eigen::MatrixXcd rebuilt =
            -std::exp(cplx(0.0, d.theta_i)) * (r * d.u_minor);
        CHECK((rebuilt - u).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("green function diagnostics are local-law small") {
    auto mu = quantile_discretize(DensityFamily::semicircle, {1.0}, 300);
    FreeSumSample s = build_sample(mu.atoms, mu.atoms, 2, 11, true);
    cplx z(0.0, 0.25);
    auto st = derivatives(solve_subordination(
                              EmpiricalMeasure::from_atoms(mu.atoms),
                              EmpiricalMeasure::from_atoms(mu.atoms), z),
                          EmpiricalMeasure::from_atoms(mu.atoms),
                          EmpiricalMeasure::from_atoms(mu.atoms));
    LocalLawReport rep = green_diagnostics(s, st);
    double psi = 1.0 / std::sqrt(300.0 * 0.25);
    CHECK(rep.psi == doctest::Approx(psi).epsilon(1e-12));
    CHECK(rep.max_diag_error < 10.0 * psi);
    CHECK(rep.trace_error < 10.0 * psi * psi);
    CHECK(rep.bg_trace_error < 10.0 * psi * psi);
    CHECK(rep.y_identity < 10.0 / (300.0 * 0.25));
}

TEST_CASE("two point diagnostic is controlled") {
    auto mu = quantile_discretize(DensityFamily::semicircle, {1.0}, 300);
    auto em = EmpiricalMeasure::from_atoms(mu.atoms);
    FreeSumSample s = build_sample(mu.atoms, mu.atoms, 2, 13, true);
    cplx z(0.1, 0.3);
    auto s1 = derivatives(solve_subordination(em, em, z), em, em);
    auto s2 = derivatives(solve_subordination(em, em, std::conj(z)), em, em);
    auto tp = two_point(em, em, s1, s2);
    double err = two_point_diagnostic(s, s1, s2, tp);
    double bound = 20.0 * (xi1_control(z, std::conj(z), 300) +
                           xi2_control(z, std::conj(z), 300));
    CHECK(err < bound);
    // Same-point variant (the beta = 1 diagnostic path).
    auto tpd = two_point(em, em, s1, s1);
    double err_d = two_point_diagnostic(s, s1, s1, tpd);
    CHECK(err_d < 20.0 * (xi1_control(z, z, 300) + xi2_control(z, z, 300)));
}

TEST_CASE("eigenvalue persistence round trip") {
    std::vector<double> a{-1.0, 0.0, 1.0}, b{-0.5, 0.0, 0.5};
    FreeSumSample s = build_sample(a, b, 2, 99);
    auto dir = std::filesystem::temp_directory_path() / "freesum_rt";
    std::filesystem::create_directories(dir);
    std::string prefix = (dir / "sample").string();
    persist_eigenvalues(s, prefix);
    auto back = load_eigenvalues(prefix);
    REQUIRE(back.size() == s.eigenvalues.size());
    for (std::size_t i = 0; i < back.size(); ++i)
        CHECK(back[i] == s.eigenvalues[i]);
    std::filesystem::remove_all(dir);
}
