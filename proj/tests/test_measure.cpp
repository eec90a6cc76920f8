#include <doctest.h>

#include <cmath>
#include <random>

#include "freesum/errors.hpp"
#include "freesum/measure.hpp"

using namespace freesum;

namespace {

EmpiricalMeasure random_measure(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> atom(-3.0, 3.0), wt(0.1, 1.0);
    std::vector<double> a(n), w(n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        a[i] = atom(rng);
        w[i] = wt(rng);
        sum += w[i];
    }
    for (double& x : w) x /= sum;
    // renormalize exactly
    double s2 = 0.0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) s2 += w[i];
    w.back() = 1.0 - s2;
    return EmpiricalMeasure::from_atoms(a, w);
}

} // namespace

TEST_CASE("construction sorts atoms and validates weights") {
    auto m = EmpiricalMeasure::from_atoms({2.0, -1.0, 0.5}, {0.2, 0.3, 0.5});
    CHECK(m.atoms == std::vector<double>{-1.0, 0.5, 2.0});
    CHECK(m.weights == std::vector<double>{0.3, 0.5, 0.2});
    CHECK(m.min_atom() == -1.0);
    CHECK(m.max_atom() == 2.0);
    CHECK(m.norm() == 2.0);
    CHECK(m.mean() == doctest::Approx(-0.3 + 0.25 + 0.4).epsilon(1e-15));

    CHECK_THROWS_AS(EmpiricalMeasure::from_atoms({}, {}), ConfigInvalid);
    CHECK_THROWS_AS(EmpiricalMeasure::from_atoms({0.0}, {0.5}), ConfigInvalid);
    CHECK_THROWS_AS(EmpiricalMeasure::from_atoms({0.0, 1.0}, {1.5, -0.5}),
                    ConfigInvalid);
    CHECK_THROWS_AS(
        EmpiricalMeasure::from_atoms({std::nan(""), 1.0}, {0.5, 0.5}),
        ConfigInvalid);
}

TEST_CASE("cdf is a right-continuous step function") {
    auto m = EmpiricalMeasure::from_atoms({-1.0, 1.0}, {0.25, 0.75});
    CHECK(m.cdf(-2.0) == 0.0);
    CHECK(m.cdf(-1.0) == 0.25);
    CHECK(m.cdf(0.0) == 0.25);
    CHECK(m.cdf(1.0) == 1.0);
    CHECK(m.cdf(5.0) == 1.0);
}

TEST_CASE("stieltjes transform of a point mass is exact") {
    auto d = EmpiricalMeasure::dirac(0.5);
    cplx z(2.0, 1.0);
    CHECK(std::abs(stieltjes_transform(d, z) - 1.0 / (0.5 - z)) < 1e-16);
    CHECK(std::abs(f_transform(d, z) - (z - 0.5)) < 1e-15);
    CHECK_THROWS_AS(stieltjes_transform(d, cplx(1.0, 0.0)), ConfigInvalid);
}

TEST_CASE("stieltjes transform is Herglotz and ~ -1/z at infinity") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
        auto m = random_measure(rng, 17);
        cplx z(std::uniform_real_distribution<double>(-4.0, 4.0)(rng),
               std::uniform_real_distribution<double>(0.05, 2.0)(rng));
        cplx s = stieltjes_transform(m, z);
        CHECK(s.imag() > 0.0);
        cplx f = f_transform(m, z);
        CHECK(f.imag() >= z.imag()); // F maps C+ into C+ and Im F >= Im z
    }
    auto m = random_measure(rng, 17);
    cplx big(0.0, 1e8);
    CHECK(std::abs(stieltjes_transform(m, big) + 1.0 / big) < 1e-14);
}

TEST_CASE("stieltjes derivatives match finite differences") {
    std::mt19937_64 rng(23);
    auto m = random_measure(rng, 9);
    cplx w(0.7, 0.8);
    double h = 1e-5;
    cplx fd1 = (stieltjes_transform(m, w + h) - stieltjes_transform(m, w - h)) /
               (2.0 * h);
    cplx fd2 = (stieltjes_transform(m, w + h) - 2.0 * stieltjes_transform(m, w) +
                stieltjes_transform(m, w - h)) /
               (h * h);
    CHECK(std::abs(stieltjes_derivative(m, w) - fd1) < 1e-8);
    CHECK(std::abs(stieltjes_second_derivative(m, w) - fd2) < 1e-5);
}

TEST_CASE("semicircle quantile discretization") {
    auto m = quantile_discretize(DensityFamily::semicircle, {1.0}, 2000);
    REQUIRE(m.size() == 2000);
    // Trace-centered, inside the support, symmetric.
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        sum += m.atoms[i];
        sum2 += m.atoms[i] * m.atoms[i];
    }
    CHECK(std::abs(sum) < 1e-9);
    CHECK(m.min_atom() > -2.0);
    CHECK(m.max_atom() < 2.0);
    CHECK(std::abs(m.atoms[999] + m.atoms[1000]) < 1e-9);
    // Second moment of the semicircle with variance 1.
    CHECK(sum2 / 2000.0 == doctest::Approx(1.0).epsilon(5e-3));
    // atoms[500] is the p = 500.5/2000 quantile; the root of
    // 1/2 + x sqrt(4-x^2)/(4 pi) + asin(x/2)/pi = 0.25025 computed in
    // extended precision is -0.8070870219986053.
    CHECK(m.atoms[500] == doctest::Approx(-0.8070870219986053).epsilon(1e-9));
    // Stieltjes transform at i matches the closed form i (sqrt(5)-1)/2.
    cplx mi = stieltjes_transform(m, cplx(0.0, 1.0));
    CHECK(std::abs(mi - cplx(0.0, 0.5 * (std::sqrt(5.0) - 1.0))) < 2e-4);
}

TEST_CASE("marchenko-pastur quantile discretization") {
    double lam = 0.25;
    auto m = quantile_discretize(DensityFamily::marchenko_pastur, {lam}, 1500);
    double lm = (1.0 - std::sqrt(lam)) * (1.0 - std::sqrt(lam));
    double lp = (1.0 + std::sqrt(lam)) * (1.0 + std::sqrt(lam));
    // Centered by the mean (MP mean is 1), so support shifts by ~1.
    double sum = 0.0, sum2 = 0.0;
    for (double a : m.atoms) {
        sum += a;
        sum2 += a * a;
    }
    CHECK(std::abs(sum) < 1e-9);
    CHECK(m.min_atom() > lm - 1.0 - 1e-9);
    CHECK(m.max_atom() < lp - 1.0 + 1e-9);
    // MP variance is lam.
    CHECK(sum2 / 1500.0 == doctest::Approx(lam).epsilon(1e-2));
    CHECK_THROWS_AS(quantile_discretize(DensityFamily::marchenko_pastur, {1.5}, 10),
                    ConfigInvalid);
}

TEST_CASE("uniform quantile discretization is the midpoint grid") {
    auto m = quantile_discretize(DensityFamily::uniform_interval, {1.0, 3.0}, 4);
    // Midpoints of [1,3] are 1.25, 1.75, 2.25, 2.75; centering removes the
    // mean 2.
    CHECK(m.atoms[0] == doctest::Approx(-0.75).epsilon(1e-15));
    CHECK(m.atoms[1] == doctest::Approx(-0.25).epsilon(1e-15));
    CHECK(m.atoms[2] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(m.atoms[3] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK_THROWS_AS(quantile_discretize(DensityFamily::uniform_interval, {3.0, 1.0}, 4),
                    ConfigInvalid);
}

TEST_CASE("levy distance closed forms") {
    auto d0 = EmpiricalMeasure::dirac(0.0);
    // L(delta_0, delta_t) = min(t, 1).
    CHECK(levy_distance(d0, EmpiricalMeasure::dirac(0.3)) ==
          doctest::Approx(0.3).epsilon(1e-9));
    CHECK(levy_distance(d0, EmpiricalMeasure::dirac(2.5)) ==
          doctest::Approx(1.0).epsilon(1e-9));
    // L(Bernoulli(+-1), delta_0) = 1/2.
    auto bern = EmpiricalMeasure::from_atoms({-1.0, 1.0});
    CHECK(levy_distance(bern, d0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(levy_distance(d0, d0) == 0.0);
}

TEST_CASE("levy distance is a metric on random measures") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
        auto a = random_measure(rng, 6), b = random_measure(rng, 9),
             c = random_measure(rng, 4);
        double ab = levy_distance(a, b), ba = levy_distance(b, a);
        double bc = levy_distance(b, c), ac = levy_distance(a, c);
        CHECK(std::abs(ab - ba) < 1e-9);
        CHECK(ac <= ab + bc + 1e-9);
        CHECK(levy_distance(a, a) == 0.0);
        CHECK(ab >= 0.0);
    }
}

TEST_CASE("levy distance between discretization levels shrinks") {
    auto coarse = quantile_discretize(DensityFamily::semicircle, {1.0}, 100);
    auto fine = quantile_discretize(DensityFamily::semicircle, {1.0}, 1000);
    double d_cf = levy_distance(coarse, fine);
    CHECK(d_cf < 0.02);
    auto finer = quantile_discretize(DensityFamily::semicircle, {1.0}, 2000);
    CHECK(levy_distance(fine, finer) < d_cf);
}

TEST_CASE("json round trip") {
    auto m = EmpiricalMeasure::from_atoms({-1.0, 0.25, 3.5}, {0.5, 0.25, 0.25});
    nlohmann::json j;
    m.to_json(j);
    auto back = EmpiricalMeasure::from_json(j);
    CHECK(back.atoms == m.atoms);
    CHECK(back.weights == m.weights);
    CHECK_THROWS(EmpiricalMeasure::from_json(nlohmann::json{{"atoms", {1.0}}}));
}
