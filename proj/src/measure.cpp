#include "freesum/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "freesum/errors.hpp"

namespace freesum {

namespace {

constexpr double kPi = 3.14159265358979323846;

void validate(const std::vector<double>& atoms, const std::vector<double>& weights) {
    if (atoms.empty())
        throw ConfigInvalid("EmpiricalMeasure: atom list is empty");
    if (atoms.size() != weights.size())
        throw ConfigInvalid("EmpiricalMeasure: atoms/weights size mismatch");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0))
            throw ConfigInvalid("EmpiricalMeasure: negative or NaN weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw ConfigInvalid("EmpiricalMeasure: weights sum to " + std::to_string(sum) +
                            ", expected 1 within 1e-12");
    for (double a : atoms)
        if (!std::isfinite(a))
            throw ConfigInvalid("EmpiricalMeasure: non-finite atom");
}

} // namespace

EmpiricalMeasure EmpiricalMeasure::from_atoms(std::vector<double> atoms) {
    std::vector<double> w(atoms.size(),
                          atoms.empty() ? 0.0 : 1.0 / static_cast<double>(atoms.size()));
    return from_atoms(std::move(atoms), std::move(w));
}

EmpiricalMeasure EmpiricalMeasure::from_atoms(std::vector<double> atoms,
                                              std::vector<double> weights) {
    validate(atoms, weights);
    // Sort atoms ascending, carrying weights along.
    std::vector<std::size_t> idx(atoms.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t i, std::size_t j) { return atoms[i] < atoms[j]; });
    EmpiricalMeasure m;
    m.atoms.reserve(atoms.size());
    m.weights.reserve(atoms.size());
    for (std::size_t i : idx) {
        m.atoms.push_back(atoms[i]);
        m.weights.push_back(weights[i]);
    }
    return m;
}

double EmpiricalMeasure::mean() const {
    double s = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) s += weights[i] * atoms[i];
    return s;
}

double EmpiricalMeasure::norm() const {
    return std::max(std::abs(atoms.front()), std::abs(atoms.back()));
}

double EmpiricalMeasure::cdf(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < atoms.size() && atoms[i] <= x; ++i) s += weights[i];
    return s;
}

void EmpiricalMeasure::to_json(nlohmann::json& j) const {
    j = nlohmann::json{{"atoms", atoms}, {"weights", weights}};
}

std::string EmpiricalMeasure::to_json_string() const {
    nlohmann::json j;
    to_json(j);
    return j.dump();
}

EmpiricalMeasure EmpiricalMeasure::from_json(const nlohmann::json& j) {
    return from_atoms(j.at("atoms").get<std::vector<double>>(),
                      j.at("weights").get<std::vector<double>>());
}

cplx stieltjes_transform(const EmpiricalMeasure& mu, cplx z) {
    if (z.imag() == 0.0)
        throw ConfigInvalid("stieltjes_transform: z on the real axis");
    cplx s = 0.0;
    for (std::size_t i = 0; i < mu.atoms.size(); ++i)
        s += mu.weights[i] / (mu.atoms[i] - z);
    return s;
}

cplx f_transform(const EmpiricalMeasure& mu, cplx z) {
    return -1.0 / stieltjes_transform(mu, z);
}

cplx stieltjes_derivative(const EmpiricalMeasure& mu, cplx w) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < mu.atoms.size(); ++i) {
        cplx d = mu.atoms[i] - w;
        s += mu.weights[i] / (d * d);
    }
    return s;
}

cplx stieltjes_second_derivative(const EmpiricalMeasure& mu, cplx w) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < mu.atoms.size(); ++i) {
        cplx d = mu.atoms[i] - w;
        s += mu.weights[i] / (d * d * d);
    }
    return 2.0 * s;
}

DensityFamily density_family_from_name(const std::string& name) {
    if (name == "semicircle") return DensityFamily::semicircle;
    if (name == "marchenko_pastur") return DensityFamily::marchenko_pastur;
    if (name == "uniform_interval") return DensityFamily::uniform_interval;
    throw ConfigInvalid("unknown density family: " + name);
}

namespace {

// Semicircle with variance v: support [-2 sqrt(v), 2 sqrt(v)].
double semicircle_cdf(double x, double v) {
    double r = 2.0 * std::sqrt(v);
    if (x <= -r) return 0.0;
    if (x >= r) return 1.0;
    // CDF of the radius-r semicircle: 1/2 + x sqrt(r^2-x^2)/(pi r^2) + asin(x/r)/pi.
    return 0.5 + x * std::sqrt(r * r - x * x) / (4.0 * kPi * v) +
           std::asin(x / r) / kPi;
}

// Marchenko-Pastur, ratio lam in (0,1], in the angular variable
// x(theta) = (lp+lm)/2 - (lp-lm)/2 cos(theta), theta in [0,pi];
// the edge square roots become smooth and the CDF is a plain Simpson sum.
double mp_cdf_theta(double theta, double lam) {
    double lm = (1.0 - std::sqrt(lam)) * (1.0 - std::sqrt(lam));
    double lp = (1.0 + std::sqrt(lam)) * (1.0 + std::sqrt(lam));
    double c = 0.5 * (lp + lm), h = 0.5 * (lp - lm);
    auto integrand = [&](double t) {
        double s = std::sin(t);
        return h * h * s * s / (2.0 * kPi * lam * (c - h * std::cos(t)));
    };
    const int m = 4000; // even
    double dt = theta / m, s = integrand(0.0) + integrand(theta);
    for (int k = 1; k < m; ++k) s += (k % 2 ? 4.0 : 2.0) * integrand(k * dt);
    return s * dt / 3.0;
}

double mp_x_of_theta(double theta, double lam) {
    double lm = (1.0 - std::sqrt(lam)) * (1.0 - std::sqrt(lam));
    double lp = (1.0 + std::sqrt(lam)) * (1.0 + std::sqrt(lam));
    return 0.5 * (lp + lm) - 0.5 * (lp - lm) * std::cos(theta);
}

// Invert a monotone CDF by bisection.
template <class F>
double quantile_bisect(F cdf, double p, double lo, double hi) {
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        double mid = 0.5 * (lo + hi);
        (cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

EmpiricalMeasure quantile_discretize(DensityFamily family,
                                     const std::vector<double>& params,
                                     std::size_t n) {
    if (n < 1) throw ConfigInvalid("quantile_discretize: n must be >= 1");
    std::vector<double> atoms(n);
    switch (family) {
    case DensityFamily::semicircle: {
        if (params.size() != 1 || !(params[0] > 0.0))
            throw ConfigInvalid("semicircle requires one positive parameter (variance)");
        double v = params[0], r = 2.0 * std::sqrt(v);
        for (std::size_t i = 0; i < n; ++i) {
            double p = (i + 0.5) / static_cast<double>(n);
            atoms[i] = quantile_bisect([v](double x) { return semicircle_cdf(x, v); },
                                       p, -r, r);
        }
        break;
    }
    case DensityFamily::marchenko_pastur: {
        if (params.size() != 1 || !(params[0] > 0.0) || params[0] > 1.0)
            throw ConfigInvalid("marchenko_pastur requires one ratio parameter in (0,1]");
        double lam = params[0];
        for (std::size_t i = 0; i < n; ++i) {
            double p = (i + 0.5) / static_cast<double>(n);
            double theta = quantile_bisect(
                [lam](double t) { return mp_cdf_theta(t, lam); }, p, 0.0, kPi);
            atoms[i] = mp_x_of_theta(theta, lam);
        }
        break;
    }
    case DensityFamily::uniform_interval: {
        if (params.size() != 2 || !(params[1] > params[0]))
            throw ConfigInvalid("uniform_interval requires parameters lo < hi");
        double lo = params[0], hi = params[1];
        for (std::size_t i = 0; i < n; ++i)
            atoms[i] = lo + (hi - lo) * (i + 0.5) / static_cast<double>(n);
        break;
    }
    }
    // Trace normalization: shift so the atoms sum to zero.
    double mean = std::accumulate(atoms.begin(), atoms.end(), 0.0) /
                  static_cast<double>(n);
    for (double& a : atoms) a -= mean;
    return EmpiricalMeasure::from_atoms(std::move(atoms));
}

namespace {

double cdf_left(const EmpiricalMeasure& m, double x) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.atoms.size() && m.atoms[i] < x; ++i) s += m.weights[i];
    return s;
}

// Is  F_mu(x-eps)-eps <= F_nu(x) <= F_mu(x+eps)+eps  for all real x?
// For step CDFs the sup/inf are attained at (or as left limits at) the jump
// points of nu and the shifted jump points of mu.
bool levy_feasible(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double eps) {
    const double slack = 1e-13;
    std::vector<double> xs;
    xs.reserve(nu.atoms.size() + 2 * mu.atoms.size());
    xs.insert(xs.end(), nu.atoms.begin(), nu.atoms.end());
    for (double a : mu.atoms) {
        xs.push_back(a - eps);
        xs.push_back(a + eps);
    }
    for (double t : xs) {
        // Upper constraint F_nu(x) <= F_mu(x+eps)+eps at t and as x -> t-.
        if (nu.cdf(t) > mu.cdf(t + eps) + eps + slack) return false;
        if (cdf_left(nu, t) > cdf_left(mu, t + eps) + eps + slack) return false;
        // Lower constraint F_mu(x-eps)-eps <= F_nu(x) at t and as x -> t-.
        if (mu.cdf(t - eps) - eps > nu.cdf(t) + slack) return false;
        if (cdf_left(mu, t - eps) - eps > cdf_left(nu, t) + slack) return false;
    }
    return true;
}

} // namespace

double levy_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (levy_feasible(mu, nu, 0.0)) return 0.0;
    double lo = 0.0;
    double hi = 1.0 + std::max(std::abs(mu.max_atom() - nu.min_atom()),
                               std::abs(nu.max_atom() - mu.min_atom()));
    for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        (levy_feasible(mu, nu, mid) ? hi : lo) = mid;
    }
    return hi;
}

} // namespace freesum
