#pragma once

#include <complex>
#include <string>
#include <vector>

#include <json.hpp>

namespace freesum {

using cplx = std::complex<double>;

/*
 * Discrete probability measure on the real line: atoms a_i with weights w_i.
 *
 * Invariants (enforced at construction):
 *   - atoms nonempty, all finite
 *   - weights nonnegative, summing to 1 within 1e-12
 *   - atoms sorted ascending (duplicates allowed; multiplicities via repeats)
 */
struct EmpiricalMeasure {
    std::vector<double> atoms;
    std::vector<double> weights;

    // Uniform weights 1/n.
    static EmpiricalMeasure from_atoms(std::vector<double> atoms);
    static EmpiricalMeasure from_atoms(std::vector<double> atoms,
                                       std::vector<double> weights);
    static EmpiricalMeasure dirac(double a) { return from_atoms({a}); }

    std::size_t size() const { return atoms.size(); }
    // First moment; |mean| is the "trace not centered" diagnostic.
    double mean() const;
    double min_atom() const { return atoms.front(); }
    double max_atom() const { return atoms.back(); }
    // max_i |a_i| (operator norm of the diagonal matrix).
    double norm() const;

    // CDF F(x) = sum of weights of atoms <= x.
    double cdf(double x) const;

    std::string to_json_string() const;
    void to_json(nlohmann::json& j) const;
    static EmpiricalMeasure from_json(const nlohmann::json& j);
};

// m_mu(z) = sum_i w_i / (a_i - z).  Requires Im z != 0.
cplx stieltjes_transform(const EmpiricalMeasure& mu, cplx z);

// F_mu(z) = -1/m_mu(z).
cplx f_transform(const EmpiricalMeasure& mu, cplx z);

// Derivative sums needed by the subordination Jacobians:
//   m'_mu(w)  = sum w_i/(a_i-w)^2
//   m''_mu(w) = 2 sum w_i/(a_i-w)^3
cplx stieltjes_derivative(const EmpiricalMeasure& mu, cplx w);
cplx stieltjes_second_derivative(const EmpiricalMeasure& mu, cplx w);

enum class DensityFamily { semicircle, marchenko_pastur, uniform_interval };

DensityFamily density_family_from_name(const std::string& name);

/*
 * n atoms at the (i-1/2)/n quantiles of the named density, uniform weights,
 * then shifted so the atoms sum to zero (trace normalization).
 *
 * params: semicircle -> {variance}; marchenko_pastur -> {ratio in (0,1]};
 *         uniform_interval -> {lo, hi}.
 */
EmpiricalMeasure quantile_discretize(DensityFamily family,
                                     const std::vector<double>& params,
                                     std::size_t n);

// Levy distance inf{eps : F_mu(x-eps)-eps <= F_nu(x) <= F_mu(x+eps)+eps},
// evaluated exactly over the finite jump set.
double levy_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

} // namespace freesum
