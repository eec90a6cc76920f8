#include "freesum/variance.hpp"

#include <cmath>
#include <vector>

#include "freesum/errors.hpp"

namespace freesum {

namespace {

constexpr double kPi = 3.14159265358979323846;

// 16-point Gauss-Legendre rule on [-1, 1] (positive half; mirrored in use).
constexpr int kGL = 8;
constexpr double kGLx[kGL] = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
    0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
    0.9445750230732326, 0.9894009349916499};
constexpr double kGLw[kGL] = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
    0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
    0.0622535239386479, 0.0271524594117541};

// Integrate fn over [a, b] with Gauss-Legendre panels of about the given
// length.
template <class F>
double gl_integrate(F fn, double a, double b, double panel_len) {
    int n_panels = std::max(1, static_cast<int>(std::ceil((b - a) / panel_len)));
    double h = (b - a) / n_panels, total = 0.0;
    for (int p = 0; p < n_panels; ++p) {
        double mid = a + (p + 0.5) * h, half = 0.5 * h, s = 0.0;
        for (int k = 0; k < kGL; ++k)
            s += kGLw[k] * (fn(mid - half * kGLx[k]) + fn(mid + half * kGLx[k]));
        total += s * half;
    }
    return total;
}

cplx kernel_explicit(const SubordinationState& s1, const SubordinationState& s2) {
    cplx dwa = s1.omega_a - s2.omega_a;
    cplx dwb = s1.omega_b - s2.omega_b;
    cplx dz = s1.z - s2.z;
    cplx dm = s1.m_fc - s2.m_fc;
    return s1.omega_a_prime * s2.omega_a_prime / (dwa * dwa) +
           s1.omega_b_prime * s2.omega_b_prime / (dwb * dwb) -
           1.0 / (dz * dz) -
           s1.m_fc_prime * s2.m_fc_prime / (dm * dm);
}

// sum_j w_j / ((atoms_j - w1)^p (atoms_j - w2)^q)
cplx atom_sum(const EmpiricalMeasure& mu, cplx w1, int p, cplx w2, int q) {
    cplx s = 0.0;
    for (std::size_t j = 0; j < mu.atoms.size(); ++j) {
        cplx d1 = mu.atoms[j] - w1, d2 = mu.atoms[j] - w2;
        cplx t = mu.weights[j];
        for (int k = 0; k < p; ++k) t /= d1;
        for (int k = 0; k < q; ++k) t /= d2;
        s += t;
    }
    return s;
}

// -d^2/dz1 dz2 log Delta(z1,z2) by exact differentiation of the atom sums,
// valid also on the diagonal z1 = z2.
cplx kernel_log_delta(const TwoPointState& tp,
                      const SubordinationState& s1, const SubordinationState& s2,
                      const EmpiricalMeasure& mu_a, const EmpiricalMeasure& mu_b) {
    cplx m1 = s1.m_fc, m2 = s2.m_fc;
    cplx mp1 = s1.m_fc_prime, mp2 = s2.m_fc_prime;
    cplx wa1 = s1.omega_a, wa2 = s2.omega_a, wb1 = s1.omega_b, wb2 = s2.omega_b;

    // L_A derivatives: d/dz1 L_A = omega'_A(z1) sum w_j/((b_j-wa1)^2 (b_j-wa2)).
    cplx la = tp.l_a, lb = tp.l_b;
    cplx d1_la = s1.omega_a_prime * atom_sum(mu_b, wa1, 2, wa2, 1);
    cplx d2_la = s2.omega_a_prime * atom_sum(mu_b, wa1, 1, wa2, 2);
    cplx d12_la = s1.omega_a_prime * s2.omega_a_prime * atom_sum(mu_b, wa1, 2, wa2, 2);
    cplx d1_lb = s1.omega_b_prime * atom_sum(mu_a, wb1, 2, wb2, 1);
    cplx d2_lb = s2.omega_b_prime * atom_sum(mu_a, wb1, 1, wb2, 2);
    cplx d12_lb = s1.omega_b_prime * s2.omega_b_prime * atom_sum(mu_a, wb1, 2, wb2, 2);

    // P = L_A/(m1 m2) - 1, Q = L_B/(m1 m2) - 1, Delta = 1 - P Q.
    cplx inv = 1.0 / (m1 * m2);
    auto pack = [&](cplx l, cplx d1l, cplx d2l, cplx d12l) {
        struct PQ {
            cplx v, d1, d2, d12;
        } r;
        r.v = l * inv - 1.0;
        r.d1 = d1l * inv - l * mp1 / (m1 * m1 * m2);
        r.d2 = d2l * inv - l * mp2 / (m1 * m2 * m2);
        r.d12 = d12l * inv - d1l * mp2 / (m1 * m2 * m2) - d2l * mp1 / (m1 * m1 * m2) +
                l * mp1 * mp2 / (m1 * m1 * m2 * m2);
        return r;
    };
    auto P = pack(la, d1_la, d2_la, d12_la);
    auto Q = pack(lb, d1_lb, d2_lb, d12_lb);

    cplx delta = 1.0 - P.v * Q.v;
    if (std::abs(delta) < 1e-10)
        throw DegenerateKernel("kernel_k: |Delta(z1,z2)| below 1e-10");
    cplx d1_delta = -(P.d1 * Q.v + P.v * Q.d1);
    cplx d2_delta = -(P.d2 * Q.v + P.v * Q.d2);
    cplx d12_delta = -(P.d12 * Q.v + P.d1 * Q.d2 + P.d2 * Q.d1 + P.v * Q.d12);
    return -d12_delta / delta + d1_delta * d2_delta / (delta * delta);
}

} // namespace

cplx kernel_k(const TwoPointState& tp,
              const SubordinationState& s1, const SubordinationState& s2,
              const EmpiricalMeasure& mu_a, const EmpiricalMeasure& mu_b) {
    if (!s1.has_derivatives || !s2.has_derivatives)
        throw ConfigInvalid("kernel_k: states must carry derivatives");
    if (std::abs(tp.delta2) < 1e-10)
        throw DegenerateKernel("kernel_k: |Delta(z1,z2)| below 1e-10");
    double sep = std::min(std::min(std::abs(s1.z - s2.z),
                                   std::abs(s1.omega_a - s2.omega_a)),
                          std::min(std::abs(s1.omega_b - s2.omega_b),
                                   std::abs(s1.m_fc - s2.m_fc)));
    // The explicit four-term form subtracts pairs of near-poles whose
    // residual error grows like (solver tolerance)/sep^3; below sep ~ 1e-3
    // the analytically differentiated log Delta form is both exact on the
    // diagonal and numerically stable.
    if (sep > 1e-3) return kernel_explicit(s1, s2);
    return kernel_log_delta(tp, s1, s2, mu_a, mu_b);
}

ContourSpec make_contour_spec(const TestFunction& tf, int n_matrix, double tau,
                              int n_points) {
    if (n_matrix < 2) throw ConfigInvalid("contour: matrix size must be >= 2");
    double c0 = -std::log(tf.eta0) / std::log(static_cast<double>(n_matrix));
    if (!(tau > 0.0) || tau > c0 / 6.0 + 1e-12)
        throw ConfigInvalid("contour: tau must satisfy 0 < tau <= c0/6 = " +
                            std::to_string(c0 / 6.0) + ", got " + std::to_string(tau));
    ContourSpec spec;
    spec.tau = tau;
    spec.n_points = n_points;
    spec.gamma1_height = std::pow(static_cast<double>(n_matrix), -tau) * tf.eta0;
    spec.gamma2_height = 0.5 * spec.gamma1_height;
    double margin = 0.5 * tf.eta0;
    spec.x_range = {tf.support_lo_x() - margin, tf.support_hi_x() + margin};
    return spec;
}

double contour_variance(const TestFunction& tf, const ContourSpec& spec,
                        const EmpiricalMeasure& mu_a,
                        const EmpiricalMeasure& mu_b, int beta) {
    if (beta != 1 && beta != 2) throw ConfigInvalid("beta must be 1 or 2");
    if (!(spec.gamma1_height > 0.0) || !(spec.gamma2_height > 0.0))
        throw ConfigInvalid("contour heights must be positive");
    const int n = spec.n_points;
    const double xl = spec.x_range.first, xh = spec.x_range.second;
    const double dx = (xh - xl) / (n - 1);

    auto conj_state = [](const SubordinationState& s) {
        SubordinationState c = s;
        c.z = std::conj(s.z);
        c.omega_a = std::conj(s.omega_a);
        c.omega_b = std::conj(s.omega_b);
        c.m_fc = std::conj(s.m_fc);
        c.delta = std::conj(s.delta);
        c.omega_a_prime = std::conj(s.omega_a_prime);
        c.omega_b_prime = std::conj(s.omega_b_prime);
        c.m_fc_prime = std::conj(s.m_fc_prime);
        return c;
    };

    // Full double contour integral with Gamma_1, Gamma_2 at the given heights.
    auto evaluate = [&](double h1, double h2) {
        // States (with derivatives) along the upper horizontal sides; lower
        // sides are componentwise conjugates.
        auto sweep = [&](double height) {
            std::vector<SubordinationState> line;
            line.reserve(n);
            cplx warm;
            for (int j = 0; j < n; ++j) {
                cplx z(xl + j * dx, height);
                SubordinationState s =
                    (j == 0) ? solve_subordination(mu_a, mu_b, z)
                             : solve_subordination_warm(mu_a, mu_b, z, warm);
                warm = s.omega_a;
                line.push_back(derivatives(s, mu_a, mu_b));
            }
            return line;
        };
        std::vector<SubordinationState> up1 = sweep(h1);
        std::vector<SubordinationState> up2 = sweep(h2);

        std::vector<cplx> ft_up1(n), ft_up2(n);
        std::vector<double> w(n, dx);
        w.front() = w.back() = 0.5 * dx;
        for (int j = 0; j < n; ++j) {
            ft_up1[j] = almost_analytic(tf, up1[j].z);
            ft_up2[j] = almost_analytic(tf, up2[j].z);
        }

        // Counterclockwise: the lower horizontal side runs in +x, the upper
        // in -x.  Vertical sides lie outside the support of f~ and are
        // omitted.
        cplx total = 0.0;
        for (int side1 = 0; side1 < 2; ++side1) {
            double sgn1 = side1 == 0 ? +1.0 : -1.0; // 0 = lower, 1 = upper
            for (int side2 = 0; side2 < 2; ++side2) {
                double sgn2 = side2 == 0 ? +1.0 : -1.0;
                cplx part = 0.0;
                for (int j = 0; j < n; ++j) {
                    SubordinationState s1 =
                        side1 == 0 ? conj_state(up1[j]) : up1[j];
                    cplx f1 = side1 == 0 ? std::conj(ft_up1[j]) : ft_up1[j];
                    f1 *= w[j];
                    if (f1 == cplx(0.0)) continue;
                    cplx row = 0.0;
                    for (int k = 0; k < n; ++k) {
                        const SubordinationState& s2u = up2[k];
                        cplx f2 = side2 == 0 ? std::conj(ft_up2[k]) : ft_up2[k];
                        if (f2 == cplx(0.0)) continue;
                        SubordinationState s2 = side2 == 0 ? conj_state(s2u) : s2u;
                        row += f2 * w[k] * kernel_explicit(s1, s2);
                    }
                    part += f1 * row;
                }
                total += sgn1 * sgn2 * part;
            }
        }
        return total;
    };

    // The first-order almost-analytic extension f + iyf' deviates from the
    // analytic continuation by O(y^2 f''), which shows up as an O(h^2)
    // height-dependence of the quadrature value.  The integrand is otherwise
    // analytic between the contours and the real axis, so the value at the
    // nominal heights is extrapolated to the zero-height limit by two
    // Richardson steps (heights h, h/2, h/4; removes the h^2 and h^3 terms).
    cplx t0 = evaluate(spec.gamma1_height, spec.gamma2_height);
    cplx t1 = evaluate(0.5 * spec.gamma1_height, 0.5 * spec.gamma2_height);
    cplx t2 = evaluate(0.25 * spec.gamma1_height, 0.25 * spec.gamma2_height);
    cplx r1 = (4.0 * t1 - t0) / 3.0, r2 = (4.0 * t2 - t1) / 3.0;
    cplx total = (8.0 * r2 - r1) / 7.0;
    cplx v = -total / (2.0 * beta * kPi * kPi);
    if (std::abs(v.imag()) > 1e-6 * std::max(std::abs(v.real()), 1e-12))
        throw ImaginaryResidue("contour_variance: imaginary residue " +
                               std::to_string(v.imag()) + " vs real part " +
                               std::to_string(v.real()));
    return v.real();
}

double universal_variance(const TestFunction& g, int beta) {
    if (beta != 1 && beta != 2) throw ConfigInvalid("beta must be 1 or 2");
    const double lo = g.lo, hi = g.hi;
    const double len = hi - lo;
    if (!(len > 0.0)) throw ConfigInvalid("universal_variance: empty support");
    const double panel = std::max(len / 256.0, 1e-3);

    // Double-integral form, reduced over u = x1 - x2:
    //   iint (g(x1)-g(x2))^2/(x1-x2)^2 = int_{-U}^{U} D(u)/u^2 du + 4 ||g||^2/U
    // with D(u) = int (g(y+u)-g(y))^2 dy, which is exactly 2||g||^2 once
    // |u| > len, so the tail integrates in closed form.
    double norm2 = gl_integrate([&](double y) { return g.g(y) * g.g(y); },
                                lo, hi, panel);
    const double U = len + 1.0;
    auto D_over_u2 = [&](double u) {
        if (std::abs(u) < 1e-7) {
            return gl_integrate([&](double y) { return g.g1(y) * g.g1(y); },
                                lo, hi, panel);
        }
        double d = gl_integrate(
            [&](double y) {
                double t = (g.g(y + u) - g.g(y)) / u;
                return t * t;
            },
            lo - std::abs(u), hi + std::abs(u), panel);
        return d;
    };
    double double_form = gl_integrate(D_over_u2, -U, U, panel) + 4.0 * norm2 / U;
    double v_double = double_form / (2.0 * beta * kPi * kPi);

    // Fourier form: 2/(beta pi) int_0^inf xi |g^(xi)|^2 dxi, with g^ by
    // uniform trapezoid (spectrally accurate: g and g' vanish at the support
    // ends) and Gauss-Legendre panels in xi, terminated once panels stop
    // contributing.
    const int nx = 16384;
    const double dxs = len / nx;
    std::vector<double> gx(nx + 1);
    for (int j = 0; j <= nx; ++j) gx[j] = g.g(lo + j * dxs);
    auto ghat2 = [&](double xi) {
        // trapezoid of g(x) e^{-i xi x} via a multiplicative phase recurrence
        cplx rot = std::exp(cplx(0.0, -xi * dxs));
        cplx phase = std::exp(cplx(0.0, -xi * lo));
        cplx acc = 0.0;
        for (int j = 0; j <= nx; ++j) {
            double trap = (j == 0 || j == nx) ? 0.5 : 1.0;
            acc += trap * gx[j] * phase;
            phase *= rot;
        }
        cplx gh = acc * dxs / std::sqrt(2.0 * kPi);
        return std::norm(gh);
    };
    double fourier_integral = 0.0;
    const double xi_panel = 0.5;
    int idle = 0;
    for (int p = 0; p < 4000 && idle < 3; ++p) {
        double a = p * xi_panel, mid = a + 0.5 * xi_panel, half = 0.5 * xi_panel;
        double s = 0.0;
        for (int k = 0; k < kGL; ++k) {
            double x1 = mid - half * kGLx[k], x2 = mid + half * kGLx[k];
            s += kGLw[k] * (x1 * ghat2(x1) + x2 * ghat2(x2));
        }
        s *= half;
        fourier_integral += s;
        idle = (p > 2 && s < 1e-13 * std::max(fourier_integral, 1e-300)) ? idle + 1 : 0;
    }
    double v_fourier = 2.0 * fourier_integral / (beta * kPi);

    double ref = std::max(std::abs(v_fourier), 1e-300);
    if (std::abs(v_double - v_fourier) > 1e-6 * ref && ref > 1e-14)
        throw FormulaMismatch(
            "universal_variance: double-integral and Fourier forms disagree: " +
            std::to_string(v_double) + " vs " + std::to_string(v_fourier));
    return v_fourier;
}

cplx bias_b(const SubordinationState& s_in, int beta,
            const EmpiricalMeasure& mu_a, const EmpiricalMeasure& mu_b) {
    if (beta != 1 && beta != 2) throw ConfigInvalid("beta must be 1 or 2");
    if (beta == 2) return 0.0;
    SubordinationState s = s_in.has_derivatives ? s_in : derivatives(s_in, mu_a, mu_b);
    // Delta = 1 - p q with p = F'_A(omega_B)-1, q = F'_B(omega_A)-1;
    // F''_mu = m''/m^2 - 2 m'^2/m^3 evaluated at the subordination points.
    cplx ma = stieltjes_transform(mu_a, s.omega_b);
    cplx mb = stieltjes_transform(mu_b, s.omega_a);
    cplx ma_p = stieltjes_derivative(mu_a, s.omega_b);
    cplx mb_p = stieltjes_derivative(mu_b, s.omega_a);
    cplx ma_pp = stieltjes_second_derivative(mu_a, s.omega_b);
    cplx mb_pp = stieltjes_second_derivative(mu_b, s.omega_a);
    cplx p = ma_p / (ma * ma) - 1.0;
    cplx q = mb_p / (mb * mb) - 1.0;
    cplx fa_pp = ma_pp / (ma * ma) - 2.0 * ma_p * ma_p / (ma * ma * ma);
    cplx fb_pp = mb_pp / (mb * mb) - 2.0 * mb_p * mb_p / (mb * mb * mb);
    cplx delta_prime = -(fa_pp * s.omega_b_prime * q + p * fb_pp * s.omega_a_prime);
    return -0.5 * (2.0 / beta - 1.0) * delta_prime / s.delta;
}

double expected_statistic(const TestFunction& tf, const EmpiricalMeasure& mu_a,
                          const EmpiricalMeasure& mu_b, int n_matrix) {
    const double a = tf.support_lo_x(), b = tf.support_hi_x();
    const double eta_probe = 1e-7;
    auto sweep = [&](int m) { // composite Simpson with m (even) intervals
        double h = (b - a) / m, s = 0.0;
        cplx warm;
        bool have_warm = false;
        for (int j = 0; j <= m; ++j) {
            double x = a + j * h;
            cplx z(x, eta_probe);
            SubordinationState st =
                have_warm ? solve_subordination_warm(mu_a, mu_b, z, warm)
                          : solve_subordination(mu_a, mu_b, z);
            warm = st.omega_a;
            have_warm = true;
            double rho = std::max(0.0, st.m_fc.imag() / kPi);
            double coeff = (j == 0 || j == m) ? 1.0 : (j % 2 ? 4.0 : 2.0);
            s += coeff * tf.f(x) * rho;
        }
        return s * h / 3.0;
    };
    double prev = sweep(256);
    for (int m = 512; m <= 32768; m *= 2) {
        double cur = sweep(m);
        if (std::abs(cur - prev) <= 1e-8 * std::max(std::abs(cur), 1e-12))
            return n_matrix * cur;
        prev = cur;
    }
    return n_matrix * prev;
}

cplx predicted_char_function(double v, double lambda) {
    if (!(v >= 0.0)) throw ConfigInvalid("predicted_char_function: v must be >= 0");
    return std::exp(cplx(-0.5 * lambda * lambda * v, 0.0));
}

} // namespace freesum
