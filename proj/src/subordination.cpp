#include "freesum/subordination.hpp"

#include <cmath>
#include <limits>

#include "freesum/errors.hpp"

namespace freesum {

namespace {

constexpr double kPi = 3.14159265358979323846;

// h_mu(w) = F_mu(w) - w, the "self-energy" of the subordination equations:
//   omega_B = z + h_B(omega_A),  omega_A = z + h_A(omega_B).
cplx h_of(const EmpiricalMeasure& mu, cplx w) {
    return f_transform(mu, w) - w;
}

struct IterationPoint {
    cplx omega_a, omega_b;
    double residual;
};

// With omega_b := z + h_B(omega_a) the second subordination equation holds
// exactly, and the defect of both remaining equations is |z + h_A(omega_b) -
// omega_a|, which is also the fixed-point step length.
IterationPoint evaluate(const EmpiricalMeasure& mu_a, const EmpiricalMeasure& mu_b,
                        cplx z, cplx omega_a) {
    IterationPoint p;
    p.omega_a = omega_a;
    p.omega_b = z + h_of(mu_b, omega_a);
    p.residual = std::abs(z + h_of(mu_a, p.omega_b) - omega_a);
    return p;
}

// Core solver in the upper half-plane.
SubordinationState solve_upper(const EmpiricalMeasure& mu_a,
                               const EmpiricalMeasure& mu_b,
                               cplx z, cplx omega_a_start,
                               double tol, int max_iter) {
    IterationPoint cur = evaluate(mu_a, mu_b, z, omega_a_start);
    int it = 0;
    while (cur.residual > tol) {
        if (++it > max_iter)
            throw NonConvergence(it, cur.residual,
                                 "solve_subordination: residual " +
                                     std::to_string(cur.residual) + " after " +
                                     std::to_string(max_iter) + " iterations");
        // Fixed-point candidate: the Belinschi-Bercovici composed self-map of
        // the upper half-plane.
        cplx fp = z + h_of(mu_a, cur.omega_b);
        IterationPoint best = evaluate(mu_a, mu_b, z, fp);

        // Newton candidate on the 2x2 system.  With the second equation exact
        // the Newton displacement reduces to G1/Delta where G1 = z +
        // h_A(omega_b) - omega_a.
        cplx ma = stieltjes_transform(mu_a, cur.omega_b);
        cplx mb = stieltjes_transform(mu_b, cur.omega_a);
        cplx fa_p = stieltjes_derivative(mu_a, cur.omega_b) / (ma * ma);
        cplx fb_p = stieltjes_derivative(mu_b, cur.omega_a) / (mb * mb);
        cplx delta = 1.0 - (fa_p - 1.0) * (fb_p - 1.0);
        if (std::abs(delta) > 1e-12) {
            cplx g1 = z + h_of(mu_a, cur.omega_b) - cur.omega_a;
            cplx newton = cur.omega_a + g1 / delta;
            if (std::isfinite(newton.real()) && std::isfinite(newton.imag()) &&
                newton.imag() > 0.0) {
                IterationPoint cand = evaluate(mu_a, mu_b, z, newton);
                if (cand.residual < best.residual) best = cand;
            }
        }
        // Damping: average towards the current iterate while the step would
        // increase the residual (guards slow contraction at small eta).
        int halvings = 0;
        while (best.residual > cur.residual && halvings < 30) {
            best = evaluate(mu_a, mu_b, z,
                            0.5 * (best.omega_a + cur.omega_a));
            ++halvings;
        }
        if (best.residual >= cur.residual) {
            // Rounding floor: the residual mixes terms of size |z|, so it
            // cannot drop below ~eps * |z| far from the spectrum.
            double floor_tol =
                10.0 * tol + 1e-14 * (std::abs(z) + std::abs(cur.omega_a));
            if (cur.residual <= floor_tol) break;
            // The residual is not monotone along the globally convergent
            // fixed-point orbit; when no candidate improves it, take the
            // undamped fixed-point step rather than stalling.
            best = evaluate(mu_a, mu_b, z, fp);
        }
        cur = best;
    }
    if (cur.residual >
        10.0 * tol + 1e-14 * (std::abs(z) + std::abs(cur.omega_a)))
        throw NonConvergence(it, cur.residual,
                             "solve_subordination: stalled at residual " +
                                 std::to_string(cur.residual));
    SubordinationState s;
    s.z = z;
    s.omega_a = cur.omega_a;
    s.omega_b = cur.omega_b;
    s.m_fc = 0.5 * (stieltjes_transform(mu_a, cur.omega_b) +
                    stieltjes_transform(mu_b, cur.omega_a));
    s.residual = cur.residual;
    s.iterations = it;
    return s;
}

SubordinationState conjugate(SubordinationState s) {
    s.z = std::conj(s.z);
    s.omega_a = std::conj(s.omega_a);
    s.omega_b = std::conj(s.omega_b);
    s.m_fc = std::conj(s.m_fc);
    s.delta = std::conj(s.delta);
    s.omega_a_prime = std::conj(s.omega_a_prime);
    s.omega_b_prime = std::conj(s.omega_b_prime);
    s.m_fc_prime = std::conj(s.m_fc_prime);
    return s;
}

} // namespace

SubordinationState solve_subordination_warm(const EmpiricalMeasure& mu_a,
                                            const EmpiricalMeasure& mu_b,
                                            cplx z, cplx omega_a_start,
                                            double tol, int max_iter) {
    if (tol <= 0.0) throw ConfigInvalid("solve_subordination: tol must be > 0");
    if (z.imag() == 0.0) throw ConfigInvalid("solve_subordination: Im z = 0");
    if (z.imag() < 0.0) {
        SubordinationState s = solve_subordination_warm(
            mu_a, mu_b, std::conj(z), std::conj(omega_a_start), tol, max_iter);
        return conjugate(s);
    }
    if (omega_a_start.imag() <= 0.0) omega_a_start = z;
    return solve_upper(mu_a, mu_b, z, omega_a_start, tol, max_iter);
}

SubordinationState solve_subordination(const EmpiricalMeasure& mu_a,
                                       const EmpiricalMeasure& mu_b,
                                       cplx z, double tol, int max_iter) {
    if (z.imag() == 0.0) throw ConfigInvalid("solve_subordination: Im z = 0");
    if (z.imag() < 0.0)
        return conjugate(solve_subordination(mu_a, mu_b, std::conj(z), tol, max_iter));
    // Cold start close to the real axis: continuation in eta, reusing omega_A
    // as the warm start at each rung.
    double eta = z.imag();
    if (eta < 1e-3) {
        double lead = 0.05;
        cplx warm = cplx(z.real(), lead);
        SubordinationState s = solve_upper(mu_a, mu_b, warm, warm, tol, max_iter);
        while (lead > eta) {
            lead = std::max(eta, lead / 8.0);
            s = solve_upper(mu_a, mu_b, cplx(z.real(), lead), s.omega_a, tol, max_iter);
        }
        return s;
    }
    return solve_upper(mu_a, mu_b, z, z, tol, max_iter);
}

SubordinationState derivatives(SubordinationState state,
                               const EmpiricalMeasure& mu_a,
                               const EmpiricalMeasure& mu_b) {
    cplx ma = stieltjes_transform(mu_a, state.omega_b);
    cplx mb = stieltjes_transform(mu_b, state.omega_a);
    cplx ma_p = stieltjes_derivative(mu_a, state.omega_b);
    cplx mb_p = stieltjes_derivative(mu_b, state.omega_a);
    cplx fa_p = ma_p / (ma * ma);
    cplx fb_p = mb_p / (mb * mb);
    state.delta = 1.0 - (fa_p - 1.0) * (fb_p - 1.0);
    if (std::abs(state.delta) < 1e-8)
        throw DegenerateJacobian("derivatives: |Delta| = " +
                                 std::to_string(std::abs(state.delta)) +
                                 " < 1e-8 at z = (" + std::to_string(state.z.real()) +
                                 ", " + std::to_string(state.z.imag()) + ")");
    cplx m2 = state.m_fc * state.m_fc;
    state.omega_a_prime = ma_p / (state.delta * m2);
    state.omega_b_prime = mb_p / (state.delta * m2);
    state.m_fc_prime = state.omega_b_prime * ma_p;
    state.has_derivatives = true;
    return state;
}

TwoPointState two_point(const EmpiricalMeasure& mu_a,
                        const EmpiricalMeasure& mu_b,
                        const SubordinationState& s1,
                        const SubordinationState& s2) {
    TwoPointState tp;
    tp.z1 = s1.z;
    tp.z2 = s2.z;
    cplx la = 0.0, lb = 0.0;
    for (std::size_t j = 0; j < mu_b.atoms.size(); ++j)
        la += mu_b.weights[j] /
              ((mu_b.atoms[j] - s1.omega_a) * (mu_b.atoms[j] - s2.omega_a));
    for (std::size_t j = 0; j < mu_a.atoms.size(); ++j)
        lb += mu_a.weights[j] /
              ((mu_a.atoms[j] - s1.omega_b) * (mu_a.atoms[j] - s2.omega_b));
    tp.l_a = la;
    tp.l_b = lb;
    cplx mm = s1.m_fc * s2.m_fc;
    tp.delta2 = 1.0 - (la / mm - 1.0) * (lb / mm - 1.0);
    tp.t_b = (s1.z - s1.omega_b) * s1.m_fc - (s2.z - s2.omega_b) * s2.m_fc;
    tp.t_a = (s1.z - s1.omega_a) * s1.m_fc - (s2.z - s2.omega_a) * s2.m_fc;
    return tp;
}

double density(const EmpiricalMeasure& mu_a, const EmpiricalMeasure& mu_b,
               double energy, double eta_probe) {
    if (!(eta_probe > 0.0)) throw ConfigInvalid("density: eta_probe must be > 0");
    SubordinationState s = solve_subordination(mu_a, mu_b, cplx(energy, eta_probe));
    return std::max(0.0, s.m_fc.imag() / kPi);
}

BulkScanResult bulk_scan(const EmpiricalMeasure& mu_a,
                         const EmpiricalMeasure& mu_b,
                         std::pair<double, double> interval,
                         double grid_step, double rho_min, double f_min,
                         double eta_probe) {
    if (!(grid_step > 0.0)) throw ConfigInvalid("bulk_scan: grid_step must be > 0");
    BulkScanResult out;
    cplx warm(interval.first, 1.0); // sentinel; replaced after first solve
    bool have_warm = false;
    bool in_window = false;
    double window_start = 0.0;
    double last_good = 0.0;
    for (double e = interval.first; e <= interval.second + 0.5 * grid_step;
         e += grid_step) {
        BulkPoint p;
        p.energy = e;
        bool good = false;
        try {
            cplx z(e, eta_probe);
            SubordinationState s =
                have_warm ? solve_subordination_warm(mu_a, mu_b, z, warm)
                          : solve_subordination(mu_a, mu_b, z);
            warm = s.omega_a;
            have_warm = true;
            p.rho = std::max(0.0, s.m_fc.imag() / kPi);
            p.abs_f_fc = std::abs(s.f_fc());
            // Delta is cheap to form directly; primes only where it is sane.
            cplx ma = stieltjes_transform(mu_a, s.omega_b);
            cplx mb = stieltjes_transform(mu_b, s.omega_a);
            cplx fa_p = stieltjes_derivative(mu_a, s.omega_b) / (ma * ma);
            cplx fb_p = stieltjes_derivative(mu_b, s.omega_a) / (mb * mb);
            cplx delta = 1.0 - (fa_p - 1.0) * (fb_p - 1.0);
            p.abs_delta = std::abs(delta);
            if (p.abs_delta >= 1e-8) {
                SubordinationState sd = derivatives(s, mu_a, mu_b);
                p.abs_m_fc_prime = std::abs(sd.m_fc_prime);
            }
            good = p.rho >= rho_min && p.abs_f_fc >= f_min && p.abs_delta >= 1e-4;
        } catch (const NonConvergence&) {
            have_warm = false;
        } catch (const DegenerateJacobian&) {
        }
        out.points.push_back(p);
        if (good && !in_window) {
            in_window = true;
            window_start = e;
        } else if (!good && in_window) {
            in_window = false;
            out.windows.emplace_back(window_start, last_good);
        }
        if (good) last_good = e;
    }
    if (in_window) out.windows.emplace_back(window_start, last_good);
    return out;
}

} // namespace freesum
