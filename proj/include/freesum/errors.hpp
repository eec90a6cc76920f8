#pragma once

#include <stdexcept>
#include <string>

namespace freesum {

// Base class for every error the toolkit raises on purpose.
struct FreesumError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fixed-point / Newton iteration for the subordination system ran out of
// iterations.  Usually means |Im z| is too small for the damping schedule.
struct NonConvergence : FreesumError {
    NonConvergence(int iterations_, double last_residual_, const std::string& what_)
        : FreesumError(what_), iterations(iterations_), last_residual(last_residual_) {}
    int iterations;
    double last_residual;
};

// |Delta(z)| below threshold: the 2x2 derivative system is singular, z is
// outside the stability region.
struct DegenerateJacobian : FreesumError {
    using FreesumError::FreesumError;
};

// Both kernel evaluation routes failed their tolerance checks.
struct DegenerateKernel : FreesumError {
    using FreesumError::FreesumError;
};

// Contour variance came out with a non-negligible imaginary part.
struct ImaginaryResidue : FreesumError {
    using FreesumError::FreesumError;
};

// The two closed forms of the universal variance disagree beyond tolerance.
struct FormulaMismatch : FreesumError {
    using FreesumError::FreesumError;
};

// |v_ii| too small: the phase theta_i of the Haar decomposition is ill-defined.
struct PhaseDegenerate : FreesumError {
    using FreesumError::FreesumError;
};

// LAPACK routine reported failure.
struct SolverError : FreesumError {
    using FreesumError::FreesumError;
};

// Experiment configuration failed validation.
struct ConfigInvalid : FreesumError {
    using FreesumError::FreesumError;
};

// Persisted summary has wrong/missing schema version.
struct SchemaError : FreesumError {
    using FreesumError::FreesumError;
};

struct TooFewSamples : FreesumError {
    using FreesumError::FreesumError;
};

} // namespace freesum
