#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "freesum/rmt.hpp"
#include "freesum/variance.hpp"

namespace freesum {

// A measure given either explicitly or as a family to be quantile-discretized
// with n atoms (n = matrix size).
struct MeasureSpec {
    std::optional<EmpiricalMeasure> explicit_measure;
    std::optional<DensityFamily> family;
    std::vector<double> params;

    EmpiricalMeasure resolve(std::size_t n) const;
    static MeasureSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct ExperimentConfig {
    MeasureSpec mu_a, mu_b;
    int n = 1000;
    int beta = 2;
    std::string g_name = "gaussian";
    std::vector<double> g_params;
    double e0 = 0.0;
    double eta0_exponent = 0.3; // c0; eta0 = N^{-c0}
    double tau = 0.05;
    int n_samples = 400;
    std::uint64_t master_seed = 1;
    std::vector<double> lambda_grid{0.5, 1.0, 2.0};
    bool diagnostics = false;
    int workers = 1;
    int contour_points = 4096;
    std::map<std::string, double> tolerances;
    // CLI-facing knobs for grid subcommands and diagnostics.
    std::optional<std::array<double, 3>> grid; // lo, hi, step (else auto)
    double eta_probe = 1e-7;
    double bias_eta = 0.05;
    std::vector<double> diag_etas{0.05, 0.1, 0.2};

    double eta0() const;
    double tolerance(const std::string& key, double fallback) const;

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    // Throws ConfigInvalid with an actionable message; checks ranges, the
    // tau <= c0/6 rule, that e0 lies in the scanned bulk, and the
    // |m'_fc(E0 + i eta0)| lower bound.
    void validate() const;
};

struct DiagnosticsSummary {
    double eta = 0.0;
    double psi = 0.0;
    double median_max_diag_error = 0.0;
    double median_trace_error = 0.0;
    double median_bg_trace_error = 0.0;
    double median_y_identity = 0.0;
    int n_seeds = 0;
};

struct ExperimentSummary {
    static constexpr int kSchemaVersion = 1;

    nlohmann::json config_echo;
    std::vector<double> per_sample_statistics; // centered L_k
    double centering = 0.0;
    double empirical_mean = 0.0;
    double se_mean = 0.0;
    bool has_variance = false;
    double empirical_variance = 0.0;
    double se_variance = 0.0;
    double predicted_variance = 0.0;
    double universal_variance_value = 0.0;
    bool v_f_below_one_observed = false; // observed V(f) < 1; no a-priori certificate
    bool has_ks = false;
    double ks_statistic = 0.0;
    double ks_p_value = 0.0;
    std::vector<double> lambdas;
    std::vector<cplx> empirical_char;
    std::vector<double> char_se;
    std::vector<cplx> predicted_char;
    std::vector<DiagnosticsSummary> diagnostics;
    std::string timestamp;  // stamped at first persist; excluded from
                            // determinism comparisons
    nlohmann::json extras;  // unknown fields preserved across load/persist

    nlohmann::json to_json() const;
    static ExperimentSummary from_json(const nlohmann::json& j);
};

// Uncentered linear statistic sum_i g((lambda_i - E0)/eta0).
double linear_statistic(const FreeSumSample& sample, const TestFunction& tf);

// Full Monte Carlo experiment; deterministic for fixed master_seed regardless
// of the worker count (per-sample seeds, index-ordered reduction).
ExperimentSummary run_experiment(const ExperimentConfig& cfg);

// One-sample Kolmogorov-Smirnov against N(0,1) on standardized values;
// asymptotic p-value by the 20-term KS series.  Throws TooFewSamples if the
// input has fewer than 20 entries.
std::pair<double, double> ks_normality(const std::vector<double>& standardized);

// Atomic JSON persistence (temp file + rename) with schema versioning.
void persist_summary(const ExperimentSummary& summary, const std::string& path);
ExperimentSummary load_summary(const std::string& path);

// Shared atomic-write helper for all artifact writers.
void atomic_write(const std::string& path, const std::string& content);

} // namespace freesum
