#include "freesum/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "freesum/errors.hpp"

namespace freesum {

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

} // namespace

EmpiricalMeasure MeasureSpec::resolve(std::size_t n) const {
    if (explicit_measure) return *explicit_measure;
    if (!family) throw ConfigInvalid("measure spec: neither explicit atoms nor family");
    return quantile_discretize(*family, params, n);
}

MeasureSpec MeasureSpec::from_json(const nlohmann::json& j) {
    MeasureSpec m;
    if (j.contains("family")) {
        m.family = density_family_from_name(j.at("family").get<std::string>());
        m.params = j.value("params", std::vector<double>{});
        return m;
    }
    if (j.contains("atoms")) {
        auto atoms = j.at("atoms").get<std::vector<double>>();
        if (j.contains("weights"))
            m.explicit_measure = EmpiricalMeasure::from_atoms(
                atoms, j.at("weights").get<std::vector<double>>());
        else
            m.explicit_measure = EmpiricalMeasure::from_atoms(atoms);
        return m;
    }
    throw ConfigInvalid("measure spec: expected {\"family\",\"params\"} or "
                        "{\"atoms\"[,\"weights\"]}");
}

nlohmann::json MeasureSpec::to_json() const {
    nlohmann::json j;
    if (explicit_measure) {
        explicit_measure->to_json(j);
    } else {
        switch (*family) {
        case DensityFamily::semicircle: j["family"] = "semicircle"; break;
        case DensityFamily::marchenko_pastur: j["family"] = "marchenko_pastur"; break;
        case DensityFamily::uniform_interval: j["family"] = "uniform_interval"; break;
        }
        j["params"] = params;
    }
    return j;
}

double ExperimentConfig::eta0() const {
    return std::pow(static_cast<double>(n), -eta0_exponent);
}

double ExperimentConfig::tolerance(const std::string& key, double fallback) const {
    auto it = tolerances.find(key);
    return it == tolerances.end() ? fallback : it->second;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "mu_a", "mu_b", "n", "beta", "test_function", "e0", "eta0_exponent",
        "tau", "n_samples", "master_seed", "lambda_grid", "diagnostics",
        "workers", "contour_points", "tolerances", "grid", "eta_probe",
        "bias_eta", "diag_etas"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) {
            std::string valid;
            for (const auto& k : known) valid += (valid.empty() ? "" : ", ") + k;
            throw ConfigInvalid("unknown config key '" + it.key() +
                                "'; valid keys: " + valid);
        }
    }
    ExperimentConfig c;
    c.mu_a = MeasureSpec::from_json(j.at("mu_a"));
    c.mu_b = MeasureSpec::from_json(j.at("mu_b"));
    c.n = j.value("n", c.n);
    c.beta = j.value("beta", c.beta);
    if (j.contains("test_function")) {
        const auto& g = j.at("test_function");
        c.g_name = g.value("name", c.g_name);
        c.g_params = g.value("params", c.g_params);
    }
    c.e0 = j.value("e0", c.e0);
    c.eta0_exponent = j.value("eta0_exponent", c.eta0_exponent);
    c.tau = j.value("tau", c.tau);
    c.n_samples = j.value("n_samples", c.n_samples);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.lambda_grid = j.value("lambda_grid", c.lambda_grid);
    c.diagnostics = j.value("diagnostics", c.diagnostics);
    c.workers = j.value("workers", c.workers);
    c.contour_points = j.value("contour_points", c.contour_points);
    if (j.contains("tolerances"))
        c.tolerances = j.at("tolerances").get<std::map<std::string, double>>();
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        c.grid = std::array<double, 3>{g.at("lo").get<double>(),
                                       g.at("hi").get<double>(),
                                       g.at("step").get<double>()};
        if (!((*c.grid)[2] > 0.0) || !((*c.grid)[1] > (*c.grid)[0]))
            throw ConfigInvalid("config field 'grid': requires lo < hi and step > 0");
    }
    c.eta_probe = j.value("eta_probe", c.eta_probe);
    if (!(c.eta_probe > 0.0))
        throw ConfigInvalid("config field 'eta_probe': must be > 0");
    c.bias_eta = j.value("bias_eta", c.bias_eta);
    if (!(c.bias_eta > 0.0))
        throw ConfigInvalid("config field 'bias_eta': must be > 0");
    c.diag_etas = j.value("diag_etas", c.diag_etas);
    return c;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["mu_a"] = mu_a.to_json();
    j["mu_b"] = mu_b.to_json();
    j["n"] = n;
    j["beta"] = beta;
    j["test_function"] = {{"name", g_name}, {"params", g_params}};
    j["e0"] = e0;
    j["eta0_exponent"] = eta0_exponent;
    j["tau"] = tau;
    j["n_samples"] = n_samples;
    j["master_seed"] = master_seed;
    j["lambda_grid"] = lambda_grid;
    j["diagnostics"] = diagnostics;
    // workers is a runtime execution knob, not part of the experiment
    // definition; omitting it keeps summaries identical across worker counts.
    j["contour_points"] = contour_points;
    j["tolerances"] = tolerances;
    if (grid)
        j["grid"] = {{"lo", (*grid)[0]}, {"hi", (*grid)[1]}, {"step", (*grid)[2]}};
    j["eta_probe"] = eta_probe;
    j["bias_eta"] = bias_eta;
    j["diag_etas"] = diag_etas;
    return j;
}

void ExperimentConfig::validate() const {
    if (n < 2) throw ConfigInvalid("config field 'n': matrix size must be >= 2");
    if (beta != 1 && beta != 2)
        throw ConfigInvalid("config field 'beta': must be 1 or 2");
    if (!(eta0_exponent > 0.0 && eta0_exponent < 1.0))
        throw ConfigInvalid("config field 'eta0_exponent': mesoscopic constraint "
                            "0 < c0 < 1 violated (eta0 = N^{-c0})");
    if (!(tau > 0.0) || tau > eta0_exponent / 6.0 + 1e-12)
        throw ConfigInvalid("config field 'tau': must satisfy 0 < tau <= c0/6 = " +
                            std::to_string(eta0_exponent / 6.0));
    if (n_samples < 1)
        throw ConfigInvalid("config field 'n_samples': must be >= 1");
    if (workers < 1) throw ConfigInvalid("config field 'workers': must be >= 1");
    if (contour_points < 16)
        throw ConfigInvalid("config field 'contour_points': must be >= 16");
    for (double l : lambda_grid)
        if (!std::isfinite(l))
            throw ConfigInvalid("config field 'lambda_grid': non-finite entry");

    EmpiricalMeasure a = mu_a.resolve(n), b = mu_b.resolve(n);
    double rho_min = tolerance("rho_min", 0.01);
    double f_min = tolerance("f_min", 0.1);
    // e0 must lie inside a scanned bulk window.
    double half = std::max(0.25, 4.0 * eta0());
    BulkScanResult scan = bulk_scan(a, b, {e0 - half, e0 + half}, half / 16.0,
                                    rho_min, f_min, 1e-5);
    bool inside = false;
    for (const auto& w : scan.windows)
        if (w.first <= e0 && e0 <= w.second) inside = true;
    if (!inside)
        throw ConfigInvalid("config field 'e0': not inside the regular bulk "
                            "(bulk_scan with rho_min = " + std::to_string(rho_min) +
                            ", f_min = " + std::to_string(f_min) + " found no window "
                            "containing E0 = " + std::to_string(e0) + ")");
    double m_prime_min = tolerance("m_prime_min", 0.01);
    SubordinationState s = derivatives(
        solve_subordination(a, b, cplx(e0, eta0())), a, b);
    if (std::abs(s.m_fc_prime) < m_prime_min)
        throw ConfigInvalid("config: |m'_fc(E0 + i eta0)| = " +
                            std::to_string(std::abs(s.m_fc_prime)) +
                            " below threshold " + std::to_string(m_prime_min));
}

double linear_statistic(const FreeSumSample& sample, const TestFunction& tf) {
    double s = 0.0;
    for (double lam : sample.eigenvalues) s += tf.g((lam - tf.e0) / tf.eta0);
    return s;
}

std::pair<double, double> ks_normality(const std::vector<double>& standardized) {
    const std::size_t m = standardized.size();
    if (m < 20)
        throw TooFewSamples("ks_normality: need at least 20 samples, got " +
                            std::to_string(m));
    std::vector<double> x = standardized;
    std::sort(x.begin(), x.end());
    double d = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double c = normal_cdf(x[i]);
        d = std::max(d, std::abs(c - static_cast<double>(i + 1) / m));
        d = std::max(d, std::abs(c - static_cast<double>(i) / m));
    }
    double sm = std::sqrt(static_cast<double>(m));
    double t = d * (sm + 0.12 + 0.11 / sm);
    double p = 0.0;
    for (int k = 1; k <= 20; ++k)
        p += 2.0 * (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * t * t);
    p = std::min(1.0, std::max(0.0, p));
    return {d, p};
}

ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const EmpiricalMeasure a = cfg.mu_a.resolve(cfg.n);
    const EmpiricalMeasure b = cfg.mu_b.resolve(cfg.n);
    const TestFunction tf =
        make_test_function(cfg.g_name, cfg.g_params, cfg.e0, cfg.eta0());

    ExperimentSummary out;
    out.config_echo = cfg.to_json();
    out.universal_variance_value = universal_variance(tf, cfg.beta);
    ContourSpec cspec = make_contour_spec(tf, cfg.n, cfg.tau, cfg.contour_points);
    out.predicted_variance = contour_variance(tf, cspec, a, b, cfg.beta);
    out.v_f_below_one_observed = out.predicted_variance < 1.0;
    out.centering = expected_statistic(tf, a, b, cfg.n);

    // Monte Carlo over samples; per-sample seeds make the result independent
    // of worker scheduling, and the reduction below runs in index order.
    const int m = cfg.n_samples;
    std::vector<double> raw(m);
    {
        std::atomic<int> next{0};
        std::mutex err_mutex;
        std::string first_error;
        auto worker = [&]() {
            for (;;) {
                int k = next.fetch_add(1);
                if (k >= m) return;
                try {
                    FreeSumSample s = build_sample(
                        a.atoms, b.atoms, cfg.beta,
                        mix_seed(cfg.master_seed, static_cast<std::uint64_t>(k)));
                    raw[k] = linear_statistic(s, tf);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (first_error.empty())
                        first_error = "sample " + std::to_string(k) + ": " + e.what();
                    next.store(m);
                    return;
                }
            }
        };
        int n_threads = std::min(cfg.workers, m);
        if (n_threads <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
        if (!first_error.empty()) throw FreesumError(first_error);
    }

    out.per_sample_statistics.resize(m);
    for (int k = 0; k < m; ++k) out.per_sample_statistics[k] = raw[k] - out.centering;

    double mean = 0.0;
    for (double v : out.per_sample_statistics) mean += v;
    mean /= m;
    out.empirical_mean = mean;
    if (m >= 2) {
        double ss = 0.0;
        for (double v : out.per_sample_statistics) ss += (v - mean) * (v - mean);
        double var = ss / (m - 1);
        out.has_variance = true;
        out.empirical_variance = var;
        out.se_variance = var * std::sqrt(2.0 / (m - 1));
        out.se_mean = std::sqrt(var / m);
    }

    out.lambdas = cfg.lambda_grid;
    out.empirical_char.resize(out.lambdas.size());
    out.char_se.resize(out.lambdas.size());
    out.predicted_char.resize(out.lambdas.size());
    for (std::size_t li = 0; li < out.lambdas.size(); ++li) {
        double lam = out.lambdas[li];
        cplx acc = 0.0;
        for (double v : out.per_sample_statistics)
            acc += std::exp(cplx(0.0, lam * (v - mean)));
        cplx phat = acc / static_cast<double>(m);
        double ss = 0.0;
        for (double v : out.per_sample_statistics)
            ss += std::norm(std::exp(cplx(0.0, lam * (v - mean))) - phat);
        out.empirical_char[li] = phat;
        out.char_se[li] = m >= 2 ? std::sqrt(ss / (m - 1) / m) : 0.0;
        out.predicted_char[li] =
            predicted_char_function(std::max(0.0, out.predicted_variance), lam);
    }

    if (m >= 20 && out.has_variance && out.empirical_variance > 0.0) {
        std::vector<double> standardized(m);
        double sd = std::sqrt(out.empirical_variance);
        for (int k = 0; k < m; ++k)
            standardized[k] = (out.per_sample_statistics[k] - mean) / sd;
        auto [d, p] = ks_normality(standardized);
        out.ks_statistic = d;
        out.ks_p_value = p;
        out.has_ks = true;
    }

    if (cfg.diagnostics) {
        int n_diag = static_cast<int>(cfg.tolerance("diag_seeds", 10));
        double eta = cfg.tolerance("diag_eta", 0.1);
        cplx z(cfg.e0, eta);
        SubordinationState st = derivatives(solve_subordination(a, b, z), a, b);
        DiagnosticsSummary ds;
        ds.eta = eta;
        ds.psi = 1.0 / std::sqrt(cfg.n * eta);
        ds.n_seeds = n_diag;
        std::vector<double> v1, v2, v3, v4;
        for (int k = 0; k < n_diag; ++k) {
            FreeSumSample s = build_sample(
                a.atoms, b.atoms, cfg.beta,
                mix_seed(cfg.master_seed ^ 0xD1A6ull, static_cast<std::uint64_t>(k)),
                true);
            LocalLawReport rep = green_diagnostics(s, st);
            v1.push_back(rep.max_diag_error);
            v2.push_back(rep.trace_error);
            v3.push_back(rep.bg_trace_error);
            v4.push_back(rep.y_identity);
        }
        ds.median_max_diag_error = median_of(v1);
        ds.median_trace_error = median_of(v2);
        ds.median_bg_trace_error = median_of(v3);
        ds.median_y_identity = median_of(v4);
        out.diagnostics.push_back(ds);
    }
    return out;
}

namespace {

nlohmann::json cplx_to_json(cplx c) { return nlohmann::json{c.real(), c.imag()}; }
cplx cplx_from_json(const nlohmann::json& j) {
    return cplx(j.at(0).get<double>(), j.at(1).get<double>());
}

const std::set<std::string>& summary_known_keys() {
    static const std::set<std::string> keys = {
        "schema_version", "config", "per_sample_statistics", "centering",
        "empirical_mean", "se_mean", "has_variance", "empirical_variance",
        "se_variance", "predicted_variance", "universal_variance",
        "v_f_below_one_observed", "has_ks", "ks_statistic", "ks_p_value",
        "lambdas", "empirical_char", "char_se", "predicted_char",
        "diagnostics", "metadata"};
    return keys;
}

} // namespace

nlohmann::json ExperimentSummary::to_json() const {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["config"] = config_echo;
    j["per_sample_statistics"] = per_sample_statistics;
    j["centering"] = centering;
    j["empirical_mean"] = empirical_mean;
    j["se_mean"] = se_mean;
    j["has_variance"] = has_variance;
    j["empirical_variance"] = empirical_variance;
    j["se_variance"] = se_variance;
    j["predicted_variance"] = predicted_variance;
    j["universal_variance"] = universal_variance_value;
    j["v_f_below_one_observed"] = v_f_below_one_observed;
    j["has_ks"] = has_ks;
    j["ks_statistic"] = ks_statistic;
    j["ks_p_value"] = ks_p_value;
    j["lambdas"] = lambdas;
    nlohmann::json ec = nlohmann::json::array(), pc = nlohmann::json::array();
    for (cplx c : empirical_char) ec.push_back(cplx_to_json(c));
    for (cplx c : predicted_char) pc.push_back(cplx_to_json(c));
    j["empirical_char"] = ec;
    j["char_se"] = char_se;
    j["predicted_char"] = pc;
    nlohmann::json diag = nlohmann::json::array();
    for (const auto& d : diagnostics)
        diag.push_back({{"eta", d.eta},
                        {"psi", d.psi},
                        {"median_max_diag_error", d.median_max_diag_error},
                        {"median_trace_error", d.median_trace_error},
                        {"median_bg_trace_error", d.median_bg_trace_error},
                        {"median_y_identity", d.median_y_identity},
                        {"n_seeds", d.n_seeds}});
    j["diagnostics"] = diag;
    if (!timestamp.empty()) j["metadata"] = {{"timestamp", timestamp}};
    for (auto it = extras.begin(); it != extras.end(); ++it)
        if (!j.contains(it.key())) j[it.key()] = it.value();
    return j;
}

ExperimentSummary ExperimentSummary::from_json(const nlohmann::json& j) {
    if (!j.contains("schema_version"))
        throw SchemaError("summary: missing schema_version field");
    if (j.at("schema_version").get<int>() != kSchemaVersion)
        throw SchemaError("summary: unsupported schema_version " +
                          j.at("schema_version").dump());
    ExperimentSummary s;
    s.config_echo = j.value("config", nlohmann::json::object());
    s.per_sample_statistics =
        j.value("per_sample_statistics", std::vector<double>{});
    s.centering = j.value("centering", 0.0);
    s.empirical_mean = j.value("empirical_mean", 0.0);
    s.se_mean = j.value("se_mean", 0.0);
    s.has_variance = j.value("has_variance", false);
    s.empirical_variance = j.value("empirical_variance", 0.0);
    s.se_variance = j.value("se_variance", 0.0);
    s.predicted_variance = j.value("predicted_variance", 0.0);
    s.universal_variance_value = j.value("universal_variance", 0.0);
    s.v_f_below_one_observed = j.value("v_f_below_one_observed", false);
    s.has_ks = j.value("has_ks", false);
    s.ks_statistic = j.value("ks_statistic", 0.0);
    s.ks_p_value = j.value("ks_p_value", 0.0);
    s.lambdas = j.value("lambdas", std::vector<double>{});
    if (j.contains("empirical_char"))
        for (const auto& c : j.at("empirical_char"))
            s.empirical_char.push_back(cplx_from_json(c));
    s.char_se = j.value("char_se", std::vector<double>{});
    if (j.contains("predicted_char"))
        for (const auto& c : j.at("predicted_char"))
            s.predicted_char.push_back(cplx_from_json(c));
    if (j.contains("diagnostics"))
        for (const auto& d : j.at("diagnostics")) {
            DiagnosticsSummary ds;
            ds.eta = d.value("eta", 0.0);
            ds.psi = d.value("psi", 0.0);
            ds.median_max_diag_error = d.value("median_max_diag_error", 0.0);
            ds.median_trace_error = d.value("median_trace_error", 0.0);
            ds.median_bg_trace_error = d.value("median_bg_trace_error", 0.0);
            ds.median_y_identity = d.value("median_y_identity", 0.0);
            ds.n_seeds = d.value("n_seeds", 0);
            s.diagnostics.push_back(ds);
        }
    if (j.contains("metadata"))
        s.timestamp = j.at("metadata").value("timestamp", std::string{});
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!summary_known_keys().count(it.key())) s.extras[it.key()] = it.value();
    return s;
}

void atomic_write(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw FreesumError("cannot open " + tmp + " for writing");
        f << content;
        if (!f.good()) throw FreesumError("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw FreesumError("rename " + tmp + " -> " + path + " failed");
}

void persist_summary(const ExperimentSummary& summary, const std::string& path) {
    ExperimentSummary copy = summary;
    if (copy.timestamp.empty()) {
        std::time_t t = std::time(nullptr);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
        copy.timestamp = buf;
    }
    atomic_write(path, copy.to_json().dump(2) + "\n");
}

ExperimentSummary load_summary(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FreesumError("cannot open summary " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("summary " + path + ": invalid JSON: " + e.what());
    }
    return ExperimentSummary::from_json(j);
}

} // namespace freesum
