// freesum CLI: free additive convolution, mesoscopic-CLT predictions and
// Monte Carlo verification for H = A + UBU* / A + OBO^T.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "freesum/errors.hpp"
#include "freesum/harness.hpp"
#include "freesum/rmt.hpp"
#include "freesum/variance.hpp"

namespace fs = std::filesystem;
using namespace freesum;

namespace {

struct Options {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string output_dir = "out";
    bool force = false;
    int workers = 0; // 0 = keep config value
    bool verbose = false;
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void apply_override(nlohmann::json& doc, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
        throw ConfigInvalid("--set expects KEY=VALUE, got '" + kv + "'");
    std::string key = kv.substr(0, eq), raw = kv.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
        value = raw; // plain string
    }
    nlohmann::json* node = &doc;
    std::stringstream ss(key);
    std::string part, prev;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ConfigInvalid("--set: empty key");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i)
        node = &(*node)[parts[i]];
    (*node)[parts.back()] = value;
}

nlohmann::json load_config(const Options& opt) {
    if (opt.config_path.empty())
        throw ConfigInvalid("missing --config PATH");
    std::ifstream f(opt.config_path);
    if (!f)
        throw ConfigInvalid("config file not found: " + opt.config_path);
    nlohmann::json doc;
    try {
        f >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigInvalid("config " + opt.config_path + ": invalid JSON: " +
                            e.what());
    }
    for (const auto& kv : opt.overrides) apply_override(doc, kv);
    return doc;
}

ExperimentConfig parse_config(const Options& opt) {
    ExperimentConfig cfg = ExperimentConfig::from_json(load_config(opt));
    if (opt.workers > 0) cfg.workers = opt.workers;
    return cfg;
}

std::string out_path(const Options& opt, const std::string& name) {
    fs::create_directories(opt.output_dir);
    fs::path p = fs::path(opt.output_dir) / name;
    if (fs::exists(p) && !opt.force)
        throw ConfigInvalid("refusing to overwrite " + p.string() +
                            " (use --force)");
    return p.string();
}

std::array<double, 3> grid_or_default(const ExperimentConfig& cfg,
                                      const EmpiricalMeasure& a,
                                      const EmpiricalMeasure& b) {
    if (cfg.grid) return *cfg.grid;
    double lo = a.min_atom() + b.min_atom() - 1.0;
    double hi = a.max_atom() + b.max_atom() + 1.0;
    return {lo, hi, (hi - lo) / 2000.0};
}

int cmd_convolve(const Options& opt) {
    ExperimentConfig cfg = parse_config(opt);
    EmpiricalMeasure a = cfg.mu_a.resolve(cfg.n), b = cfg.mu_b.resolve(cfg.n);
    auto [lo, hi, step] = grid_or_default(cfg, a, b);
    std::ostringstream csv;
    csv << "E,eta,re_omega_a,im_omega_a,re_omega_b,im_omega_b,"
           "re_m_fc,im_m_fc,re_delta,im_delta,density\n";
    cplx warm;
    bool have_warm = false;
    for (double e = lo; e <= hi + 0.5 * step; e += step) {
        cplx z(e, cfg.eta_probe);
        SubordinationState s;
        try {
            s = have_warm ? solve_subordination_warm(a, b, z, warm)
                          : solve_subordination(a, b, z);
        } catch (const NonConvergence&) {
            have_warm = false;
            continue;
        }
        warm = s.omega_a;
        have_warm = true;
        cplx ma = stieltjes_transform(a, s.omega_b);
        cplx mb = stieltjes_transform(b, s.omega_a);
        cplx fa_p = stieltjes_derivative(a, s.omega_b) / (ma * ma);
        cplx fb_p = stieltjes_derivative(b, s.omega_a) / (mb * mb);
        cplx delta = 1.0 - (fa_p - 1.0) * (fb_p - 1.0);
        double rho = std::max(0.0, s.m_fc.imag() / 3.14159265358979323846);
        csv << num(e) << ',' << num(cfg.eta_probe) << ','
            << num(s.omega_a.real()) << ',' << num(s.omega_a.imag()) << ','
            << num(s.omega_b.real()) << ',' << num(s.omega_b.imag()) << ','
            << num(s.m_fc.real()) << ',' << num(s.m_fc.imag()) << ','
            << num(delta.real()) << ',' << num(delta.imag()) << ','
            << num(rho) << '\n';
    }
    std::string path = out_path(opt, "density.csv");
    atomic_write(path, csv.str());
    if (opt.verbose) std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_bulk_scan(const Options& opt) {
    ExperimentConfig cfg = parse_config(opt);
    EmpiricalMeasure a = cfg.mu_a.resolve(cfg.n), b = cfg.mu_b.resolve(cfg.n);
    auto [lo, hi, step] = grid_or_default(cfg, a, b);
    double rho_min = cfg.tolerance("rho_min", 0.01);
    double f_min = cfg.tolerance("f_min", 0.1);
    BulkScanResult scan =
        bulk_scan(a, b, {lo, hi}, step, rho_min, f_min, cfg.eta_probe);
    std::ostringstream csv;
    csv << "E,rho,abs_f_fc,abs_delta,abs_m_fc_prime\n";
    for (const auto& p : scan.points)
        csv << num(p.energy) << ',' << num(p.rho) << ',' << num(p.abs_f_fc) << ','
            << num(p.abs_delta) << ',' << num(p.abs_m_fc_prime) << '\n';
    atomic_write(out_path(opt, "bulk_scan.csv"), csv.str());
    nlohmann::json j;
    j["rho_min"] = rho_min;
    j["f_min"] = f_min;
    j["windows"] = nlohmann::json::array();
    for (const auto& w : scan.windows)
        j["windows"].push_back({{"lo", w.first}, {"hi", w.second}});
    atomic_write(out_path(opt, "bulk_scan.json"), j.dump(2) + "\n");
    std::cout << "bulk windows: " << scan.windows.size() << "\n";
    for (const auto& w : scan.windows)
        std::cout << "  [" << w.first << ", " << w.second << "]\n";
    return 0;
}

int cmd_predict_variance(const Options& opt) {
    ExperimentConfig cfg = parse_config(opt);
    EmpiricalMeasure a = cfg.mu_a.resolve(cfg.n), b = cfg.mu_b.resolve(cfg.n);
    TestFunction tf = make_test_function(cfg.g_name, cfg.g_params, cfg.e0, cfg.eta0());
    ContourSpec spec = make_contour_spec(tf, cfg.n, cfg.tau, cfg.contour_points);
    double v = contour_variance(tf, spec, a, b, cfg.beta);
    double u = universal_variance(tf, cfg.beta);
    std::cout << "V(f)      = " << num(v) << "\n";
    std::cout << "universal = " << num(u) << "\n";
    nlohmann::json j;
    j["predicted_variance"] = v;
    j["universal_variance"] = u;
    j["beta"] = cfg.beta;
    j["n"] = cfg.n;
    j["e0"] = cfg.e0;
    j["eta0"] = cfg.eta0();
    j["tau"] = cfg.tau;
    j["v_f_below_one_observed"] = v < 1.0;
    atomic_write(out_path(opt, "variance.json"), j.dump(2) + "\n");
    return 0;
}

int cmd_predict_bias(const Options& opt) {
    ExperimentConfig cfg = parse_config(opt);
    EmpiricalMeasure a = cfg.mu_a.resolve(cfg.n), b = cfg.mu_b.resolve(cfg.n);
    auto [lo, hi, step] = cfg.grid ? *cfg.grid
                                   : std::array<double, 3>{cfg.e0 - 1.0,
                                                           cfg.e0 + 1.0, 0.01};
    std::ostringstream csv;
    csv << "E,re_b,im_b\n";
    cplx warm;
    bool have_warm = false;
    for (double e = lo; e <= hi + 0.5 * step; e += step) {
        cplx z(e, cfg.bias_eta);
        try {
            SubordinationState s =
                have_warm ? solve_subordination_warm(a, b, z, warm)
                          : solve_subordination(a, b, z);
            warm = s.omega_a;
            have_warm = true;
            cplx bias = bias_b(derivatives(s, a, b), cfg.beta, a, b);
            csv << num(e) << ',' << num(bias.real()) << ',' << num(bias.imag())
                << '\n';
        } catch (const NonConvergence&) {
            have_warm = false;
        } catch (const DegenerateJacobian&) {
        }
    }
    atomic_write(out_path(opt, "bias.csv"), csv.str());
    return 0;
}

int cmd_simulate(const Options& opt) {
    ExperimentConfig cfg = parse_config(opt);
    ExperimentSummary summary = run_experiment(cfg);
    persist_summary(summary, out_path(opt, "summary.json"));
    std::ostringstream csv;
    csv << "sample_index,statistic\n";
    for (std::size_t k = 0; k < summary.per_sample_statistics.size(); ++k)
        csv << k << ',' << num(summary.per_sample_statistics[k]) << '\n';
    atomic_write(out_path(opt, "per_sample.csv"), csv.str());
    int dump = static_cast<int>(cfg.tolerance("dump_spectra", 0.0));
    for (int k = 0; k < dump && k < cfg.n_samples; ++k) {
        EmpiricalMeasure a = cfg.mu_a.resolve(cfg.n), b = cfg.mu_b.resolve(cfg.n);
        FreeSumSample s = build_sample(a.atoms, b.atoms, cfg.beta,
                                       mix_seed(cfg.master_seed, k));
        char name[32];
        std::snprintf(name, sizeof name, "spectrum_%04d", k);
        persist_eigenvalues(s, (fs::path(opt.output_dir) / name).string());
    }
    std::cout << "samples   = " << summary.per_sample_statistics.size() << "\n"
              << "mean      = " << num(summary.empirical_mean) << " +- "
              << num(summary.se_mean) << "\n"
              << "variance  = " << num(summary.empirical_variance) << " +- "
              << num(summary.se_variance) << "\n"
              << "V(f)      = " << num(summary.predicted_variance) << "\n"
              << "universal = " << num(summary.universal_variance_value) << "\n";
    if (summary.has_ks)
        std::cout << "KS        = " << num(summary.ks_statistic)
                  << " (p ~= " << num(summary.ks_p_value) << ", approximate)\n";
    return 0;
}

int cmd_diagnose(const Options& opt) {
    ExperimentConfig cfg = parse_config(opt);
    EmpiricalMeasure a = cfg.mu_a.resolve(cfg.n), b = cfg.mu_b.resolve(cfg.n);
    int n_seeds = static_cast<int>(cfg.tolerance("diag_seeds", 50.0));
    std::ostringstream csv;
    csv << "eta,seed_index,psi,max_diag_error,trace_error,bg_trace_error,"
           "y_identity,two_point_error\n";
    nlohmann::json medians = nlohmann::json::array();
    for (double eta : cfg.diag_etas) {
        cplx z(cfg.e0, eta);
        SubordinationState s1 = derivatives(solve_subordination(a, b, z), a, b);
        SubordinationState s2 = derivatives(solve_subordination(a, b, std::conj(z)), a, b);
        TwoPointState tp = two_point(a, b, s1, s2);
        std::vector<double> m1, m2, m3, m4, m5;
        for (int k = 0; k < n_seeds; ++k) {
            FreeSumSample sample =
                build_sample(a.atoms, b.atoms, cfg.beta,
                             mix_seed(cfg.master_seed, static_cast<std::uint64_t>(k)),
                             true);
            LocalLawReport rep = green_diagnostics(sample, s1);
            double tp_err = two_point_diagnostic(sample, s1, s2, tp);
            csv << num(eta) << ',' << k << ',' << num(rep.psi) << ','
                << num(rep.max_diag_error) << ',' << num(rep.trace_error) << ','
                << num(rep.bg_trace_error) << ',' << num(rep.y_identity) << ','
                << num(tp_err) << '\n';
            m1.push_back(rep.max_diag_error);
            m2.push_back(rep.trace_error);
            m3.push_back(rep.bg_trace_error);
            m4.push_back(rep.y_identity);
            m5.push_back(tp_err);
        }
        auto med = [](std::vector<double> v) {
            std::sort(v.begin(), v.end());
            std::size_t m = v.size() / 2;
            return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
        };
        medians.push_back({{"eta", eta},
                           {"psi", 1.0 / std::sqrt(cfg.n * eta)},
                           {"median_max_diag_error", med(m1)},
                           {"median_trace_error", med(m2)},
                           {"median_bg_trace_error", med(m3)},
                           {"median_y_identity", med(m4)},
                           {"median_two_point_error", med(m5)},
                           {"xi_sum", xi1_control(z, std::conj(z), cfg.n) +
                                          xi2_control(z, std::conj(z), cfg.n)},
                           {"n_seeds", n_seeds}});
    }
    atomic_write(out_path(opt, "diagnose.csv"), csv.str());
    atomic_write(out_path(opt, "diagnose.json"), medians.dump(2) + "\n");
    std::cout << medians.dump(2) << "\n";
    return 0;
}

// Inverse standard normal CDF (Acklam's rational approximation), used only
// for the QQ export.
double inv_normal_cdf(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double pl = 0.02425;
    if (p < pl) {
        double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - pl) return -inv_normal_cdf(1.0 - p);
    double q = p - 0.5, r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

int cmd_report(const Options& opt) {
    fs::path p = fs::path(opt.output_dir) / "summary.json";
    ExperimentSummary s = load_summary(p.string());
    std::cout << "summary: " << p.string() << "\n"
              << "samples   = " << s.per_sample_statistics.size() << "\n"
              << "centering = " << num(s.centering) << "\n"
              << "mean      = " << num(s.empirical_mean) << " +- " << num(s.se_mean)
              << "\n";
    if (s.has_variance)
        std::cout << "variance  = " << num(s.empirical_variance) << " +- "
                  << num(s.se_variance) << "\n";
    std::cout << "V(f)      = " << num(s.predicted_variance) << "\n"
              << "universal = " << num(s.universal_variance_value) << "\n";
    if (s.has_ks)
        std::cout << "KS        = " << num(s.ks_statistic)
                  << " (p ~= " << num(s.ks_p_value) << ", approximate)\n";
    for (std::size_t i = 0; i < s.lambdas.size(); ++i)
        std::cout << "phi(" << s.lambdas[i] << ")  = |" << num(std::abs(s.empirical_char[i]))
                  << "| vs predicted " << num(s.predicted_char[i].real()) << "\n";
    for (const auto& d : s.diagnostics)
        std::cout << "diag eta=" << d.eta << ": max_diag "
                  << num(d.median_max_diag_error) << " (psi " << num(d.psi)
                  << "), trace " << num(d.median_trace_error) << "\n";

    const auto& v = s.per_sample_statistics;
    if (v.size() >= 2) {
        double lo = *std::min_element(v.begin(), v.end());
        double hi = *std::max_element(v.begin(), v.end());
        int bins = 40;
        double w = (hi - lo) / bins;
        std::vector<int> count(bins, 0);
        for (double x : v) {
            int i = std::min(bins - 1, static_cast<int>((x - lo) / w));
            count[std::max(0, i)]++;
        }
        std::ostringstream hist;
        hist << "bin_lo,bin_hi,count\n";
        for (int i = 0; i < bins; ++i)
            hist << num(lo + i * w) << ',' << num(lo + (i + 1) * w) << ','
                 << count[i] << '\n';
        atomic_write(out_path(opt, "histogram.csv"), hist.str());

        std::vector<double> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        double mean = s.empirical_mean;
        double sd = s.has_variance ? std::sqrt(s.empirical_variance) : 1.0;
        std::ostringstream qq;
        qq << "theoretical,empirical\n";
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            double q = inv_normal_cdf((i + 0.5) / sorted.size());
            qq << num(q) << ',' << num((sorted[i] - mean) / sd) << '\n';
        }
        atomic_write(out_path(opt, "qq.csv"), qq.str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"free additive convolution and mesoscopic CLT toolkit"};
    app.require_subcommand(1);
    Options opt;
    app.add_option("--config", opt.config_path, "JSON config file")
        ->configurable(false);
    app.add_option("--set", opt.overrides, "KEY=VALUE config override (repeatable)");
    app.add_option("--output", opt.output_dir, "output directory");
    app.add_flag("--force", opt.force, "overwrite existing artifacts");
    app.add_option("--workers", opt.workers, "worker thread count");
    app.add_flag("--verbose", opt.verbose, "chatty progress output");
    app.fallthrough();

    auto* convolve = app.add_subcommand("convolve", "density / subordination grid");
    auto* scan = app.add_subcommand("bulk-scan", "locate the regular bulk");
    auto* pvar = app.add_subcommand("predict-variance", "V(f) and universal variance");
    auto* pbias = app.add_subcommand("predict-bias", "bias curve b(z)");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo CLT experiment");
    auto* diagnose = app.add_subcommand("diagnose", "Green-function local laws");
    auto* report = app.add_subcommand("report", "render a persisted summary");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (convolve->parsed()) return cmd_convolve(opt);
        if (scan->parsed()) return cmd_bulk_scan(opt);
        if (pvar->parsed()) return cmd_predict_variance(opt);
        if (pbias->parsed()) return cmd_predict_bias(opt);
        if (simulate->parsed()) return cmd_simulate(opt);
        if (diagnose->parsed()) return cmd_diagnose(opt);
        if (report->parsed()) return cmd_report(opt);
        return 2;
    } catch (const ConfigInvalid& e) {
        std::cerr << nlohmann::json{{"error", "config"}, {"message", e.what()}}.dump()
                  << "\n";
        return 2;
    } catch (const SchemaError& e) {
        std::cerr << nlohmann::json{{"error", "schema"}, {"message", e.what()}}.dump()
                  << "\n";
        return 2;
    } catch (const FreesumError& e) {
        std::cerr << nlohmann::json{{"error", "numerical"}, {"message", e.what()}}.dump()
                  << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump()
                  << "\n";
        return 3;
    }
}
