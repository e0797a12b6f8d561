#ifndef GRAVLAB_EXPERIMENTS_HPP
#define GRAVLAB_EXPERIMENTS_HPP

#include <atomic>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "bayes.hpp"
#include "dynamics.hpp"
#include "error_model.hpp"
#include "fisher.hpp"
#include "haar.hpp"

namespace gravlab {

constexpr const char* kVersion = "0.1.0";

enum class Mode { ScalingScan, ModeScan, PulseFmin, EchoInfer, HaarValidate };

inline Mode mode_from_string(const std::string& s) {
    if (s == "scaling-scan") return Mode::ScalingScan;
    if (s == "mode-scan") return Mode::ModeScan;
    if (s == "pulse-fmin") return Mode::PulseFmin;
    if (s == "echo-infer") return Mode::EchoInfer;
    if (s == "haar-validate") return Mode::HaarValidate;
    throw std::invalid_argument("unknown mode: " + s);
}

inline std::string mode_to_string(Mode m) {
    switch (m) {
        case Mode::ScalingScan: return "scaling-scan";
        case Mode::ModeScan: return "mode-scan";
        case Mode::PulseFmin: return "pulse-fmin";
        case Mode::EchoInfer: return "echo-infer";
        case Mode::HaarValidate: return "haar-validate";
    }
    return "?";
}

// Everything a scenario run needs; unknown JSON keys are rejected so typos
// in config files surface immediately.
struct ScenarioConfig {
    Mode mode = Mode::ScalingScan;
    std::vector<long> atom_counts;        // N list (scan points)
    std::vector<int> mode_counts;         // L list
    std::vector<int> channel_counts;      // ell list (mode-scan); else first entry
    double sigma_phi = 0.01;
    std::vector<double> sigma_err;        // per channel; single value broadcasts
    int pulse_pairs = 10;
    double total_time = 40.0;
    int trials = 20;
    int fdraws = 20;
    std::string aggregate = "median";     // or "mean"
    double min_gram_eig = 0.0;            // conditioning threshold, 0 disables
    int samples = 2000;                   // haar-validate
    long fixed_atom_count = 10000;        // mode-scan N
    int datapoints = 100;                 // nu
    double phi_true = 0.01;
    int grid_points = 512;
    int quad_nodes = 9;
    std::uint64_t master_seed = 12345;
    std::string out_path;
    int threads = 1;
    ExpmOptions expm;
    std::vector<double> slope_window;     // [nmin, nmax] for log-log fits
    std::string profiles_csv;             // optional explicit error profiles

    int channel_count() const { return channel_counts.empty() ? 0 : channel_counts.front(); }

    VectorXd sigmas_for(int ell) const {
        VectorXd s(ell);
        for (int i = 0; i < ell; ++i) {
            if (sigma_err.empty()) s[i] = 0.01;
            else if (sigma_err.size() == 1) s[i] = sigma_err.front();
            else s[i] = sigma_err.at(i);
        }
        return s;
    }
};

inline void to_json(nlohmann::json& j, const ScenarioConfig& c) {
    j = nlohmann::json{{"mode", mode_to_string(c.mode)},
                       {"N", c.atom_counts},
                       {"L", c.mode_counts},
                       {"ell", c.channel_counts},
                       {"sigma_phi", c.sigma_phi},
                       {"sigma_err", c.sigma_err},
                       {"pulses", {{"n", c.pulse_pairs}, {"T", c.total_time}}},
                       {"trials", c.trials},
                       {"fdraws", c.fdraws},
                       {"aggregate", c.aggregate},
                       {"min_gram_eig", c.min_gram_eig},
                       {"samples", c.samples},
                       {"fixed_N", c.fixed_atom_count},
                       {"nu", c.datapoints},
                       {"phi_true", c.phi_true},
                       {"grid_points", c.grid_points},
                       {"quad_nodes", c.quad_nodes},
                       {"seed", c.master_seed},
                       {"out", c.out_path},
                       {"threads", c.threads},
                       {"expm", {{"dense_threshold", c.expm.dense_threshold}, {"tol", c.expm.tol}}},
                       {"slope_window", c.slope_window},
                       {"profiles_csv", c.profiles_csv}};
}

inline void from_json(const nlohmann::json& j, ScenarioConfig& c) {
    static const std::vector<std::string> known = {
        "mode", "N", "L", "ell", "sigma_phi", "sigma_err", "pulses", "trials",
        "fdraws", "aggregate", "min_gram_eig", "samples", "fixed_N", "nu",
        "phi_true", "grid_points", "quad_nodes", "seed", "out", "threads",
        "expm", "slope_window", "profiles_csv"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw std::invalid_argument("config: unknown key '" + it.key() + "'");

    if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("N")) {
        c.atom_counts.clear();
        const auto& n = j.at("N");
        if (n.is_array()) {
            for (const auto& v : n) c.atom_counts.push_back(v.get<long>());
        } else if (n.is_object()) {
            const long lo = n.at("min").get<long>();
            const long hi = n.at("max").get<long>();
            const int pts = n.at("points").get<int>();
            const bool logspace = n.value("log", true);
            for (int i = 0; i < pts; ++i) {
                double t = pts == 1 ? 0.0 : static_cast<double>(i) / (pts - 1);
                double v = logspace ? std::exp(std::log(double(lo)) + t * (std::log(double(hi)) - std::log(double(lo))))
                                    : lo + t * (hi - lo);
                long nv = std::lround(v);
                if (c.atom_counts.empty() || nv != c.atom_counts.back()) c.atom_counts.push_back(nv);
            }
        } else {
            c.atom_counts.push_back(n.get<long>());
        }
    }
    if (j.contains("L")) {
        c.mode_counts.clear();
        if (j.at("L").is_array())
            for (const auto& v : j.at("L")) c.mode_counts.push_back(v.get<int>());
        else
            c.mode_counts.push_back(j.at("L").get<int>());
    }
    if (j.contains("ell")) {
        c.channel_counts.clear();
        if (j.at("ell").is_array())
            for (const auto& v : j.at("ell")) c.channel_counts.push_back(v.get<int>());
        else
            c.channel_counts.push_back(j.at("ell").get<int>());
    }
    if (j.contains("sigma_phi")) c.sigma_phi = j.at("sigma_phi").get<double>();
    if (j.contains("sigma_err")) {
        c.sigma_err.clear();
        if (j.at("sigma_err").is_array())
            for (const auto& v : j.at("sigma_err")) c.sigma_err.push_back(v.get<double>());
        else
            c.sigma_err.push_back(j.at("sigma_err").get<double>());
    }
    if (j.contains("pulses")) {
        c.pulse_pairs = j.at("pulses").value("n", c.pulse_pairs);
        c.total_time = j.at("pulses").value("T", c.total_time);
    }
    c.trials = j.value("trials", c.trials);
    c.fdraws = j.value("fdraws", c.fdraws);
    c.aggregate = j.value("aggregate", c.aggregate);
    c.min_gram_eig = j.value("min_gram_eig", c.min_gram_eig);
    c.samples = j.value("samples", c.samples);
    c.fixed_atom_count = j.value("fixed_N", c.fixed_atom_count);
    c.datapoints = j.value("nu", c.datapoints);
    c.phi_true = j.value("phi_true", c.phi_true);
    c.grid_points = j.value("grid_points", c.grid_points);
    c.quad_nodes = j.value("quad_nodes", c.quad_nodes);
    c.master_seed = j.value("seed", c.master_seed);
    c.out_path = j.value("out", c.out_path);
    c.threads = j.value("threads", c.threads);
    if (j.contains("expm")) {
        c.expm.dense_threshold = j.at("expm").value("dense_threshold", c.expm.dense_threshold);
        c.expm.tol = j.at("expm").value("tol", c.expm.tol);
    }
    if (j.contains("slope_window")) {
        c.slope_window.clear();
        for (const auto& v : j.at("slope_window")) c.slope_window.push_back(v.get<double>());
    }
    c.profiles_csv = j.value("profiles_csv", c.profiles_csv);
}

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Scan output: self-describing table plus a JSON summary. The CSV omits
// timing so identical (config, seed) runs are byte-identical.
struct ResultRecord {
    std::string mode;
    nlohmann::json config_echo;
    std::uint64_t master_seed = 0;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    nlohmann::json summary;
    std::vector<Check> checks;
    double elapsed_seconds = 0.0;

    bool all_checks_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }

    void write_csv(std::ostream& out) const {
        out << "# gravlab " << kVersion << " mode=" << mode << " seed=" << master_seed << "\n";
        out << "# config " << config_echo.dump() << "\n";
        for (std::size_t i = 0; i < columns.size(); ++i)
            out << columns[i] << (i + 1 < columns.size() ? "," : "\n");
        out << std::setprecision(17);
        for (const auto& row : rows)
            for (std::size_t i = 0; i < row.size(); ++i)
                out << row[i] << (i + 1 < row.size() ? "," : "\n");
    }

    nlohmann::json to_json_record() const {
        nlohmann::json checks_json = nlohmann::json::array();
        for (const auto& c : checks)
            checks_json.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
        return nlohmann::json{{"mode", mode},
                              {"version", kVersion},
                              {"seed", master_seed},
                              {"config", config_echo},
                              {"summary", summary},
                              {"checks", checks_json},
                              {"elapsed_seconds", elapsed_seconds}};
    }

    void write_files(const std::string& prefix) const {
        if (prefix.empty()) return;
        std::ofstream csv(prefix + ".csv");
        if (!csv) throw std::runtime_error("cannot write " + prefix + ".csv");
        write_csv(csv);
        std::ofstream js(prefix + ".json");
        js << to_json_record().dump(2) << "\n";
    }
};

// index-addressed work pool; results land by index so assembly order
// never affects output
template <typename Fn>
inline void parallel_for(std::size_t count, int threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int nt = std::min<std::size_t>(threads, count);
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int t = 0; t < nt; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

namespace detail {

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median: empty");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double aggregate(const std::vector<double>& v, const std::string& how) {
    if (how == "mean") return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    return median(v);
}

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y,
                           double xmin, double xmax) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < xmin || x[i] > xmax || !(y[i] > 0.0)) continue;
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
        ++n;
    }
    if (n < 2) throw std::runtime_error("loglog_slope: fewer than two points in window");
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace detail

// Centered coupling with uniform [-1,1] error profiles. When the full-rank
// regime applies (ell+1 <= L-1) and min_gram_eig > 0, draws whose
// row-normalized Gram has smallest eigenvalue below the threshold are
// redrawn: the Heisenberg-scaling statement assumes f f^T nonsingular.
inline CouplingMatrix random_centered_coupling(int mode_count, int channel_count, Rng& rng,
                                               double min_gram_eig = 0.0) {
    const bool can_condition = channel_count + 1 <= mode_count - 1;
    for (int attempt = 0; attempt < 10000; ++attempt) {
        MatrixXd rows(channel_count + 1, mode_count);
        rows.row(0) = default_site_positions(mode_count).transpose();
        if (channel_count > 0) rows.bottomRows(channel_count) = random_profiles(channel_count, mode_count, rng);
        rows.colwise() -= rows.rowwise().mean();
        if (min_gram_eig <= 0.0 || !can_condition) return {rows, true};
        MatrixXd normalized = rows;
        for (int r = 0; r < normalized.rows(); ++r) normalized.row(r).normalize();
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(normalized * normalized.transpose(),
                                                   Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() >= min_gram_eig) return {rows, true};
    }
    throw std::runtime_error("random_centered_coupling: conditioning threshold too strict");
}

// Orthonormal rows spanning the subspace orthogonal to (1,...,1); the first
// row points along the centered site positions (the gravity direction), so
// R F_N R^T carries the full nonzero spectrum of F_N.
inline CouplingMatrix orthonormal_coupling(int mode_count) {
    if (mode_count < 2) throw std::invalid_argument("orthonormal_coupling: need L >= 2");
    const int L = mode_count;
    MatrixXd rows = MatrixXd::Zero(L - 1, L);
    VectorXd r0 = default_site_positions(L);
    r0.array() -= r0.mean();
    rows.row(0) = r0.transpose() / r0.norm();
    int filled = 1;
    for (int k = 1; k < L && filled < L - 1; ++k) {
        VectorXd v = VectorXd::Zero(L);
        for (int i = 0; i < k; ++i) v[i] = 1.0;
        v[k] = -k;                       // Helmert vector, orthogonal to ones
        for (int r = 0; r < filled; ++r) v -= rows.row(r).dot(v) * rows.row(r).transpose();
        const double nv = v.norm();
        if (nv > 1e-10) rows.row(filled++) = v.transpose() / nv;
    }
    return {rows, true};
}

// ---------------------------------------------------------------------------
// scaling-scan: F_eff vs N per L on the Haar-typical F_N pathway (Fig. 3a)
// ---------------------------------------------------------------------------
inline ResultRecord run_scaling_scan(const ScenarioConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();
    const int ell = config.channel_count();
    VectorXd prior(ell + 1);
    prior[0] = 1.0 / (config.sigma_phi * config.sigma_phi);
    const VectorXd sig = config.sigmas_for(ell);
    for (int i = 0; i < ell; ++i) prior[i + 1] = 1.0 / (sig[i] * sig[i]);

    ResultRecord record;
    record.mode = mode_to_string(config.mode);
    record.config_echo = config;
    record.master_seed = config.master_seed;
    record.columns = {"L", "N", "F_eff", "fdraws"};

    nlohmann::json slopes = nlohmann::json::object();
    for (std::size_t li = 0; li < config.mode_counts.size(); ++li) {
        const int L = config.mode_counts[li];
        std::vector<double> ns, feffs;
        std::vector<std::vector<double>> local(config.atom_counts.size());
        parallel_for(config.atom_counts.size(), config.threads, [&](std::size_t ni) {
            const long N = config.atom_counts[ni];
            const MatrixXd fn = typical_f_n(static_cast<int>(N), L);
            std::vector<double> vals(config.fdraws);
            for (int t = 0; t < config.fdraws; ++t) {
                // same per-trial seed across N so each draw traces a smooth curve
                Rng rng = make_rng(config.master_seed, li, t);
                const CouplingMatrix f =
                    random_centered_coupling(L, ell, rng, config.min_gram_eig);
                const MatrixXd fq = f.rows * fn * f.rows.transpose();
                vals[t] = effective_fisher(prior, fq);
            }
            local[ni] = std::move(vals);
        });
        for (std::size_t ni = 0; ni < config.atom_counts.size(); ++ni) {
            const double agg = detail::aggregate(local[ni], config.aggregate);
            ns.push_back(static_cast<double>(config.atom_counts[ni]));
            feffs.push_back(agg);
            record.rows.push_back({double(L), double(config.atom_counts[ni]), agg,
                                   double(config.fdraws)});
        }
        double wmin = ns.back() / 10.0, wmax = ns.back();
        if (config.slope_window.size() == 2) {
            wmin = config.slope_window[0];
            wmax = config.slope_window[1];
        }
        slopes["L" + std::to_string(L)] = detail::loglog_slope(ns, feffs, wmin, wmax);
    }
    record.summary = {{"slopes", slopes},
                      {"aggregate", config.aggregate},
                      {"min_gram_eig", config.min_gram_eig}};
    record.elapsed_seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    return record;
}

// ---------------------------------------------------------------------------
// mode-scan: F_eff vs L per ell at fixed N; knee expected at L = ell+2 (Fig. 3b)
// ---------------------------------------------------------------------------
inline ResultRecord run_mode_scan(const ScenarioConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();
    ResultRecord record;
    record.mode = mode_to_string(config.mode);
    record.config_echo = config;
    record.master_seed = config.master_seed;
    record.columns = {"ell", "L", "N", "F_eff"};

    const long N = config.fixed_atom_count;
    nlohmann::json knees = nlohmann::json::object();
    for (std::size_t ei = 0; ei < config.channel_counts.size(); ++ei) {
        const int ell = config.channel_counts[ei];
        VectorXd prior(ell + 1);
        prior[0] = 1.0 / (config.sigma_phi * config.sigma_phi);
        const VectorXd sig = config.sigmas_for(ell);
        for (int i = 0; i < ell; ++i) prior[i + 1] = 1.0 / (sig[i] * sig[i]);

        std::map<int, double> feff_by_l;
        for (int L : config.mode_counts) {
            if (L < 2) continue;
            const MatrixXd fn = typical_f_n(static_cast<int>(N), L);
            std::vector<double> vals(config.fdraws);
            parallel_for(config.fdraws, config.threads, [&](std::size_t t) {
                Rng rng = make_rng(config.master_seed, ei * 1000 + L, t);
                const CouplingMatrix f =
                    random_centered_coupling(L, ell, rng, config.min_gram_eig);
                vals[t] = effective_fisher(prior, MatrixXd(f.rows * fn * f.rows.transpose()));
            });
            const double agg = detail::aggregate(vals, config.aggregate);
            feff_by_l[L] = agg;
            record.rows.push_back({double(ell), double(L), double(N), agg});
        }
        if (feff_by_l.count(ell + 1) && feff_by_l.count(ell + 2)) {
            const double ratio = feff_by_l[ell + 2] / feff_by_l[ell + 1];
            knees["ell" + std::to_string(ell)] = ratio;
            Check c;
            c.name = "knee_ell" + std::to_string(ell);
            c.pass = ratio > 10.0;
            std::ostringstream os;
            os << "F_eff(L=" << (ell + 2) << ")/F_eff(L=" << (ell + 1) << ") = " << ratio;
            c.detail = os.str();
            record.checks.push_back(c);
        }
    }
    record.summary = {{"knee_ratios", knees}, {"fixed_N", N}};
    record.elapsed_seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    return record;
}

// ---------------------------------------------------------------------------
// pulse-fmin: exact simulation of random schedules; smallest F_Q eigenvalue
// against the Haar-typical value (Fig. 3c,d)
// ---------------------------------------------------------------------------
inline ResultRecord run_pulse_fmin(const ScenarioConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();
    ResultRecord record;
    record.mode = mode_to_string(config.mode);
    record.config_echo = config;
    record.master_seed = config.master_seed;
    record.columns = {"N", "L", "dim", "F_min_median", "F_min_typical", "ratio"};

    std::size_t point = 0;
    for (int L : config.mode_counts) {
        const CouplingMatrix coupling = orthonormal_coupling(L);
        for (long N : config.atom_counts) {
            ++point;
            std::size_t dim = 0;
            try {
                dim = fock_dimension(static_cast<int>(N), L);
            } catch (const std::length_error&) {
                std::cerr << "pulse-fmin: skipping N=" << N << " L=" << L
                          << " (dimension exceeds cap)\n";
                continue;
            }
            const BasisPtr basis = build_basis(static_cast<int>(N), L);
            const StateVector psi0 = fock_ground_state(basis);
            std::vector<double> fmins(config.trials);
            parallel_for(config.trials, config.threads, [&](std::size_t t) {
                const std::uint64_t seed = derive_seed(config.master_seed, point, t);
                const PulseSchedule schedule =
                    random_schedule(config.pulse_pairs, config.total_time, L, seed);
                const StateVector prepared = prepare_state(psi0, schedule, config.expm);
                const MatrixXd fq = qfi_matrix(prepared, coupling);
                Eigen::SelfAdjointEigenSolver<MatrixXd> es(fq, Eigen::EigenvaluesOnly);
                fmins[t] = es.eigenvalues().minCoeff();
            });
            const double med = detail::median(fmins);
            const double typical = typical_f_min(static_cast<int>(N), L);
            record.rows.push_back({double(N), double(L), double(dim), med, typical,
                                   med / typical});
            Check c;
            c.name = "fmin_N" + std::to_string(N) + "_L" + std::to_string(L);
            c.pass = std::abs(med / typical - 1.0) <= 0.35;
            std::ostringstream os;
            os << "median F_min = " << med << ", typical = " << typical;
            c.detail = os.str();
            record.checks.push_back(c);
        }
    }
    record.summary = {{"pulses", {{"n", config.pulse_pairs}, {"T", config.total_time}}}};
    record.elapsed_seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    return record;
}

// ---------------------------------------------------------------------------
// echo-infer: full Loschmidt-echo inference runs plus the van Trees report
// ---------------------------------------------------------------------------
struct EchoInferOutput {
    ResultRecord record;
    std::vector<InferenceTrace> traces;
    FisherBundle bundle;
    VanTreesReport van_trees;
};

inline EchoInferOutput run_echo_infer_full(const ScenarioConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();
    const int L = config.mode_counts.at(0);
    const long N = config.atom_counts.at(0);
    const int ell = config.channel_count();

    Rng setup_rng = make_rng(config.master_seed, 0xe0, 0);
    MatrixXd profiles;
    if (!config.profiles_csv.empty()) {
        profiles = load_profiles_csv(config.profiles_csv);
        if (profiles.rows() != ell || profiles.cols() != L)
            throw std::invalid_argument("echo-infer: CSV profile shape mismatch");
    } else {
        profiles = random_profiles(ell, L, setup_rng);
    }
    const ErrorModel model = make_error_model(L, profiles, config.sigmas_for(ell),
                                              config.sigma_phi);
    const CouplingMatrix coupling = build_coupling(model, true);
    const PulseSchedule schedule = random_schedule(
        config.pulse_pairs, config.total_time, L, derive_seed(config.master_seed, 0xe1, 0));
    const BasisPtr basis = build_basis(static_cast<int>(N), L);
    const StateVector psi0 = fock_ground_state(basis);

    // one-datapoint information matrices at (phi_true, eps = 0)
    const EchoDerivatives der = echo_distribution_with_gradients(
        psi0, schedule, coupling, config.phi_true, zero_errors(model), model.tau, config.expm);
    const MatrixXd cfi = cfi_matrix(der.probabilities, der.gradients);
    const StateVector prepared = prepare_state(psi0, schedule, config.expm);
    const MatrixXd qfi = qfi_matrix(prepared, coupling);
    const VectorXd prior = prior_information(model);
    const FisherBundle bundle = make_fisher_bundle(prior, cfi, qfi);

    InferenceConfig icfg;
    icfg.phi_true = config.phi_true;
    icfg.datapoints = config.datapoints;
    icfg.grid_points = config.grid_points;
    icfg.quad_nodes = config.quad_nodes;
    icfg.expm = config.expm;

    std::vector<InferenceTrace> traces(config.trials);
    parallel_for(config.trials, config.threads, [&](std::size_t t) {
        Rng rng = make_rng(config.master_seed, 0xe2, t);
        traces[t] = run_inference(basis, model, schedule, coupling, icfg, rng);
    });

    const VanTreesReport vt = van_trees_check(traces, bundle.f_eff, prior[0]);

    EchoInferOutput out;
    out.traces = traces;
    out.bundle = bundle;
    out.van_trees = vt;

    ResultRecord& record = out.record;
    record.mode = mode_to_string(config.mode);
    record.config_echo = config;
    record.master_seed = config.master_seed;
    record.columns = {"step", "mean_var", "median_var", "van_trees_bound"};
    for (std::size_t a = 0; a < vt.bound.size(); ++a) {
        std::vector<double> vars;
        for (const auto& tr : traces) vars.push_back(tr.posterior_variance.at(a));
        record.rows.push_back({double(a + 1), vt.mean_variance[a], detail::median(vars),
                               vt.bound[a]});
    }
    std::vector<double> finals;
    for (const auto& tr : traces) finals.push_back(tr.final_variance());
    const double median_final = detail::median(finals);
    const double predicted_final = 1.0 / effective_fisher_after(
        config.datapoints, bundle.f_eff, prior[0]);
    record.summary = {{"f_eff_1", bundle.f_eff},
                      {"f_eff_qfi_bound", bundle.f_eff_qfi_bound},
                      {"median_final_variance", median_final},
                      {"predicted_final_variance", predicted_final},
                      {"final_ratio", median_final / predicted_final},
                      {"van_trees_ok", vt.ok},
                      {"van_trees_first_violation", vt.first_violation}};
    Check c;
    c.name = "van_trees";
    c.pass = vt.ok;
    c.detail = vt.ok ? "posterior variance respects the bound at every step"
                     : "violation at step " + std::to_string(vt.first_violation);
    record.checks.push_back(c);

    record.elapsed_seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    return out;
}

inline ResultRecord run_echo_infer(const ScenarioConfig& config) {
    EchoInferOutput out = run_echo_infer_full(config);
    if (!config.out_path.empty()) {
        for (std::size_t t = 0; t < out.traces.size(); ++t) {
            std::ofstream tf(config.out_path + "_trace" + std::to_string(t) + ".csv");
            write_trace_csv(tf, out.traces[t]);
        }
    }
    return out.record;
}

// ---------------------------------------------------------------------------
// haar-validate: Monte-Carlo check of the closed-form Haar moments
// ---------------------------------------------------------------------------
inline ResultRecord run_haar_validate(const ScenarioConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();
    ResultRecord record;
    record.mode = mode_to_string(config.mode);
    record.config_echo = config;
    record.master_seed = config.master_seed;
    record.columns = {"N", "L", "samples", "diag_pred", "diag_mean", "z_diag",
                      "cross_pred", "cross_mean", "z_cross", "var_diag_pred",
                      "var_diag_emp", "var_cross_pred", "var_cross_emp", "sum_rule"};

    nlohmann::json stats = nlohmann::json::array();
    std::size_t point = 0;
    for (int L : config.mode_counts) {
        for (long N : config.atom_counts) {
            ++point;
            Rng rng = make_rng(config.master_seed, 0x4a, point);
            const HaarStats st = haar_validate(static_cast<int>(N), L, config.samples, rng);
            record.rows.push_back({double(N), double(L), double(st.sample_count),
                                   st.predicted.diag_cov, st.mean_diag_cov, st.z_diag,
                                   st.predicted.cross_cov, st.mean_cross_cov, st.z_cross,
                                   st.predicted.var_diag, st.var_diag_cov,
                                   st.predicted.var_cross, st.var_cross_cov, st.sum_rule});
            nlohmann::json sj;
            to_json(sj, st);
            stats.push_back(sj);
            Check c;
            c.name = "haar_N" + std::to_string(N) + "_L" + std::to_string(L);
            c.pass = std::abs(st.z_diag) < 5.0 && std::abs(st.z_cross) < 5.0;
            std::ostringstream os;
            os << "z_diag=" << st.z_diag << " z_cross=" << st.z_cross;
            c.detail = os.str();
            record.checks.push_back(c);
        }
    }
    record.summary = {{"stats", stats}};
    record.elapsed_seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    return record;
}

inline ResultRecord run_scenario(const ScenarioConfig& config) {
    switch (config.mode) {
        case Mode::ScalingScan: return run_scaling_scan(config);
        case Mode::ModeScan: return run_mode_scan(config);
        case Mode::PulseFmin: return run_pulse_fmin(config);
        case Mode::EchoInfer: return run_echo_infer(config);
        case Mode::HaarValidate: return run_haar_validate(config);
    }
    throw std::logic_error("run_scenario: unhandled mode");
}

} // namespace gravlab

#endif
