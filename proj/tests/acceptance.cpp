// Acceptance suite: one function per criterion, each printing a PASS/FAIL
// line. Run with no arguments for all criteria or with a number to run one.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <vector>

#include "gravlab/gravlab.hpp"

using namespace gravlab;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

bool report(int k, bool pass, const std::string& detail, double seconds) {
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << k << ": " << detail
              << "  (" << std::fixed << seconds << " s)" << std::defaultfloat << "\n";
    return pass;
}

// ---------------------------------------------------------------------------
// 1. Haar moments: Monte-Carlo means within 5 SE of the closed forms
// ---------------------------------------------------------------------------
bool criterion1() {
    Timer timer;
    bool ok = true;
    std::ostringstream detail;
    for (auto [n, l] : std::vector<std::pair<int, int>>{{2, 2}, {6, 3}, {8, 4}}) {
        Rng rng = make_rng(20260810, 1, n * 10 + l);
        const HaarStats st = haar_validate(n, l, 2000, rng);
        const bool here = std::abs(st.z_diag) < 5.0 && std::abs(st.z_cross) < 5.0;
        ok = ok && here;
        detail << "(N=" << n << ",L=" << l << ") z=" << std::setprecision(2) << st.z_diag
               << "/" << st.z_cross << " ";
    }
    return report(1, ok, "Haar moments vs Eq. closed forms, 2000 states: " + detail.str(),
                  timer.seconds());
}

// ---------------------------------------------------------------------------
// 2. Arrowhead nu-linearity to 1e-10 against direct block-matrix inversion
// ---------------------------------------------------------------------------
bool criterion2() {
    Timer timer;
    Rng rng = make_rng(20260810, 2, 0);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> upos(0.5, 4.0);
    bool ok = true;
    double worst = 0.0;
    for (int ell = 1; ell <= 3; ++ell) {
        for (int alpha = 1; alpha <= 5; ++alpha) {
            const int np = ell + 1;
            MatrixXd a = MatrixXd::NullaryExpr(np, np, [&] { return gauss(rng); });
            const MatrixXd f1 = a * a.transpose();
            VectorXd prior(np);
            for (int i = 0; i < np; ++i) prior[i] = upos(rng);
            const int dim = 1 + alpha * ell;
            MatrixXd big = MatrixXd::Zero(dim, dim);
            big(0, 0) = prior[0] + alpha * f1(0, 0);
            for (int b = 0; b < alpha; ++b) {
                const int off = 1 + b * ell;
                big.block(off, off, ell, ell) =
                    f1.bottomRightCorner(ell, ell) + MatrixXd(prior.tail(ell).asDiagonal());
                big.block(0, off, 1, ell) = f1.block(0, 1, 1, ell);
                big.block(off, 0, ell, 1) = f1.block(1, 0, ell, 1);
            }
            const double direct = 1.0 / big.inverse()(0, 0);
            const double law = effective_fisher_after(
                alpha, effective_fisher(prior, f1), prior[0]);
            const double err = std::abs(direct - law) / direct;
            worst = std::max(worst, err);
            ok = ok && err < 1e-10;
        }
    }
    std::ostringstream detail;
    detail << "F_eff^(nu) linearity vs (1+nu*ell)-dim inversion, worst rel err "
           << std::scientific << std::setprecision(2) << worst;
    return report(2, ok, detail.str(), timer.seconds());
}

// ---------------------------------------------------------------------------
// 3. Saturation (L < ell+2) vs Heisenberg scaling (L >= ell+2), Fig. 3a
// ---------------------------------------------------------------------------
bool criterion3() {
    Timer timer;
    ScenarioConfig config;
    config.mode = Mode::ScalingScan;
    config.channel_counts = {4};
    config.mode_counts = {4, 5, 6};
    config.sigma_phi = 0.01;
    config.sigma_err = {0.01};
    config.fdraws = 20;
    config.aggregate = "median";
    // Heisenberg claim holds for nonsingular f f^T; condition the full-rank
    // draws accordingly (no-op for L < ell+2 where rank deficiency is the point)
    config.min_gram_eig = 0.1;
    config.master_seed = 3003;
    for (double x = 2.0; x <= 6.01; x += 0.25)
        config.atom_counts.push_back(std::lround(std::pow(10.0, x)));
    const ResultRecord rec = run_scaling_scan(config);

    auto slope_for = [&](int L, double lo, double hi) {
        std::vector<double> n, f;
        for (const auto& row : rec.rows) {
            if (static_cast<int>(row[0]) != L) continue;
            n.push_back(row[1]);
            f.push_back(row[2]);
        }
        return detail::loglog_slope(n, f, lo, hi);
    };
    const double s4 = slope_for(4, 1e5, 1e6);
    const double s5 = slope_for(5, 1e5, 1e6);
    const double s6 = slope_for(6, 1e3, 1e4);
    const bool ok = s4 < 0.2 && s5 < 0.2 && (s6 >= 1.8 && s6 <= 2.05);
    std::ostringstream detail;
    detail << std::setprecision(3) << "final-decade slopes L=4: " << s4 << ", L=5: " << s5
           << " (< 0.2); L=6 over [1e3,1e4]: " << s6 << " (in [1.8, 2.05])";
    return report(3, ok, detail.str(), timer.seconds());
}

// ---------------------------------------------------------------------------
// 4. Knee at L = ell + 2 at N = 1e4 (Fig. 3b)
// ---------------------------------------------------------------------------
bool criterion4() {
    Timer timer;
    ScenarioConfig config;
    config.mode = Mode::ModeScan;
    config.channel_counts = {1, 2, 3};
    config.mode_counts = {2, 3, 4, 5, 6};
    config.fixed_atom_count = 10000;
    config.sigma_phi = 0.01;
    config.sigma_err = {0.01};
    config.fdraws = 20;
    config.master_seed = 4010;
    const ResultRecord rec = run_mode_scan(config);
    bool ok = true;
    std::ostringstream detail;
    detail << "F_eff jump between L=ell+1 and L=ell+2 (median of 20 draws): ";
    for (const auto& c : rec.checks) {
        ok = ok && c.pass;
        const double ratio = rec.summary["knee_ratios"]
                                 [c.name.substr(c.name.find("ell"))].get<double>();
        detail << c.name << "=" << std::setprecision(3) << ratio << "x ";
    }
    return report(4, ok, detail.str() + "(>= 10x)", timer.seconds());
}

// ---------------------------------------------------------------------------
// 5. Typical F_min from random pulse sequences (Fig. 3c, Eq. 36)
// ---------------------------------------------------------------------------
bool criterion5() {
    Timer timer;
    ScenarioConfig config;
    config.mode = Mode::PulseFmin;
    config.mode_counts = {3};
    config.atom_counts = {10, 20, 40};
    config.trials = 20;
    config.pulse_pairs = 10;
    config.total_time = 40.0;
    config.master_seed = 5005;
    const ResultRecord rec = run_pulse_fmin(config);
    bool ok = true;
    std::ostringstream detail;
    detail << "median F_min / N(N+L)/(L(L+1)) over 20 schedules: ";
    for (const auto& row : rec.rows) {
        const double ratio = row[5];
        ok = ok && std::abs(ratio - 1.0) <= 0.35;
        detail << "N=" << static_cast<long>(row[0]) << ": " << std::setprecision(3)
               << ratio << " ";
    }
    return report(5, ok, detail.str() + "(within 35%)", timer.seconds());
}

// ---------------------------------------------------------------------------
// 6. CFI correctness: finite-difference agreement and echo-readout tightness
// ---------------------------------------------------------------------------
bool criterion6() {
    Timer timer;
    bool fd_ok = true;
    bool tight_ok = true;
    double worst_fd = 0.0, worst_tight = 0.0, worst_tight_conv = 0.0;
    for (auto [N, L, ell] : std::vector<std::array<int, 3>>{
             {2, 2, 0}, {4, 2, 1}, {3, 3, 1}, {6, 3, 2}}) {
        Rng rng = make_rng(20260810, 6, N * 100 + L * 10 + ell);
        const BasisPtr basis = build_basis(N, L);
        const StateVector psi0 = fock_ground_state(basis);
        const PulseSchedule schedule =
            random_schedule(8, 32.0, L, derive_seed(20260810, 60, N + ell));
        const ErrorModel model = make_error_model(
            L, random_profiles(ell, L, rng), VectorXd::Constant(ell, 0.01), 0.01);
        const CouplingMatrix coupling = build_coupling(model, true);
        const double phi = 0.3;   // generic, away from the stationary point
        std::normal_distribution<double> gauss;
        VectorXd eps(ell);
        for (int i = 0; i < ell; ++i) eps[i] = 0.1 * gauss(rng);

        const EchoDerivatives d =
            echo_distribution_with_gradients(psi0, schedule, coupling, phi, {eps}, 1.0);
        const MatrixXd cfi = cfi_matrix(d.probabilities, d.gradients);

        // (a) analytic gradients vs central finite differences
        const double h = 1e-5;
        MatrixXd fd(ell + 1, basis->dimension());
        for (int i = 0; i <= ell; ++i) {
            double pp_phi = phi, pm_phi = phi;
            VectorXd ep = eps, em = eps;
            if (i == 0) { pp_phi += h; pm_phi -= h; }
            else { ep[i - 1] += h; em[i - 1] -= h; }
            const VectorXd pp = echo_distribution(psi0, schedule, coupling, pp_phi, {ep}, 1.0);
            const VectorXd pm = echo_distribution(psi0, schedule, coupling, pm_phi, {em}, 1.0);
            fd.row(i) = (pp - pm) / (2 * h);
        }
        const MatrixXd cfi_fd = cfi_matrix(d.probabilities, fd);
        const double fd_err = (cfi - cfi_fd).cwiseAbs().maxCoeff() / cfi.cwiseAbs().maxCoeff();
        worst_fd = std::max(worst_fd, fd_err);
        fd_ok = fd_ok && fd_err < 1e-5;

        // (b) tightness under the echo readout, as specified: cfi == qfi_matrix
        const MatrixXd qfi = qfi_matrix(prepare_state(psi0, schedule), coupling);
        const double tight_err = (cfi - qfi).cwiseAbs().maxCoeff() / qfi.cwiseAbs().maxCoeff();
        worst_tight = std::max(worst_tight, tight_err);
        tight_ok = tight_ok && tight_err < 1e-6;
        // diagnostic: the same comparison against the conventional QFI (4x)
        const double conv_err =
            (cfi - 4.0 * qfi).cwiseAbs().maxCoeff() / (4.0 * qfi).cwiseAbs().maxCoeff();
        worst_tight_conv = std::max(worst_tight_conv, conv_err);
    }
    std::ostringstream detail;
    detail << std::scientific << std::setprecision(2)
           << "analytic vs finite-difference CFI rel err " << worst_fd
           << (fd_ok ? " (pass)" : " (FAIL)")
           << "; echo tightness |cfi-qfi| rel err " << worst_tight
           << (tight_ok ? " (pass)" : " (FAIL; cfi = 4x qfi up to " + [&] {
                  std::ostringstream o;
                  o << std::scientific << std::setprecision(2) << worst_tight_conv;
                  return o.str();
              }() + " rel: the covariance-normalized qfi_matrix is a quarter of the conventional QFI the echo readout saturates)");
    return report(6, fd_ok && tight_ok, detail.str(), timer.seconds());
}

// ---------------------------------------------------------------------------
// 7. Bayesian end-to-end against the van Trees bound and the nu-law
// ---------------------------------------------------------------------------
bool criterion7() {
    Timer timer;
    ScenarioConfig config;
    config.mode = Mode::EchoInfer;
    config.mode_counts = {3};
    config.atom_counts = {10};
    config.channel_counts = {1};
    config.sigma_phi = 0.02;
    config.sigma_err = {0.02};
    config.pulse_pairs = 10;
    config.total_time = 40.0;
    config.trials = 20;
    config.datapoints = 100;
    config.phi_true = 0.01;
    config.master_seed = 7007;
    const EchoInferOutput out = run_echo_infer_full(config);
    const double ratio = out.record.summary["final_ratio"].get<double>();
    const bool bound_ok = out.van_trees.ok;
    const bool ratio_ok = ratio >= 0.5 && ratio <= 2.0;
    std::ostringstream detail;
    detail << std::setprecision(3) << "van Trees bound respected at all 100 steps: "
           << (bound_ok ? "yes" : ("violated at step " +
                                   std::to_string(out.van_trees.first_violation)))
           << "; median final variance / (1/F_eff^(100)) = " << ratio
           << " (within factor 2)";
    return report(7, bound_ok && ratio_ok, detail.str(), timer.seconds());
}

// ---------------------------------------------------------------------------
// 8. Multi-mode advantage: L=3 beats L=2 with one error channel
// ---------------------------------------------------------------------------
bool criterion8() {
    Timer timer;
    // One fixed scenario per side (profile and schedule drawn once from the
    // master seed, as in criterion 7); the 20 pairs share seeds and differ
    // only in the error draws and measurement outcomes. A strong channel
    // (sigma_1 = 0.2) makes the uncorrectable L=2 error actually hurt.
    const int pairs = 20;
    const double sigma_err = 0.2;
    ErrorModel models[2];
    CouplingMatrix couplings[2];
    PulseSchedule schedules[2];
    BasisPtr bases[2];
    for (int which = 0; which < 2; ++which) {
        const int L = which == 0 ? 3 : 2;
        Rng setup = make_rng(8008, 0xf, L);
        MatrixXd profile = random_profiles(1, L, setup);
        // fix the channel strength (random orientation only) so the L=2
        // penalty does not hinge on the luck of a weak draw
        profile.row(0) *= std::sqrt(L / 3.0) / profile.row(0).norm();
        models[which] = make_error_model(L, profile,
                                         VectorXd::Constant(1, sigma_err), 0.05);
        couplings[which] = build_coupling(models[which], true);
        schedules[which] = random_schedule(10, 40.0, L, derive_seed(8008, 0xd, L));
        bases[which] = build_basis(10, L);
    }
    int wins = 0;
    for (int k = 0; k < pairs; ++k) {
        double final_var[2];
        for (int which = 0; which < 2; ++which) {
            InferenceConfig icfg;
            icfg.phi_true = 0.01;
            icfg.datapoints = 100;
            icfg.grid_points = 512;
            icfg.quad_nodes = 13;
            Rng rng = make_rng(8008, k, which);
            final_var[which] = run_inference(bases[which], models[which], schedules[which],
                                             couplings[which], icfg, rng)
                                   .final_variance();
        }
        if (final_var[0] < final_var[1]) ++wins;
    }
    const bool ok = wins >= std::lround(0.8 * pairs);
    std::ostringstream detail;
    detail << "final posterior variance smaller for L=3 than L=2 in " << wins << "/" << pairs
           << " paired seeds (need >= " << std::lround(0.8 * pairs) << ")";
    return report(8, ok, detail.str(), timer.seconds());
}

} // namespace

int main(int argc, char** argv) {
    std::vector<bool (*)()> criteria = {criterion1, criterion2, criterion3, criterion4,
                                        criterion5, criterion6, criterion7, criterion8};
    int failures = 0;
    if (argc > 1) {
        const int k = std::atoi(argv[1]);
        if (k < 1 || k > 8) {
            std::cerr << "usage: acceptance [1-8]\n";
            return 1;
        }
        if (!criteria[k - 1]()) ++failures;
    } else {
        for (auto& fn : criteria)
            if (!fn()) ++failures;
    }
    return failures;
}
