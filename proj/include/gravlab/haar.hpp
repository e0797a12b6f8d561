#ifndef GRAVLAB_HAAR_HPP
#define GRAVLAB_HAAR_HPP

#include <cmath>

#include <json.hpp>

#include "fisher.hpp"
#include "fock.hpp"
#include "rng.hpp"

namespace gravlab {

// Haar-random state on the unit sphere of the Fock sector: iid standard
// complex Gaussian amplitudes, normalized.
inline StateVector haar_state(const BasisPtr& basis, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    VectorXcd amps(basis->dimension());
    for (Eigen::Index i = 0; i < amps.size(); ++i)
        amps[i] = std::complex<double>(gauss(rng), gauss(rng));
    amps /= amps.norm();
    return {basis, amps};
}

// Closed-form Haar moments of the occupancy covariance. The means carry the
// exact D/(D+1) prefactor; the variances are leading-order in N, L >> 1.
struct HaarMoments {
    double diag_cov = 0.0;     // E[<n_i^2> - <n_i>^2]
    double cross_cov = 0.0;    // E[<n_i n_j> - <n_i><n_j>], i != j
    double var_diag = 0.0;     // Var of the diagonal covariance, ~ 8(N/L)^4/D
    double var_cross = 0.0;    // Var of the cross covariance,  ~  (N/L)^4/D
};

inline HaarMoments predicted_haar_moments(int atom_count, int mode_count) {
    if (atom_count < 1 || mode_count < 2)
        throw std::invalid_argument("predicted_haar_moments: need N >= 1, L >= 2");
    const double n = atom_count, l = mode_count;
    const double d = static_cast<double>(fock_dimension(atom_count, mode_count));
    const double pref = d / (d + 1.0);
    HaarMoments m;
    m.diag_cov = pref * n * (n + l) * (l - 1.0) / (l * l * (l + 1.0));
    m.cross_cov = -pref * n * (n + l) / (l * l * (l + 1.0));
    const double lam4 = std::pow(n / l, 4);
    m.var_diag = 8.0 * lam4 / d;
    m.var_cross = lam4 / d;
    return m;
}

// Monte-Carlo validation record for the Haar moment formulas.
struct HaarStats {
    int atom_count = 0;
    int mode_count = 0;
    int sample_count = 0;
    HaarMoments predicted;
    double mean_diag_cov = 0.0;
    double mean_cross_cov = 0.0;
    double var_diag_cov = 0.0;
    double var_cross_cov = 0.0;
    double se_diag = 0.0;          // standard error of the sample mean
    double se_cross = 0.0;
    double z_diag = 0.0;           // (empirical - predicted) / SE
    double z_cross = 0.0;
    double sum_rule = 0.0;         // predicted diag + (L-1) cross, exactly 0
};

// Samples Haar states and compares the (1,1) and (1,2) covariance entries
// against the closed forms. Statistical misfits are reported via z-scores,
// not thrown.
inline HaarStats haar_validate(int atom_count, int mode_count, int samples, Rng& rng) {
    if (samples < 2) throw std::invalid_argument("haar_validate: need >= 2 samples");
    const BasisPtr basis = build_basis(atom_count, mode_count);
    double sum_a = 0.0, sum_a2 = 0.0, sum_b = 0.0, sum_b2 = 0.0;
    for (int s = 0; s < samples; ++s) {
        const StateVector psi = haar_state(basis, rng);
        const OccupancyCovariance cov = occupancy_covariance(psi);
        const double a = cov.matrix(0, 0);
        const double b = cov.matrix(0, 1);
        sum_a += a; sum_a2 += a * a;
        sum_b += b; sum_b2 += b * b;
    }
    HaarStats st;
    st.atom_count = atom_count;
    st.mode_count = mode_count;
    st.sample_count = samples;
    st.predicted = predicted_haar_moments(atom_count, mode_count);
    st.mean_diag_cov = sum_a / samples;
    st.mean_cross_cov = sum_b / samples;
    st.var_diag_cov = (sum_a2 - samples * st.mean_diag_cov * st.mean_diag_cov) / (samples - 1);
    st.var_cross_cov = (sum_b2 - samples * st.mean_cross_cov * st.mean_cross_cov) / (samples - 1);
    st.se_diag = std::sqrt(st.var_diag_cov / samples);
    st.se_cross = std::sqrt(st.var_cross_cov / samples);
    st.z_diag = (st.mean_diag_cov - st.predicted.diag_cov) / st.se_diag;
    st.z_cross = (st.mean_cross_cov - st.predicted.cross_cov) / st.se_cross;
    st.sum_rule = st.predicted.diag_cov + (mode_count - 1) * st.predicted.cross_cov;
    return st;
}

inline void to_json(nlohmann::json& j, const HaarStats& st) {
    j = nlohmann::json{
        {"N", st.atom_count},
        {"L", st.mode_count},
        {"samples", st.sample_count},
        {"predicted", {{"diag_cov", st.predicted.diag_cov},
                       {"cross_cov", st.predicted.cross_cov},
                       {"var_diag", st.predicted.var_diag},
                       {"var_cross", st.predicted.var_cross}}},
        {"empirical", {{"diag_cov", st.mean_diag_cov},
                       {"cross_cov", st.mean_cross_cov},
                       {"var_diag", st.var_diag_cov},
                       {"var_cross", st.var_cross_cov}}},
        {"z_scores", {{"diag", st.z_diag}, {"cross", st.z_cross}}},
        {"sum_rule", st.sum_rule}};
}

} // namespace gravlab

#endif
