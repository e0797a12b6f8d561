#ifndef GRAVLAB_FISHER_HPP
#define GRAVLAB_FISHER_HPP

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "error_model.hpp"
#include "fock.hpp"

namespace gravlab {

// Covariance matrix of the occupancies, <n_i n_j> - <n_i><n_j>.
// The all-ones vector is in its null space since sum_i n_i = N.
struct OccupancyCovariance {
    MatrixXd matrix;
};

inline OccupancyCovariance occupancy_covariance(const StateVector& state) {
    const OccupancyMoments m = occupancy_moments(state);
    MatrixXd cov = m.second - m.mean * m.mean.transpose();
    cov = 0.5 * (cov + cov.transpose().eval());
    return {cov};
}

// QFI matrix in the paper's covariance normalization, F_Q = f F_N f^T.
// (The conventional QFI of the protocol equals 4x this matrix; see README.)
inline MatrixXd qfi_matrix(const StateVector& state, const CouplingMatrix& coupling) {
    if (coupling.mode_count() != state.basis->mode_count())
        throw std::invalid_argument("qfi_matrix: coupling/basis mode mismatch");
    const OccupancyCovariance fn = occupancy_covariance(state);
    MatrixXd q = coupling.rows * fn.matrix * coupling.rows.transpose();
    return 0.5 * (q + q.transpose().eval());
}

constexpr double kProbabilityFloor = 1e-12;

// Classical Fisher information matrix from a probability vector and its
// parameter gradients (rows of `gradients`). Outcomes with probability below
// the floor contribute nothing.
inline MatrixXd cfi_matrix(const VectorXd& probabilities, const MatrixXd& gradients,
                           double p_floor = kProbabilityFloor) {
    if (gradients.cols() != probabilities.size())
        throw std::invalid_argument("cfi_matrix: gradient/probability size mismatch");
    const int np = static_cast<int>(gradients.rows());
    MatrixXd fisher = MatrixXd::Zero(np, np);
    for (Eigen::Index n = 0; n < probabilities.size(); ++n) {
        const double p = probabilities[n];
        if (p <= p_floor) continue;
        fisher += gradients.col(n) * gradients.col(n).transpose() / p;
    }
    return fisher;
}

// F_eff = 1 / [(diag(prior) + info)^{-1}]_{11}, via one symmetric solve.
inline double effective_fisher(const VectorXd& prior_diag, const MatrixXd& info) {
    const int n = static_cast<int>(prior_diag.size());
    if (info.rows() != n || info.cols() != n)
        throw std::invalid_argument("effective_fisher: size mismatch");
    for (int i = 0; i < n; ++i)
        if (!(prior_diag[i] > 0.0))
            throw std::invalid_argument("effective_fisher: prior entries must be positive");
    MatrixXd m = 0.5 * (info + info.transpose().eval());
    m += prior_diag.asDiagonal();
    Eigen::LDLT<MatrixXd> solver(m);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("effective_fisher: factorization failed");
    const VectorXd x = solver.solve(VectorXd::Unit(n, 0));
    if (!(x[0] > 0.0))
        throw std::runtime_error("effective_fisher: prior+info not positive definite");
    return 1.0 / x[0];
}

// nu-datapoint scaling law: F_eff^(nu) = prior_phi + nu (F_eff^(1) - prior_phi).
inline double effective_fisher_after(int nu, double f_eff_1, double prior_phi) {
    if (nu < 1) throw std::invalid_argument("effective_fisher_after: nu must be >= 1");
    return prior_phi + nu * (f_eff_1 - prior_phi);
}

struct LoewnerCheck {
    bool ok = false;
    double f_eff_cfi = 0.0;
    double f_eff_qfi = 0.0;
    double min_gap_eigenvalue = 0.0;   // smallest eigenvalue of qfi - cfi
};

// Verifies F_eff(cfi) <= F_eff(qfi) + tol, reporting the smallest eigenvalue
// of qfi - cfi when the ordering fails.
inline LoewnerCheck loewner_bound_check(const VectorXd& prior_diag, const MatrixXd& cfi,
                                        const MatrixXd& qfi, double tol = 1e-8) {
    LoewnerCheck result;
    result.f_eff_cfi = effective_fisher(prior_diag, cfi);
    result.f_eff_qfi = effective_fisher(prior_diag, qfi);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(qfi - cfi, Eigen::EigenvaluesOnly);
    result.min_gap_eigenvalue = es.eigenvalues().minCoeff();
    result.ok = result.f_eff_cfi <= result.f_eff_qfi + tol;
    return result;
}

// Weyl bounds: with sorted QFI eigenvalues F_k (ascending) and prior widths,
// F_k + 1/sigma_max^2 <= lambda_k <= F_k + 1/sigma_min^2.
inline std::pair<VectorXd, VectorXd> weyl_eigen_bounds(const VectorXd& prior_sigmas,
                                                       const VectorXd& qfi_eigenvalues) {
    if (prior_sigmas.size() != qfi_eigenvalues.size())
        throw std::invalid_argument("weyl_eigen_bounds: size mismatch");
    const double smin = prior_sigmas.minCoeff();
    const double smax = prior_sigmas.maxCoeff();
    VectorXd lower = qfi_eigenvalues.array() + 1.0 / (smax * smax);
    VectorXd upper = qfi_eigenvalues.array() + 1.0 / (smin * smin);
    return {lower, upper};
}

// rank(F_Q) = min(L-1, ell+1); full rank needs L >= ell+2.
inline int rank_prediction(int mode_count, int channel_count) {
    if (mode_count < 1) throw std::invalid_argument("rank_prediction: L must be >= 1");
    if (channel_count < 0) throw std::invalid_argument("rank_prediction: ell must be >= 0");
    return std::min(mode_count - 1, channel_count + 1);
}

constexpr double kRankThreshold = 1e-8;

// numerical rank with singular values below 1e-8 x largest treated as zero
inline int numerical_rank(const MatrixXd& m, double rel_threshold = kRankThreshold) {
    Eigen::JacobiSVD<MatrixXd> svd(m);
    const VectorXd& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    const double cutoff = rel_threshold * sv[0];
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > cutoff) ++rank;
    return rank;
}

// Haar-typical occupancy covariance, (N(N+L)/(L(L+1))) (I - J/L).
inline MatrixXd typical_f_n(int atom_count, int mode_count) {
    if (atom_count < 1 || mode_count < 2)
        throw std::invalid_argument("typical_f_n: need N >= 1, L >= 2");
    const double n = atom_count, l = mode_count;
    const double scale = n * (n + l) / (l * (l + 1.0));
    return scale * (MatrixXd::Identity(mode_count, mode_count) -
                    MatrixXd::Constant(mode_count, mode_count, 1.0 / l));
}

// typical smallest nonzero QFI eigenvalue, N(N+L)/(L(L+1))
inline double typical_f_min(int atom_count, int mode_count) {
    if (atom_count < 1 || mode_count < 2)
        throw std::invalid_argument("typical_f_min: need N >= 1, L >= 2");
    const double n = atom_count, l = mode_count;
    return n * (n + l) / (l * (l + 1.0));
}

// Information matrices for one datapoint plus the derived effective Fisher
// information and its QFI-side bound.
struct FisherBundle {
    VectorXd prior;     // diagonal of the prior information matrix
    MatrixXd cfi;
    MatrixXd qfi;       // paper normalization (generator covariance)
    double f_eff = 0.0;
    double f_eff_qfi_bound = 0.0;
};

inline FisherBundle make_fisher_bundle(const VectorXd& prior_diag, const MatrixXd& cfi,
                                       const MatrixXd& qfi) {
    FisherBundle b;
    b.prior = prior_diag;
    b.cfi = 0.5 * (cfi + cfi.transpose().eval());
    b.qfi = 0.5 * (qfi + qfi.transpose().eval());
    b.f_eff = effective_fisher(prior_diag, b.cfi);
    // conventional QFI of the protocol is 4x the covariance normalization
    b.f_eff_qfi_bound = effective_fisher(prior_diag, MatrixXd(4.0 * b.qfi));
    return b;
}

} // namespace gravlab

#endif
