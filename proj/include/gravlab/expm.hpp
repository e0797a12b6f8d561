#ifndef GRAVLAB_EXPM_HPP
#define GRAVLAB_EXPM_HPP

#include <complex>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace gravlab {

struct ExpmOptions {
    // Dense eigendecomposition up to this dimension, Lanczos above it.
    int dense_threshold = 2000;
    double tol = 1e-10;
    int max_krylov = 160;
};

namespace detail {

inline Eigen::VectorXcd sparse_apply(const Eigen::SparseMatrix<double>& H,
                                     const Eigen::VectorXcd& x) {
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(x.size());
    for (int col = 0; col < H.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator it(H, col); it; ++it)
            y[it.row()] += it.value() * x[col];
    return y;
}

// exp(-i t T_m) e_1 for the real symmetric tridiagonal Lanczos matrix
inline Eigen::VectorXcd tridiag_exp_e1(const Eigen::VectorXd& alpha,
                                       const Eigen::VectorXd& beta, double t) {
    const int m = static_cast<int>(alpha.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < m) { T(i, i + 1) = beta[i]; T(i + 1, i) = beta[i]; }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const Eigen::VectorXd& w = es.eigenvalues();
    const Eigen::MatrixXd& V = es.eigenvectors();
    Eigen::VectorXcd phase(m);
    for (int i = 0; i < m; ++i)
        phase[i] = std::exp(std::complex<double>(0.0, -t * w[i]));
    return V * (phase.array() * V.row(0).transpose().array().cast<std::complex<double>>()).matrix();
}

} // namespace detail

// exp(-i t H) psi for real symmetric sparse H, via Lanczos with full
// reorthogonalization. Accuracy is validated against the dense path in tests.
inline Eigen::VectorXcd expm_krylov(const Eigen::SparseMatrix<double>& H,
                                    const Eigen::VectorXcd& psi, double t,
                                    const ExpmOptions& opts) {
    const double nrm = psi.norm();
    if (nrm == 0.0) return psi;
    const Eigen::Index d = psi.size();
    const int mmax = static_cast<int>(std::min<Eigen::Index>(opts.max_krylov, d));

    std::vector<Eigen::VectorXcd> V;
    V.reserve(mmax + 1);
    V.push_back(psi / nrm);
    Eigen::VectorXd alpha(mmax), beta(mmax);
    Eigen::VectorXcd u;

    int m = 0;
    bool breakdown = false;
    while (m < mmax) {
        Eigen::VectorXcd w = detail::sparse_apply(H, V[m]);
        std::complex<double> a = V[m].dot(w);
        alpha[m] = a.real();
        w -= a * V[m];
        if (m > 0) w -= std::complex<double>(beta[m - 1], 0.0) * V[m - 1];
        // full reorthogonalization; cheap at these Krylov sizes
        for (int j = 0; j <= m; ++j) w -= V[j].dot(w) * V[j];
        const double b = w.norm();
        beta[m] = b;
        ++m;
        if (b < 1e-14) { breakdown = true; }   // invariant subspace reached: exact
        bool check = breakdown || m >= 4;
        if (check) {
            u = detail::tridiag_exp_e1(alpha.head(m), beta.head(m - 1), t);
            const double err = breakdown ? 0.0 : b * std::abs(u[m - 1]) * std::abs(t);
            if (breakdown || err < opts.tol) break;
        }
        if (m < mmax) V.push_back(w / b);
    }
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(d);
    for (int j = 0; j < m; ++j) out += u[j] * V[j];
    return nrm * out;
}

inline Eigen::VectorXcd expm_dense(const Eigen::SparseMatrix<double>& H,
                                   const Eigen::VectorXcd& psi, double t) {
    const Eigen::MatrixXd dense(H);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
    const Eigen::VectorXd& w = es.eigenvalues();
    const Eigen::MatrixXd& V = es.eigenvectors();
    Eigen::VectorXcd coeff = V.transpose().cast<std::complex<double>>() * psi;
    for (Eigen::Index i = 0; i < coeff.size(); ++i)
        coeff[i] *= std::exp(std::complex<double>(0.0, -t * w[i]));
    return V.cast<std::complex<double>>() * coeff;
}

// exp(-i t H) psi, picking the dense or Krylov path by dimension.
inline Eigen::VectorXcd expm_apply(const Eigen::SparseMatrix<double>& H,
                                   const Eigen::VectorXcd& psi, double t,
                                   const ExpmOptions& opts = {}) {
    if (H.rows() != psi.size())
        throw std::invalid_argument("expm_apply: dimension mismatch");
    if (psi.size() <= opts.dense_threshold) return expm_dense(H, psi, t);
    return expm_krylov(H, psi, t, opts);
}

} // namespace gravlab

#endif
