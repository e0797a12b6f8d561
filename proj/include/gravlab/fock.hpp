#ifndef GRAVLAB_FOCK_HPP
#define GRAVLAB_FOCK_HPP

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace gravlab {

using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using SparseSym = Eigen::SparseMatrix<double>;

constexpr std::size_t kDefaultDimensionCap = 200000;

// Number of Fock states of N bosons in L modes, binomial(N+L-1, N).
// Throws once the running value exceeds `cap` so huge sectors fail fast.
inline std::size_t fock_dimension(int atom_count, int mode_count,
                                  std::size_t cap = kDefaultDimensionCap) {
    if (atom_count < 0) throw std::invalid_argument("fock_dimension: N must be >= 0");
    if (mode_count < 1) throw std::invalid_argument("fock_dimension: L must be >= 1");
    // binomial(N+L-1, L-1) built up factor by factor, exact in integers
    std::uint64_t num = 1;
    for (int i = 1; i <= mode_count - 1; ++i) {
        num = num * static_cast<std::uint64_t>(atom_count + i) / static_cast<std::uint64_t>(i);
        if (num > 100 * static_cast<std::uint64_t>(cap) + 1000000ULL)
            throw std::length_error(
                "fock_dimension: Hilbert space dimension exceeds the configured cap (" +
                std::to_string(cap) + " states); reduce N or L, or raise the cap");
    }
    if (num > cap)
        throw std::length_error(
            "fock_dimension: dimension " + std::to_string(num) +
            " exceeds the configured cap (" + std::to_string(cap) + " states)");
    return static_cast<std::size_t>(num);
}

// Fock basis of N bosons in L modes, ordered lexicographically descending in
// the occupation of site 1, then site 2, and so on: (N,0,...,0) comes first.
// Immutable after construction.
class FockBasis {
public:
    FockBasis(int atom_count, int mode_count, std::size_t cap = kDefaultDimensionCap)
        : atom_count_(atom_count), mode_count_(mode_count),
          dim_(fock_dimension(atom_count, mode_count, cap)) {
        build_binomials();
        enumerate();
    }

    int atom_count() const { return atom_count_; }
    int mode_count() const { return mode_count_; }
    std::size_t dimension() const { return dim_; }

    // occupation numbers of basis state k
    const int* occupation(std::size_t k) const { return states_.data() + k * mode_count_; }
    int occupation(std::size_t k, int site0) const { return states_[k * mode_count_ + site0]; }

    std::vector<int> occupation_vector(std::size_t k) const {
        const int* p = occupation(k);
        return std::vector<int>(p, p + mode_count_);
    }

    // combinatorial rank of an occupation vector; inverse of occupation()
    std::size_t index_of(const int* occ) const {
        std::size_t rank = 0;
        int remaining = atom_count_;
        for (int i = 0; i < mode_count_ - 1; ++i) {
            const int ni = occ[i];
            // states sharing the prefix whose i-th entry is larger come first
            for (int v = remaining; v > ni; --v)
                rank += binom(remaining - v + mode_count_ - i - 2, mode_count_ - i - 2);
            remaining -= ni;
        }
        return rank;
    }
    std::size_t index_of(const std::vector<int>& occ) const {
        if (static_cast<int>(occ.size()) != mode_count_)
            throw std::invalid_argument("index_of: occupation length does not match mode count");
        return index_of(occ.data());
    }

private:
    void build_binomials() {
        const int m = atom_count_ + mode_count_;
        binom_.assign(static_cast<std::size_t>(m + 1) * (m + 1), 0.0);
        for (int a = 0; a <= m; ++a) {
            at(a, 0) = 1;
            for (int b = 1; b <= a; ++b)
                at(a, b) = at(a - 1, b - 1) + (b <= a - 1 ? at(a - 1, b) : 0);
        }
    }
    double& at(int a, int b) { return binom_[static_cast<std::size_t>(a) * (atom_count_ + mode_count_ + 1) + b]; }
    std::size_t binom(int a, int b) const {
        if (b < 0 || b > a || a < 0) return 0;
        return static_cast<std::size_t>(
            binom_[static_cast<std::size_t>(a) * (atom_count_ + mode_count_ + 1) + b]);
    }

    void enumerate() {
        states_.reserve(dim_ * mode_count_);
        std::vector<int> occ(mode_count_, 0);
        fill(occ, 0, atom_count_);
    }
    void fill(std::vector<int>& occ, int site, int remaining) {
        if (site == mode_count_ - 1) {
            occ[site] = remaining;
            states_.insert(states_.end(), occ.begin(), occ.end());
            return;
        }
        for (int v = remaining; v >= 0; --v) {
            occ[site] = v;
            fill(occ, site + 1, remaining - v);
        }
    }

    int atom_count_;
    int mode_count_;
    std::size_t dim_;
    std::vector<int> states_;
    std::vector<double> binom_;
};

using BasisPtr = std::shared_ptr<const FockBasis>;

inline BasisPtr build_basis(int atom_count, int mode_count,
                            std::size_t cap = kDefaultDimensionCap) {
    return std::make_shared<const FockBasis>(atom_count, mode_count, cap);
}

// Normalized complex amplitudes over a Fock basis.
struct StateVector {
    BasisPtr basis;
    VectorXcd amplitudes;

    double norm() const { return amplitudes.norm(); }

    void check(double tol = 1e-10) const {
        if (!basis) throw std::invalid_argument("StateVector: null basis");
        if (amplitudes.size() != static_cast<Eigen::Index>(basis->dimension()))
            throw std::invalid_argument("StateVector: amplitude length does not match basis");
        if (std::abs(norm() - 1.0) > tol)
            throw std::invalid_argument("StateVector: state is not normalized");
    }
};

// |N,0,...,0>: all atoms in the first site (Fock state, index 0 in this order)
inline StateVector fock_ground_state(const BasisPtr& basis) {
    StateVector psi{basis, VectorXcd::Zero(basis->dimension())};
    psi.amplitudes[0] = 1.0;
    return psi;
}

// A real observable diagonal in the Fock basis.
struct DiagonalObservable {
    BasisPtr basis;
    VectorXd diagonal;
};

// Sparse Hermitian hopping operator sum_i J_i (a+_i a_{i+1} + a+_{i+1} a_i).
struct HoppingOperator {
    BasisPtr basis;
    SparseSym matrix;   // real symmetric
};

// diagonal of n-hat_site; `site` is 1-based as in the lattice labelling
inline DiagonalObservable number_diagonal(const BasisPtr& basis, int site) {
    if (site < 1 || site > basis->mode_count())
        throw std::out_of_range("number_diagonal: site out of range");
    VectorXd diag(basis->dimension());
    for (std::size_t k = 0; k < basis->dimension(); ++k)
        diag[k] = basis->occupation(k, site - 1);
    return {basis, diag};
}

inline HoppingOperator hopping_matrix(const BasisPtr& basis, const VectorXd& bond_weights) {
    const int L = basis->mode_count();
    if (bond_weights.size() != L - 1)
        throw std::invalid_argument("hopping_matrix: expected L-1 bond weights");
    if (!bond_weights.allFinite())
        throw std::invalid_argument("hopping_matrix: bond weights must be finite");
    const std::size_t d = basis->dimension();
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(2 * d * (L > 1 ? L - 1 : 1));
    std::vector<int> occ(L);
    for (std::size_t k = 0; k < d; ++k) {
        const int* s = basis->occupation(k);
        for (int i = 0; i < L - 1; ++i) {
            if (s[i + 1] > 0) {    // a+_i a_{i+1}
                std::copy(s, s + L, occ.begin());
                occ[i] += 1; occ[i + 1] -= 1;
                const std::size_t m = basis->index_of(occ.data());
                entries.emplace_back(static_cast<int>(m), static_cast<int>(k),
                                     bond_weights[i] * std::sqrt(double(s[i] + 1) * s[i + 1]));
            }
            if (s[i] > 0) {        // a+_{i+1} a_i
                std::copy(s, s + L, occ.begin());
                occ[i] -= 1; occ[i + 1] += 1;
                const std::size_t m = basis->index_of(occ.data());
                entries.emplace_back(static_cast<int>(m), static_cast<int>(k),
                                     bond_weights[i] * std::sqrt(double(s[i]) * (s[i + 1] + 1)));
            }
        }
    }
    SparseSym H(d, d);
    H.setFromTriplets(entries.begin(), entries.end());
    return {basis, H};
}

struct OccupancyMoments {
    VectorXd mean;        // <n_i>
    MatrixXd second;      // <n_i n_j>
};

// Exact first and second occupancy moments; diagonal observables commute so
// these are plain probability-weighted sums over basis states.
inline OccupancyMoments occupancy_moments(const StateVector& state, double tol = 1e-8) {
    if (!state.basis) throw std::invalid_argument("occupancy_moments: null basis");
    if (std::abs(state.norm() - 1.0) > tol)
        throw std::invalid_argument("occupancy_moments: state is not normalized");
    const FockBasis& basis = *state.basis;
    const int L = basis.mode_count();
    VectorXd mean = VectorXd::Zero(L);
    MatrixXd second = MatrixXd::Zero(L, L);
    VectorXd occ(L);
    for (std::size_t k = 0; k < basis.dimension(); ++k) {
        const double w = std::norm(state.amplitudes[k]);
        if (w == 0.0) continue;
        const int* s = basis.occupation(k);
        for (int i = 0; i < L; ++i) occ[i] = s[i];
        mean += w * occ;
        second.selfadjointView<Eigen::Lower>().rankUpdate(occ, w);
    }
    second.triangularView<Eigen::StrictlyUpper>() = second.transpose();
    return {mean, second};
}

} // namespace gravlab

#endif
