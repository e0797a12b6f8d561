#ifndef GRAVLAB_DYNAMICS_HPP
#define GRAVLAB_DYNAMICS_HPP

#include <complex>
#include <stdexcept>

#include <json.hpp>

#include "error_model.hpp"
#include "expm.hpp"
#include "fock.hpp"
#include "rng.hpp"

namespace gravlab {

// One random control sequence: n pairs of (diagonal pulse, hopping pulse),
// each of width dt = T/(2n). J rows in [0,1], Delta and U rows in [-1,1].
struct PulseSchedule {
    int pulse_pairs = 0;
    double total_time = 0.0;
    MatrixXd J;        // n x (L-1)
    MatrixXd Delta;    // n x L
    MatrixXd U;        // n x L
    std::uint64_t seed = 0;

    double dt() const { return total_time / (2.0 * pulse_pairs); }
    int mode_count() const { return static_cast<int>(Delta.cols()); }

    void check() const {
        if (pulse_pairs < 1) throw std::invalid_argument("PulseSchedule: need n >= 1");
        if (!(total_time > 0.0)) throw std::invalid_argument("PulseSchedule: need T > 0");
        if (J.rows() != pulse_pairs || Delta.rows() != pulse_pairs || U.rows() != pulse_pairs)
            throw std::invalid_argument("PulseSchedule: row counts must equal n");
        if (J.cols() != Delta.cols() - 1 || U.cols() != Delta.cols())
            throw std::invalid_argument("PulseSchedule: column counts inconsistent");
    }
};

inline PulseSchedule random_schedule(int pulse_pairs, double total_time, int mode_count,
                                     std::uint64_t seed) {
    if (pulse_pairs < 1) throw std::invalid_argument("random_schedule: need n >= 1");
    if (!(total_time > 0.0)) throw std::invalid_argument("random_schedule: need T > 0");
    Rng rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_real_distribution<double> u11(-1.0, 1.0);
    PulseSchedule s;
    s.pulse_pairs = pulse_pairs;
    s.total_time = total_time;
    s.seed = seed;
    s.J.resize(pulse_pairs, mode_count - 1);
    s.Delta.resize(pulse_pairs, mode_count);
    s.U.resize(pulse_pairs, mode_count);
    for (int k = 0; k < pulse_pairs; ++k) {
        for (int i = 0; i < mode_count - 1; ++i) s.J(k, i) = u01(rng);
        for (int i = 0; i < mode_count; ++i) s.Delta(k, i) = u11(rng);
        for (int i = 0; i < mode_count; ++i) s.U(k, i) = u11(rng);
    }
    return s;
}

inline void to_json(nlohmann::json& j, const PulseSchedule& s) {
    auto dump = [](const MatrixXd& m) {
        std::vector<std::vector<double>> rows(m.rows());
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            rows[r].resize(m.cols());
            for (Eigen::Index c = 0; c < m.cols(); ++c) rows[r][c] = m(r, c);
        }
        return rows;
    };
    j = nlohmann::json{{"n", s.pulse_pairs}, {"T", s.total_time}, {"seed", s.seed},
                       {"J", dump(s.J)}, {"Delta", dump(s.Delta)}, {"U", dump(s.U)}};
}

inline void from_json(const nlohmann::json& j, PulseSchedule& s) {
    auto parse = [](const nlohmann::json& a) {
        MatrixXd m(a.size(), a.empty() ? 0 : a[0].size());
        for (std::size_t r = 0; r < a.size(); ++r)
            for (std::size_t c = 0; c < a[r].size(); ++c) m(r, c) = a[r][c].get<double>();
        return m;
    };
    s.pulse_pairs = j.at("n").get<int>();
    s.total_time = j.at("T").get<double>();
    s.seed = j.value("seed", std::uint64_t{0});
    s.J = parse(j.at("J"));
    s.Delta = parse(j.at("Delta"));
    s.U = parse(j.at("U"));
    s.check();
}

namespace detail {

// diagonal of H1 = sum_i Delta_i n_i + U_i n_i (n_i - 1) for pulse k
inline VectorXd diagonal_pulse(const FockBasis& basis, const PulseSchedule& s, int k) {
    const int L = basis.mode_count();
    VectorXd diag(basis.dimension());
    for (std::size_t m = 0; m < basis.dimension(); ++m) {
        const int* occ = basis.occupation(m);
        double v = 0.0;
        for (int i = 0; i < L; ++i)
            v += s.Delta(k, i) * occ[i] + s.U(k, i) * occ[i] * (occ[i] - 1);
        diag[m] = v;
    }
    return diag;
}

inline void apply_diagonal_phase(VectorXcd& psi, const VectorXd& theta) {
    for (Eigen::Index i = 0; i < psi.size(); ++i)
        psi[i] *= std::exp(std::complex<double>(0.0, -theta[i]));
}

} // namespace detail

// U_SP psi: for k = 1..n, exp(-i dt H1^(k)) then exp(-i dt H2^(k)).
inline StateVector prepare_state(const StateVector& psi0, const PulseSchedule& schedule,
                                 const ExpmOptions& opts = {}) {
    psi0.check();
    schedule.check();
    if (schedule.mode_count() != psi0.basis->mode_count())
        throw std::invalid_argument("prepare_state: schedule/basis mode mismatch");
    const double dt = schedule.dt();
    VectorXcd psi = psi0.amplitudes;
    for (int k = 0; k < schedule.pulse_pairs; ++k) {
        detail::apply_diagonal_phase(psi, dt * detail::diagonal_pulse(*psi0.basis, schedule, k));
        const HoppingOperator hop = hopping_matrix(psi0.basis, schedule.J.row(k).transpose());
        psi = expm_apply(hop.matrix, psi, dt, opts);
    }
    psi /= psi.norm();   // removes accumulated roundoff only
    return {psi0.basis, psi};
}

// U_SP^{-1} psi: adjoint pulses in reverse order.
inline VectorXcd apply_inverse_schedule(const BasisPtr& basis, VectorXcd psi,
                                        const PulseSchedule& schedule,
                                        const ExpmOptions& opts = {}) {
    const double dt = schedule.dt();
    for (int k = schedule.pulse_pairs - 1; k >= 0; --k) {
        const HoppingOperator hop = hopping_matrix(basis, schedule.J.row(k).transpose());
        psi = expm_apply(hop.matrix, psi, -dt, opts);
        detail::apply_diagonal_phase(psi, -dt * detail::diagonal_pulse(*basis, schedule, k));
    }
    return psi;
}

// Diagonal phase acquisition: amplitude of |n> picks up
// exp(-i [phi g_0(n) + tau sum_i eps_i g_i(n)]).
inline StateVector phase_evolve(const StateVector& state, const CouplingMatrix& coupling,
                                double phi, const ErrorDraw& eps, double tau) {
    state.check();
    if (eps.epsilon.size() != coupling.channel_count())
        throw std::invalid_argument("phase_evolve: epsilon length mismatch");
    const MatrixXd g = generator_table(coupling, state.basis);
    VectorXd theta = phi * g.col(0);
    for (int i = 0; i < coupling.channel_count(); ++i)
        theta += tau * eps.epsilon[i] * g.col(i + 1);
    VectorXcd amps = state.amplitudes;
    detail::apply_diagonal_phase(amps, theta);
    return {state.basis, amps};
}

// P(n) = |<n| U_SP^{-1} D(phi,eps) U_SP |psi0>|^2
inline VectorXd echo_distribution(const StateVector& psi0, const PulseSchedule& schedule,
                                  const CouplingMatrix& coupling, double phi,
                                  const ErrorDraw& eps, double tau,
                                  const ExpmOptions& opts = {}) {
    const StateVector prepared = prepare_state(psi0, schedule, opts);
    const StateVector phased = phase_evolve(prepared, coupling, phi, eps, tau);
    const VectorXcd out = apply_inverse_schedule(psi0.basis, phased.amplitudes, schedule, opts);
    return out.cwiseAbs2();
}

// inverse-CDF sample from a probability vector; returns the basis index
inline std::size_t sample_outcome(const VectorXd& probabilities, Rng& rng) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
        if (probabilities[i] < -1e-12)
            throw std::invalid_argument("sample_outcome: negative probability");
        total += std::max(0.0, probabilities[i]);
    }
    if (total <= 0.0) throw std::invalid_argument("sample_outcome: zero distribution");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double target = u(rng) * total;
    double cum = 0.0;
    for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
        cum += std::max(0.0, probabilities[i]);
        if (target <= cum) return static_cast<std::size_t>(i);
    }
    return static_cast<std::size_t>(probabilities.size() - 1);
}

struct EchoDerivatives {
    VectorXd probabilities;   // P(n | phi, eps)
    MatrixXd gradients;       // (ell+1) x d, rows are dP/dphi, dP/deps_i
};

// Probabilities and their analytic derivatives with respect to
// x = (phi, eps_1..eps_ell). dP_n = 2 Re[A_n^* <n|U_M (-i w_i G_i) D U_SP|psi0>]
// with w_0 = 1 and w_i = tau.
inline EchoDerivatives echo_distribution_with_gradients(
    const StateVector& psi0, const PulseSchedule& schedule, const CouplingMatrix& coupling,
    double phi, const ErrorDraw& eps, double tau, const ExpmOptions& opts = {}) {
    const int np = coupling.channel_count() + 1;
    const StateVector prepared = prepare_state(psi0, schedule, opts);
    const MatrixXd g = generator_table(coupling, psi0.basis);

    VectorXd theta = phi * g.col(0);
    for (int i = 0; i < coupling.channel_count(); ++i)
        theta += tau * eps.epsilon[i] * g.col(i + 1);
    VectorXcd phased = prepared.amplitudes;
    detail::apply_diagonal_phase(phased, theta);

    const VectorXcd A = apply_inverse_schedule(psi0.basis, phased, schedule, opts);
    EchoDerivatives result;
    result.probabilities = A.cwiseAbs2();
    result.gradients.resize(np, psi0.basis->dimension());
    const std::complex<double> mi(0.0, -1.0);
    for (int i = 0; i < np; ++i) {
        const double w = (i == 0) ? 1.0 : tau;
        VectorXcd dpsi = (mi * w) * g.col(i).cast<std::complex<double>>().cwiseProduct(phased);
        const VectorXcd dA = apply_inverse_schedule(psi0.basis, dpsi, schedule, opts);
        result.gradients.row(i) = 2.0 * (A.conjugate().cwiseProduct(dA)).real();
    }
    return result;
}

// Fast per-outcome echo likelihood: with U_M = U_SP^{-1} and diagonal D,
// P(n | phi, eps) = |chi^dag (D(phi,eps) psi_prep)|^2 with chi = U_SP |n>,
// so each evaluation is O(d) after one schedule application per outcome.
class EchoLikelihood {
public:
    EchoLikelihood(const StateVector& psi0, const PulseSchedule& schedule,
                   const CouplingMatrix& coupling, double tau, const ExpmOptions& opts = {})
        : basis_(psi0.basis), schedule_(schedule), tau_(tau), opts_(opts),
          prepared_(prepare_state(psi0, schedule, opts).amplitudes),
          generators_(generator_table(coupling, psi0.basis)) {}

    void set_outcome(std::size_t outcome_index) {
        VectorXcd unit = VectorXcd::Zero(basis_->dimension());
        unit[outcome_index] = 1.0;
        // chi = U_SP |n> = (U_SP^{-1})^dag |n>
        StateVector unit_state{basis_, unit};
        chi_ = prepare_state(unit_state, schedule_, opts_).amplitudes;
        weighted_ = chi_.conjugate().cwiseProduct(prepared_);
    }

    double operator()(double phi, const VectorXd& eps) const {
        std::complex<double> amp(0.0, 0.0);
        const Eigen::Index d = weighted_.size();
        for (Eigen::Index m = 0; m < d; ++m) {
            double theta = phi * generators_(m, 0);
            for (Eigen::Index i = 0; i < eps.size(); ++i)
                theta += tau_ * eps[i] * generators_(m, i + 1);
            amp += weighted_[m] * std::exp(std::complex<double>(0.0, -theta));
        }
        return std::norm(amp);
    }

    const VectorXcd& prepared() const { return prepared_; }

    // P(outcome | phi_g, eps_q) for a uniform phi grid and all quadrature
    // nodes at once. The uniform spacing turns the per-node phase into a
    // running product, one complex multiply per (grid, node, basis) entry.
    template <typename Quadrature>
    MatrixXd table(const VectorXd& phi_grid, const Quadrature& quadrature) const {
        const Eigen::Index g = phi_grid.size();
        const Eigen::Index d = weighted_.size();
        const std::size_t q = quadrature.point_count();
        const double h = g > 1 ? (phi_grid[g - 1] - phi_grid[0]) / (g - 1) : 0.0;

        MatrixXd out(g, q);
        VectorXcd u(d), phase(d), step(d);
        for (Eigen::Index m = 0; m < d; ++m) {
            phase[m] = std::exp(std::complex<double>(0.0, -phi_grid[0] * generators_(m, 0)));
            step[m] = std::exp(std::complex<double>(0.0, -h * generators_(m, 0)));
        }
        VectorXd eps;
        double w;
        for (std::size_t k = 0; k < q; ++k) {
            quadrature.point(k, eps, w);
            for (Eigen::Index m = 0; m < d; ++m) {
                double theta = 0.0;
                for (Eigen::Index i = 0; i < eps.size(); ++i)
                    theta += tau_ * eps[i] * generators_(m, i + 1);
                u[m] = weighted_[m] * std::exp(std::complex<double>(0.0, -theta));
            }
            VectorXcd run = phase;
            for (Eigen::Index i = 0; i < g; ++i) {
                std::complex<double> amp(0.0, 0.0);
                for (Eigen::Index m = 0; m < d; ++m) amp += u[m] * run[m];
                out(i, k) = std::norm(amp);
                if (i + 1 < g) run.array() *= step.array();
            }
        }
        return out;
    }

private:
    BasisPtr basis_;
    PulseSchedule schedule_;
    double tau_;
    ExpmOptions opts_;
    VectorXcd prepared_;
    MatrixXd generators_;
    VectorXcd chi_;
    VectorXcd weighted_;
};

} // namespace gravlab

#endif
