#ifndef GRAVLAB_BAYES_HPP
#define GRAVLAB_BAYES_HPP

#include <functional>
#include <ostream>

#include "dynamics.hpp"
#include "error_model.hpp"
#include "fisher.hpp"

namespace gravlab {

// Gauss-Hermite rule (physicists' convention) from the Golub-Welsch
// tridiagonal; weights returned already normalized to sum to one, so the
// rule integrates against a standard normal after the sqrt(2) node scaling.
struct GaussHermite {
    VectorXd nodes;
    VectorXd weights;
};

inline GaussHermite gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: need n >= 1");
    VectorXd diag = VectorXd::Zero(n);
    VectorXd sub(std::max(0, n - 1));
    for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(k / 2.0);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es;
    es.computeFromTridiagonal(diag, sub);
    GaussHermite rule;
    rule.nodes = es.eigenvalues();
    rule.weights.resize(n);
    for (int k = 0; k < n; ++k) {
        const double v0 = es.eigenvectors()(0, k);
        rule.weights[k] = v0 * v0;   // already sums to 1 (total weight sqrt(pi) cancels)
    }
    return rule;
}

// Tensor-product quadrature over the error channels with Gaussian densities
// N(0, sigma_i). Point index runs with the LAST channel varying fastest.
class QuadratureRule {
public:
    QuadratureRule() = default;

    QuadratureRule(const VectorXd& sigmas, int nodes_per_channel) {
        const GaussHermite gh = gauss_hermite(nodes_per_channel);
        const int ell = static_cast<int>(sigmas.size());
        nodes_.resize(ell);
        weights_.resize(ell);
        for (int i = 0; i < ell; ++i) {
            nodes_[i] = std::sqrt(2.0) * sigmas[i] * gh.nodes;
            weights_[i] = gh.weights;
        }
        count_ = 1;
        for (int i = 0; i < ell; ++i) count_ *= static_cast<std::size_t>(nodes_per_channel);
    }

    int channel_count() const { return static_cast<int>(nodes_.size()); }
    std::size_t point_count() const { return count_; }

    void point(std::size_t index, VectorXd& eps, double& weight) const {
        const int ell = channel_count();
        eps.resize(ell);
        weight = 1.0;
        std::size_t rem = index;
        for (int i = ell - 1; i >= 0; --i) {
            const std::size_t n = nodes_[i].size();
            const std::size_t k = rem % n;
            rem /= n;
            eps[i] = nodes_[i][k];
            weight *= weights_[i][k];
        }
    }

    double channel_weight_sum(int i) const { return weights_.at(i).sum(); }

private:
    std::vector<VectorXd> nodes_;
    std::vector<VectorXd> weights_;
    std::size_t count_ = 1;
};

inline QuadratureRule make_quadrature(const ErrorModel& model, int nodes_per_channel = 9) {
    return QuadratureRule(model.sigmas, nodes_per_channel);
}

// Discretized posterior over phi with trapezoidal normalization.
struct PhasePosterior {
    VectorXd grid;
    VectorXd density;

    double integral() const {
        double s = 0.0;
        for (Eigen::Index i = 0; i + 1 < grid.size(); ++i)
            s += 0.5 * (grid[i + 1] - grid[i]) * (density[i] + density[i + 1]);
        return s;
    }
    VectorXd trapezoid_weights() const {
        VectorXd w = VectorXd::Zero(grid.size());
        for (Eigen::Index i = 0; i + 1 < grid.size(); ++i) {
            const double h = 0.5 * (grid[i + 1] - grid[i]);
            w[i] += h;
            w[i + 1] += h;
        }
        return w;
    }
    double mean() const {
        const VectorXd w = trapezoid_weights();
        return (w.array() * density.array() * grid.array()).sum();
    }
    double variance() const {
        const VectorXd w = trapezoid_weights();
        const double m = mean();
        return (w.array() * density.array() * (grid.array() - m).square()).sum();
    }
    void normalize() {
        const double z = integral();
        if (!(z > 0.0)) throw std::runtime_error("PhasePosterior: cannot normalize zero density");
        density /= z;
    }
};

// Gaussian prior truncated to +-6 widths, renormalized on the grid.
inline PhasePosterior init_posterior(double center, double width, int grid_points = 512) {
    if (!(width > 0.0)) throw std::invalid_argument("init_posterior: width must be > 0");
    if (grid_points < 51) throw std::invalid_argument("init_posterior: need >= 51 grid points");
    PhasePosterior post;
    post.grid.resize(grid_points);
    post.density.resize(grid_points);
    const double lo = center - 6.0 * width, hi = center + 6.0 * width;
    for (int i = 0; i < grid_points; ++i) {
        const double x = lo + (hi - lo) * i / (grid_points - 1);
        post.grid[i] = x;
        const double z = (x - center) / width;
        post.density[i] = std::exp(-0.5 * z * z);
    }
    post.normalize();
    return post;
}

using Likelihood = std::function<double(double, const VectorXd&)>;

struct UpdateResult {
    PhasePosterior posterior;
    double evidence = 0.0;       // P_{alpha-1}(n_alpha)
    bool degenerate = false;     // all-zero likelihood across the grid
    VectorXd eps_mean;           // posterior mean of eps under P_alpha(phi, eps)
};

// One Bayesian step: new density proportional to the eps-marginalized
// likelihood times the old density. The joint (phi, eps) weights computed on
// the way give the per-datapoint error estimate.
inline UpdateResult update(const PhasePosterior& posterior, const Likelihood& likelihood,
                           const QuadratureRule& quadrature) {
    const Eigen::Index g = posterior.grid.size();
    const int ell = quadrature.channel_count();
    VectorXd marginal = VectorXd::Zero(g);
    VectorXd eps_num = VectorXd::Zero(ell);
    const VectorXd trap = posterior.trapezoid_weights();
    VectorXd eps;
    double w;
    double joint_total = 0.0;
    for (Eigen::Index i = 0; i < g; ++i) {
        const double phi = posterior.grid[i];
        double acc = 0.0;
        const double prior_w = trap[i] * posterior.density[i];
        for (std::size_t q = 0; q < quadrature.point_count(); ++q) {
            quadrature.point(q, eps, w);
            const double like = likelihood(phi, eps);
            acc += w * like;
            eps_num += (prior_w * w * like) * eps;
        }
        marginal[i] = acc;
        joint_total += prior_w * acc;
    }
    UpdateResult result;
    result.evidence = joint_total;
    if (!(joint_total > 0.0) || !marginal.allFinite()) {
        result.posterior = posterior;    // model mismatch: leave unchanged
        result.degenerate = true;
        result.eps_mean = VectorXd::Zero(ell);
        return result;
    }
    result.posterior.grid = posterior.grid;
    result.posterior.density = posterior.density.cwiseProduct(marginal);
    result.posterior.normalize();
    result.eps_mean = eps_num / joint_total;
    return result;
}

// Posterior mean of eps for one datapoint, Int eps P_alpha(phi, eps).
inline VectorXd datapoint_error_estimate(const PhasePosterior& prior_posterior,
                                         const Likelihood& likelihood,
                                         const QuadratureRule& quadrature) {
    return update(prior_posterior, likelihood, quadrature).eps_mean;
}

// Same update, but with the likelihood values computed in one block via the
// echo structure (requires the uniform grids produced by init_posterior).
inline UpdateResult update(const PhasePosterior& posterior, const EchoLikelihood& likelihood,
                           const QuadratureRule& quadrature) {
    const Eigen::Index g = posterior.grid.size();
    if (g > 2) {
        const double h0 = posterior.grid[1] - posterior.grid[0];
        const double span = posterior.grid[g - 1] - posterior.grid[0];
        if (std::abs(span - h0 * (g - 1)) > 1e-9 * std::abs(span))
            throw std::invalid_argument("update: echo fast path needs a uniform grid");
    }
    const MatrixXd table = likelihood.table(posterior.grid, quadrature);
    const int ell = quadrature.channel_count();
    const VectorXd trap = posterior.trapezoid_weights();
    VectorXd marginal = VectorXd::Zero(g);
    VectorXd eps_num = VectorXd::Zero(ell);
    VectorXd eps;
    double w;
    double joint_total = 0.0;
    for (std::size_t q = 0; q < quadrature.point_count(); ++q) {
        quadrature.point(q, eps, w);
        const VectorXd column = table.col(q);
        marginal += w * column;
        const double mass = (trap.array() * posterior.density.array() * column.array()).sum();
        eps_num += (w * mass) * eps;
        joint_total += w * mass;
    }
    UpdateResult result;
    result.evidence = joint_total;
    if (!(joint_total > 0.0) || !marginal.allFinite()) {
        result.posterior = posterior;
        result.degenerate = true;
        result.eps_mean = VectorXd::Zero(ell);
        return result;
    }
    result.posterior.grid = posterior.grid;
    result.posterior.density = posterior.density.cwiseProduct(marginal);
    result.posterior.normalize();
    result.eps_mean = eps_num / joint_total;
    return result;
}

struct InferenceConfig {
    double phi_true = 0.0;
    int datapoints = 100;
    int grid_points = 512;
    int quad_nodes = 9;
    bool allow_recenter = true;
    ExpmOptions expm;
};

struct InferenceTrace {
    double prior_variance = 0.0;
    std::vector<std::size_t> outcomes;
    std::vector<double> posterior_mean;
    std::vector<double> posterior_variance;
    std::vector<double> evidence;
    MatrixXd eps_estimates;      // nu x ell
    MatrixXd eps_true;           // nu x ell
    int recenter_step = -1;

    double final_variance() const {
        return posterior_variance.empty() ? prior_variance : posterior_variance.back();
    }
};

inline void write_trace_csv(std::ostream& out, const InferenceTrace& trace) {
    const int ell = static_cast<int>(trace.eps_estimates.cols());
    out << "step,outcome,posterior_mean,posterior_var";
    for (int i = 0; i < ell; ++i) out << ",eps_est_" << (i + 1);
    for (int i = 0; i < ell; ++i) out << ",eps_true_" << (i + 1);
    out << "\n";
    out << "0,," << "," << trace.prior_variance;
    for (int i = 0; i < 2 * ell; ++i) out << ",";
    out << "\n";
    for (std::size_t s = 0; s < trace.outcomes.size(); ++s) {
        out << (s + 1) << "," << trace.outcomes[s] << "," << trace.posterior_mean[s] << ","
            << trace.posterior_variance[s];
        for (int i = 0; i < ell; ++i) out << "," << trace.eps_estimates(s, i);
        for (int i = 0; i < ell; ++i) out << "," << trace.eps_true(s, i);
        out << "\n";
    }
}

// rebuild the grid around the current mass if it has collapsed to under 5%
// of the span; linear interpolation of the density onto the new grid
inline PhasePosterior recenter(const PhasePosterior& post) {
    const double m = post.mean();
    const double sd = std::sqrt(post.variance());
    PhasePosterior out;
    const int g = static_cast<int>(post.grid.size());
    out.grid.resize(g);
    out.density.resize(g);
    const double lo = m - 6.0 * sd, hi = m + 6.0 * sd;
    Eigen::Index j = 0;
    for (int i = 0; i < g; ++i) {
        const double x = lo + (hi - lo) * i / (g - 1);
        out.grid[i] = x;
        while (j + 2 < post.grid.size() && post.grid[j + 1] < x) ++j;
        if (x <= post.grid[0] || x >= post.grid[post.grid.size() - 1]) {
            out.density[i] = 0.0;
        } else {
            const double t = (x - post.grid[j]) / (post.grid[j + 1] - post.grid[j]);
            out.density[i] = (1.0 - t) * post.density[j] + t * post.density[j + 1];
        }
    }
    out.normalize();
    return out;
}

// Full Box-1 style run: nu datapoints of prepare / acquire with fresh errors /
// echo / readout / Bayesian update.
inline InferenceTrace run_inference(const BasisPtr& basis, const ErrorModel& model,
                                    const PulseSchedule& schedule,
                                    const CouplingMatrix& coupling,
                                    const InferenceConfig& config, Rng& rng) {
    model.check();
    if (basis->mode_count() != model.mode_count())
        throw std::invalid_argument("run_inference: basis/model mode mismatch");
    const StateVector psi0 = fock_ground_state(basis);
    EchoLikelihood likelihood(psi0, schedule, coupling, model.tau, config.expm);
    const QuadratureRule quadrature = make_quadrature(model, config.quad_nodes);

    PhasePosterior post = init_posterior(0.0, model.sigma_phi, config.grid_points);
    InferenceTrace trace;
    trace.prior_variance = post.variance();
    const int ell = model.channel_count;
    trace.eps_estimates.resize(config.datapoints, ell);
    trace.eps_true.resize(config.datapoints, ell);

    for (int a = 0; a < config.datapoints; ++a) {
        const ErrorDraw eps = sample_errors(model, rng);
        const VectorXd probs = echo_distribution(psi0, schedule, coupling, config.phi_true,
                                                 eps, model.tau, config.expm);
        const std::size_t outcome = sample_outcome(probs, rng);
        likelihood.set_outcome(outcome);
        const UpdateResult res = update(post, likelihood, quadrature);
        post = res.posterior;
        trace.outcomes.push_back(outcome);
        trace.posterior_mean.push_back(post.mean());
        trace.posterior_variance.push_back(post.variance());
        trace.evidence.push_back(res.evidence);
        trace.eps_estimates.row(a) = res.eps_mean.transpose();
        trace.eps_true.row(a) = eps.epsilon.transpose();

        if (config.allow_recenter && trace.recenter_step < 0) {
            const double span = post.grid[post.grid.size() - 1] - post.grid[0];
            if (12.0 * std::sqrt(post.variance()) < 0.05 * span) {
                post = recenter(post);
                trace.recenter_step = a + 1;
            }
        }
    }
    return trace;
}

struct VanTreesReport {
    std::vector<double> bound;           // 1/F_eff^(alpha) per step
    std::vector<double> mean_variance;   // across traces
    std::vector<double> slack;           // statistical slack per step
    bool ok = true;
    int first_violation = -1;
};

// Checks mean posterior variance against the van Trees floor 1/F_eff^(alpha),
// with slack 3 SE / mean estimated from the runs themselves.
inline VanTreesReport van_trees_check(const std::vector<InferenceTrace>& traces,
                                      double f_eff_1, double prior_phi_information) {
    if (traces.empty()) throw std::invalid_argument("van_trees_check: no traces");
    const std::size_t steps = traces.front().posterior_variance.size();
    VanTreesReport report;
    const double runs = static_cast<double>(traces.size());
    for (std::size_t a = 0; a < steps; ++a) {
        double sum = 0.0, sum2 = 0.0;
        for (const auto& t : traces) {
            const double v = t.posterior_variance.at(a);
            sum += v;
            sum2 += v * v;
        }
        const double mean = sum / runs;
        const double var = std::max(0.0, sum2 / runs - mean * mean);
        const double se = std::sqrt(var / runs);
        const double fa = effective_fisher_after(static_cast<int>(a) + 1, f_eff_1,
                                                 prior_phi_information);
        report.bound.push_back(1.0 / fa);
        report.mean_variance.push_back(mean);
        report.slack.push_back(mean > 0.0 ? 3.0 * se / mean : 0.0);
        const bool step_ok = mean >= (1.0 - report.slack.back()) / fa;
        if (!step_ok && report.ok) {
            report.ok = false;
            report.first_violation = static_cast<int>(a) + 1;
        }
    }
    return report;
}

} // namespace gravlab

#endif
