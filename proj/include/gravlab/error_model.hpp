#ifndef GRAVLAB_ERROR_MODEL_HPP
#define GRAVLAB_ERROR_MODEL_HPP

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fock.hpp"
#include "rng.hpp"

namespace gravlab {

// Spatial-inhomogeneity error channels: profile table f_ij = f_i(z_j),
// per-channel widths sigma_i, prior width sigma_phi on the signal phase,
// and the phase-acquisition time tau.
struct ErrorModel {
    int channel_count = 0;          // number of error channels
    VectorXd site_positions;        // z_1..z_L, default z_j = j
    MatrixXd profiles;              // channel_count x L
    VectorXd sigmas;                // std dev of each epsilon_i, > 0
    double sigma_phi = 0.01;
    double tau = 1.0;

    int mode_count() const { return static_cast<int>(site_positions.size()); }

    void check() const {
        if (channel_count < 0) throw std::invalid_argument("ErrorModel: negative channel count");
        if (profiles.rows() != channel_count || profiles.cols() != mode_count())
            throw std::invalid_argument("ErrorModel: profile table must be channels x sites");
        if (sigmas.size() != channel_count)
            throw std::invalid_argument("ErrorModel: one sigma per channel required");
        for (int i = 0; i < channel_count; ++i)
            if (!(sigmas[i] > 0.0)) throw std::invalid_argument("ErrorModel: sigmas must be > 0");
        if (!(sigma_phi > 0.0)) throw std::invalid_argument("ErrorModel: sigma_phi must be > 0");
        if (!(tau > 0.0)) throw std::invalid_argument("ErrorModel: tau must be > 0");
    }
};

inline VectorXd default_site_positions(int mode_count) {
    VectorXd z(mode_count);
    for (int j = 0; j < mode_count; ++j) z[j] = j + 1;
    return z;
}

inline ErrorModel make_error_model(int mode_count, const MatrixXd& profiles,
                                   const VectorXd& sigmas, double sigma_phi,
                                   double tau = 1.0) {
    ErrorModel model;
    model.channel_count = static_cast<int>(profiles.rows());
    model.site_positions = default_site_positions(mode_count);
    model.profiles = profiles;
    model.sigmas = sigmas;
    model.sigma_phi = sigma_phi;
    model.tau = tau;
    model.check();
    return model;
}

// profiles with every f_ij uniformly random in [-1, 1]
inline MatrixXd random_profiles(int channel_count, int mode_count, Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MatrixXd f(channel_count, mode_count);
    for (int i = 0; i < channel_count; ++i)
        for (int j = 0; j < mode_count; ++j) f(i, j) = u(rng);
    return f;
}

// CSV profile table: one row per channel, one column per site
inline MatrixXd load_profiles_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_profiles_csv: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("load_profiles_csv: ragged rows in " + path);
        rows.push_back(std::move(row));
    }
    MatrixXd f(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) f(i, j) = rows[i][j];
    return f;
}

// Rows of coefficients of n-hat_j: row 0 is the gravity row (site index),
// rows 1..ell are the error profiles. Centered rows are orthogonal to the
// all-ones vector.
struct CouplingMatrix {
    MatrixXd rows;       // (ell+1) x L
    bool centered = false;

    int channel_count() const { return static_cast<int>(rows.rows()) - 1; }
    int mode_count() const { return static_cast<int>(rows.cols()); }
};

inline CouplingMatrix build_coupling(const ErrorModel& model, bool center) {
    model.check();
    const int L = model.mode_count();
    MatrixXd rows(model.channel_count + 1, L);
    rows.row(0) = model.site_positions.transpose();
    if (model.channel_count > 0) rows.bottomRows(model.channel_count) = model.profiles;
    if (center)
        rows.colwise() -= rows.rowwise().mean();
    return {rows, center};
}

struct ErrorDraw {
    VectorXd epsilon;    // one sample of (eps_1..eps_ell)
};

inline ErrorDraw sample_errors(const ErrorModel& model, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    VectorXd eps(model.channel_count);
    for (int i = 0; i < model.channel_count; ++i) eps[i] = model.sigmas[i] * gauss(rng);
    return {eps};
}

inline ErrorDraw zero_errors(const ErrorModel& model) {
    return {VectorXd::Zero(model.channel_count)};
}

// diag(1/sigma_phi^2, 1/sigma_1^2, ..., 1/sigma_ell^2)
inline VectorXd prior_information(const ErrorModel& model) {
    model.check();
    VectorXd diag(model.channel_count + 1);
    diag[0] = 1.0 / (model.sigma_phi * model.sigma_phi);
    for (int i = 0; i < model.channel_count; ++i)
        diag[i + 1] = 1.0 / (model.sigmas[i] * model.sigmas[i]);
    return diag;
}

// H_channel = sum_j rows[channel][j] n-hat_j as a diagonal observable
inline DiagonalObservable error_generator(const CouplingMatrix& coupling, int channel,
                                          const BasisPtr& basis) {
    if (channel < 0 || channel > coupling.channel_count())
        throw std::out_of_range("error_generator: channel out of range");
    if (coupling.mode_count() != basis->mode_count())
        throw std::invalid_argument("error_generator: coupling/basis mode mismatch");
    const int L = basis->mode_count();
    VectorXd diag(basis->dimension());
    for (std::size_t k = 0; k < basis->dimension(); ++k) {
        const int* occ = basis->occupation(k);
        double v = 0.0;
        for (int j = 0; j < L; ++j) v += coupling.rows(channel, j) * occ[j];
        diag[k] = v;
    }
    return {basis, diag};
}

// All generator diagonals at once: column i holds the eigenvalues of H_i.
inline MatrixXd generator_table(const CouplingMatrix& coupling, const BasisPtr& basis) {
    const int L = basis->mode_count();
    const int n = coupling.channel_count() + 1;
    if (coupling.mode_count() != L)
        throw std::invalid_argument("generator_table: coupling/basis mode mismatch");
    MatrixXd table(basis->dimension(), n);
    for (std::size_t k = 0; k < basis->dimension(); ++k) {
        const int* occ = basis->occupation(k);
        for (int i = 0; i < n; ++i) {
            double v = 0.0;
            for (int j = 0; j < L; ++j) v += coupling.rows(i, j) * occ[j];
            table(k, i) = v;
        }
    }
    return table;
}

} // namespace gravlab

#endif
