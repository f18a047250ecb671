#pragma once

// Reservoir computing shared by both predictors: a leaky-integrator random
// reservoir with a ridge-trained linear readout. The ESN position forecaster
// and the rate-based LSM request predictor are thin wrappers over the same
// machinery.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

namespace uawnsim {

struct ReservoirConfig {
    int reservoir_size{100};
    double spectral_radius{0.9};
    double input_scale{1.0};
    double leak_rate{0.3};
    double connectivity{0.1};
    double ridge_lambda{1e-4};
    int washout{20};
    std::uint64_t seed{1};
};

struct ReservoirModel {
    ReservoirConfig config;
    int input_dim{0};
    int output_dim{0};
    Eigen::MatrixXd w_in;   // reservoir_size x input_dim
    Eigen::MatrixXd w;      // reservoir_size x reservoir_size, rescaled to spectral_radius
    Eigen::VectorXd state;  // reservoir_size
    Eigen::MatrixXd w_out;  // output_dim x reservoir_size, empty until trained

    bool trained() const { return w_out.size() > 0; }
};

inline double spectral_radius(const Eigen::MatrixXd& m) {
    return m.eigenvalues().cwiseAbs().maxCoeff();
}

/// Build a sparse random reservoir rescaled to the configured spectral radius.
/// Deterministic in config.seed. A degenerate draw (zero radius) is retried
/// with a derived sub-seed, up to 8 attempts.
inline ReservoirModel init_reservoir(const ReservoirConfig& cfg, int input_dim, int output_dim) {
    if (input_dim < 1 || output_dim < 1) {
        throw std::invalid_argument("init_reservoir: dims must be >= 1");
    }
    if (cfg.reservoir_size < 1 || !(cfg.spectral_radius > 0.0) || !(cfg.spectral_radius < 1.0) ||
        !(cfg.leak_rate > 0.0) || !(cfg.leak_rate <= 1.0) || !(cfg.connectivity > 0.0) ||
        !(cfg.connectivity <= 1.0) || cfg.washout < 0 || !(cfg.ridge_lambda >= 0.0)) {
        throw std::invalid_argument("init_reservoir: config outside invariants");
    }

    const int n = cfg.reservoir_size;
    for (int attempt = 0; attempt < 8; ++attempt) {
        std::uint64_t s = cfg.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(attempt);
        std::mt19937_64 rng(s);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::uniform_real_distribution<double> u11(-1.0, 1.0);

        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double gate = u01(rng);
                const double val = u11(rng);
                if (gate < cfg.connectivity) w(i, j) = val;
            }
        }
        const double rho = spectral_radius(w);
        if (!(rho > 0.0)) continue;  // degenerate draw, derive a sub-seed
        w *= cfg.spectral_radius / rho;

        ReservoirModel m;
        m.config = cfg;
        m.input_dim = input_dim;
        m.output_dim = output_dim;
        m.w = std::move(w);
        m.w_in.resize(n, input_dim);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < input_dim; ++j) m.w_in(i, j) = cfg.input_scale * u11(rng);
        }
        m.state = Eigen::VectorXd::Zero(n);
        return m;
    }
    throw std::runtime_error("init_reservoir: degenerate reservoir draw after 8 attempts");
}

/// Leaky-integrator update: state <- (1-a)*state + a*tanh(W_in*u + W*state).
inline const Eigen::VectorXd& update_state(ReservoirModel& m, const Eigen::VectorXd& input) {
    if (input.size() != m.input_dim) {
        throw std::invalid_argument("update_state: input dimension mismatch");
    }
    const double a = m.config.leak_rate;
    m.state = (1.0 - a) * m.state + a * (m.w_in * input + m.w * m.state).array().tanh().matrix();
    return m.state;
}

/// Ridge regression for the readout: minimize ||W*S - Y||^2 + lambda*||W||^2.
/// states is samples x reservoir_size, targets is samples x output_dim;
/// returns output_dim x reservoir_size. lambda = 0 requires a well-conditioned
/// normal matrix and otherwise raises a numerical error suggesting lambda > 0.
inline Eigen::MatrixXd ridge_readout(const Eigen::MatrixXd& states, const Eigen::MatrixXd& targets,
                                     double lambda) {
    if (states.rows() < 1 || states.rows() != targets.rows()) {
        throw std::invalid_argument("ridge_readout: need >= 1 aligned sample rows");
    }
    if (!(lambda >= 0.0)) throw std::invalid_argument("ridge_readout: lambda must be >= 0");
    const Eigen::MatrixXd gram =
        states.transpose() * states +
        lambda * Eigen::MatrixXd::Identity(states.cols(), states.cols());
    const Eigen::MatrixXd rhs = states.transpose() * targets;
    if (lambda == 0.0) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
        if (!lu.isInvertible()) {
            throw std::runtime_error(
                "ridge_readout: singular normal matrix with lambda = 0; use lambda > 0");
        }
        return lu.solve(rhs).transpose();
    }
    return gram.ldlt().solve(rhs).transpose();
}

inline void fit_readout(ReservoirModel& m, const Eigen::MatrixXd& states,
                        const Eigen::MatrixXd& targets, double lambda) {
    if (states.cols() != m.config.reservoir_size || targets.cols() != m.output_dim) {
        throw std::invalid_argument("fit_readout: matrix shapes do not match the model");
    }
    m.w_out = ridge_readout(states, targets, lambda);
}

inline Eigen::VectorXd readout(const ReservoirModel& m) {
    if (!m.trained()) throw std::invalid_argument("readout: model has no trained readout");
    return m.w_out * m.state;
}

/// Map a raw readout to a probability vector: shift by the minimum, clip at
/// zero, divide by the sum; uniform fallback when everything cancels.
inline Eigen::VectorXd to_distribution(Eigen::VectorXd v) {
    if (v.size() == 0) throw std::invalid_argument("to_distribution: empty vector");
    v.array() -= v.minCoeff();
    v = v.cwiseMax(0.0);
    const double s = v.sum();
    if (!(s > 0.0) || !std::isfinite(s)) {
        return Eigen::VectorXd::Constant(v.size(), 1.0 / static_cast<double>(v.size()));
    }
    return v / s;
}

// --- textual serialization (dims, then row-major weights as decimal text) ---

namespace detail {

/// Shortest text form that round-trips an IEEE754 double exactly.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out << fmt_double(m(i, j)) << (j + 1 == m.cols() ? "" : " ");
        }
        out << "\n";
    }
}

inline Eigen::MatrixXd read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            if (!(in >> m(i, j))) throw std::runtime_error("reservoir model: truncated weight block");
        }
    }
    return m;
}

}  // namespace detail

inline void save_model(const ReservoirModel& m, std::ostream& out) {
    out << "uawnsim-reservoir 1\n";
    out << m.config.reservoir_size << " " << m.input_dim << " " << m.output_dim << " "
        << (m.trained() ? 1 : 0) << "\n";
    out << detail::fmt_double(m.config.spectral_radius) << " "
        << detail::fmt_double(m.config.leak_rate) << " "
        << detail::fmt_double(m.config.input_scale) << "\n";
    detail::write_matrix(out, m.w_in);
    detail::write_matrix(out, m.w);
    if (m.trained()) detail::write_matrix(out, m.w_out);
}

inline ReservoirModel load_model(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "uawnsim-reservoir" || version != 1) {
        throw std::runtime_error("reservoir model: bad header");
    }
    ReservoirModel m;
    int trained = 0;
    if (!(in >> m.config.reservoir_size >> m.input_dim >> m.output_dim >> trained) ||
        !(in >> m.config.spectral_radius >> m.config.leak_rate >> m.config.input_scale)) {
        throw std::runtime_error("reservoir model: bad dimension line");
    }
    const int n = m.config.reservoir_size;
    m.w_in = detail::read_matrix(in, n, m.input_dim);
    m.w = detail::read_matrix(in, n, n);
    if (trained) m.w_out = detail::read_matrix(in, m.output_dim, n);
    m.state = Eigen::VectorXd::Zero(n);
    return m;
}

}  // namespace uawnsim
