#pragma once

// Predictors built on the reservoir: an ESN forecaster over the concatenated
// user-position vector, and a rate-based LSM readout over per-user one-hot
// request histories.

#include <deque>
#include <optional>
#include <vector>

#include "uawnsim/reservoir.hpp"
#include "uawnsim/world.hpp"

namespace uawnsim {

/// One shared ESN over the 2K-dimensional position vector of K users.
/// Inputs are mapped affinely into [-1,1] via the scenario box before they
/// reach the reservoir (tanh saturates on meter-scale coordinates).
class PositionForecaster {
public:
    PositionForecaster(const ReservoirConfig& cfg, int n_users, const Box& bounds)
        : bounds_(bounds), n_users_(n_users),
          model_(init_reservoir(cfg, 2 * n_users, 2 * n_users)) {}

    bool trained() const { return model_.trained(); }
    const ReservoirModel& model() const { return model_; }
    int n_users() const { return n_users_; }

    /// Pack user positions (id order) into the forecaster's input vector.
    static Eigen::VectorXd pack(const std::vector<UserState>& users) {
        Eigen::VectorXd v(2 * users.size());
        for (std::size_t i = 0; i < users.size(); ++i) {
            v(2 * i) = users[i].position.x;
            v(2 * i + 1) = users[i].position.y;
        }
        return v;
    }

    /// Fit the one-step readout on a position series (input u_t, target u_{t+1}),
    /// skipping the configured washout.
    void train(const std::vector<Eigen::VectorXd>& series) {
        if (static_cast<int>(series.size()) < model_.config.washout + 2) {
            throw std::invalid_argument("PositionForecaster::train: series shorter than washout + 2");
        }
        ReservoirModel run = model_;
        run.state.setZero();
        const int n_pairs = static_cast<int>(series.size()) - 1;
        const int kept = n_pairs - model_.config.washout;
        Eigen::MatrixXd states(kept, model_.config.reservoir_size);
        Eigen::MatrixXd targets(kept, model_.output_dim);
        int row = 0;
        for (int t = 0; t < n_pairs; ++t) {
            update_state(run, normalize(series[t]));
            if (t < model_.config.washout) continue;
            states.row(row) = run.state.transpose();
            targets.row(row) = normalize(series[t + 1]).transpose();
            ++row;
        }
        fit_readout(model_, states, targets, model_.config.ridge_lambda);
        model_.state = run.state;
    }

    /// Drive the live reservoir with the currently observed positions.
    void observe(const Eigen::VectorXd& positions) { update_state(model_, normalize(positions)); }

    void reset_state() { model_.state.setZero(); }

    /// One-step prediction from the live state (meters).
    Eigen::VectorXd predict_one_step() const {
        if (!model_.trained()) {
            throw std::invalid_argument("PositionForecaster: readout not trained");
        }
        return denormalize(clamp_unit(model_.w_out * model_.state));
    }

    /// Iterated multi-step forecast: drive a fresh state through the window,
    /// then feed predictions back as inputs horizon times. Does not touch the
    /// live state.
    std::vector<Eigen::VectorXd> predict_next_positions(const std::vector<Eigen::VectorXd>& window,
                                                        int horizon) const {
        if (!model_.trained()) {
            throw std::invalid_argument("PositionForecaster: readout not trained");
        }
        if (horizon < 0) throw std::invalid_argument("PositionForecaster: negative horizon");
        std::vector<Eigen::VectorXd> out;
        if (horizon == 0) return out;
        if (window.empty()) throw std::invalid_argument("PositionForecaster: empty window");
        ReservoirModel run = model_;
        run.state.setZero();
        for (const Eigen::VectorXd& u : window) update_state(run, normalize(u));
        for (int h = 0; h < horizon; ++h) {
            const Eigen::VectorXd next = clamp_unit(run.w_out * run.state);
            out.push_back(denormalize(next));
            update_state(run, next);
        }
        return out;
    }

    /// Teacher-forced one-step mean squared error (meters^2) over a series,
    /// skipping the washout. The persistence baseline for the same series is
    /// mean |u_{t+1} - u_t|^2 over the identical range.
    double one_step_mse(const std::vector<Eigen::VectorXd>& series) const {
        if (!model_.trained()) {
            throw std::invalid_argument("PositionForecaster: readout not trained");
        }
        const int n_pairs = static_cast<int>(series.size()) - 1;
        if (n_pairs <= model_.config.washout) {
            throw std::invalid_argument("PositionForecaster: series shorter than washout");
        }
        ReservoirModel run = model_;
        run.state.setZero();
        double sq = 0.0;
        long count = 0;
        for (int t = 0; t < n_pairs; ++t) {
            update_state(run, normalize(series[t]));
            if (t < model_.config.washout) continue;
            const Eigen::VectorXd pred = denormalize(clamp_unit(run.w_out * run.state));
            sq += (pred - series[t + 1]).squaredNorm();
            count += pred.size();
        }
        return sq / static_cast<double>(count);
    }

private:
    Eigen::VectorXd normalize(const Eigen::VectorXd& meters) const {
        Eigen::VectorXd v(meters.size());
        for (Eigen::Index i = 0; i < meters.size(); ++i) {
            const double span = (i % 2 == 0) ? bounds_.x_max : bounds_.y_max;
            v(i) = 2.0 * meters(i) / span - 1.0;
        }
        return v;
    }
    Eigen::VectorXd denormalize(const Eigen::VectorXd& unit) const {
        Eigen::VectorXd v(unit.size());
        for (Eigen::Index i = 0; i < unit.size(); ++i) {
            const double span = (i % 2 == 0) ? bounds_.x_max : bounds_.y_max;
            v(i) = (unit(i) + 1.0) * 0.5 * span;
        }
        return v;
    }
    static Eigen::VectorXd clamp_unit(Eigen::VectorXd v) {
        return v.cwiseMax(-1.0).cwiseMin(1.0);
    }

    Box bounds_;
    int n_users_;
    ReservoirModel model_;
};

/// Whole-history request-distribution prediction: drive a fresh reservoir state
/// through one user's request history (-1 marks an idle slot) and normalize
/// the readout. An untrained model falls back to the uniform distribution.
/// The reservoir input is the slot's one-hot request vector plus a constant
/// bias channel; the bias keeps a persistent state component through which
/// the readout can express the long-run request frequencies.
inline Eigen::VectorXd predict_request_distribution(const ReservoirModel& model,
                                                    const std::vector<int>& history) {
    const int catalog = model.output_dim;
    if (catalog < 1) throw std::invalid_argument("predict_request_distribution: empty catalog");
    if (!model.trained()) {
        return Eigen::VectorXd::Constant(catalog, 1.0 / static_cast<double>(catalog));
    }
    if (model.input_dim != catalog + 1) {
        throw std::invalid_argument("predict_request_distribution: model lacks the bias channel");
    }
    ReservoirModel run = model;
    run.state.setZero();
    for (int content : history) {
        Eigen::VectorXd u = Eigen::VectorXd::Zero(model.input_dim);
        if (content >= 0 && content < catalog) u(content) = 1.0;
        u(model.input_dim - 1) = 1.0;  // bias channel
        update_state(run, u);
    }
    return to_distribution(run.w_out * run.state);
}

/// Online LSM over per-user request streams: one shared reservoir weight set,
/// one persistent state per user, one shared readout refit periodically on
/// (state before slot, one-hot of the slot's request) pairs.
class RequestPredictor {
public:
    RequestPredictor(const ReservoirConfig& cfg, int n_users, int catalog_size,
                     std::size_t max_pairs = 20000)
        : catalog_(catalog_size), max_pairs_(max_pairs),
          model_(init_reservoir(cfg, catalog_size + 1, catalog_size)) {
        if (catalog_size < 1) throw std::invalid_argument("RequestPredictor: empty catalog");
        states_.assign(n_users, Eigen::VectorXd::Zero(cfg.reservoir_size));
    }

    int catalog_size() const { return catalog_; }
    bool trained() const { return model_.trained(); }
    const ReservoirModel& model() const { return model_; }

    /// Advance every user's reservoir state by one slot. requests[i] is the
    /// content requested by user index i this slot, or nullopt when idle.
    void step(const std::vector<std::optional<int>>& requests) {
        if (requests.size() != states_.size()) {
            throw std::invalid_argument("RequestPredictor::step: user count mismatch");
        }
        for (std::size_t i = 0; i < states_.size(); ++i) {
            if (requests[i].has_value()) {
                record_pair(states_[i], *requests[i]);
            }
            Eigen::VectorXd u = Eigen::VectorXd::Zero(catalog_ + 1);
            if (requests[i].has_value()) u(*requests[i]) = 1.0;
            u(catalog_) = 1.0;  // bias channel
            advance_state(states_[i], u);
        }
    }

    /// Ridge-refit the shared readout from the accumulated pairs.
    void refit() {
        if (features_.empty()) return;
        const int n = model_.config.reservoir_size;
        Eigen::MatrixXd states(features_.size(), n);
        Eigen::MatrixXd targets(features_.size(), catalog_);
        for (std::size_t r = 0; r < features_.size(); ++r) {
            states.row(r) = features_[r].transpose();
            targets.row(r) = Eigen::RowVectorXd::Zero(catalog_);
            targets(r, labels_[r]) = 1.0;
        }
        fit_readout(model_, states, targets, model_.config.ridge_lambda);
    }

    /// Predicted request distribution for one user from its live state.
    Eigen::VectorXd predict(int user_index) const {
        if (!model_.trained()) {
            return Eigen::VectorXd::Constant(catalog_, 1.0 / static_cast<double>(catalog_));
        }
        return to_distribution(model_.w_out * states_.at(user_index));
    }

    std::size_t pair_count() const { return features_.size(); }

private:
    // same leaky update as update_state(), against the shared weights
    void advance_state(Eigen::VectorXd& state, const Eigen::VectorXd& u) const {
        const double a = model_.config.leak_rate;
        state = (1.0 - a) * state + a * (model_.w_in * u + model_.w * state).array().tanh().matrix();
    }

    void record_pair(const Eigen::VectorXd& state, int content) {
        if (content < 0 || content >= catalog_) return;
        features_.push_back(state);
        labels_.push_back(content);
        if (features_.size() > max_pairs_) {
            features_.pop_front();
            labels_.pop_front();
        }
    }

    int catalog_;
    std::size_t max_pairs_;
    ReservoirModel model_;
    std::vector<Eigen::VectorXd> states_;
    std::deque<Eigen::VectorXd> features_;
    std::deque<int> labels_;
};

}  // namespace uawnsim
