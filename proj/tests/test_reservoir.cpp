#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>
#include <sstream>

#include "uawnsim/forecast.hpp"
#include "uawnsim/reservoir.hpp"

using namespace uawnsim;

namespace {

ReservoirConfig small_config(std::uint64_t seed = 7) {
    ReservoirConfig cfg;
    cfg.reservoir_size = 40;
    cfg.spectral_radius = 0.9;
    cfg.leak_rate = 0.3;
    cfg.connectivity = 0.2;
    cfg.ridge_lambda = 1e-6;
    cfg.washout = 10;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("init_reservoir hits the configured spectral radius within 1e-6") {
    for (double rho : {0.5, 0.9, 0.99}) {
        ReservoirConfig cfg = small_config(3);
        cfg.spectral_radius = rho;
        const ReservoirModel m = init_reservoir(cfg, 2, 2);
        CHECK_THAT(spectral_radius(m.w), Catch::Matchers::WithinAbs(rho, 1e-6));
    }
}

TEST_CASE("init_reservoir is deterministic in the seed") {
    const ReservoirModel a = init_reservoir(small_config(11), 3, 2);
    const ReservoirModel b = init_reservoir(small_config(11), 3, 2);
    CHECK(a.w == b.w);
    CHECK(a.w_in == b.w_in);
    const ReservoirModel c = init_reservoir(small_config(12), 3, 2);
    CHECK(a.w != c.w);
}

TEST_CASE("full connectivity yields a dense reservoir") {
    ReservoirConfig cfg = small_config(5);
    cfg.connectivity = 1.0;
    const ReservoirModel m = init_reservoir(cfg, 2, 2);
    int zeros = 0;
    for (int i = 0; i < cfg.reservoir_size; ++i) {
        for (int j = 0; j < cfg.reservoir_size; ++j) {
            if (m.w(i, j) == 0.0) ++zeros;
        }
    }
    CHECK(zeros == 0);
}

TEST_CASE("init_reservoir rejects bad dimensions and config") {
    CHECK_THROWS_AS(init_reservoir(small_config(), 0, 2), std::invalid_argument);
    ReservoirConfig cfg = small_config();
    cfg.spectral_radius = 1.0;
    CHECK_THROWS_AS(init_reservoir(cfg, 2, 2), std::invalid_argument);
}

TEST_CASE("init_reservoir gives up after eight degenerate draws") {
    ReservoirConfig cfg = small_config(91);
    cfg.reservoir_size = 1;
    cfg.connectivity = 1e-12;  // the single weight is drawn as zero every attempt
    CHECK_THROWS_AS(init_reservoir(cfg, 1, 1), std::runtime_error);
}

TEST_CASE("zero state and zero input stay at zero") {
    ReservoirModel m = init_reservoir(small_config(), 2, 2);
    update_state(m, Eigen::VectorXd::Zero(2));
    CHECK(m.state.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("leak 1 reduces the update to plain tanh dynamics") {
    ReservoirConfig cfg = small_config();
    cfg.leak_rate = 1.0;
    ReservoirModel m = init_reservoir(cfg, 2, 2);
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(2, 0.5);
    const Eigen::VectorXd prev = m.state;
    const Eigen::VectorXd expected = (m.w_in * u + m.w * prev).array().tanh();
    update_state(m, u);
    CHECK((m.state - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("with leak 1 all state entries stay inside (-1, 1)") {
    ReservoirConfig cfg = small_config();
    cfg.leak_rate = 1.0;
    ReservoirModel m = init_reservoir(cfg, 2, 2);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int t = 0; t < 300; ++t) {
        update_state(m, Eigen::VectorXd::NullaryExpr(2, [&]() { return u(rng); }));
        CHECK(m.state.cwiseAbs().maxCoeff() < 1.0);
    }
}

TEST_CASE("update_state rejects dimension mismatches") {
    ReservoirModel m = init_reservoir(small_config(), 2, 2);
    CHECK_THROWS_AS(update_state(m, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("ridge with lambda 0 recovers an exactly linear readout") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd states(60, 20);
    for (int i = 0; i < states.rows(); ++i) {
        for (int j = 0; j < states.cols(); ++j) states(i, j) = g(rng);
    }
    Eigen::MatrixXd truth(3, 20);
    for (int i = 0; i < truth.rows(); ++i) {
        for (int j = 0; j < truth.cols(); ++j) truth(i, j) = g(rng);
    }
    const Eigen::MatrixXd targets = states * truth.transpose();
    const Eigen::MatrixXd w = ridge_readout(states, targets, 0.0);
    const double mse = (states * w.transpose() - targets).squaredNorm() /
                       static_cast<double>(targets.size());
    CHECK(mse < 1e-9);
}

TEST_CASE("ridge weights vanish as lambda grows") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd states(40, 8);
    Eigen::MatrixXd targets(40, 2);
    for (int i = 0; i < 40; ++i) {
        for (int j = 0; j < 8; ++j) states(i, j) = g(rng);
        for (int j = 0; j < 2; ++j) targets(i, j) = g(rng);
    }
    const Eigen::MatrixXd w = ridge_readout(states, targets, 1e12);
    CHECK(w.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("ridge solution matches an independent normal-equation oracle") {
    std::mt19937_64 rng(29);
    std::normal_distribution<double> g(0.0, 1.0);
    const double lambda = 0.01;
    Eigen::MatrixXd states(50, 12);
    Eigen::MatrixXd targets(50, 4);
    for (int i = 0; i < 50; ++i) {
        for (int j = 0; j < 12; ++j) states(i, j) = g(rng);
        for (int j = 0; j < 4; ++j) targets(i, j) = g(rng);
    }
    // oracle: explicit inverse of the normal matrix via full-pivot LU
    const Eigen::MatrixXd normal =
        states.transpose() * states + lambda * Eigen::MatrixXd::Identity(12, 12);
    const Eigen::MatrixXd oracle =
        (Eigen::FullPivLU<Eigen::MatrixXd>(normal).inverse() * states.transpose() * targets)
            .transpose();
    const Eigen::MatrixXd w = ridge_readout(states, targets, lambda);
    CHECK((w - oracle).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("singular normal matrix with lambda 0 raises a numerical error") {
    Eigen::MatrixXd states = Eigen::MatrixXd::Zero(10, 5);
    states.col(0).setOnes();  // rank 1
    const Eigen::MatrixXd targets = Eigen::MatrixXd::Ones(10, 1);
    CHECK_THROWS_MATCHES(
        ridge_readout(states, targets, 0.0), std::runtime_error,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("lambda > 0")));
}

TEST_CASE("echo state property: initial conditions are forgotten") {
    ReservoirConfig cfg;  // defaults: 100 neurons, rho 0.9, leak 0.3
    cfg.seed = 41;
    ReservoirModel a = init_reservoir(cfg, 2, 2);
    ReservoirModel b = a;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    b.state = Eigen::VectorXd::NullaryExpr(cfg.reservoir_size, [&]() { return u(rng); });
    const double initial = (a.state - b.state).norm();
    REQUIRE(initial > 0.1);
    for (int t = 0; t < 500; ++t) {
        const Eigen::VectorXd input = Eigen::VectorXd::NullaryExpr(2, [&]() { return u(rng); });
        update_state(a, input);
        update_state(b, input);
    }
    CHECK((a.state - b.state).norm() < 1e-6 * initial);
}

TEST_CASE("static users are predicted as a fixed point") {
    const Box bounds{1000, 1000, 50, 300};
    PositionForecaster f(small_config(41), 2, bounds);
    Eigen::VectorXd pos(4);
    pos << 200, 300, 700, 800;
    std::vector<Eigen::VectorXd> series(150, pos);
    f.train(series);
    const auto pred = f.predict_next_positions(series, 3);
    REQUIRE(pred.size() == 3);
    for (const Eigen::VectorXd& p : pred) {
        CHECK((p - pos).cwiseAbs().maxCoeff() < 1e-3);
    }
}

TEST_CASE("horizon zero predicts nothing and leaves the live state alone") {
    const Box bounds{1000, 1000, 50, 300};
    PositionForecaster f(small_config(43), 1, bounds);
    Eigen::VectorXd pos(2);
    pos << 100, 100;
    std::vector<Eigen::VectorXd> series(80, pos);
    f.train(series);
    const Eigen::VectorXd before = f.model().state;
    CHECK(f.predict_next_positions(series, 0).empty());
    CHECK(f.model().state == before);
}

TEST_CASE("prediction without a trained readout is a contract error") {
    const Box bounds{1000, 1000, 50, 300};
    PositionForecaster f(small_config(47), 1, bounds);
    std::vector<Eigen::VectorXd> window(5, Eigen::VectorXd::Zero(2));
    CHECK_THROWS_AS(f.predict_next_positions(window, 2), std::invalid_argument);
    CHECK_THROWS_AS(f.predict_one_step(), std::invalid_argument);
}

TEST_CASE("sinusoidal trajectories beat the persistence baseline by 2x") {
    const Box bounds{1000, 1000, 50, 300};
    ReservoirConfig cfg;  // library defaults
    cfg.seed = 51;
    PositionForecaster f(cfg, 2, bounds);
    auto at = [&](int t) {
        Eigen::VectorXd v(4);
        v << 500 + 150 * std::sin(0.15 * t), 500 + 150 * std::cos(0.15 * t),
            300 + 120 * std::sin(0.11 * t + 1.0), 600 + 120 * std::cos(0.11 * t + 1.0);
        return v;
    };
    std::vector<Eigen::VectorXd> train_series, holdout;
    for (int t = 0; t < 400; ++t) train_series.push_back(at(t));
    for (int t = 400; t < 520; ++t) holdout.push_back(at(t));
    f.train(train_series);

    const double esn_mse = f.one_step_mse(holdout);
    // persistence oracle: predict u_{t+1} = u_t over the same evaluated range
    double persistence = 0.0;
    long count = 0;
    for (std::size_t t = cfg.washout; t + 1 < holdout.size(); ++t) {
        persistence += (holdout[t + 1] - holdout[t]).squaredNorm();
        count += holdout[t].size();
    }
    persistence /= static_cast<double>(count);
    CHECK(esn_mse <= 0.5 * persistence);
}

TEST_CASE("request distribution concentrates on a constantly requested content") {
    ReservoirConfig cfg = small_config(61);
    cfg.leak_rate = 0.5;
    cfg.ridge_lambda = 1e-3;
    cfg.washout = 0;
    RequestPredictor p(cfg, 1, 5);
    for (int t = 0; t < 200; ++t) p.step({std::optional<int>(3)});
    p.refit();
    const Eigen::VectorXd dist = p.predict(0);
    int mode = 0;
    dist.maxCoeff(&mode);
    CHECK(mode == 3);
    CHECK(dist(3) > 0.5);

    // the history-driven free function agrees with the online predictor
    const std::vector<int> history(200, 3);
    const Eigen::VectorXd via_history = predict_request_distribution(p.model(), history);
    int mode2 = 0;
    via_history.maxCoeff(&mode2);
    CHECK(mode2 == 3);
}

TEST_CASE("untrained request prediction falls back to uniform") {
    ReservoirConfig cfg = small_config(67);
    RequestPredictor p(cfg, 2, 4);
    const Eigen::VectorXd dist = p.predict(1);
    for (int c = 0; c < 4; ++c) CHECK_THAT(dist(c), Catch::Matchers::WithinAbs(0.25, 1e-15));
    const ReservoirModel raw = init_reservoir(cfg, 4, 4);
    const Eigen::VectorXd via_history = predict_request_distribution(raw, {0, 1, 2});
    for (int c = 0; c < 4; ++c) CHECK_THAT(via_history(c), Catch::Matchers::WithinAbs(0.25, 1e-15));
}

TEST_CASE("to_distribution outputs a valid distribution for arbitrary input") {
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd v = Eigen::VectorXd::NullaryExpr(7, [&]() { return u(rng); });
        const Eigen::VectorXd d = to_distribution(v);
        CHECK(d.minCoeff() >= 0.0);
        CHECK_THAT(d.sum(), Catch::Matchers::WithinAbs(1.0, 1e-9));
    }
    // all-equal raw scores cancel to zero mass and fall back to uniform
    const Eigen::VectorXd d = to_distribution(Eigen::VectorXd::Constant(4, 3.5));
    for (int c = 0; c < 4; ++c) CHECK_THAT(d(c), Catch::Matchers::WithinAbs(0.25, 1e-15));
}

TEST_CASE("model serialization round-trips weights exactly") {
    ReservoirConfig cfg = small_config(73);
    PositionForecaster f(cfg, 1, Box{1000, 1000, 0, 100});
    Eigen::VectorXd pos(2);
    pos << 123.456, 654.321;
    std::vector<Eigen::VectorXd> series(60, pos);
    f.train(series);

    std::stringstream buf;
    save_model(f.model(), buf);
    const ReservoirModel loaded = load_model(buf);
    CHECK(loaded.w == f.model().w);
    CHECK(loaded.w_in == f.model().w_in);
    CHECK(loaded.w_out == f.model().w_out);
    CHECK(loaded.config.reservoir_size == cfg.reservoir_size);
}

TEST_CASE("load_model rejects a corrupted header") {
    std::stringstream buf("not-a-model 9\n");
    CHECK_THROWS_AS(load_model(buf), std::runtime_error);
}
