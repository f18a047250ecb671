#include <catch2/catch_amalgamated.hpp>
#include <algorithm>
#include <random>

#include "uawnsim/trajectory_rl.hpp"

using namespace uawnsim;

namespace {

Scenario desk_scenario(int n_uavs, int n_users, std::uint64_t seed = 1) {
    Scenario s;
    s.bounds = Box{1000, 1000, 50, 300};
    s.cell_size = 250;
    for (int i = 0; i < n_uavs; ++i) {
        s.uavs.push_back(UavState{i, {200.0 + 500.0 * i, 500, 175}, 0, 1e6});
    }
    std::mt19937_64 rng(seed_stream(seed, "placement"));
    std::uniform_real_distribution<double> u(0.0, 1000.0);
    for (int i = 0; i < n_users; ++i) {
        s.users.push_back(UserState{i, {u(rng), u(rng), 0}, std::nullopt});
    }
    return s;
}

TrainSettings fast_settings() {
    TrainSettings t;
    t.mobility = MobilityConfig{MobilityVariant::random_waypoint, 1.5, 3.5, 0.0, {}};
    t.esn.reservoir_size = 50;
    t.esn.washout = 10;
    t.esn.seed = 9;
    t.esn_train_slots = 120;
    return t;
}

}  // namespace

TEST_CASE("enumerate_actions is 7 moves times the ladder, moves outer") {
    ChannelParams p;  // 3-level default ladder
    const auto actions = enumerate_actions(p);
    REQUIRE(actions.size() == 21);
    CHECK(actions[0] == ActionSpec{Move::pos_x, 0});
    CHECK(actions[1] == ActionSpec{Move::pos_x, 1});
    CHECK(actions[3] == ActionSpec{Move::neg_x, 0});
    CHECK(actions[20] == ActionSpec{Move::hover, 2});

    p.power_ladder_w = {1.0};
    CHECK(enumerate_actions(p).size() == 7);
    p.power_ladder_w.clear();
    CHECK_THROWS_AS(enumerate_actions(p), std::invalid_argument);
}

TEST_CASE("encode_local_state uses the associated users' centroid cell") {
    Scenario s = desk_scenario(1, 0);
    s.users.push_back(UserState{0, {120, 130, 0}, std::nullopt});
    s.users.push_back(UserState{1, {140, 110, 0}, std::nullopt});
    std::map<int, Position3> predicted{{0, {120, 130, 0}}, {1, {140, 110, 0}}};
    const Association assoc{{0, 0}, {1, 0}};
    const LocalState st = encode_local_state(s.uavs[0], predicted, assoc, s);
    CHECK(st.user_cell == Cell2{0, 0});  // both users inside cell (0,0)
    CHECK(st.uav_cell == snap_to_grid(s.uavs[0].position, s));
    CHECK(st.power_level == 0);
}

TEST_CASE("encode_local_state snaps a symmetric pair to the midpoint cell") {
    Scenario s = desk_scenario(1, 0);
    // symmetric about (375, 375), the center of cell (1,1) at cell_size 250
    s.users.push_back(UserState{0, {300, 450, 0}, std::nullopt});
    s.users.push_back(UserState{1, {450, 300, 0}, std::nullopt});
    std::map<int, Position3> predicted{{0, {300, 450, 0}}, {1, {450, 300, 0}}};
    const Association assoc{{0, 0}, {1, 0}};
    // oracle: centroid = ((300+450)/2, (450+300)/2) = (375, 375) -> cell (1,1)
    CHECK(encode_local_state(s.uavs[0], predicted, assoc, s).user_cell == Cell2{1, 1});
}

TEST_CASE("encode_local_state falls back to the global centroid") {
    Scenario s = desk_scenario(2, 0);
    s.users.push_back(UserState{0, {100, 100, 0}, std::nullopt});
    s.users.push_back(UserState{1, {150, 50, 0}, std::nullopt});
    std::map<int, Position3> predicted{{0, {100, 100, 0}}, {1, {150, 50, 0}}};
    const Association assoc{{0, 0}, {1, 0}};  // nothing associated to UAV 1
    const LocalState st = encode_local_state(s.uavs[1], predicted, assoc, s);
    CHECK(st.user_cell == Cell2{0, 0});  // global centroid (125, 75)
}

TEST_CASE("select_action is greedy at epsilon 0 with lowest-index ties") {
    QTable<LocalState> q(21);
    const LocalState st{};
    std::mt19937_64 rng(1);
    CHECK(select_action(q, st, 0.0, rng) == 0);  // all-zero table: tie rule
    q.set(st, 13, 1.0);
    CHECK(select_action(q, st, 0.0, rng) == 13);
}

TEST_CASE("select_action explores reproducibly at epsilon 1") {
    QTable<LocalState> q(21);
    const LocalState st{};
    std::mt19937_64 a(77), b(77);
    for (int i = 0; i < 50; ++i) {
        CHECK(select_action(q, st, 1.0, a) == select_action(q, st, 1.0, b));
    }
    std::mt19937_64 c(78);
    std::vector<int> seq_a, seq_c;
    for (int i = 0; i < 50; ++i) {
        seq_a.push_back(select_action(q, st, 1.0, a));
        seq_c.push_back(select_action(q, st, 1.0, c));
    }
    CHECK(seq_a != seq_c);
}

TEST_CASE("update_q arithmetic and limits") {
    QTable<LocalState> q(2);
    const LocalState st{};
    LocalState st2{};
    st2.power_level = 1;
    HyperParams h;
    h.alpha = 0.5;
    h.gamma = 0.9;
    update_q(q, st, 0, 1.0, st2, h);
    CHECK(q.value(st, 0) == 0.5);

    h.alpha = 0.0;
    update_q(q, st, 0, 100.0, st2, h);
    CHECK(q.value(st, 0) == 0.5);  // alpha 0 leaves the table unchanged
}

TEST_CASE("repeated self-loop updates converge to r/(1-gamma)") {
    QTable<LocalState> q(1);
    const LocalState st{};
    HyperParams h;
    h.alpha = 0.5;
    h.gamma = 0.5;
    for (int i = 0; i < 200; ++i) update_q(q, st, 0, 1.0, st, h);
    // oracle: geometric-series fixed point 1 / (1 - 0.5) = 2
    CHECK_THAT(q.value(st, 0), Catch::Matchers::WithinAbs(2.0, 1e-9));
}

TEST_CASE("global_q sums local values") {
    QTable<LocalState> a(3), b(3);
    LocalState sa{}, sb{};
    sb.power_level = 2;
    a.set(sa, 1, 0.3);
    b.set(sb, 2, 0.7);
    CHECK_THAT(global_q({{&a, sa, 1}, {&b, sb, 2}}), Catch::Matchers::WithinAbs(1.0, 1e-15));
    CHECK(global_q({{&a, sa, 1}}) == a.value(sa, 1));
    CHECK_THROWS_AS(global_q({}), std::invalid_argument);
}

TEST_CASE("per-agent argmaxes maximize the joint decomposed value") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        QTable<LocalState> a(21), b(21);
        LocalState sa{}, sb{};
        sb.power_level = 1;
        for (int i = 0; i < 21; ++i) {
            a.set(sa, i, u(rng));
            b.set(sb, i, u(rng));
        }
        // oracle: exhaustive scan of the 21x21 joint action space
        double best = -1e300;
        int best_a = -1, best_b = -1;
        for (int i = 0; i < 21; ++i) {
            for (int j = 0; j < 21; ++j) {
                const double v = global_q({{&a, sa, i}, {&b, sb, j}});
                if (v > best) {
                    best = v;
                    best_a = i;
                    best_b = j;
                }
            }
        }
        CHECK(a.argmax(sa) == best_a);
        CHECK(b.argmax(sb) == best_b);
        CHECK_THAT(global_q({{&a, sa, a.argmax(sa)}, {&b, sb, b.argmax(sb)}}),
                   Catch::Matchers::WithinAbs(best, 1e-12));
    }
}

TEST_CASE("hovering with static users changes only the clock") {
    Scenario s = desk_scenario(2, 4);
    for (UavState& u : s.uavs) u.position = cell_center(snap_to_grid(u.position, s), s);
    const Scenario before = s;
    MobilityModel mobility(MobilityConfig{MobilityVariant::static_users, 0, 0, 0, {}}, s);
    std::mt19937_64 rng(1);
    const std::vector<ActionSpec> joint(2, ActionSpec{Move::hover, 0});
    const SlotResult res = apply_joint_action(s, joint, mobility, rng, 1e6, 0.05);
    CHECK(s.clock.slot == before.clock.slot + 1);
    for (std::size_t i = 0; i < s.uavs.size(); ++i) {
        CHECK(s.uavs[i].position.x == before.uavs[i].position.x);
        CHECK(s.uavs[i].position.z == before.uavs[i].position.z);
    }
    for (std::size_t i = 0; i < s.users.size(); ++i) {
        CHECK(s.users[i].position.x == before.users[i].position.x);
    }
    CHECK(res.rewards.size() == 2);
}

TEST_CASE("a blocked boundary move keeps the UAV in place and costs kappa") {
    Scenario s = desk_scenario(1, 2);
    s.uavs[0].position = cell_center(CellIndex{s.nx() - 1, 1, 0}, s);  // at the +x edge
    const Position3 before = s.uavs[0].position;
    MobilityModel mobility(MobilityConfig{MobilityVariant::static_users, 0, 0, 0, {}}, s);
    std::mt19937_64 rng(1);
    const double kappa = 0.25;
    const SlotResult res =
        apply_joint_action(s, {ActionSpec{Move::pos_x, 0}}, mobility, rng, 1e6, kappa);
    CHECK(s.uavs[0].position.x == before.x);
    const double shared = res.row.sum_rate_bps / 1e6;
    CHECK_THAT(res.rewards[0], Catch::Matchers::WithinAbs(shared - kappa, 1e-12));
}

TEST_CASE("moving one cell toward a lone user weakly raises the sum rate") {
    Scenario base = desk_scenario(1, 0);
    base.users.push_back(UserState{0, {875, 375, 0}, std::nullopt});
    base.uavs[0].position = cell_center(CellIndex{0, 1, 0}, base);
    MobilityModel mobility(MobilityConfig{MobilityVariant::static_users, 0, 0, 0, {}}, base);
    std::mt19937_64 rng(1);

    Scenario hover = base;
    const double r_hover =
        apply_joint_action(hover, {ActionSpec{Move::hover, 0}}, mobility, rng, 1e6, 0)
            .row.sum_rate_bps;
    Scenario toward = base;
    const double r_toward =
        apply_joint_action(toward, {ActionSpec{Move::pos_x, 0}}, mobility, rng, 1e6, 0)
            .row.sum_rate_bps;
    CHECK(r_toward >= r_hover);
}

TEST_CASE("apply_joint_action rejects a short action list") {
    Scenario s = desk_scenario(2, 2);
    MobilityModel mobility(MobilityConfig{MobilityVariant::static_users, 0, 0, 0, {}}, s);
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(apply_joint_action(s, {ActionSpec{}}, mobility, rng, 1e6, 0),
                    std::invalid_argument);
}

TEST_CASE("train with zero episodes returns empty logs and empty tables") {
    const Scenario s = desk_scenario(2, 6);
    HyperParams h;
    h.episodes = 0;
    const TrainResult r = train(s, h, fast_settings(), 3);
    CHECK(r.episodes.empty());
    for (const auto& table : r.tables) CHECK(table.state_count() == 0);
}

TEST_CASE("train is bit-identical under the same seed") {
    const Scenario s = desk_scenario(2, 6);
    HyperParams h;
    h.episodes = 3;
    h.slots_per_episode = 40;
    const TrainResult a = train(s, h, fast_settings(), 5);
    const TrainResult b = train(s, h, fast_settings(), 5);
    REQUIRE(a.episodes.size() == b.episodes.size());
    for (std::size_t e = 0; e < a.episodes.size(); ++e) {
        REQUIRE(a.episodes[e].rows.size() == b.episodes[e].rows.size());
        for (std::size_t t = 0; t < a.episodes[e].rows.size(); ++t) {
            const EpisodeRow& ra = a.episodes[e].rows[t];
            const EpisodeRow& rb = b.episodes[e].rows[t];
            CHECK(ra.sum_rate_bps == rb.sum_rate_bps);
            CHECK(ra.rewards == rb.rewards);
            CHECK(ra.actions == rb.actions);
        }
    }
    const TrainResult c = train(s, h, fast_settings(), 6);
    bool identical = true;
    for (std::size_t e = 0; e < a.episodes.size() && identical; ++e) {
        for (std::size_t t = 0; t < a.episodes[e].rows.size() && identical; ++t) {
            identical = a.episodes[e].rows[t].sum_rate_bps == c.episodes[e].rows[t].sum_rate_bps;
        }
    }
    CHECK_FALSE(identical);
}

TEST_CASE("UAVs never leave bounds and penalties match blocked moves") {
    const Scenario s = desk_scenario(2, 6);
    HyperParams h;
    h.episodes = 4;
    h.slots_per_episode = 50;
    h.epsilon_start = 1.0;  // force exploration into walls
    h.epsilon_end = 1.0;
    const TrainResult r = train(s, h, fast_settings(), 11);
    for (const EpisodeLog& log : r.episodes) {
        Scenario tmp = s;
        std::vector<Position3> prev;
        for (const UavState& u : s.uavs) {
            prev.push_back(cell_center(snap_to_grid(u.position, tmp), tmp));
        }
        for (const EpisodeRow& row : log.rows) {
            const double shared = row.sum_rate_bps / r.rate_norm_used;
            for (std::size_t i = 0; i < row.uav_positions.size(); ++i) {
                const Position3& p = row.uav_positions[i];
                CHECK(position_in_bounds(p, s.bounds));
                CHECK(p.z >= s.bounds.z_min);
                CHECK(p.z <= s.bounds.z_max);
                const bool moved = p.x != prev[i].x || p.y != prev[i].y || p.z != prev[i].z;
                const bool blocked = row.actions[i].move != Move::hover && !moved;
                const double expected = shared - (blocked ? h.boundary_penalty : 0.0);
                CHECK_THAT(row.rewards[i], Catch::Matchers::WithinAbs(expected, 1e-12));
            }
            prev = row.uav_positions;
        }
    }
}

TEST_CASE("logged rewards are reproducible through the channel module") {
    const Scenario s = desk_scenario(2, 5);
    HyperParams h;
    h.episodes = 2;
    h.slots_per_episode = 30;
    const TrainResult r = train(s, h, fast_settings(), 13);
    for (const EpisodeLog& log : r.episodes) {
        for (const EpisodeRow& row : log.rows) {
            Scenario replay = s;
            for (std::size_t i = 0; i < replay.uavs.size(); ++i) {
                replay.uavs[i].position = row.uav_positions[i];
                replay.uavs[i].power_level_index = row.power_levels[i];
            }
            for (std::size_t i = 0; i < replay.users.size(); ++i) {
                replay.users[i].position = row.user_positions[i];
            }
            const SumRate sr = sum_rate(replay, associate_users(replay));
            CHECK(sr.total_bps == row.sum_rate_bps);
        }
    }
}

TEST_CASE("median learning progress over five seeds") {
    const Scenario s = desk_scenario(2, 8);
    HyperParams h;
    h.episodes = 30;
    h.slots_per_episode = 60;
    h.alpha = 0.4;
    h.gamma = 0.6;
    h.epsilon_start = 0.8;
    h.epsilon_decay = 0.9;
    std::vector<double> gains;
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        const TrainResult r = train(s, h, fast_settings(), seed);
        const std::size_t k = 3;  // first/last 10% of 30 episodes
        double first = 0.0, last = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            first += r.episodes[i].mean_sum_rate_bps;
            last += r.episodes[r.episodes.size() - 1 - i].mean_sum_rate_bps;
        }
        gains.push_back(last - first);
    }
    std::sort(gains.begin(), gains.end());
    CHECK(gains[2] >= 0.0);  // median improvement non-negative
}

TEST_CASE("static baseline with static users produces a constant per-slot rate") {
    Scenario s = desk_scenario(1, 5);
    HyperParams h;
    h.episodes = 1;
    h.slots_per_episode = 20;
    const auto logs =
        static_baseline(s, h, MobilityConfig{MobilityVariant::static_users, 0, 0, 0, {}}, 1);
    REQUIRE(logs.size() == 1);
    for (const EpisodeRow& row : logs[0].rows) {
        CHECK(row.sum_rate_bps == logs[0].rows[0].sum_rate_bps);
    }
}

TEST_CASE("centroid placement puts a single UAV above a lone user") {
    Scenario s = desk_scenario(1, 0);
    s.users.push_back(UserState{0, {321, 654, 0}, std::nullopt});
    const auto centers = centroid_placement(s, 1);
    REQUIRE(centers.size() == 1);
    CHECK(centers[0].x == 321.0);
    CHECK(centers[0].y == 654.0);
}

TEST_CASE("two well-separated clusters get one UAV each") {
    Scenario s = desk_scenario(2, 0);
    for (int i = 0; i < 5; ++i) {
        s.users.push_back(UserState{i, {100.0 + 10 * i, 100, 0}, std::nullopt});
        s.users.push_back(UserState{5 + i, {880.0 + 10 * i, 900, 0}, std::nullopt});
    }
    const auto centers = centroid_placement(s, 2);
    REQUIRE(centers.size() == 2);
    Scenario placed = s;
    placed.uavs[0].position = centers[0];
    placed.uavs[1].position = centers[1];
    const double split_rate = sum_rate(placed, associate_users(placed)).total_bps;
    // oracle: the alternative assignment parks both UAVs on one cluster
    Scenario lumped = s;
    lumped.uavs[0].position = centers[0];
    lumped.uavs[1].position = Position3{centers[0].x + 10, centers[0].y, centers[0].z};
    const double lumped_rate = sum_rate(lumped, associate_users(lumped)).total_bps;
    CHECK(split_rate > lumped_rate);
    // each cluster has a center nearby
    const bool near_a = horizontal_distance(centers[0], {120, 100, 0}) < 150 ||
                        horizontal_distance(centers[1], {120, 100, 0}) < 150;
    const bool near_b = horizontal_distance(centers[0], {900, 900, 0}) < 150 ||
                        horizontal_distance(centers[1], {900, 900, 0}) < 150;
    CHECK(near_a);
    CHECK(near_b);
}
