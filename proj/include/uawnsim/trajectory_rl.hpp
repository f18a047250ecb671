#pragma once

// Multi-agent tabular Q-learning for joint UAV movement and transmit-power
// selection. Each UAV learns a local Q-table over (own cell, power level,
// predicted-user-centroid cell); the global value is the sum of the local
// values, so per-agent argmaxes maximize the joint value.

#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "uawnsim/channel.hpp"
#include "uawnsim/forecast.hpp"
#include "uawnsim/mobility.hpp"
#include "uawnsim/seeds.hpp"
#include "uawnsim/world.hpp"

namespace uawnsim {

enum class Move { pos_x, neg_x, pos_y, neg_y, pos_z, neg_z, hover };

inline const char* move_name(Move m) {
    switch (m) {
        case Move::pos_x: return "+x";
        case Move::neg_x: return "-x";
        case Move::pos_y: return "+y";
        case Move::neg_y: return "-y";
        case Move::pos_z: return "+z";
        case Move::neg_z: return "-z";
        case Move::hover: return "hover";
    }
    return "?";
}

struct ActionSpec {
    Move move{Move::hover};
    int power_level{0};
    auto operator<=>(const ActionSpec&) const = default;
};

/// Fixed enumeration order: moves outer (+x, -x, +y, -y, +z, -z, hover),
/// power levels inner (0..L-1). Action 0 is (+x, level 0).
inline std::vector<ActionSpec> enumerate_actions(const ChannelParams& p) {
    if (p.power_ladder_w.empty()) {
        throw std::invalid_argument("enumerate_actions: empty power ladder");
    }
    static constexpr Move kMoves[] = {Move::pos_x, Move::neg_x, Move::pos_y, Move::neg_y,
                                      Move::pos_z, Move::neg_z, Move::hover};
    std::vector<ActionSpec> out;
    out.reserve(7 * p.power_ladder_w.size());
    for (Move m : kMoves) {
        for (std::size_t l = 0; l < p.power_ladder_w.size(); ++l) {
            out.push_back(ActionSpec{m, static_cast<int>(l)});
        }
    }
    return out;
}

/// Per-agent observation: own cell, own power level, and the 2D cell of the
/// (predicted) centroid of the agent's associated users.
struct LocalState {
    CellIndex uav_cell;
    int power_level{0};
    Cell2 user_cell;
    auto operator<=>(const LocalState&) const = default;
};

/// Tabular state-action values, zero for unseen pairs. Values are stored per
/// state as one row of n_actions entries; rows appear only once visited.
template <typename State>
class QTable {
public:
    explicit QTable(int n_actions) : n_actions_(n_actions) {
        if (n_actions < 1) throw std::invalid_argument("QTable: need >= 1 action");
    }

    int n_actions() const { return n_actions_; }
    std::size_t state_count() const { return rows_.size(); }

    double value(const State& s, int action) const {
        check_action(action);
        auto it = rows_.find(s);
        return it == rows_.end() ? 0.0 : it->second[action];
    }

    double max_value(const State& s) const {
        auto it = rows_.find(s);
        if (it == rows_.end()) return 0.0;
        double best = it->second[0];
        for (double v : it->second) best = std::max(best, v);
        return best;
    }

    /// Greedy action; ties resolve to the lowest action index.
    int argmax(const State& s) const {
        auto it = rows_.find(s);
        if (it == rows_.end()) return 0;
        int best = 0;
        for (int a = 1; a < n_actions_; ++a) {
            if (it->second[a] > it->second[best]) best = a;
        }
        return best;
    }

    void set(const State& s, int action, double v) {
        check_action(action);
        row(s)[action] = v;
    }

    std::vector<double>& row(const State& s) {
        auto it = rows_.find(s);
        if (it == rows_.end()) {
            it = rows_.emplace(s, std::vector<double>(n_actions_, 0.0)).first;
        }
        return it->second;
    }

    const std::map<State, std::vector<double>>& rows() const { return rows_; }

private:
    void check_action(int a) const {
        if (a < 0 || a >= n_actions_) throw std::invalid_argument("QTable: action index out of range");
    }
    std::map<State, std::vector<double>> rows_;
    int n_actions_;
};

struct HyperParams {
    double alpha{0.3};
    double gamma{0.8};
    double epsilon_start{0.5};
    double epsilon_end{0.02};
    double epsilon_decay{0.96};  // multiplicative per episode
    int episodes{100};
    int slots_per_episode{200};
    double boundary_penalty{0.05};
    double rate_norm{0.0};  // <= 0 selects the static-centroid slot-0 sum rate
};

inline double epsilon_at(const HyperParams& h, int episode) {
    double eps = h.epsilon_start;
    for (int e = 0; e < episode; ++e) eps *= h.epsilon_decay;
    return std::max(h.epsilon_end, eps);
}

/// Epsilon-greedy action choice. Draw order: one uniform for the explore
/// check, then (only when exploring) one uniform integer over the actions.
template <typename State>
int select_action(const QTable<State>& q, const State& s, double epsilon, std::mt19937_64& rng) {
    if (!(epsilon >= 0.0) || !(epsilon <= 1.0)) {
        throw std::invalid_argument("select_action: epsilon must be in [0,1]");
    }
    if (epsilon > 0.0 &&
        std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon) {
        return std::uniform_int_distribution<int>(0, q.n_actions() - 1)(rng);
    }
    return q.argmax(s);
}

/// One-step temporal-difference update:
/// Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)).
template <typename State>
void update_q(QTable<State>& q, const State& s, int action, double reward, const State& s_next,
              const HyperParams& h) {
    if (!std::isfinite(reward)) throw std::invalid_argument("update_q: non-finite reward");
    const double target = reward + h.gamma * q.max_value(s_next);
    const double old = q.value(s, action);
    q.set(s, action, old + h.alpha * (target - old));
}

struct GlobalQTerm {
    const QTable<LocalState>* table;
    LocalState state;
    int action;
};

/// Linear decomposition with unit weights: the global value is the sum of the
/// agents' local values.
inline double global_q(const std::vector<GlobalQTerm>& terms) {
    if (terms.empty()) throw std::invalid_argument("global_q: empty term list");
    double sum = 0.0;
    for (const GlobalQTerm& t : terms) sum += t.table->value(t.state, t.action);
    return sum;
}

/// Compress the agent's associated users' (predicted) positions to their
/// centroid cell; agents with no associated users fall back to the centroid
/// of all users.
inline LocalState encode_local_state(const UavState& uav,
                                     const std::map<int, Position3>& predicted,
                                     const Association& assoc, const Scenario& s) {
    double cx = 0.0, cy = 0.0;
    int count = 0;
    for (const auto& [user_id, uav_id] : assoc) {
        if (uav_id != uav.id) continue;
        auto it = predicted.find(user_id);
        if (it == predicted.end()) continue;
        cx += it->second.x;
        cy += it->second.y;
        ++count;
    }
    if (count == 0) {
        for (const auto& [user_id, p] : predicted) {
            cx += p.x;
            cy += p.y;
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("encode_local_state: no user positions");
    cx = std::clamp(cx / count, 0.0, s.bounds.x_max);
    cy = std::clamp(cy / count, 0.0, s.bounds.y_max);
    return LocalState{snap_to_grid(uav.position, s), uav.power_level_index,
                      snap_to_grid_2d(cx, cy, s)};
}

struct EpisodeRow {
    long slot{0};
    std::vector<ActionSpec> actions;        // one per UAV (empty for baselines)
    std::vector<Position3> uav_positions;   // after the move
    std::vector<int> power_levels;
    std::vector<Position3> user_positions;  // after the mobility step
    double sum_rate_bps{0.0};
    std::vector<double> per_user_rate_bps;  // user order
    std::vector<double> rewards;            // one per UAV
};

struct EpisodeLog {
    int episode{0};
    std::vector<EpisodeRow> rows;
    double mean_sum_rate_bps{0.0};
    double cumulative_reward{0.0};  // summed over slots, averaged over agents
};

namespace detail {

inline void apply_move(Position3& p, Move m, double step, const Box& b, bool& violated) {
    Position3 next = p;
    switch (m) {
        case Move::pos_x: next.x += step; break;
        case Move::neg_x: next.x -= step; break;
        case Move::pos_y: next.y += step; break;
        case Move::neg_y: next.y -= step; break;
        case Move::pos_z: next.z += step; break;
        case Move::neg_z: next.z -= step; break;
        case Move::hover: break;
    }
    if (next.x < 0.0 || next.x > b.x_max || next.y < 0.0 || next.y > b.y_max ||
        next.z < b.z_min || next.z > b.z_max) {
        violated = true;  // blocked move: stay in place
        return;
    }
    p = next;
}

}  // namespace detail

struct SlotResult {
    std::vector<double> rewards;
    Association association;
    EpisodeRow row;
};

/// Advance the environment by one slot: every UAV moves one cell (or hovers)
/// and adopts its selected power, a move that would leave the bounds keeps
/// the UAV in place and incurs the boundary penalty, users advance per the
/// mobility model, association and sum rate are recomputed. The shared reward
/// is sum_rate / rate_norm minus each agent's own boundary penalty.
inline SlotResult apply_joint_action(Scenario& s, const std::vector<ActionSpec>& joint,
                                     MobilityModel& mobility, std::mt19937_64& mobility_rng,
                                     double rate_norm, double boundary_penalty) {
    if (joint.size() != s.uavs.size()) {
        throw std::invalid_argument("apply_joint_action: one action per UAV required");
    }
    if (!(rate_norm > 0.0)) throw std::invalid_argument("apply_joint_action: rate_norm must be positive");

    std::vector<bool> violated(s.uavs.size(), false);
    for (std::size_t i = 0; i < s.uavs.size(); ++i) {
        bool v = false;
        detail::apply_move(s.uavs[i].position, joint[i].move, s.cell_size, s.bounds, v);
        violated[i] = v;
        if (joint[i].power_level < 0 ||
            static_cast<std::size_t>(joint[i].power_level) >= s.channel.power_ladder_w.size()) {
            throw std::invalid_argument("apply_joint_action: power level out of ladder");
        }
        s.uavs[i].power_level_index = joint[i].power_level;
    }

    mobility.advance(s, s.clock.slot_seconds, mobility_rng);
    s.clock.slot += 1;

    SlotResult res;
    res.association = associate_users(s);
    for (UserState& u : s.users) u.serving_uav = res.association.at(u.id);
    const SumRate sr = sum_rate(s, res.association);

    res.rewards.resize(s.uavs.size());
    const double shared = sr.total_bps / rate_norm;
    for (std::size_t i = 0; i < s.uavs.size(); ++i) {
        res.rewards[i] = shared - (violated[i] ? boundary_penalty : 0.0);
    }

    res.row.slot = s.clock.slot;
    res.row.actions = joint;
    res.row.sum_rate_bps = sr.total_bps;
    res.row.rewards = res.rewards;
    for (const UavState& u : s.uavs) {
        res.row.uav_positions.push_back(u.position);
        res.row.power_levels.push_back(u.power_level_index);
    }
    for (const UserState& u : s.users) {
        res.row.user_positions.push_back(u.position);
        res.row.per_user_rate_bps.push_back(sr.per_user_bps.at(u.id));
    }
    return res;
}

/// K-means-style split of the users' initial positions (deterministic:
/// evenly spaced seeds over id-sorted users, assignment ties to the lower
/// cluster index). UAVs hover at z_min + cell_size/2, clamped to z_max.
inline std::vector<Position3> centroid_placement(const Scenario& s, int k) {
    if (k < 1 || s.users.empty()) {
        throw std::invalid_argument("centroid_placement: need users and k >= 1");
    }
    std::vector<Position3> pts;
    for (const UserState& u : s.users) pts.push_back(u.position);
    std::vector<Position3> centers(k);
    const int n = static_cast<int>(pts.size());
    for (int j = 0; j < k; ++j) centers[j] = pts[static_cast<std::size_t>(j) * n / k];

    std::vector<int> owner(pts.size(), 0);
    for (int iter = 0; iter < 64; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            int best = 0;
            double best_d = horizontal_distance(pts[i], centers[0]);
            for (int j = 1; j < k; ++j) {
                const double d = horizontal_distance(pts[i], centers[j]);
                if (d < best_d) {
                    best_d = d;
                    best = j;
                }
            }
            if (owner[i] != best) {
                owner[i] = best;
                changed = true;
            }
        }
        for (int j = 0; j < k; ++j) {
            double cx = 0.0, cy = 0.0;
            int count = 0;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                if (owner[i] != j) continue;
                cx += pts[i].x;
                cy += pts[i].y;
                ++count;
            }
            if (count > 0) centers[j] = Position3{cx / count, cy / count, 0.0};
        }
        if (!changed) break;
    }
    const double hover_z = std::min(s.bounds.z_min + 0.5 * s.cell_size, s.bounds.z_max);
    for (Position3& c : centers) c.z = hover_z;
    return centers;
}

namespace detail {

inline double auto_rate_norm(const Scenario& initial) {
    Scenario s = initial;
    const auto centers = centroid_placement(s, static_cast<int>(s.uavs.size()));
    for (std::size_t i = 0; i < s.uavs.size(); ++i) {
        s.uavs[i].position = centers[i];
        s.uavs[i].power_level_index = 0;  // ladder is descending: 0 is max power
    }
    const double r = sum_rate(s, associate_users(s)).total_bps;
    return r > 0.0 ? r : 1.0;
}

inline std::map<int, Position3> unpack_positions(const Eigen::VectorXd& v,
                                                 const std::vector<UserState>& users) {
    std::map<int, Position3> out;
    for (std::size_t i = 0; i < users.size(); ++i) {
        out[users[i].id] = Position3{v(2 * i), v(2 * i + 1), 0.0};
    }
    return out;
}

inline void finalize_log(EpisodeLog& log) {
    double rate = 0.0, reward = 0.0;
    for (const EpisodeRow& row : log.rows) {
        rate += row.sum_rate_bps;
        double mean_r = 0.0;
        for (double r : row.rewards) mean_r += r;
        if (!row.rewards.empty()) mean_r /= static_cast<double>(row.rewards.size());
        reward += mean_r;
    }
    if (!log.rows.empty()) log.mean_sum_rate_bps = rate / static_cast<double>(log.rows.size());
    log.cumulative_reward = reward;
}

}  // namespace detail

struct TrainResult {
    std::vector<QTable<LocalState>> tables;
    std::vector<EpisodeLog> episodes;
    double rate_norm_used{0.0};
};

struct TrainSettings {
    MobilityConfig mobility;
    ReservoirConfig esn;
    int esn_train_slots{300};
};

/// Full MAQL loop: pretrain the ESN forecaster on a mobility rollout, then per
/// episode run predict -> encode -> select -> apply -> update, with epsilon
/// decaying per episode. Deterministic in (scenario, settings, seed): mobility
/// draws come from per-episode child seeds, action exploration from its own
/// stream, so paired baselines can replay identical user paths.
inline TrainResult train(const Scenario& initial, const HyperParams& h,
                         const TrainSettings& settings, std::uint64_t seed) {
    {
        const auto violations = validate_scenario(initial);
        if (!violations.empty()) {
            throw std::invalid_argument("train: invalid scenario: " + violations.front());
        }
    }
    const auto actions = enumerate_actions(initial.channel);
    TrainResult result;
    result.rate_norm_used = h.rate_norm > 0.0 ? h.rate_norm : detail::auto_rate_norm(initial);
    result.tables.assign(initial.uavs.size(), QTable<LocalState>(static_cast<int>(actions.size())));
    if (h.episodes <= 0) return result;

    // Pretrain the forecaster on a rollout of the mobility model.
    PositionForecaster forecaster(settings.esn, static_cast<int>(initial.users.size()),
                                  initial.bounds);
    {
        Scenario roll = initial;
        MobilityModel mobility(settings.mobility, roll);
        std::mt19937_64 rng(seed_stream(seed, "esn-rollout"));
        std::vector<Eigen::VectorXd> series;
        series.push_back(PositionForecaster::pack(roll.users));
        const int slots = std::max(settings.esn_train_slots, settings.esn.washout + 2);
        for (int t = 0; t < slots; ++t) {
            mobility.advance(roll, roll.clock.slot_seconds, rng);
            roll.clock.slot += 1;
            series.push_back(PositionForecaster::pack(roll.users));
        }
        forecaster.train(series);
    }

    std::mt19937_64 select_rng(seed_stream(seed, "select"));
    for (int e = 0; e < h.episodes; ++e) {
        const double eps = epsilon_at(h, e);
        Scenario s = initial;
        // Keep UAVs on the cell-center lattice so grid moves stay aligned.
        for (UavState& u : s.uavs) u.position = cell_center(snap_to_grid(u.position, s), s);
        MobilityModel mobility(settings.mobility, s);
        std::mt19937_64 mobility_rng(seed_stream(seed, "mobility", e));

        forecaster.reset_state();
        forecaster.observe(PositionForecaster::pack(s.users));
        Association assoc = associate_users(s);
        auto predicted = detail::unpack_positions(forecaster.predict_one_step(), s.users);
        std::vector<LocalState> st;
        for (const UavState& u : s.uavs) st.push_back(encode_local_state(u, predicted, assoc, s));

        EpisodeLog log;
        log.episode = e;
        for (int t = 0; t < h.slots_per_episode; ++t) {
            std::vector<ActionSpec> joint;
            std::vector<int> chosen;
            for (std::size_t i = 0; i < s.uavs.size(); ++i) {
                const int a = select_action(result.tables[i], st[i], eps, select_rng);
                chosen.push_back(a);
                joint.push_back(actions[a]);
            }
            SlotResult res = apply_joint_action(s, joint, mobility, mobility_rng,
                                                result.rate_norm_used, h.boundary_penalty);
            forecaster.observe(PositionForecaster::pack(s.users));
            const auto predicted_next = detail::unpack_positions(forecaster.predict_one_step(), s.users);
            std::vector<LocalState> st_next;
            for (const UavState& u : s.uavs) {
                st_next.push_back(encode_local_state(u, predicted_next, res.association, s));
            }
            for (std::size_t i = 0; i < s.uavs.size(); ++i) {
                update_q(result.tables[i], st[i], chosen[i], res.rewards[i], st_next[i], h);
            }
            st = std::move(st_next);
            log.rows.push_back(std::move(res.row));
        }
        detail::finalize_log(log);
        result.episodes.push_back(std::move(log));
    }
    return result;
}

enum class PlacementMode { centroid, fixed };

/// Fixed-UAV baseline: centroid (k-means) or caller-supplied placement, max
/// power, users moving exactly as in train() for the same seed (identical
/// per-episode mobility child seeds).
inline std::vector<EpisodeLog> static_baseline(const Scenario& initial, const HyperParams& h,
                                               const MobilityConfig& mobility_cfg,
                                               std::uint64_t seed,
                                               PlacementMode placement = PlacementMode::centroid,
                                               const std::vector<Position3>* fixed = nullptr) {
    {
        const auto violations = validate_scenario(initial);
        if (!violations.empty()) {
            throw std::invalid_argument("static_baseline: invalid scenario: " + violations.front());
        }
    }
    Scenario base = initial;
    std::vector<Position3> centers;
    if (placement == PlacementMode::centroid) {
        centers = centroid_placement(base, static_cast<int>(base.uavs.size()));
    } else {
        if (fixed == nullptr || fixed->size() != base.uavs.size()) {
            throw std::invalid_argument("static_baseline: fixed placement needs one position per UAV");
        }
        centers = *fixed;
    }
    for (std::size_t i = 0; i < base.uavs.size(); ++i) {
        base.uavs[i].position = centers[i];
        base.uavs[i].power_level_index = 0;
    }

    std::vector<EpisodeLog> logs;
    for (int e = 0; e < h.episodes; ++e) {
        Scenario s = base;
        MobilityModel mobility(mobility_cfg, s);
        std::mt19937_64 mobility_rng(seed_stream(seed, "mobility", e));
        EpisodeLog log;
        log.episode = e;
        for (int t = 0; t < h.slots_per_episode; ++t) {
            mobility.advance(s, s.clock.slot_seconds, mobility_rng);
            s.clock.slot += 1;
            const Association assoc = associate_users(s);
            const SumRate sr = sum_rate(s, assoc);
            EpisodeRow row;
            row.slot = s.clock.slot;
            row.sum_rate_bps = sr.total_bps;
            for (const UavState& u : s.uavs) {
                row.uav_positions.push_back(u.position);
                row.power_levels.push_back(u.power_level_index);
            }
            for (const UserState& u : s.users) {
                row.user_positions.push_back(u.position);
                row.per_user_rate_bps.push_back(sr.per_user_bps.at(u.id));
            }
            log.rows.push_back(std::move(row));
        }
        detail::finalize_log(log);
        logs.push_back(std::move(log));
    }
    return logs;
}

/// Mean of the per-episode mean sum rates over the final fraction of episodes.
inline double tail_mean_sum_rate(const std::vector<EpisodeLog>& logs, double tail_fraction = 0.1) {
    if (logs.empty()) return 0.0;
    const auto n = logs.size();
    auto tail = static_cast<std::size_t>(std::ceil(n * std::clamp(tail_fraction, 0.0, 1.0)));
    tail = std::max<std::size_t>(1, std::min(tail, n));
    double sum = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) sum += logs[i].mean_sum_rate_bps;
    return sum / static_cast<double>(tail);
}

}  // namespace uawnsim
