#pragma once

// Probabilistic LoS/NLoS air-to-ground link model: elevation-angle dependent
// LoS probability, free-space path loss plus excess loss, SINR and per-user
// rate under equal intra-UAV bandwidth split.

#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

#include "uawnsim/channel_params.hpp"
#include "uawnsim/world.hpp"

namespace uawnsim {

inline constexpr double kSpeedOfLight = 299792458.0;

/// Elevation angle in degrees seen from the user toward the UAV.
/// 90 when the UAV is directly overhead.
inline double elevation_angle_deg(const Position3& uav, const Position3& user) {
    if (!(uav.z > user.z)) throw std::domain_error("elevation_angle: uav must be above user");
    const double h = horizontal_distance(uav, user);
    if (h == 0.0) return 90.0;
    return std::atan((uav.z - user.z) / h) * 180.0 / M_PI;
}

/// P(LoS | theta) = 1 / (1 + a * exp(-b * (theta - a))), strictly increasing.
inline double los_probability(double theta_deg, const ChannelParams& p) {
    if (!(theta_deg > 0.0) || !(theta_deg <= 90.0)) {
        throw std::domain_error("los_probability: theta must be in (0, 90]");
    }
    return 1.0 / (1.0 + p.los_a * std::exp(-p.los_b * (theta_deg - p.los_a)));
}

inline double free_space_path_loss_db(double distance_m, double carrier_hz) {
    if (!(distance_m > 0.0)) throw std::domain_error("fspl: distance must be positive");
    return 20.0 * std::log10(4.0 * M_PI * carrier_hz * distance_m / kSpeedOfLight);
}

/// FSPL plus LoS/NLoS excess loss. Expected mode mixes the excess losses by
/// p_los; sampled mode draws the LoS state from rng (contract error without one).
inline double path_loss_db(const Position3& uav, const Position3& user, const ChannelParams& p,
                           std::mt19937_64* rng = nullptr) {
    const double d = distance3(uav, user);
    if (!(d > 0.0)) throw std::domain_error("path_loss_db: zero distance");
    const double fspl = free_space_path_loss_db(d, p.carrier_hz);
    const double p_los = los_probability(elevation_angle_deg(uav, user), p);
    if (p.mode == LossMode::expected) {
        return fspl + p_los * p.eta_los_db + (1.0 - p_los) * p.eta_nlos_db;
    }
    if (rng == nullptr) throw std::invalid_argument("path_loss_db: sampled mode requires an rng");
    const bool los = std::uniform_real_distribution<double>(0.0, 1.0)(*rng) < p_los;
    return fspl + (los ? p.eta_los_db : p.eta_nlos_db);
}

struct LinkBudget {
    double elevation_deg{0.0};
    double p_los{0.0};
    double path_loss_db{0.0};
    double received_power_w{0.0};
    double sinr{0.0};
    double rate_bps{0.0};
};

inline LinkBudget link_budget(const Position3& uav, const Position3& user, const ChannelParams& p,
                              double tx_power_w, std::mt19937_64* rng = nullptr) {
    LinkBudget lb;
    lb.elevation_deg = elevation_angle_deg(uav, user);
    lb.p_los = los_probability(lb.elevation_deg, p);
    lb.path_loss_db = path_loss_db(uav, user, p, rng);
    lb.received_power_w = tx_power_w * std::pow(10.0, -lb.path_loss_db / 10.0);
    return lb;
}

inline double uav_tx_power_w(const UavState& u, const ChannelParams& p) {
    if (u.power_level_index < 0 ||
        static_cast<std::size_t>(u.power_level_index) >= p.power_ladder_w.size()) {
        throw std::invalid_argument("uav_tx_power_w: power_level_index out of ladder");
    }
    return p.power_ladder_w[u.power_level_index];
}

using Association = std::map<int, int>;  // user id -> UAV id

/// Map each user to the UAV with maximum expected received power; ties go to
/// the lowest UAV id.
inline Association associate_users(const Scenario& s) {
    if (s.uavs.empty()) throw std::invalid_argument("associate_users: no UAVs");
    ChannelParams expected = s.channel;
    expected.mode = LossMode::expected;
    Association out;
    for (const UserState& user : s.users) {
        int best_id = -1;
        double best_rx = -1.0;
        for (const UavState& uav : s.uavs) {
            const double rx = uav_tx_power_w(uav, expected) *
                              std::pow(10.0, -path_loss_db(uav.position, user.position, expected) / 10.0);
            if (rx > best_rx || (rx == best_rx && best_id >= 0 && uav.id < best_id)) {
                best_rx = rx;
                best_id = uav.id;
            }
        }
        out[user.id] = best_id;
    }
    return out;
}

struct SumRate {
    double total_bps{0.0};
    std::map<int, double> per_user_bps;
};

/// Per-user SINR with full co-channel interference between UAVs; each UAV's
/// bandwidth is split equally among its associated users.
/// rate_u = B_share * log2(1 + P_s*g_s / (sum_{j!=s} P_j*g_j + N0*B_share))
inline SumRate sum_rate(const Scenario& s, const Association& assoc,
                        std::mt19937_64* rng = nullptr) {
    std::map<int, int> load;  // UAV id -> associated user count
    for (const UserState& user : s.users) {
        auto it = assoc.find(user.id);
        if (it == assoc.end()) {
            throw std::invalid_argument("sum_rate: user " + std::to_string(user.id) +
                                        " missing from association");
        }
        ++load[it->second];
    }

    SumRate out;
    for (const UserState& user : s.users) {
        const int serving_id = assoc.at(user.id);
        double signal = 0.0;
        double interference = 0.0;
        double b_share = 0.0;
        for (const UavState& uav : s.uavs) {
            const double gain =
                std::pow(10.0, -path_loss_db(uav.position, user.position, s.channel, rng) / 10.0);
            const double rx = uav_tx_power_w(uav, s.channel) * gain;
            if (uav.id == serving_id) {
                signal = rx;
                b_share = uav.bandwidth_hz / static_cast<double>(load.at(serving_id));
            } else {
                interference += rx;
            }
        }
        if (b_share <= 0.0) {
            throw std::invalid_argument("sum_rate: serving UAV not present in scenario");
        }
        const double noise = s.channel.noise_density_w_hz * b_share;
        const double sinr = signal / (interference + noise);
        const double rate = b_share * std::log2(1.0 + sinr);
        out.per_user_bps[user.id] = rate;
        out.total_bps += rate;
    }
    return out;
}

}  // namespace uawnsim
