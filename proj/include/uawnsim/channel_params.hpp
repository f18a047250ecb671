#pragma once

// Air-to-ground channel parameters. Kept separate from channel.hpp because
// the Scenario value embeds them.

#include <cmath>
#include <string>
#include <vector>

namespace uawnsim {

/// expected-loss: mix LoS/NLoS excess losses by p_los (deterministic).
/// sampled-loss: draw the LoS state per link from the caller's rng.
enum class LossMode { expected, sampled };

struct ChannelParams {
    double carrier_hz{2.0e9};
    // sigmoid LoS-probability parameters (urban defaults)
    double los_a{9.61};
    double los_b{0.16};
    double eta_los_db{1.0};
    double eta_nlos_db{20.0};
    double noise_density_w_hz{3.9810717055349565e-21};  // -174 dBm/Hz
    std::vector<double> power_ladder_w{1.0, 0.5, 0.25};  // descending
    LossMode mode{LossMode::expected};
};

inline std::vector<std::string> validate_channel_params(const ChannelParams& p) {
    std::vector<std::string> v;
    if (!(p.carrier_hz > 0.0)) v.push_back("carrier_hz: must be positive");
    if (!(p.los_b > 0.0)) v.push_back("los_b: must be positive");
    if (!(p.eta_los_db >= 0.0)) v.push_back("eta_los_db: must be >= 0");
    if (!(p.eta_nlos_db >= p.eta_los_db)) v.push_back("eta_nlos_db: must be >= eta_los_db");
    if (!(p.noise_density_w_hz > 0.0)) v.push_back("noise_density_w_hz: must be positive");
    if (p.power_ladder_w.empty()) v.push_back("power_ladder_w: at least one level required");
    for (std::size_t i = 0; i < p.power_ladder_w.size(); ++i) {
        if (!(p.power_ladder_w[i] > 0.0)) {
            v.push_back("power_ladder_w[" + std::to_string(i) + "]: must be positive");
        }
        if (i > 0 && !(p.power_ladder_w[i] < p.power_ladder_w[i - 1])) {
            v.push_back("power_ladder_w: levels must be strictly decreasing");
        }
    }
    return v;
}

}  // namespace uawnsim
