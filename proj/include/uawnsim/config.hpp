#pragma once

// Strict-schema experiment configuration. Format: UTF-8 text, one
// `section.key = value` per line, '#' starts a comment, blank lines ignored.
// Unknown and duplicate keys are errors; parse_config reports every violation
// it finds, not just the first.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "uawnsim/cache_rl.hpp"
#include "uawnsim/channel_params.hpp"
#include "uawnsim/mobility.hpp"
#include "uawnsim/reservoir.hpp"
#include "uawnsim/seeds.hpp"
#include "uawnsim/trajectory_rl.hpp"
#include "uawnsim/world.hpp"

namespace uawnsim {

enum class ExperimentMode { trajectory, caching };
enum class UavPlacement { spread, centroid, explicit_list };
enum class UserPlacement { uniform, explicit_list };

struct ScenarioConfig {
    double area_x{1000.0};
    double area_y{1000.0};
    double z_min{50.0};
    double z_max{300.0};
    double cell_size{250.0};
    int n_uavs{2};
    int n_users{20};
    double uav_bandwidth_hz{1.0e6};
    double slot_seconds{1.0};
    UavPlacement uav_placement{UavPlacement::spread};
    std::vector<double> uav_positions;  // x,y,z triples when explicit
    UserPlacement user_placement{UserPlacement::uniform};
    std::vector<double> user_positions;  // x,y pairs when explicit
};

struct ExperimentSettings {
    ExperimentMode mode{ExperimentMode::trajectory};
    int episodes{100};
    int slots{200};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string output_dir{"out"};
    double tail_fraction{0.1};
};

struct CachingSweep {
    std::vector<int> n_uavs{1, 2, 3, 4, 5};
    std::vector<CachePolicyKind> policies{CachePolicyKind::lsm, CachePolicyKind::q_with_cache,
                                          CachePolicyKind::q_without_cache};
};

struct ExperimentConfig {
    ScenarioConfig scenario;
    ChannelParams channel;
    MobilityConfig mobility{MobilityVariant::random_waypoint, 1.5, 3.5, 0.0, {}};
    ReservoirConfig esn{100, 0.9, 1.0, 0.3, 0.1, 1e-4, 20, 1};
    int esn_train_slots{300};
    ReservoirConfig lsm{64, 0.9, 1.0, 0.5, 0.2, 1e-3, 0, 1};
    HyperParams rl;
    CachingSettings caching;
    CachingSweep sweep;
    ExperimentSettings experiment;
    std::string source_path;
    std::uint64_t config_hash{0};
};

struct ConfigResult {
    std::optional<ExperimentConfig> config;
    std::vector<std::string> violations;
    bool ok() const { return violations.empty() && config.has_value(); }
};

namespace detail {

struct RawConfig {
    std::map<std::string, std::string> values;
    std::vector<std::string> violations;
};

inline RawConfig read_key_values(std::istream& in) {
    RawConfig raw;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            raw.violations.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
            continue;
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            raw.violations.push_back("line " + std::to_string(line_no) + ": empty key");
            continue;
        }
        auto [it, inserted] = raw.values.emplace(key, value);
        if (!inserted) {
            if (key == "experiment.mode" && it->second != value) {
                raw.violations.push_back(
                    "experiment.mode: both '" + it->second + "' and '" + value +
                    "' set; exactly one mode required");
            } else {
                raw.violations.push_back("duplicate key '" + key + "' (line " +
                                         std::to_string(line_no) + ")");
            }
        }
    }
    return raw;
}

class SchemaReader {
public:
    SchemaReader(RawConfig raw, std::string base_dir)
        : raw_(std::move(raw)), base_dir_(std::move(base_dir)) {
        violations_ = raw_.violations;
    }

    bool has(const std::string& key) {
        consumed_.insert(key);
        return raw_.values.count(key) > 0;
    }

    void number(const std::string& key, double& out, double lo, double hi,
                bool lo_open = false, bool hi_open = false) {
        std::string v;
        if (!fetch(key, v)) return;
        double parsed = 0.0;
        if (!parse_double_strict(v, parsed)) {
            fail(key, "not a number: '" + v + "'");
            return;
        }
        if (!in_range(parsed, lo, hi, lo_open, hi_open)) {
            fail(key, "value " + v + " outside allowed range");
            return;
        }
        out = parsed;
    }

    void integer(const std::string& key, int& out, int lo, int hi) {
        std::string v;
        if (!fetch(key, v)) return;
        int parsed = 0;
        if (!parse_int_strict(v, parsed) || parsed < lo || parsed > hi) {
            fail(key, "not an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                          "]: '" + v + "'");
            return;
        }
        out = parsed;
    }

    void number_list(const std::string& key, std::vector<double>& out, double lo,
                     bool lo_open = false) {
        std::string v;
        if (!fetch(key, v)) return;
        std::vector<double> parsed;
        for (const std::string& field : split_csv(v)) {
            double d = 0.0;
            if (!parse_double_strict(field, d) || !in_range(d, lo, 1e308, lo_open, false)) {
                fail(key, "bad list element '" + field + "'");
                return;
            }
            parsed.push_back(d);
        }
        if (parsed.empty()) {
            fail(key, "empty list");
            return;
        }
        out = std::move(parsed);
    }

    void int_list(const std::string& key, std::vector<int>& out, int lo) {
        std::string v;
        if (!fetch(key, v)) return;
        std::vector<int> parsed;
        for (const std::string& field : split_csv(v)) {
            int d = 0;
            if (!parse_int_strict(field, d) || d < lo) {
                fail(key, "bad list element '" + field + "'");
                return;
            }
            parsed.push_back(d);
        }
        if (parsed.empty()) {
            fail(key, "empty list");
            return;
        }
        out = std::move(parsed);
    }

    void seed_list(const std::string& key, std::vector<std::uint64_t>& out) {
        std::string v;
        if (!fetch(key, v)) return;
        std::vector<std::uint64_t> parsed;
        for (const std::string& field : split_csv(v)) {
            try {
                std::size_t pos = 0;
                const unsigned long long s = std::stoull(field, &pos);
                if (pos != field.size()) throw std::invalid_argument(field);
                parsed.push_back(s);
            } catch (const std::exception&) {
                fail(key, "bad seed '" + field + "'");
                return;
            }
        }
        if (parsed.empty()) {
            fail(key, "empty seed list");
            return;
        }
        out = std::move(parsed);
    }

    void text(const std::string& key, std::string& out) {
        std::string v;
        if (!fetch(key, v)) return;
        out = v;
    }

    template <typename Enum>
    void choice(const std::string& key, Enum& out,
                std::initializer_list<std::pair<const char*, Enum>> options) {
        std::string v;
        if (!fetch(key, v)) return;
        for (const auto& [name, value] : options) {
            if (v == name) {
                out = value;
                return;
            }
        }
        std::string allowed;
        for (const auto& [name, value] : options) allowed += std::string(allowed.empty() ? "" : "|") + name;
        fail(key, "'" + v + "' not one of " + allowed);
    }

    void existing_file(const std::string& key, std::string& out) {
        std::string v;
        if (!fetch(key, v)) return;
        std::filesystem::path p(v);
        if (p.is_relative() && !base_dir_.empty()) p = std::filesystem::path(base_dir_) / p;
        if (!std::filesystem::exists(p)) {
            fail(key, "referenced file does not exist: " + p.string());
            return;
        }
        out = p.string();
    }

    void fail(const std::string& key, const std::string& msg) {
        violations_.push_back(key + ": " + msg);
    }

    void finish_unknown_keys() {
        for (const auto& [key, value] : raw_.values) {
            if (!consumed_.count(key)) violations_.push_back("unknown key '" + key + "'");
        }
    }

    std::vector<std::string>& violations() { return violations_; }

private:
    bool fetch(const std::string& key, std::string& value) {
        consumed_.insert(key);
        auto it = raw_.values.find(key);
        if (it == raw_.values.end()) return false;
        value = it->second;
        return true;
    }

    static bool in_range(double v, double lo, double hi, bool lo_open, bool hi_open) {
        if (lo_open ? !(v > lo) : !(v >= lo)) return false;
        if (hi_open ? !(v < hi) : !(v <= hi)) return false;
        return true;
    }

    RawConfig raw_;
    std::string base_dir_;
    std::set<std::string> consumed_;
    std::vector<std::string> violations_;
};

}  // namespace detail

inline ConfigResult parse_config_stream(std::istream& in, const std::string& source_path,
                                        const std::string& base_dir) {
    detail::SchemaReader r(detail::read_key_values(in), base_dir);
    ExperimentConfig c;
    c.source_path = source_path;

    r.choice("experiment.mode", c.experiment.mode,
             {{"trajectory", ExperimentMode::trajectory}, {"caching", ExperimentMode::caching}});
    r.integer("experiment.episodes", c.experiment.episodes, 0, 1000000);
    r.integer("experiment.slots", c.experiment.slots, 1, 100000000);
    r.seed_list("experiment.seeds", c.experiment.seeds);
    r.text("experiment.output_dir", c.experiment.output_dir);
    r.number("experiment.tail_fraction", c.experiment.tail_fraction, 0.0, 1.0, true, false);

    r.number("scenario.area_x", c.scenario.area_x, 0.0, 1e9, true);
    r.number("scenario.area_y", c.scenario.area_y, 0.0, 1e9, true);
    r.number("scenario.z_min", c.scenario.z_min, 0.0, 1e9);
    r.number("scenario.z_max", c.scenario.z_max, 0.0, 1e9);
    r.number("scenario.cell_size", c.scenario.cell_size, 0.0, 1e9, true);
    r.integer("scenario.n_uavs", c.scenario.n_uavs, 1, 1000);
    r.integer("scenario.n_users", c.scenario.n_users, 1, 100000);
    r.number("scenario.uav_bandwidth_hz", c.scenario.uav_bandwidth_hz, 0.0, 1e15, true);
    r.number("scenario.slot_seconds", c.scenario.slot_seconds, 0.0, 1e6, true);
    r.choice("scenario.uav_placement", c.scenario.uav_placement,
             {{"spread", UavPlacement::spread},
              {"centroid", UavPlacement::centroid},
              {"explicit", UavPlacement::explicit_list}});
    if (r.has("scenario.uav_positions")) {
        r.number_list("scenario.uav_positions", c.scenario.uav_positions, -1e308);
    }
    r.choice("scenario.user_placement", c.scenario.user_placement,
             {{"uniform", UserPlacement::uniform}, {"explicit", UserPlacement::explicit_list}});
    if (r.has("scenario.user_positions")) {
        r.number_list("scenario.user_positions", c.scenario.user_positions, -1e308);
    }

    r.number("channel.carrier_hz", c.channel.carrier_hz, 0.0, 1e15, true);
    r.number("channel.los_a", c.channel.los_a, 0.0, 1e6, true);
    r.number("channel.los_b", c.channel.los_b, 0.0, 1e6, true);
    r.number("channel.eta_los_db", c.channel.eta_los_db, 0.0, 1e6);
    r.number("channel.eta_nlos_db", c.channel.eta_nlos_db, 0.0, 1e6);
    r.number("channel.noise_density_w_hz", c.channel.noise_density_w_hz, 0.0, 1.0, true);
    if (r.has("channel.power_ladder_w")) {
        r.number_list("channel.power_ladder_w", c.channel.power_ladder_w, 0.0, true);
    }
    r.choice("channel.mode", c.channel.mode,
             {{"expected", LossMode::expected}, {"sampled", LossMode::sampled}});

    r.choice("mobility.model", c.mobility.variant,
             {{"static", MobilityVariant::static_users},
              {"random_waypoint", MobilityVariant::random_waypoint},
              {"trace", MobilityVariant::trace_playback}});
    r.number("mobility.speed_min", c.mobility.speed_min_mps, 0.0, 1e6, true);
    r.number("mobility.speed_max", c.mobility.speed_max_mps, 0.0, 1e6, true);
    r.number("mobility.pause_s", c.mobility.pause_s, 0.0, 1e308);
    if (c.mobility.variant == MobilityVariant::trace_playback || r.has("mobility.trace_path")) {
        r.existing_file("mobility.trace_path", c.mobility.trace_path);
        if (c.mobility.variant == MobilityVariant::trace_playback && c.mobility.trace_path.empty()) {
            r.fail("mobility.trace_path", "required when mobility.model = trace");
        }
    }

    auto reservoir_keys = [&r](const std::string& prefix, ReservoirConfig& cfg) {
        r.integer(prefix + ".reservoir_size", cfg.reservoir_size, 1, 100000);
        r.number(prefix + ".spectral_radius", cfg.spectral_radius, 0.0, 1.0, true, true);
        r.number(prefix + ".input_scale", cfg.input_scale, 0.0, 1e6, true);
        r.number(prefix + ".leak_rate", cfg.leak_rate, 0.0, 1.0, true, false);
        r.number(prefix + ".connectivity", cfg.connectivity, 0.0, 1.0, true, false);
        r.number(prefix + ".ridge_lambda", cfg.ridge_lambda, 0.0, 1e308);
        r.integer(prefix + ".washout", cfg.washout, 0, 1000000);
    };
    reservoir_keys("esn", c.esn);
    r.integer("esn.train_slots", c.esn_train_slots, 2, 10000000);
    reservoir_keys("lsm", c.lsm);
    r.integer("lsm.refit_interval", c.caching.lsm_refit_interval, 1, 10000000);
    r.integer("lsm.warmup_slots", c.caching.lsm_warmup_slots, 0, 10000000);

    r.number("rl.alpha", c.rl.alpha, 0.0, 1.0, true, false);
    r.number("rl.gamma", c.rl.gamma, 0.0, 1.0, false, true);
    r.number("rl.epsilon_start", c.rl.epsilon_start, 0.0, 1.0);
    r.number("rl.epsilon_end", c.rl.epsilon_end, 0.0, 1.0);
    r.number("rl.epsilon_decay", c.rl.epsilon_decay, 0.0, 1.0, true, false);
    r.number("rl.boundary_penalty", c.rl.boundary_penalty, 0.0, 1e308);
    r.number("rl.rate_norm", c.rl.rate_norm, 0.0, 1e308);

    r.integer("caching.catalog_size", c.caching.catalog.size, 1, 1000000);
    if (r.has("caching.content_bits")) {
        r.number_list("caching.content_bits", c.caching.catalog.content_bits, 0.0, true);
    }
    r.number("caching.zipf_s", c.caching.catalog.zipf_s, 0.0, 1e6, true);
    r.number("caching.request_prob", c.caching.catalog.request_prob, 0.0, 1.0, true, false);
    r.integer("caching.cache_capacity", c.caching.cache_capacity, 1, 1000000);
    r.number("caching.licensed_hz", c.caching.band.licensed_hz, 0.0, 1e15);
    r.number("caching.unlicensed_hz", c.caching.band.unlicensed_hz, 0.0, 1e15);
    r.number("caching.p_unlicensed", c.caching.band.p_unlicensed, 0.0, 1.0);
    r.number("caching.backhaul_beta", c.caching.band.backhaul_beta, 0.0, 1.0, true, false);
    r.integer("caching.freq_window", c.caching.freq_window, 1, 1000000);
    r.integer("caching.stability_window", c.caching.stability_window, 1, 1000000);
    r.number("caching.rl_alpha", c.caching.rl.alpha, 0.0, 1.0, true, false);
    r.number("caching.rl_gamma", c.caching.rl.gamma, 0.0, 1.0, false, true);
    r.number("caching.rl_epsilon_start", c.caching.rl.epsilon_start, 0.0, 1.0);
    r.number("caching.rl_epsilon_end", c.caching.rl.epsilon_end, 0.0, 1.0);
    r.number("caching.rl_epsilon_decay", c.caching.rl.epsilon_decay, 0.0, 1.0, true, false);
    r.number("caching.tail_fraction", c.caching.tail_fraction, 0.0, 1.0, true, false);
    if (r.has("caching.n_uavs")) r.int_list("caching.n_uavs", c.sweep.n_uavs, 1);
    if (r.has("caching.policies")) {
        std::string v;
        r.text("caching.policies", v);
        std::vector<CachePolicyKind> kinds;
        for (const std::string& name : detail::split_csv(v)) {
            if (name == "lsm") kinds.push_back(CachePolicyKind::lsm);
            else if (name == "q_cache") kinds.push_back(CachePolicyKind::q_with_cache);
            else if (name == "q_nocache") kinds.push_back(CachePolicyKind::q_without_cache);
            else r.fail("caching.policies", "'" + name + "' not one of lsm|q_cache|q_nocache");
        }
        if (!kinds.empty()) c.sweep.policies = std::move(kinds);
    }

    r.finish_unknown_keys();

    // cross-field checks
    if (c.scenario.z_max < c.scenario.z_min) {
        r.fail("scenario.z_max", "must be >= scenario.z_min");
    }
    if (c.mobility.variant == MobilityVariant::random_waypoint &&
        c.mobility.speed_max_mps < c.mobility.speed_min_mps) {
        r.fail("mobility.speed_max", "must be >= mobility.speed_min");
    }
    if (c.scenario.uav_placement == UavPlacement::explicit_list &&
        c.scenario.uav_positions.size() != static_cast<std::size_t>(3 * c.scenario.n_uavs)) {
        r.fail("scenario.uav_positions", "explicit placement needs 3*n_uavs values");
    }
    if (c.scenario.user_placement == UserPlacement::explicit_list &&
        c.scenario.user_positions.size() != static_cast<std::size_t>(2 * c.scenario.n_users)) {
        r.fail("scenario.user_positions", "explicit placement needs 2*n_users values");
    }
    if (c.rl.epsilon_end > c.rl.epsilon_start) {
        r.fail("rl.epsilon_end", "must be <= rl.epsilon_start");
    }
    if (!c.caching.catalog.content_bits.empty() && c.caching.catalog.content_bits.size() != 1 &&
        c.caching.catalog.content_bits.size() != static_cast<std::size_t>(c.caching.catalog.size)) {
        r.fail("caching.content_bits", "need one value or one per content");
    }
    for (const std::string& msg : validate_channel_params(c.channel)) {
        r.fail("channel", msg);
    }
    for (const std::string& msg : validate_band_model(c.caching.band)) {
        r.fail("caching", msg);
    }

    c.rl.episodes = c.experiment.episodes;
    c.rl.slots_per_episode = c.experiment.slots;
    c.caching.rl.episodes = 1;
    c.caching.rl.slots_per_episode = c.experiment.slots;
    c.caching.slots = c.experiment.slots;
    c.caching.catalog.content_bits =
        c.caching.catalog.content_bits.empty() ? std::vector<double>{1.0e6}
                                               : c.caching.catalog.content_bits;

    ConfigResult result;
    result.violations = r.violations();
    if (result.violations.empty()) result.config = std::move(c);
    return result;
}

/// Parse and fully validate a config file; on success the returned config
/// carries the FNV-1a hash of the raw file bytes.
inline ConfigResult parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        ConfigResult r;
        r.violations.push_back("cannot open config file: " + path);
        return r;
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string bytes = buffer.str();
    std::istringstream stream(bytes);
    const std::string base_dir = std::filesystem::path(path).parent_path().string();
    ConfigResult result = parse_config_stream(stream, path, base_dir);
    if (result.config) result.config->config_hash = fnv1a_hash(bytes);
    return result;
}

/// Materialize a Scenario from the config for one experiment seed. Users draw
/// uniform positions from the (seed, "placement") stream unless explicit.
inline Scenario build_scenario(const ExperimentConfig& c, std::uint64_t seed) {
    Scenario s;
    s.bounds = Box{c.scenario.area_x, c.scenario.area_y, c.scenario.z_min, c.scenario.z_max};
    s.cell_size = c.scenario.cell_size;
    s.channel = c.channel;
    s.clock.slot_seconds = c.scenario.slot_seconds;

    std::mt19937_64 rng(seed_stream(seed, "placement"));
    std::uniform_real_distribution<double> ux(0.0, s.bounds.x_max);
    std::uniform_real_distribution<double> uy(0.0, s.bounds.y_max);
    for (int i = 0; i < c.scenario.n_users; ++i) {
        UserState u;
        u.id = i;
        if (c.scenario.user_placement == UserPlacement::explicit_list) {
            u.position = Position3{c.scenario.user_positions[2 * i],
                                   c.scenario.user_positions[2 * i + 1], 0.0};
        } else {
            u.position = Position3{ux(rng), uy(rng), 0.0};
        }
        s.users.push_back(u);
    }

    const double hover_z = std::min(s.bounds.z_min + 0.5 * s.cell_size, s.bounds.z_max);
    for (int i = 0; i < c.scenario.n_uavs; ++i) {
        UavState u;
        u.id = i;
        u.bandwidth_hz = c.scenario.uav_bandwidth_hz;
        u.power_level_index = 0;
        if (c.scenario.uav_placement == UavPlacement::explicit_list) {
            u.position = Position3{c.scenario.uav_positions[3 * i], c.scenario.uav_positions[3 * i + 1],
                                   c.scenario.uav_positions[3 * i + 2]};
        } else {
            const double fx = (static_cast<double>(i) + 0.5) / c.scenario.n_uavs;
            u.position = Position3{fx * s.bounds.x_max, 0.5 * s.bounds.y_max, hover_z};
        }
        s.uavs.push_back(u);
    }
    if (c.scenario.uav_placement == UavPlacement::centroid) {
        const auto centers = centroid_placement(s, c.scenario.n_uavs);
        for (int i = 0; i < c.scenario.n_uavs; ++i) s.uavs[i].position = centers[i];
    }
    return s;
}

}  // namespace uawnsim
