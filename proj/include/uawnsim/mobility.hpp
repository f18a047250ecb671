#pragma once

// User movement: GPS-trace playback (CSV), random-waypoint synthesis, and
// static users. Trace sets are immutable after load.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uawnsim/world.hpp"

namespace uawnsim {

struct TraceRecord {
    int user_id{0};
    double timestamp{0.0};
    double x{0.0};
    double y{0.0};
};

struct TraceParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TraceValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class TraceSet {
public:
    TraceSet() = default;
    explicit TraceSet(std::map<int, std::vector<TraceRecord>> by_user) : by_user_(std::move(by_user)) {}

    const std::map<int, std::vector<TraceRecord>>& by_user() const { return by_user_; }
    bool empty() const { return by_user_.empty(); }
    std::size_t user_count() const { return by_user_.size(); }

private:
    std::map<int, std::vector<TraceRecord>> by_user_;
};

namespace detail {

inline std::string trim(std::string s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline bool parse_double_strict(const std::string& s, double& out) {
    if (s.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stod(s, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == s.size() && std::isfinite(out);
}

inline bool parse_int_strict(const std::string& s, int& out) {
    if (s.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stoi(s, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == s.size();
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace detail

/// Load a `user_id,timestamp,x,y` CSV (UTF-8, '#' comments). Each user's rows
/// must appear in strictly increasing timestamp order. An empty file is a
/// valid, empty trace set.
inline TraceSet load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TraceParseError("load_trace: cannot open " + path);

    std::map<int, std::vector<TraceRecord>> by_user;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (!header_seen) {
            if (t != "user_id,timestamp,x,y") {
                throw TraceParseError("load_trace: line " + std::to_string(line_no) +
                                      ": expected header 'user_id,timestamp,x,y'");
            }
            header_seen = true;
            continue;
        }
        const auto fields = detail::split_csv(t);
        TraceRecord r;
        if (fields.size() != 4 || !detail::parse_int_strict(fields[0], r.user_id) ||
            !detail::parse_double_strict(fields[1], r.timestamp) ||
            !detail::parse_double_strict(fields[2], r.x) ||
            !detail::parse_double_strict(fields[3], r.y)) {
            throw TraceParseError("load_trace: line " + std::to_string(line_no) + ": malformed row '" + t + "'");
        }
        auto& recs = by_user[r.user_id];
        if (!recs.empty()) {
            if (r.timestamp == recs.back().timestamp) {
                throw TraceValidationError("load_trace: duplicate timestamp " +
                                           std::to_string(r.timestamp) + " for user " +
                                           std::to_string(r.user_id));
            }
            if (r.timestamp < recs.back().timestamp) {
                throw TraceValidationError("load_trace: non-monotone timestamps for user " +
                                           std::to_string(r.user_id));
            }
        }
        recs.push_back(r);
    }
    return TraceSet(std::move(by_user));
}

/// Piecewise-linear interpolation at time t, clamped to each user's range.
inline std::map<int, Position3> positions_at(const TraceSet& traces, double t) {
    std::map<int, Position3> out;
    for (const auto& [user, recs] : traces.by_user()) {
        if (recs.empty()) continue;
        if (t <= recs.front().timestamp) {
            out[user] = Position3{recs.front().x, recs.front().y, 0.0};
            continue;
        }
        if (t >= recs.back().timestamp) {
            out[user] = Position3{recs.back().x, recs.back().y, 0.0};
            continue;
        }
        const auto hi = std::upper_bound(recs.begin(), recs.end(), t,
                                         [](double v, const TraceRecord& r) { return v < r.timestamp; });
        const TraceRecord& b = *hi;
        const TraceRecord& a = *(hi - 1);
        const double w = (t - a.timestamp) / (b.timestamp - a.timestamp);
        out[user] = Position3{a.x + w * (b.x - a.x), a.y + w * (b.y - a.y), 0.0};
    }
    return out;
}

enum class MobilityVariant { static_users, random_waypoint, trace_playback };

struct MobilityConfig {
    MobilityVariant variant{MobilityVariant::random_waypoint};
    double speed_min_mps{1.0};
    double speed_max_mps{3.0};
    double pause_s{0.0};
    std::string trace_path;
};

/// Per-user random-waypoint state. Users begin in the pause phase, so an
/// infinite pause degenerates to static users exactly.
struct WaypointState {
    Position3 pos;
    Position3 target;
    double speed{0.0};
    double pause_left{0.0};
    bool has_target{false};
};

/// Advance one user by dt seconds. Draw order per new waypoint: target x,
/// target y, speed (three uniforms).
inline void step_random_waypoint(WaypointState& w, double dt, const Box& bounds,
                                 const MobilityConfig& cfg, std::mt19937_64& rng) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_random_waypoint: dt must be positive");
    std::uniform_real_distribution<double> ux(0.0, bounds.x_max);
    std::uniform_real_distribution<double> uy(0.0, bounds.y_max);
    std::uniform_real_distribution<double> uv(cfg.speed_min_mps, cfg.speed_max_mps);
    double left = dt;
    while (left > 0.0) {
        if (w.pause_left > 0.0) {
            if (std::isinf(w.pause_left)) return;
            const double take = std::min(w.pause_left, left);
            w.pause_left -= take;
            left -= take;
            continue;
        }
        if (!w.has_target) {
            w.target = Position3{ux(rng), uy(rng), 0.0};
            w.speed = uv(rng);
            w.has_target = true;
        }
        const double dist = horizontal_distance(w.pos, w.target);
        if (dist <= 1e-12 || !(w.speed > 0.0)) {
            w.pos = w.target;
            w.has_target = false;
            w.pause_left = cfg.pause_s;
            if (cfg.pause_s == 0.0 && !(w.speed > 0.0)) return;  // zero speed cannot progress
            continue;
        }
        const double need = dist / w.speed;
        if (need <= left) {
            w.pos = w.target;
            w.has_target = false;
            w.pause_left = cfg.pause_s;
            left -= need;
        } else {
            const double f = w.speed * left / dist;
            w.pos.x += (w.target.x - w.pos.x) * f;
            w.pos.y += (w.target.y - w.pos.y) * f;
            left = 0.0;
        }
    }
}

/// Owns the runtime mobility state for a scenario's users and advances them
/// slot by slot. All randomness comes from the rng passed to advance().
class MobilityModel {
public:
    MobilityModel() = default;

    MobilityModel(MobilityConfig cfg, const Scenario& s) : cfg_(std::move(cfg)) {
        if (cfg_.variant == MobilityVariant::trace_playback) traces_ = load_trace(cfg_.trace_path);
        init(s);
    }

    MobilityModel(MobilityConfig cfg, const Scenario& s, TraceSet traces)
        : cfg_(std::move(cfg)), traces_(std::move(traces)) {
        init(s);
    }

    /// Move every user forward by dt and write the new positions into the scenario.
    void advance(Scenario& s, double dt, std::mt19937_64& rng) {
        switch (cfg_.variant) {
            case MobilityVariant::static_users:
                return;
            case MobilityVariant::random_waypoint:
                for (std::size_t i = 0; i < s.users.size(); ++i) {
                    step_random_waypoint(waypoints_[i], dt, s.bounds, cfg_, rng);
                    s.users[i].position = waypoints_[i].pos;
                }
                return;
            case MobilityVariant::trace_playback: {
                const auto pos = positions_at(traces_, s.clock.now() + dt);
                for (UserState& u : s.users) {
                    auto it = pos.find(u.id);
                    if (it == pos.end()) continue;
                    // keep played-back users inside the scenario box
                    u.position.x = std::clamp(it->second.x, 0.0, s.bounds.x_max);
                    u.position.y = std::clamp(it->second.y, 0.0, s.bounds.y_max);
                    u.position.z = 0.0;
                }
                return;
            }
        }
    }

    const MobilityConfig& config() const { return cfg_; }
    const TraceSet& traces() const { return traces_; }

private:
    void init(const Scenario& s) {
        if (cfg_.variant == MobilityVariant::random_waypoint) {
            if (!(cfg_.speed_min_mps > 0.0) || !(cfg_.speed_max_mps >= cfg_.speed_min_mps)) {
                throw std::invalid_argument("mobility: speed range must be positive");
            }
            for (const UserState& u : s.users) {
                WaypointState w;
                w.pos = u.position;
                w.pause_left = cfg_.pause_s;
                waypoints_.push_back(w);
            }
        } else if (cfg_.variant == MobilityVariant::trace_playback) {
            for (const auto& [user, recs] : traces_.by_user()) {
                if (recs.size() < 2) {
                    throw TraceValidationError("mobility: trace playback needs >= 2 records, user " +
                                               std::to_string(user) + " has " +
                                               std::to_string(recs.size()));
                }
            }
        }
    }

    MobilityConfig cfg_{MobilityVariant::static_users, 0, 0, 0, {}};
    std::vector<WaypointState> waypoints_;
    TraceSet traces_;
};

}  // namespace uawnsim
