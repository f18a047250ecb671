#pragma once

// Trajectory export: local meters -> WGS84 by equirectangular offset from an
// anchor, one LineString per UAV plus a MultiPoint of final user positions.

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "uawnsim/trajectory_rl.hpp"

namespace uawnsim {

inline constexpr double kMetersPerDegree = 111319.4907932736;  // equatorial circumference / 360

struct GeoAnchor {
    double lat{0.0};
    double lon{0.0};
};

inline nlohmann::json lonlat(const GeoAnchor& anchor, double x_m, double y_m, double alt_m,
                             bool with_alt) {
    const double lat_rad = anchor.lat * M_PI / 180.0;
    const double lon = anchor.lon + x_m / (kMetersPerDegree * std::cos(lat_rad));
    const double lat = anchor.lat + y_m / kMetersPerDegree;
    nlohmann::json c = nlohmann::json::array({lon, lat});
    if (with_alt) c.push_back(alt_m);
    return c;
}

/// Build a GeoJSON FeatureCollection from one episode's rows: a LineString
/// per UAV and a MultiPoint of the final slot's user positions.
inline nlohmann::json trajectory_geojson(const EpisodeLog& log, const GeoAnchor& anchor) {
    if (log.rows.empty()) {
        throw std::invalid_argument("trajectory_geojson: empty episode log");
    }
    const std::size_t n_uavs = log.rows.front().uav_positions.size();
    nlohmann::json features = nlohmann::json::array();
    for (std::size_t i = 0; i < n_uavs; ++i) {
        nlohmann::json coords = nlohmann::json::array();
        for (const EpisodeRow& row : log.rows) {
            const Position3& p = row.uav_positions.at(i);
            coords.push_back(lonlat(anchor, p.x, p.y, p.z, true));
        }
        nlohmann::json f;
        f["type"] = "Feature";
        f["properties"] = {{"kind", "uav"}, {"uav_index", i}, {"episode", log.episode}};
        f["geometry"] = {{"type", "LineString"}, {"coordinates", coords}};
        features.push_back(f);
    }
    nlohmann::json user_coords = nlohmann::json::array();
    for (const Position3& p : log.rows.back().user_positions) {
        user_coords.push_back(lonlat(anchor, p.x, p.y, 0.0, false));
    }
    nlohmann::json users;
    users["type"] = "Feature";
    users["properties"] = {{"kind", "users_final"}, {"episode", log.episode}};
    users["geometry"] = {{"type", "MultiPoint"}, {"coordinates", user_coords}};
    features.push_back(users);

    nlohmann::json fc;
    fc["type"] = "FeatureCollection";
    fc["features"] = features;
    return fc;
}

/// Reconstruct one episode of one policy's rows from a trajectory JSONL file.
inline EpisodeLog episode_from_jsonl(const std::string& jsonl_path, const std::string& policy,
                                     int episode /* -1 selects the last */) {
    std::ifstream in(jsonl_path);
    if (!in) throw std::runtime_error("cannot open " + jsonl_path);
    EpisodeLog log;
    int max_episode = -1;
    std::vector<std::pair<int, EpisodeRow>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        if (j.value("policy", "") != policy || !j.contains("uav_pos")) continue;
        const int e = j.at("episode").get<int>();
        max_episode = std::max(max_episode, e);
        EpisodeRow row;
        row.slot = j.at("slot").get<long>();
        row.sum_rate_bps = j.at("sum_rate_bps").get<double>();
        for (const auto& p : j.at("uav_pos")) {
            row.uav_positions.push_back(Position3{p.at(0), p.at(1), p.at(2)});
        }
        for (const auto& p : j.at("user_pos")) {
            row.user_positions.push_back(Position3{p.at(0), p.at(1), 0.0});
        }
        rows.emplace_back(e, std::move(row));
    }
    const int want = episode < 0 ? max_episode : episode;
    if (want < 0) throw std::runtime_error("no '" + policy + "' rows in " + jsonl_path);
    log.episode = want;
    for (auto& [e, row] : rows) {
        if (e == want) log.rows.push_back(std::move(row));
    }
    if (log.rows.empty()) {
        throw std::runtime_error("episode " + std::to_string(want) + " not present in " + jsonl_path);
    }
    return log;
}

}  // namespace uawnsim
