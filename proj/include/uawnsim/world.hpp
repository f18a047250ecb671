#pragma once

// Positions, grid discretization, and the scenario value shared by all modules.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "uawnsim/channel_params.hpp"

namespace uawnsim {

struct Position3 {
    double x{0.0};
    double y{0.0};
    double z{0.0};
};

inline double horizontal_distance(const Position3& a, const Position3& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

inline double distance3(const Position3& a, const Position3& b) {
    return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}

/// Index into the scenario's uniform cubic grid.
struct CellIndex {
    int ix{0};
    int iy{0};
    int iz{0};
    auto operator<=>(const CellIndex&) const = default;
};

/// 2D cell index (ground plane), used for user-position summaries.
struct Cell2 {
    int ix{0};
    int iy{0};
    auto operator<=>(const Cell2&) const = default;
};

/// Service area: x in [0, x_max], y in [0, y_max], UAV altitude in [z_min, z_max].
struct Box {
    double x_max{1000.0};
    double y_max{1000.0};
    double z_min{50.0};
    double z_max{300.0};
};

struct SimClock {
    long slot{0};
    double slot_seconds{1.0};
    double now() const { return static_cast<double>(slot) * slot_seconds; }
};

struct UavState {
    int id{0};
    Position3 position;
    int power_level_index{0};
    double bandwidth_hz{1.0e6};
};

struct UserState {
    int id{0};
    Position3 position;  // z == 0 for ground users
    std::optional<int> serving_uav;
};

struct Scenario {
    Box bounds;
    double cell_size{100.0};
    std::vector<UavState> uavs;
    std::vector<UserState> users;
    ChannelParams channel;
    SimClock clock;

    int nx() const { return grid_extent(bounds.x_max); }
    int ny() const { return grid_extent(bounds.y_max); }
    int nz() const { return grid_extent(bounds.z_max - bounds.z_min); }

private:
    int grid_extent(double span) const {
        if (cell_size <= 0.0 || span < 0.0) return 1;
        return std::max(1, static_cast<int>(std::ceil(span / cell_size)));
    }
};

namespace detail {

inline int snap_axis(double coord, double origin, double cell, int extent) {
    int i = static_cast<int>(std::floor((coord - origin) / cell));
    return std::clamp(i, 0, extent - 1);
}

inline bool in_closed(double v, double lo, double hi) { return v >= lo && v <= hi; }

}  // namespace detail

inline bool position_in_bounds(const Position3& p, const Box& b) {
    return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) &&
           detail::in_closed(p.x, 0.0, b.x_max) && detail::in_closed(p.y, 0.0, b.y_max);
}

/// Floor-divide a position into its grid cell, clamped to the grid extents.
/// The z axis is measured from bounds.z_min. Throws std::domain_error when
/// the position lies outside the scenario box.
inline CellIndex snap_to_grid(const Position3& p, const Scenario& s) {
    const Box& b = s.bounds;
    if (!position_in_bounds(p, b) || !detail::in_closed(p.z, b.z_min, b.z_max)) {
        throw std::domain_error("snap_to_grid: position outside scenario bounds");
    }
    return CellIndex{detail::snap_axis(p.x, 0.0, s.cell_size, s.nx()),
                     detail::snap_axis(p.y, 0.0, s.cell_size, s.ny()),
                     detail::snap_axis(p.z, b.z_min, s.cell_size, s.nz())};
}

/// Ground-plane variant for user summaries (ignores altitude).
inline Cell2 snap_to_grid_2d(double x, double y, const Scenario& s) {
    if (!std::isfinite(x) || !std::isfinite(y) || !detail::in_closed(x, 0.0, s.bounds.x_max) ||
        !detail::in_closed(y, 0.0, s.bounds.y_max)) {
        throw std::domain_error("snap_to_grid_2d: position outside scenario bounds");
    }
    return Cell2{detail::snap_axis(x, 0.0, s.cell_size, s.nx()),
                 detail::snap_axis(y, 0.0, s.cell_size, s.ny())};
}

/// Geometric center of a cell, clamped into the bounds so that
/// snap_to_grid(cell_center(c)) == c holds for every valid index, including
/// edge cells when the box is not a multiple of cell_size.
inline Position3 cell_center(const CellIndex& c, const Scenario& s) {
    if (c.ix < 0 || c.iy < 0 || c.iz < 0 || c.ix >= s.nx() || c.iy >= s.ny() || c.iz >= s.nz()) {
        throw std::domain_error("cell_center: cell index outside grid");
    }
    const Box& b = s.bounds;
    auto center = [&](int i, double origin, double hi) {
        return std::min(origin + (static_cast<double>(i) + 0.5) * s.cell_size, hi);
    };
    return Position3{center(c.ix, 0.0, b.x_max), center(c.iy, 0.0, b.y_max),
                     center(c.iz, b.z_min, b.z_max)};
}

/// Total validation: returns one message per violated invariant, never throws.
inline std::vector<std::string> validate_scenario(const Scenario& s) {
    std::vector<std::string> v;
    auto bad = [&](const std::string& msg) { v.push_back(msg); };

    if (!(s.bounds.x_max > 0.0) || !std::isfinite(s.bounds.x_max)) bad("bounds.x_max: must be positive and finite");
    if (!(s.bounds.y_max > 0.0) || !std::isfinite(s.bounds.y_max)) bad("bounds.y_max: must be positive and finite");
    if (!(s.bounds.z_min >= 0.0) || !std::isfinite(s.bounds.z_min)) bad("bounds.z_min: must be >= 0 and finite");
    if (!(s.bounds.z_max >= s.bounds.z_min) || !std::isfinite(s.bounds.z_max)) bad("bounds.z_max: must be >= z_min and finite");
    if (!(s.cell_size > 0.0) || !std::isfinite(s.cell_size)) bad("cell_size: must be positive and finite");
    if (!(s.clock.slot_seconds > 0.0)) bad("clock.slot_seconds: must be positive");
    if (s.uavs.empty()) bad("uavs: at least one UAV required");
    if (s.users.empty()) bad("users: at least one user required");

    const std::size_t ladder = s.channel.power_ladder_w.size();
    for (std::size_t i = 0; i < s.uavs.size(); ++i) {
        const UavState& u = s.uavs[i];
        const std::string tag = "uavs[" + std::to_string(i) + "]";
        if (!position_in_bounds(u.position, s.bounds))
            bad(tag + ".position: outside scenario x/y bounds or non-finite");
        if (!detail::in_closed(u.position.z, s.bounds.z_min, s.bounds.z_max))
            bad(tag + ".position.z: outside [z_min, z_max]");
        if (u.power_level_index < 0 || static_cast<std::size_t>(u.power_level_index) >= ladder)
            bad(tag + ".power_level_index: not a valid power ladder index");
        if (!(u.bandwidth_hz > 0.0)) bad(tag + ".bandwidth_hz: must be positive");
    }
    for (std::size_t i = 0; i < s.users.size(); ++i) {
        const UserState& u = s.users[i];
        const std::string tag = "users[" + std::to_string(i) + "]";
        if (!position_in_bounds(u.position, s.bounds)) bad(tag + ".position: outside scenario bounds or non-finite");
        if (u.position.z != 0.0) bad(tag + ".position.z: ground users must have z == 0");
    }

    for (const std::string& msg : validate_channel_params(s.channel)) v.push_back("channel." + msg);
    return v;
}

}  // namespace uawnsim
