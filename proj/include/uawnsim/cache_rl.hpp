#pragma once

// Cache-enabled resource-allocation scenario: Zipf content requests, per-user
// queues served over licensed plus opportunistic unlicensed spectrum, cache
// policies (LSM-predicted, windowed-frequency, none) on top of one shared
// tabular RL layer, and the stable-queue-user metric.

#include <algorithm>
#include <array>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "uawnsim/channel.hpp"
#include "uawnsim/forecast.hpp"
#include "uawnsim/seeds.hpp"
#include "uawnsim/trajectory_rl.hpp"
#include "uawnsim/world.hpp"

namespace uawnsim {

struct ContentCatalog {
    int size{20};
    std::vector<double> content_bits;  // one entry per content, or a single broadcast value
    double zipf_s{1.0};
    double request_prob{0.4};

    double bits_of(int content) const {
        if (content_bits.empty()) return 1.0e6;
        if (content_bits.size() == 1) return content_bits[0];
        return content_bits.at(content);
    }
};

/// P(rank k) proportional to k^-s over ranks 1..size; content id = rank - 1.
inline std::vector<double> zipf_pmf(int size, double s) {
    if (size < 1) throw std::invalid_argument("zipf_pmf: size must be >= 1");
    if (!(s > 0.0)) throw std::invalid_argument("zipf_pmf: exponent must be positive");
    std::vector<double> p(size);
    double norm = 0.0;
    for (int k = 1; k <= size; ++k) {
        p[k - 1] = std::pow(static_cast<double>(k), -s);
        norm += p[k - 1];
    }
    for (double& v : p) v /= norm;
    return p;
}

struct RequestEvent {
    int user{0};
    int content{0};
};

/// One slot of request arrivals: each user requests with probability q, the
/// content drawn from the Zipf pmf by inverse CDF. Users are processed in
/// their scenario order; per user the draws are (request gate, content).
inline std::vector<RequestEvent> sample_requests(const ContentCatalog& catalog,
                                                 const std::vector<UserState>& users,
                                                 std::mt19937_64& rng) {
    if (!(catalog.request_prob >= 0.0) || !(catalog.request_prob <= 1.0)) {
        throw std::invalid_argument("sample_requests: request_prob must be in [0,1]");
    }
    const std::vector<double> pmf = zipf_pmf(catalog.size, catalog.zipf_s);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<RequestEvent> out;
    for (const UserState& user : users) {
        if (u01(rng) >= catalog.request_prob) continue;
        const double r = u01(rng);
        double acc = 0.0;
        int content = catalog.size - 1;
        for (int c = 0; c < catalog.size; ++c) {
            acc += pmf[c];
            if (r < acc) {
                content = c;
                break;
            }
        }
        out.push_back(RequestEvent{user.id, content});
    }
    return out;
}

struct CacheState {
    std::vector<std::set<int>> cached;  // per UAV (scenario order)
    int capacity{4};
};

struct BandModel {
    double licensed_hz{1.0e6};
    double unlicensed_hz{4.0e6};
    double p_unlicensed{0.5};
    double backhaul_beta{0.4};  // rate multiplier for uncached deliveries
};

inline std::vector<std::string> validate_band_model(const BandModel& b) {
    std::vector<std::string> v;
    if (b.licensed_hz < 0.0 || b.unlicensed_hz < 0.0) v.push_back("band: bandwidths must be >= 0");
    if (!(b.licensed_hz > 0.0) && !(b.unlicensed_hz > 0.0)) v.push_back("band: at least one band must be positive");
    if (!(b.p_unlicensed >= 0.0) || !(b.p_unlicensed <= 1.0)) v.push_back("band: p_unlicensed must be in [0,1]");
    if (!(b.backhaul_beta > 0.0) || !(b.backhaul_beta <= 1.0)) v.push_back("band: backhaul_beta must be in (0,1]");
    return v;
}

struct AllocationAction {
    std::vector<std::set<int>> cache_refresh;       // per UAV
    std::vector<double> unlicensed_split;           // per UAV, fraction of the slot
    std::optional<Association> association_override;
};

struct ServiceResult {
    std::map<int, double> bits_per_user;
    Association association;
    bool unlicensed_available{false};
};

namespace detail {

inline std::map<int, std::size_t> uav_index_by_id(const Scenario& s) {
    std::map<int, std::size_t> m;
    for (std::size_t i = 0; i < s.uavs.size(); ++i) m[s.uavs[i].id] = i;
    return m;
}

}  // namespace detail

/// Per-user service for one slot with a pre-drawn unlicensed-availability
/// flag: rate = (1-split)*r_licensed + split*avail*r_unlicensed, evaluated
/// with the channel sum-rate machinery per band; deliveries whose pending
/// content is not cached at the serving UAV are scaled by backhaul_beta.
inline ServiceResult service_rates_with_availability(const Scenario& s,
                                                     const AllocationAction& action,
                                                     const CacheState& caches,
                                                     const BandModel& band,
                                                     const std::map<int, int>& pending_content,
                                                     bool unlicensed_available) {
    if (action.unlicensed_split.size() != s.uavs.size() ||
        caches.cached.size() != s.uavs.size()) {
        throw std::invalid_argument("service_rates: per-UAV vectors must match the scenario");
    }
    for (double f : action.unlicensed_split) {
        if (!(f >= 0.0) || !(f <= 1.0)) {
            throw std::invalid_argument("service_rates: split fraction must be in [0,1]");
        }
    }

    ServiceResult out;
    out.unlicensed_available = unlicensed_available;
    out.association = action.association_override ? *action.association_override
                                                  : associate_users(s);

    Scenario banded = s;
    for (UavState& u : banded.uavs) u.bandwidth_hz = band.licensed_hz;
    const SumRate licensed = band.licensed_hz > 0.0 ? sum_rate(banded, out.association) : SumRate{};
    SumRate unlicensed;
    if (unlicensed_available && band.unlicensed_hz > 0.0) {
        for (UavState& u : banded.uavs) u.bandwidth_hz = band.unlicensed_hz;
        unlicensed = sum_rate(banded, out.association);
    }

    const auto uav_index = detail::uav_index_by_id(s);
    for (const UserState& user : s.users) {
        const std::size_t serving = uav_index.at(out.association.at(user.id));
        const double split = action.unlicensed_split[serving];
        double rate = 0.0;
        if (band.licensed_hz > 0.0) rate += (1.0 - split) * licensed.per_user_bps.at(user.id);
        if (unlicensed_available && band.unlicensed_hz > 0.0) {
            rate += split * unlicensed.per_user_bps.at(user.id);
        }
        double bits = rate * s.clock.slot_seconds;
        auto pending = pending_content.find(user.id);
        if (pending != pending_content.end() &&
            caches.cached[serving].count(pending->second) == 0) {
            bits *= band.backhaul_beta;
        }
        out.bits_per_user[user.id] = bits;
    }
    return out;
}

/// Variant that draws the slot's unlicensed availability from rng.
inline ServiceResult service_rates(const Scenario& s, const AllocationAction& action,
                                   const CacheState& caches, const BandModel& band,
                                   const std::map<int, int>& pending_content,
                                   std::mt19937_64& rng) {
    const bool avail =
        std::uniform_real_distribution<double>(0.0, 1.0)(rng) < band.p_unlicensed;
    return service_rates_with_availability(s, action, caches, band, pending_content, avail);
}

// --- queues -----------------------------------------------------------------

struct UserQueue {
    double backlog_bits{0.0};
    std::deque<double> arrivals;   // bits per slot
    std::deque<double> services;   // offered bits per slot
    std::deque<double> backlogs;   // backlog after each slot (seeded with the initial value)
};

struct QueueState {
    std::vector<UserQueue> users;
    std::size_t history_cap{4096};

    explicit QueueState(std::size_t n_users = 0, std::size_t cap = 4096) : history_cap(cap) {
        users.resize(n_users);
        for (UserQueue& q : users) q.backlogs.push_back(0.0);
    }
};

/// backlog <- max(0, backlog + arrivals - services); histories are appended
/// (offered service is recorded, not the consumed part).
inline void step_queues(QueueState& qs, const std::vector<double>& arrivals,
                        const std::vector<double>& services) {
    if (arrivals.size() != qs.users.size() || services.size() != qs.users.size()) {
        throw std::invalid_argument("step_queues: per-user vectors must match");
    }
    for (std::size_t i = 0; i < qs.users.size(); ++i) {
        if (arrivals[i] < 0.0 || services[i] < 0.0) {
            throw std::invalid_argument("step_queues: arrivals and services must be >= 0");
        }
        UserQueue& q = qs.users[i];
        q.backlog_bits = std::max(0.0, q.backlog_bits + arrivals[i] - services[i]);
        q.arrivals.push_back(arrivals[i]);
        q.services.push_back(services[i]);
        q.backlogs.push_back(q.backlog_bits);
        while (q.arrivals.size() > qs.history_cap) q.arrivals.pop_front();
        while (q.services.size() > qs.history_cap) q.services.pop_front();
        while (q.backlogs.size() > qs.history_cap + 1) q.backlogs.pop_front();
    }
}

/// A user is stable iff over the last `window` slots mean offered service
/// covers mean arrivals AND the backlog did not grow across the window.
inline int count_stable_users(const QueueState& qs, int window) {
    if (window < 1) throw std::invalid_argument("count_stable_users: window must be >= 1");
    int stable = 0;
    for (const UserQueue& q : qs.users) {
        if (q.arrivals.size() < static_cast<std::size_t>(window) ||
            q.backlogs.size() < static_cast<std::size_t>(window) + 1) {
            throw std::invalid_argument("count_stable_users: insufficient history for window");
        }
        double a = 0.0, s = 0.0;
        for (std::size_t i = q.arrivals.size() - window; i < q.arrivals.size(); ++i) a += q.arrivals[i];
        for (std::size_t i = q.services.size() - window; i < q.services.size(); ++i) s += q.services[i];
        const double now = q.backlogs.back();
        const double before = q.backlogs[q.backlogs.size() - 1 - window];
        if (s >= a && now <= before) ++stable;
    }
    return stable;
}

// --- allocation policies ------------------------------------------------------

inline constexpr std::array<double, 5> kSplitLevels{0.0, 0.25, 0.5, 0.75, 1.0};

/// Discretized RL state for the allocation layer: one backlog-pressure flag
/// per UAV (mean associated-user backlog above one mean content size) plus
/// the current slot's unlicensed-availability flag.
struct CacheRlState {
    std::vector<int> pressure;
    int unlicensed{0};
    auto operator<=>(const CacheRlState&) const = default;
};

inline CacheRlState encode_cache_state(const QueueState& qs, const Association& assoc,
                                       const Scenario& s, bool unlicensed_available,
                                       double pressure_threshold_bits) {
    const auto uav_index = detail::uav_index_by_id(s);
    std::vector<double> backlog(s.uavs.size(), 0.0);
    std::vector<int> count(s.uavs.size(), 0);
    for (std::size_t i = 0; i < s.users.size(); ++i) {
        const std::size_t j = uav_index.at(assoc.at(s.users[i].id));
        backlog[j] += qs.users[i].backlog_bits;
        ++count[j];
    }
    CacheRlState st;
    st.unlicensed = unlicensed_available ? 1 : 0;
    for (std::size_t j = 0; j < s.uavs.size(); ++j) {
        const double mean = count[j] > 0 ? backlog[j] / count[j] : 0.0;
        st.pressure.push_back(mean > pressure_threshold_bits ? 1 : 0);
    }
    return st;
}

/// Top-k contents by weight; ties resolve to the lower content id.
inline std::set<int> top_k_contents(const Eigen::VectorXd& weights, int k) {
    std::vector<int> order(weights.size());
    for (int i = 0; i < weights.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return weights(a) > weights(b); });
    std::set<int> out;
    for (int i = 0; i < std::min<int>(k, static_cast<int>(order.size())); ++i) out.insert(order[i]);
    return out;
}

/// Caches from the LSM: per UAV, sum the predicted request distributions of
/// its associated users and keep the top-capacity contents.
inline std::vector<std::set<int>> lsm_cache_selection(const RequestPredictor& predictor,
                                                      const Association& assoc,
                                                      const Scenario& s, int capacity) {
    const auto uav_index = detail::uav_index_by_id(s);
    std::vector<Eigen::VectorXd> aggregate(
        s.uavs.size(), Eigen::VectorXd::Zero(predictor.catalog_size()));
    for (std::size_t i = 0; i < s.users.size(); ++i) {
        const std::size_t j = uav_index.at(assoc.at(s.users[i].id));
        aggregate[j] += predictor.predict(static_cast<int>(i));
    }
    std::vector<std::set<int>> out;
    for (const Eigen::VectorXd& w : aggregate) out.push_back(top_k_contents(w, capacity));
    return out;
}

/// Caches from windowed empirical frequency: per UAV, count its associated
/// users' requests over the last `window` slots and keep the top-capacity.
inline std::vector<std::set<int>> frequency_cache_selection(
    const std::deque<std::vector<RequestEvent>>& recent_requests, const Association& assoc,
    const Scenario& s, int catalog_size, int capacity, int window) {
    const auto uav_index = detail::uav_index_by_id(s);
    std::vector<Eigen::VectorXd> counts(s.uavs.size(), Eigen::VectorXd::Zero(catalog_size));
    const std::size_t take = std::min<std::size_t>(window, recent_requests.size());
    for (std::size_t k = recent_requests.size() - take; k < recent_requests.size(); ++k) {
        for (const RequestEvent& ev : recent_requests[k]) {
            auto it = assoc.find(ev.user);
            if (it == assoc.end()) continue;
            counts[uav_index.at(it->second)](ev.content) += 1.0;
        }
    }
    std::vector<std::set<int>> out;
    for (const Eigen::VectorXd& c : counts) out.push_back(top_k_contents(c, capacity));
    return out;
}

enum class CachePolicyKind { lsm, q_with_cache, q_without_cache };

inline const char* cache_policy_name(CachePolicyKind k) {
    switch (k) {
        case CachePolicyKind::lsm: return "lsm";
        case CachePolicyKind::q_with_cache: return "q_cache";
        case CachePolicyKind::q_without_cache: return "q_nocache";
    }
    return "?";
}

namespace detail {

inline AllocationAction make_action(std::vector<std::set<int>> caches, double split,
                                    std::size_t n_uavs) {
    AllocationAction a;
    a.cache_refresh = std::move(caches);
    a.unlicensed_split.assign(n_uavs, split);
    return a;
}

}  // namespace detail

/// LSM policy: caches from the predicted aggregate request distribution,
/// split chosen epsilon-greedily from the shared Q-table.
inline AllocationAction lsm_policy_step(const RequestPredictor& predictor, const Association& assoc,
                                        const Scenario& s, int capacity,
                                        QTable<CacheRlState>& q, const CacheRlState& st,
                                        double epsilon, std::mt19937_64& rng) {
    const int split_idx = select_action(q, st, epsilon, rng);
    return detail::make_action(lsm_cache_selection(predictor, assoc, s, capacity),
                               kSplitLevels[split_idx], s.uavs.size());
}

/// Identical RL layer, caches from windowed request frequencies.
inline AllocationAction baseline_q_with_cache(
    const std::deque<std::vector<RequestEvent>>& recent_requests, const Association& assoc,
    const Scenario& s, int catalog_size, int capacity, int window, QTable<CacheRlState>& q,
    const CacheRlState& st, double epsilon, std::mt19937_64& rng) {
    const int split_idx = select_action(q, st, epsilon, rng);
    return detail::make_action(
        frequency_cache_selection(recent_requests, assoc, s, catalog_size, capacity, window),
        kSplitLevels[split_idx], s.uavs.size());
}

/// Identical RL layer, caches forced empty (every delivery pays beta).
inline AllocationAction baseline_q_without_cache(const Scenario& s, QTable<CacheRlState>& q,
                                                 const CacheRlState& st, double epsilon,
                                                 std::mt19937_64& rng) {
    const int split_idx = select_action(q, st, epsilon, rng);
    return detail::make_action(std::vector<std::set<int>>(s.uavs.size()),
                               kSplitLevels[split_idx], s.uavs.size());
}

// --- experiment loop ----------------------------------------------------------

struct CachingSettings {
    ContentCatalog catalog;
    BandModel band;
    int cache_capacity{4};
    int freq_window{20};
    int stability_window{50};
    ReservoirConfig lsm{64, 0.9, 1.0, 0.5, 0.2, 1e-3, 0, 1};
    int lsm_refit_interval{50};
    int lsm_warmup_slots{60};
    HyperParams rl{0.3, 0.6, 0.4, 0.02, 0.995, 1, 800, 0.0, 1.0};
    int slots{800};
    double tail_fraction{0.5};
};

struct CacheSlotRow {
    long slot{0};
    int stable_users{-1};  // -1 while history is shorter than the window
    bool unlicensed_available{false};
    double split{0.0};
    std::vector<RequestEvent> requests;
    std::vector<double> backlog_bits;  // per user
    std::vector<double> served_bits;   // per user
    std::vector<std::set<int>> caches;
};

struct CacheRunMetrics {
    std::vector<CacheSlotRow> rows;
    double tail_mean_stable{0.0};
};

/// One full caching run: requests -> policy -> service -> queues -> count.
/// All request/availability randomness is derived from (seed, label) streams
/// that do not depend on the policy, so runs with equal seeds are paired.
inline CacheRunMetrics run_caching_experiment(const Scenario& base, const CachingSettings& cfg,
                                              CachePolicyKind policy, std::uint64_t seed) {
    {
        const auto violations = validate_scenario(base);
        if (!violations.empty()) {
            throw std::invalid_argument("run_caching_experiment: invalid scenario: " +
                                        violations.front());
        }
        const auto band_violations = validate_band_model(cfg.band);
        if (!band_violations.empty()) {
            throw std::invalid_argument("run_caching_experiment: " + band_violations.front());
        }
    }
    Scenario s = base;
    const std::size_t n_users = s.users.size();
    const double mean_bits = [&] {
        double m = 0.0;
        for (int c = 0; c < cfg.catalog.size; ++c) m += cfg.catalog.bits_of(c);
        return m / std::max(1, cfg.catalog.size);
    }();

    std::mt19937_64 request_rng(seed_stream(seed, "requests"));
    std::mt19937_64 avail_rng(seed_stream(seed, "unlicensed"));
    std::mt19937_64 select_rng(seed_stream(seed, "cache-select"));

    RequestPredictor predictor(cfg.lsm, static_cast<int>(n_users), cfg.catalog.size);
    QTable<CacheRlState> q(static_cast<int>(kSplitLevels.size()));
    QueueState queues(n_users);
    std::deque<std::vector<RequestEvent>> recent_requests;
    std::map<int, int> pending;  // user id -> content of the most recent request

    const Association assoc = associate_users(s);  // users hover: association is static
    for (UserState& u : s.users) u.serving_uav = assoc.at(u.id);
    std::map<int, std::size_t> user_index;
    for (std::size_t i = 0; i < n_users; ++i) user_index[s.users[i].id] = i;

    CacheRunMetrics metrics;
    bool have_prev = false;
    CacheRlState prev_state;
    int prev_action = 0;
    double prev_reward = 0.0;

    for (int t = 0; t < cfg.slots; ++t) {
        const bool avail =
            std::uniform_real_distribution<double>(0.0, 1.0)(avail_rng) < cfg.band.p_unlicensed;
        const auto requests = sample_requests(cfg.catalog, s.users, request_rng);

        std::vector<double> arrivals(n_users, 0.0);
        std::vector<std::optional<int>> req_by_user(n_users);
        for (const RequestEvent& ev : requests) {
            const std::size_t i = user_index.at(ev.user);
            arrivals[i] += cfg.catalog.bits_of(ev.content);
            req_by_user[i] = ev.content;
            pending[ev.user] = ev.content;
        }

        const CacheRlState st = encode_cache_state(queues, assoc, s, avail, mean_bits);
        if (have_prev) update_q(q, prev_state, prev_action, prev_reward, st, cfg.rl);

        const double eps = epsilon_at(cfg.rl, t);
        AllocationAction action;
        switch (policy) {
            case CachePolicyKind::lsm:
                action = lsm_policy_step(predictor, assoc, s, cfg.cache_capacity, q, st, eps,
                                         select_rng);
                break;
            case CachePolicyKind::q_with_cache:
                action = baseline_q_with_cache(recent_requests, assoc, s, cfg.catalog.size,
                                               cfg.cache_capacity, cfg.freq_window, q, st, eps,
                                               select_rng);
                break;
            case CachePolicyKind::q_without_cache:
                action = baseline_q_without_cache(s, q, st, eps, select_rng);
                break;
        }
        const int split_idx = static_cast<int>(
            std::find(kSplitLevels.begin(), kSplitLevels.end(), action.unlicensed_split[0]) -
            kSplitLevels.begin());

        const CacheState caches{action.cache_refresh, cfg.cache_capacity};
        const ServiceResult served =
            service_rates_with_availability(s, action, caches, cfg.band, pending, avail);

        std::vector<double> services(n_users, 0.0);
        for (std::size_t i = 0; i < n_users; ++i) services[i] = served.bits_per_user.at(s.users[i].id);
        step_queues(queues, arrivals, services);
        for (std::size_t i = 0; i < n_users; ++i) {
            if (queues.users[i].backlog_bits <= 0.0) pending.erase(s.users[i].id);
        }

        // LSM bookkeeping (only the LSM policy pays for it; the rng streams
        // are independent of this, so runs stay paired across policies).
        if (policy == CachePolicyKind::lsm) {
            predictor.step(req_by_user);
            if (t + 1 >= cfg.lsm_warmup_slots && (t + 1) % cfg.lsm_refit_interval == 0) {
                predictor.refit();
            }
        }
        recent_requests.push_back(requests);
        while (recent_requests.size() > static_cast<std::size_t>(std::max(cfg.freq_window, 1))) {
            recent_requests.pop_front();
        }

        CacheSlotRow row;
        row.slot = t;
        row.unlicensed_available = avail;
        row.split = action.unlicensed_split[0];
        row.requests = requests;
        row.caches = action.cache_refresh;
        for (std::size_t i = 0; i < n_users; ++i) {
            row.backlog_bits.push_back(queues.users[i].backlog_bits);
            row.served_bits.push_back(services[i]);
        }
        int stable = -1;
        if (t + 1 >= cfg.stability_window) stable = count_stable_users(queues, cfg.stability_window);
        row.stable_users = stable;
        metrics.rows.push_back(std::move(row));

        have_prev = true;
        prev_state = st;
        prev_action = split_idx;
        prev_reward = stable >= 0 ? static_cast<double>(stable) : 0.0;
    }

    // Tail mean over the final fraction of slots with a defined count.
    std::vector<int> counted;
    for (const CacheSlotRow& row : metrics.rows) {
        if (row.stable_users >= 0) counted.push_back(row.stable_users);
    }
    if (!counted.empty()) {
        auto tail = static_cast<std::size_t>(
            std::ceil(counted.size() * std::clamp(cfg.tail_fraction, 0.0, 1.0)));
        tail = std::max<std::size_t>(1, std::min(tail, counted.size()));
        double sum = 0.0;
        for (std::size_t i = counted.size() - tail; i < counted.size(); ++i) sum += counted[i];
        metrics.tail_mean_stable = sum / static_cast<double>(tail);
    }
    return metrics;
}

}  // namespace uawnsim
