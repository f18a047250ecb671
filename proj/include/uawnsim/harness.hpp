#pragma once

// Experiment orchestration: per-seed runs, JSONL metrics, manifests, and the
// combined CSV summary. Seeds may run on a small worker pool; every output
// file is owned by exactly one seed, and the CSV is assembled afterwards in a
// fixed order so outputs are byte-identical for identical config + seed.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "uawnsim/cache_rl.hpp"
#include "uawnsim/config.hpp"
#include "uawnsim/trajectory_rl.hpp"

namespace uawnsim {

inline constexpr const char* kArtifactVersion = "0.1.0";
inline constexpr const char* kOutputRootEnv = "UAWNSIM_OUTPUT_ROOT";

namespace detail {

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string utc_now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline nlohmann::json position_json(const Position3& p, bool with_z) {
    nlohmann::json a = nlohmann::json::array({p.x, p.y});
    if (with_z) a.push_back(p.z);
    return a;
}

inline nlohmann::json episode_row_json(const std::string& policy, int episode,
                                       const EpisodeRow& row) {
    nlohmann::json j;
    j["policy"] = policy;
    j["episode"] = episode;
    j["slot"] = row.slot;
    j["sum_rate_bps"] = row.sum_rate_bps;
    j["per_user_rate_bps"] = row.per_user_rate_bps;
    j["rewards"] = row.rewards;
    j["power_levels"] = row.power_levels;
    nlohmann::json uavs = nlohmann::json::array();
    for (const Position3& p : row.uav_positions) uavs.push_back(position_json(p, true));
    j["uav_pos"] = uavs;
    nlohmann::json users = nlohmann::json::array();
    for (const Position3& p : row.user_positions) users.push_back(position_json(p, false));
    j["user_pos"] = users;
    nlohmann::json actions = nlohmann::json::array();
    for (const ActionSpec& a : row.actions) {
        actions.push_back(nlohmann::json::array({move_name(a.move), a.power_level}));
    }
    j["actions"] = actions;
    return j;
}

inline nlohmann::json cache_row_json(const std::string& policy, int n_uavs,
                                     const CacheSlotRow& row) {
    nlohmann::json j;
    j["policy"] = policy;
    j["n_uavs"] = n_uavs;
    j["slot"] = row.slot;
    j["stable_users"] = row.stable_users;
    j["unlicensed"] = row.unlicensed_available ? 1 : 0;
    j["split"] = row.split;
    nlohmann::json reqs = nlohmann::json::array();
    for (const RequestEvent& ev : row.requests) {
        reqs.push_back(nlohmann::json::array({ev.user, ev.content}));
    }
    j["requests"] = reqs;
    j["backlog_bits"] = row.backlog_bits;
    j["served_bits"] = row.served_bits;
    nlohmann::json caches = nlohmann::json::array();
    for (const std::set<int>& c : row.caches) caches.push_back(c);
    j["caches"] = caches;
    return j;
}

struct SeedRun {
    std::uint64_t seed{0};
    bool ok{false};
    std::string error;
    std::string jsonl_path;
    std::string manifest_path;
    std::vector<std::string> csv_rows;  // pre-rendered, fixed order
};

inline void write_manifest(const SeedRun& run, const ExperimentConfig& cfg,
                           const std::string& started, const std::string& finished) {
    nlohmann::json m;
    m["artifact_version"] = kArtifactVersion;
    m["config_hash"] = hex64(cfg.config_hash);
    m["config_path"] = cfg.source_path;
    m["mode"] = cfg.experiment.mode == ExperimentMode::trajectory ? "trajectory" : "caching";
    m["seed"] = run.seed;
    m["started_utc"] = started;
    m["finished_utc"] = finished;
    m["status"] = run.ok ? "ok" : "error";
    if (!run.ok) m["error"] = run.error;
    m["outputs"] = nlohmann::json::array({std::filesystem::path(run.jsonl_path).filename().string()});
    std::ofstream out(run.manifest_path, std::ios::binary);
    out << m.dump(2) << "\n";
}

inline std::string csv_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace detail

struct RunOutcome {
    int exit_code{0};
    std::filesystem::path output_dir;
    std::vector<std::string> files;
};

/// Resolve the configured output directory, honoring UAWNSIM_OUTPUT_ROOT.
inline std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
    std::filesystem::path dir(cfg.experiment.output_dir);
    if (const char* root = std::getenv(kOutputRootEnv); root != nullptr && dir.is_relative()) {
        dir = std::filesystem::path(root) / dir;
    }
    return dir;
}

namespace detail {

inline SeedRun run_trajectory_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                                   const std::filesystem::path& dir) {
    SeedRun run;
    run.seed = seed;
    run.jsonl_path = (dir / ("seed" + std::to_string(seed) + ".jsonl")).string();
    run.manifest_path = (dir / ("seed" + std::to_string(seed) + "_manifest.json")).string();
    const std::string started = utc_now_iso8601();
    try {
        const Scenario scenario = build_scenario(cfg, seed);
        TrainSettings settings;
        settings.mobility = cfg.mobility;
        settings.esn = cfg.esn;
        settings.esn.seed = seed_stream(seed, "esn-weights");
        settings.esn_train_slots = cfg.esn_train_slots;

        const TrainResult trained = train(scenario, cfg.rl, settings, seed);
        const std::vector<EpisodeLog> baseline =
            static_baseline(scenario, cfg.rl, cfg.mobility, seed);

        std::ofstream out(run.jsonl_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + run.jsonl_path);
        for (const EpisodeLog& log : trained.episodes) {
            for (const EpisodeRow& row : log.rows) {
                out << episode_row_json("maql", log.episode, row).dump() << "\n";
            }
        }
        for (const EpisodeLog& log : baseline) {
            for (const EpisodeRow& row : log.rows) {
                out << episode_row_json("static", log.episode, row).dump() << "\n";
            }
        }
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + run.jsonl_path);

        const double tail = cfg.experiment.tail_fraction;
        auto mean_all = [](const std::vector<EpisodeLog>& logs) {
            double sum = 0.0;
            for (const EpisodeLog& l : logs) sum += l.mean_sum_rate_bps;
            return logs.empty() ? 0.0 : sum / logs.size();
        };
        run.csv_rows.push_back("maql," + std::to_string(seed) + "," +
                               csv_double(tail_mean_sum_rate(trained.episodes, tail)) + "," +
                               csv_double(mean_all(trained.episodes)));
        run.csv_rows.push_back("static," + std::to_string(seed) + "," +
                               csv_double(tail_mean_sum_rate(baseline, tail)) + "," +
                               csv_double(mean_all(baseline)));
        run.ok = true;
    } catch (const std::exception& e) {
        run.error = e.what();
    }
    write_manifest(run, cfg, started, utc_now_iso8601());
    return run;
}

inline SeedRun run_caching_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                                const std::filesystem::path& dir) {
    SeedRun run;
    run.seed = seed;
    run.jsonl_path = (dir / ("seed" + std::to_string(seed) + ".jsonl")).string();
    run.manifest_path = (dir / ("seed" + std::to_string(seed) + "_manifest.json")).string();
    const std::string started = utc_now_iso8601();
    try {
        std::ofstream out(run.jsonl_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + run.jsonl_path);
        for (int n : cfg.sweep.n_uavs) {
            ExperimentConfig scen_cfg = cfg;
            scen_cfg.scenario.n_uavs = n;
            scen_cfg.scenario.uav_placement = UavPlacement::centroid;
            Scenario scenario = build_scenario(scen_cfg, seed);

            CachingSettings settings = cfg.caching;
            settings.lsm.seed = seed_stream(seed, "lsm-weights");
            for (CachePolicyKind policy : cfg.sweep.policies) {
                const CacheRunMetrics metrics =
                    run_caching_experiment(scenario, settings, policy, seed);
                for (const CacheSlotRow& row : metrics.rows) {
                    out << cache_row_json(cache_policy_name(policy), n, row).dump() << "\n";
                }
                run.csv_rows.push_back(std::string(cache_policy_name(policy)) + "," +
                                       std::to_string(n) + "," + std::to_string(seed) + "," +
                                       csv_double(metrics.tail_mean_stable));
            }
        }
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + run.jsonl_path);
        run.ok = true;
    } catch (const std::exception& e) {
        run.error = e.what();
    }
    write_manifest(run, cfg, started, utc_now_iso8601());
    return run;
}

}  // namespace detail

/// Execute every configured seed (optionally overridden), at most `workers`
/// at a time. Exit code 0 when every seed succeeded, 2 when any failed.
inline RunOutcome run_experiment(const ExperimentConfig& cfg,
                                 const std::vector<std::uint64_t>& seeds_override = {},
                                 int workers = 1, std::ostream* log = nullptr) {
    RunOutcome outcome;
    outcome.output_dir = resolve_output_dir(cfg);
    std::filesystem::create_directories(outcome.output_dir);

    const std::vector<std::uint64_t>& seeds =
        seeds_override.empty() ? cfg.experiment.seeds : seeds_override;
    std::vector<detail::SeedRun> runs(seeds.size());

    const bool trajectory = cfg.experiment.mode == ExperimentMode::trajectory;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= seeds.size()) return;
            runs[i] = trajectory
                          ? detail::run_trajectory_seed(cfg, seeds[i], outcome.output_dir)
                          : detail::run_caching_seed(cfg, seeds[i], outcome.output_dir);
        }
    };
    const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(seeds.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    const std::filesystem::path csv_path = outcome.output_dir / "summary.csv";
    {
        std::ofstream csv(csv_path, std::ios::binary);
        csv << (trajectory ? "policy,seed,tail_mean_sum_rate_bps,mean_sum_rate_bps"
                           : "policy,n_uavs,seed,tail_mean_stable_users")
            << "\n";
        for (const detail::SeedRun& run : runs) {
            for (const std::string& row : run.csv_rows) csv << row << "\n";
        }
    }

    bool any_failed = false;
    for (const detail::SeedRun& run : runs) {
        outcome.files.push_back(run.jsonl_path);
        outcome.files.push_back(run.manifest_path);
        if (!run.ok) {
            any_failed = true;
            if (log != nullptr) {
                *log << "seed " << run.seed << " failed: " << run.error << "\n";
            }
        }
    }
    outcome.files.push_back(csv_path.string());
    outcome.exit_code = any_failed ? 2 : 0;
    return outcome;
}

}  // namespace uawnsim
