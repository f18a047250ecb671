// uawnsim command-line front end.
//
//   uawnsim validate --config <path>
//   uawnsim simulate --config <path> [--seeds s1,s2] [--workers n]
//   uawnsim export-geojson --run <manifest> --anchor lat,lon [--episode k] [--out file]
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "uawnsim/uawnsim.hpp"

namespace {

int cmd_validate(const std::string& config_path) {
    const uawnsim::ConfigResult result = uawnsim::parse_config(config_path);
    if (!result.ok()) {
        for (const std::string& v : result.violations) std::cerr << "config error: " << v << "\n";
        return 1;
    }
    std::cout << "ok: " << config_path << "\n";
    return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& seeds_csv, int workers) {
    const uawnsim::ConfigResult result = uawnsim::parse_config(config_path);
    if (!result.ok()) {
        for (const std::string& v : result.violations) std::cerr << "config error: " << v << "\n";
        return 1;
    }
    std::vector<std::uint64_t> seeds;
    if (!seeds_csv.empty()) {
        for (const std::string& field : uawnsim::detail::split_csv(seeds_csv)) {
            try {
                seeds.push_back(std::stoull(field));
            } catch (const std::exception&) {
                std::cerr << "config error: bad seed '" << field << "'\n";
                return 1;
            }
        }
    }
    const uawnsim::RunOutcome outcome =
        uawnsim::run_experiment(*result.config, seeds, workers, &std::cerr);
    for (const std::string& f : outcome.files) std::cout << f << "\n";
    return outcome.exit_code;
}

int cmd_export(const std::string& manifest_path, const std::string& anchor_csv, int episode,
               std::string out_path) {
    double lat = 0.0, lon = 0.0;
    {
        const auto fields = uawnsim::detail::split_csv(anchor_csv);
        if (fields.size() != 2 || !uawnsim::detail::parse_double_strict(fields[0], lat) ||
            !uawnsim::detail::parse_double_strict(fields[1], lon)) {
            std::cerr << "config error: --anchor expects 'lat,lon'\n";
            return 1;
        }
    }
    try {
        std::ifstream in(manifest_path);
        if (!in) {
            std::cerr << "runtime error: cannot open manifest " << manifest_path << "\n";
            return 2;
        }
        const nlohmann::json manifest = nlohmann::json::parse(in);
        if (manifest.value("mode", "") != "trajectory") {
            std::cerr << "runtime error: manifest is not from a trajectory run\n";
            return 2;
        }
        const auto dir = std::filesystem::path(manifest_path).parent_path();
        const std::string jsonl =
            (dir / manifest.at("outputs").at(0).get<std::string>()).string();
        const uawnsim::EpisodeLog log = uawnsim::episode_from_jsonl(jsonl, "maql", episode);
        const nlohmann::json fc = uawnsim::trajectory_geojson(log, {lat, lon});
        if (out_path.empty()) {
            out_path = (dir / ("trajectory_seed" + std::to_string(manifest.at("seed").get<std::uint64_t>()) +
                               "_ep" + std::to_string(log.episode) + ".geojson"))
                           .string();
        }
        std::ofstream out(out_path, std::ios::binary);
        if (!out) {
            std::cerr << "runtime error: cannot write " << out_path << "\n";
            return 2;
        }
        out << fc.dump(2) << "\n";
        std::cout << out_path << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-UAV wireless network simulator with learning controllers"};
    app.require_subcommand(1);

    std::string config_path, seeds_csv, manifest_path, anchor_csv, out_path;
    int workers = 1;
    int episode = -1;

    CLI::App* validate = app.add_subcommand("validate", "Parse and validate a config file");
    validate->add_option("--config", config_path, "config file")->required();

    CLI::App* simulate = app.add_subcommand("simulate", "Run the configured experiment");
    simulate->add_option("--config", config_path, "config file")->required();
    simulate->add_option("--seeds", seeds_csv, "override seed list, comma separated");
    simulate->add_option("--workers", workers, "concurrent seeds")->check(CLI::PositiveNumber);

    CLI::App* exportg = app.add_subcommand("export-geojson", "Export a run's trajectories");
    exportg->add_option("--run", manifest_path, "run manifest")->required();
    exportg->add_option("--anchor", anchor_csv, "lat,lon anchor")->required();
    exportg->add_option("--episode", episode, "episode index (default: last)");
    exportg->add_option("--out", out_path, "output file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(config_path);
        if (simulate->parsed()) return cmd_simulate(config_path, seeds_csv, workers);
        if (exportg->parsed()) return cmd_export(manifest_path, anchor_csv, episode, out_path);
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
