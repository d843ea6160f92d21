// Generates a synthetic pool from a scenario file and writes a complete data
// root by running the collector against it on a simulated clock, together
// with the ground truth it was generated from (ground_truth.json).

#include "cli_common.hpp"

#include "poolgaze/collector.hpp"
#include "poolgaze/error.hpp"
#include "poolgaze/simulator.hpp"

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace poolgaze;

int main(int argc, char** argv) {
    CLI::App app{"Write a synthetic data root and its ground truth."};
    std::string scenario_path;
    std::string data_root;
    std::optional<std::uint64_t> seed;
    int emit_days = 0;
    app.add_option("--scenario", scenario_path, "Scenario file (key=value lines)")->required()->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Seed overriding the scenario's own");
    app.add_option("--emit-days", emit_days, "Days to simulate and collect")->required()->check(CLI::Range(1, 366));
    app.add_option("--data-root", data_root, "Output data root; must be empty or absent")->required();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return cli::parse_error_exit(app, e);
    }

    Scenario scenario;
    std::filesystem::path root_path(data_root);
    try {
        std::ifstream in(scenario_path);
        std::ostringstream text;
        text << in.rdbuf();
        scenario = parse_scenario(text.str());
        if (seed) {
            scenario.seed = *seed;
        }
        scenario.duration_s = static_cast<Seconds>(emit_days) * kSecondsPerDay;
        scenario.validate();
        if (std::filesystem::exists(root_path) && !std::filesystem::is_empty(root_path)) {
            throw InvalidValue(fmt::format("data root {} is not empty", root_path.string()));
        }
        std::filesystem::create_directories(root_path);
    } catch (const std::exception& e) {
        fmt::print(stderr, "configuration error: {}\n", e.what());
        return cli::kExitConfig;
    }

    try {
        const DataRoot root(root_path);
        WriterLock lock(root);
        SimulatorSource source(simulate(scenario));
        const auto& truth = source.truth();
        save_registry(root, truth.registry());
        const auto reports = collect_span(source, root, truth.start, truth.end, scenario.interval_s);
        std::size_t records = 0;
        for (const auto& r : reports) {
            records += r.records_written;
            if (!r.ok()) {
                throw Error(fmt::format("poll at {} failed: {}", format_instant(r.tick), r.errors.front()));
            }
        }
        std::ofstream out(root_path / "ground_truth.json", std::ios::binary);
        out << render_ground_truth_json(truth);
        if (!out) {
            throw IoFailure((root_path / "ground_truth.json").string(), "write failed");
        }
        fmt::print(stderr, "{} machines, {} jobs, {} polls, {} records\n", truth.machines.size(), truth.jobs.size(),
                   reports.size(), records);
    } catch (const std::exception& e) {
        fmt::print(stderr, "simulation failed: {}\n", e.what());
        return cli::kExitFailure;
    }
    return cli::kExitOk;
}
