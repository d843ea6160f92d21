// Samples the pool status source at aligned ticks and appends the records to
// a data root. Runs as a daemon by default; --once performs a single poll for
// use from cron, and --build-registry refreshes the machine registry.

#include "cli_common.hpp"

#include "poolgaze/collector.hpp"
#include "poolgaze/error.hpp"

#include <fmt/format.h>

#include <filesystem>

using namespace poolgaze;

namespace {

void log_report(const PollReport& r) {
    if (r.ok()) {
        fmt::print(stderr, "{} polled {} machines, {} slots, {} records written\n", format_instant(r.tick),
                   r.machines_seen, r.slots_written, r.records_written);
        return;
    }
    for (const auto& e : r.errors) {
        fmt::print(stderr, "{} poll failed: {}\n", format_instant(r.tick), e);
    }
}

Instant floor_tick(Instant t, Seconds interval_s) {
    const auto s = to_seconds(t);
    return instant_from_seconds(s - ((s % interval_s) + interval_s) % interval_s);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Poll a pool status source into a date-partitioned data root."};
    CollectorConfig config;
    std::string data_root;
    bool once = false;
    bool registry_only = false;
    std::string now_text;
    app.add_option("--data-root", data_root, "Data root directory (created if missing)")->required();
    app.add_option("--source", config.source_spec, "cmd:COMMAND, file:PATH or sim:SCENARIO_FILE")->required();
    app.add_option("--interval-s", config.interval_s, "Polling interval in seconds")->default_val(300);
    app.add_option("--lookback-days", config.lookback_days, "Days searched for a machine's last job")->default_val(30);
    app.add_flag("--once", once, "Poll once at the current aligned tick and exit");
    app.add_flag("--build-registry", registry_only, "Rebuild the machine registry from the source and exit");
    app.add_option("--now", now_text, "Override the current time (YYYY-MM-DDTHH:MM:SSZ) for --once");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return cli::parse_error_exit(app, e);
    }

    std::unique_ptr<StatusSource> source;
    std::optional<DataRoot> root;
    Instant now;
    try {
        config.data_root = data_root;
        config.validate();
        source = make_source(config.source_spec);
        now = cli::now_or(now_text);
        std::filesystem::create_directories(config.data_root);
        root.emplace(config.data_root);
    } catch (const std::exception& e) {
        fmt::print(stderr, "configuration error: {}\n", e.what());
        return cli::kExitConfig;
    }

    std::optional<WriterLock> lock;
    try {
        lock.emplace(*root);
    } catch (const IoFailure& e) {
        fmt::print(stderr, "configuration error: {}\n", e.what());
        return cli::kExitConfig;
    }

    if (registry_only) {
        try {
            const auto reg = build_machine_registry(*source, *root, now);
            fmt::print(stderr, "registry holds {} machines\n", reg.entries.size());
            return cli::kExitOk;
        } catch (const Error& e) {
            fmt::print(stderr, "registry build failed: {}\n", e.what());
            return cli::kExitFailure;
        }
    }

    if (once) {
        const auto report = poll_once(*source, *root, floor_tick(now, config.interval_s));
        log_report(report);
        return report.ok() ? cli::kExitOk : cli::kExitFailure;
    }

    std::stop_source stop;
    cli::SignalStopper stopper(stop);
    SystemClock clock;
    run_loop(config, *source, *root, clock, stop.get_token(), log_report);
    fmt::print(stderr, "stopped\n");
    return cli::kExitOk;
}
