#pragma once

// Polling driver: samples a status source at aligned ticks and appends the
// resulting records to the store. Queue data is never stored.

#include "poolgaze/model.hpp"
#include "poolgaze/simulator.hpp"
#include "poolgaze/storage.hpp"

#include <condition_variable>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <stop_token>
#include <string>
#include <vector>

namespace poolgaze {

/// Producer of current pool and queue status in the record format. The two
/// fetches are independent and may fail independently with
/// SourceUnavailable.
class StatusSource {
public:
    virtual ~StatusSource() = default;
    virtual std::string fetch_status(Instant now) = 0;
    virtual std::string fetch_queue(Instant now) = 0;
    virtual std::string describe() const = 0;
};

/// Runs a shell command; S/M lines of its output are the status, Q lines the
/// queue. A non-zero exit status makes the fetch fail.
class CommandSource final : public StatusSource {
public:
    explicit CommandSource(std::string command) : command_(std::move(command)) {}
    std::string fetch_status(Instant now) override;
    std::string fetch_queue(Instant now) override;
    std::string describe() const override { return "cmd:" + command_; }

private:
    std::string run() const;
    std::string command_;
};

/// Re-reads a file on every fetch, split like CommandSource output.
class FileSource final : public StatusSource {
public:
    explicit FileSource(std::filesystem::path path) : path_(std::move(path)) {}
    std::string fetch_status(Instant now) override;
    std::string fetch_queue(Instant now) override;
    std::string describe() const override { return "file:" + path_.string(); }

private:
    std::string read() const;
    std::filesystem::path path_;
};

/// Serves the simulated pool. Instants outside the simulated span wrap around
/// it, so a wall-clock driven collector sees an endlessly replayed pool.
class SimulatorSource final : public StatusSource {
public:
    explicit SimulatorSource(GroundTruth truth) : truth_(std::move(truth)) {}
    std::string fetch_status(Instant now) override { return status_at(truth_, replay_instant(now)).status_text; }
    std::string fetch_queue(Instant now) override { return status_at(truth_, replay_instant(now)).queue_text; }
    std::string describe() const override { return "sim"; }
    const GroundTruth& truth() const { return truth_; }
    Instant replay_instant(Instant now) const;

private:
    GroundTruth truth_;
};

/// Fixed texts that can be switched off; for tests and replays.
class TextSource final : public StatusSource {
public:
    TextSource(std::string status, std::string queue) : status_(std::move(status)), queue_(std::move(queue)) {}
    std::string fetch_status(Instant now) override;
    std::string fetch_queue(Instant now) override;
    std::string describe() const override { return "text"; }

    void set_texts(std::string status, std::string queue);
    void set_available(bool available);
    int fetch_count() const;

private:
    mutable std::mutex mu_;
    std::string status_;
    std::string queue_;
    bool available_ = true;
    int fetches_ = 0;
};

/// "cmd:COMMAND", "file:PATH" or "sim:SCENARIO_FILE". Throws InvalidValue.
std::unique_ptr<StatusSource> make_source(std::string_view spec);

struct CollectorConfig {
    Seconds interval_s = 300;
    std::string source_spec;
    std::filesystem::path data_root;
    int lookback_days = 30;
    std::chrono::minutes pool_utc_offset{0};

    /// 30 <= interval_s <= 3600 and a source spec present.
    void validate() const;
};

struct PollReport {
    Instant tick;
    std::size_t machines_seen = 0;
    std::size_t slots_written = 0;
    std::size_t records_written = 0;
    bool source_unavailable = false;
    std::vector<std::string> errors;

    bool ok() const { return errors.empty(); }
};

/// One S record per slot and one M record per reachable machine, all
/// stamped with `now` truncated to the second. Never throws for source or
/// write problems; those land in the report.
PollReport poll_once(StatusSource& source, const DataRoot& root, Instant now);

class Clock {
public:
    virtual ~Clock() = default;
    virtual Instant now() = 0;
    /// Blocks until `t`; false if stopped first.
    virtual bool sleep_until(Instant t, std::stop_token stop) = 0;
};

class SystemClock final : public Clock {
public:
    Instant now() override;
    bool sleep_until(Instant t, std::stop_token stop) override;
};

/// Jumps straight to each requested instant; sleeping to or past `stop_at`
/// ends the run.
class SimulatedClock final : public Clock {
public:
    SimulatedClock(Instant start, Instant stop_at) : now_(start), stop_at_(stop_at) {}
    Instant now() override { return now_; }
    bool sleep_until(Instant t, std::stop_token stop) override;
    void advance(std::chrono::seconds d) { now_ += d; }

private:
    Instant now_;
    Instant stop_at_;
};

/// First aligned tick at or after `t`.
Instant next_tick(Instant t, Seconds interval_s);

/// Polls at every aligned tick until stopped. A poll that overruns the
/// interval skips the ticks it missed.
void run_loop(const CollectorConfig& config, StatusSource& source, const DataRoot& root, Clock& clock,
              std::stop_token stop, const std::function<void(const PollReport&)>& on_report = {});

/// Polls every tick in [from, until) using a simulated clock.
std::vector<PollReport> collect_span(StatusSource& source, const DataRoot& root, Instant from, Instant until,
                                     Seconds interval_s);

/// Rebuilds the registry from current status output, keeping restrictions
/// and machines that are not reporting right now. Saves and returns it.
MachineRegistry build_machine_registry(StatusSource& source, const DataRoot& root, Instant now);

} // namespace poolgaze
