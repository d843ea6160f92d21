#include "poolgaze/collector.hpp"

#include "poolgaze/error.hpp"
#include "poolgaze/record_format.hpp"

#include <sys/wait.h>

#include <fmt/format.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace poolgaze {

using namespace std::chrono;

namespace {

// Splits mixed source output into status (S/M) and queue (Q) lines.
std::string select_lines(std::string_view text, bool queue) {
    std::string out;
    for (const auto& line : split_lines(text)) {
        if (line.text.empty()) {
            continue;
        }
        const bool is_queue = line.text.substr(0, 2) == "Q|";
        if (is_queue == queue) {
            out += line.text;
            out += '\n';
        }
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw SourceUnavailable(fmt::format("cannot read {}", path.string()));
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

} // namespace

std::string CommandSource::run() const {
    FILE* pipe = ::popen(command_.c_str(), "r");
    if (!pipe) {
        throw SourceUnavailable(fmt::format("cannot start '{}'", command_));
    }
    std::string out;
    std::array<char, 8192> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) {
        out.append(buf.data(), n);
    }
    const int status = ::pclose(pipe);
    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        throw SourceUnavailable(fmt::format("'{}' failed with status {}", command_,
                                            status != -1 && WIFEXITED(status) ? WEXITSTATUS(status) : -1));
    }
    return out;
}

std::string CommandSource::fetch_status(Instant) { return select_lines(run(), false); }
std::string CommandSource::fetch_queue(Instant) { return select_lines(run(), true); }

Instant SimulatorSource::replay_instant(Instant now) const {
    const auto span = (truth_.end - truth_.start).count();
    if (span <= 0) {
        return now;
    }
    const auto offset = (now - truth_.start).count();
    return truth_.start + seconds{((offset % span) + span) % span};
}

std::string FileSource::read() const { return read_text_file(path_); }
std::string FileSource::fetch_status(Instant) { return select_lines(read(), false); }
std::string FileSource::fetch_queue(Instant) { return select_lines(read(), true); }

std::string TextSource::fetch_status(Instant) {
    std::lock_guard lock(mu_);
    ++fetches_;
    if (!available_) {
        throw SourceUnavailable("source switched off");
    }
    return status_;
}

std::string TextSource::fetch_queue(Instant) {
    std::lock_guard lock(mu_);
    if (!available_) {
        throw SourceUnavailable("source switched off");
    }
    return queue_;
}

void TextSource::set_texts(std::string status, std::string queue) {
    std::lock_guard lock(mu_);
    status_ = std::move(status);
    queue_ = std::move(queue);
}

void TextSource::set_available(bool available) {
    std::lock_guard lock(mu_);
    available_ = available;
}

int TextSource::fetch_count() const {
    std::lock_guard lock(mu_);
    return fetches_;
}

std::unique_ptr<StatusSource> make_source(std::string_view spec) {
    if (spec.substr(0, 4) == "cmd:" && spec.size() > 4) {
        return std::make_unique<CommandSource>(std::string(spec.substr(4)));
    }
    if (spec.substr(0, 5) == "file:" && spec.size() > 5) {
        return std::make_unique<FileSource>(std::filesystem::path(spec.substr(5)));
    }
    if (spec.substr(0, 4) == "sim:" && spec.size() > 4) {
        const auto path = std::filesystem::path(spec.substr(4));
        std::string text;
        try {
            text = read_text_file(path);
        } catch (const SourceUnavailable&) {
            throw InvalidValue(fmt::format("cannot read scenario {}", path.string()));
        }
        return std::make_unique<SimulatorSource>(simulate(parse_scenario(text)));
    }
    throw InvalidValue(fmt::format("source must be cmd:COMMAND, file:PATH or sim:SCENARIO, got '{}'", spec));
}

void CollectorConfig::validate() const {
    if (interval_s < 30 || interval_s > 3600) {
        throw InvalidValue(fmt::format("interval {} s outside 30..3600", interval_s));
    }
    if (source_spec.empty()) {
        throw InvalidValue("a status source is required");
    }
    if (lookback_days < 1) {
        throw InvalidValue("lookback must be at least one day");
    }
}

PollReport poll_once(StatusSource& source, const DataRoot& root, Instant now) {
    PollReport report;
    report.tick = now;
    std::string text;
    try {
        text = source.fetch_status(now);
    } catch (const SourceUnavailable& e) {
        report.source_unavailable = true;
        report.errors.emplace_back(e.what());
        return report;
    }

    std::vector<Record> records;
    try {
        const auto snap = parse_status_output(text, now);
        for (const auto& m : snap.machines) {
            ++report.machines_seen;
            records.emplace_back(MachineRecord{now, m.info});
            for (const auto& s : m.slots) {
                records.emplace_back(s);
                ++report.slots_written;
            }
        }
    } catch (const Error& e) {
        report.errors.push_back(fmt::format("unusable status output: {}", e.what()));
        report.slots_written = 0;
        return report;
    }

    try {
        report.records_written = append_observations(root, records);
    } catch (const Error& e) {
        report.errors.push_back(fmt::format("write aborted: {}", e.what()));
    }
    return report;
}

Instant SystemClock::now() { return floor<seconds>(system_clock::now()); }

bool SystemClock::sleep_until(Instant t, std::stop_token stop) {
    std::mutex mu;
    std::condition_variable_any cv;
    std::unique_lock lock(mu);
    cv.wait_until(lock, stop, time_point_cast<system_clock::duration>(t), [] { return false; });
    return !stop.stop_requested();
}

bool SimulatedClock::sleep_until(Instant t, std::stop_token stop) {
    if (stop.stop_requested() || t >= stop_at_) {
        now_ = std::max(now_, std::min(t, stop_at_));
        return false;
    }
    now_ = std::max(now_, t);
    return true;
}

Instant next_tick(Instant t, Seconds interval_s) {
    const auto s = to_seconds(t);
    const auto floor_tick = s - ((s % interval_s) + interval_s) % interval_s;
    return instant_from_seconds(floor_tick == s ? s : floor_tick + interval_s);
}

void run_loop(const CollectorConfig& config, StatusSource& source, const DataRoot& root, Clock& clock,
              std::stop_token stop, const std::function<void(const PollReport&)>& on_report) {
    config.validate();
    Instant tick = next_tick(clock.now(), config.interval_s);
    while (clock.sleep_until(tick, stop)) {
        const auto report = poll_once(source, root, tick);
        if (on_report) {
            on_report(report);
        }
        tick = next_tick(clock.now(), config.interval_s);
        if (tick <= report.tick) {
            tick = report.tick + seconds{config.interval_s};
        }
    }
}

std::vector<PollReport> collect_span(StatusSource& source, const DataRoot& root, Instant from, Instant until,
                                     Seconds interval_s) {
    CollectorConfig config;
    config.interval_s = interval_s;
    config.source_spec = source.describe();
    config.data_root = root.path();
    SimulatedClock clock(from, until);
    std::vector<PollReport> reports;
    std::stop_source never;
    run_loop(config, source, root, clock, never.get_token(),
             [&](const PollReport& r) { reports.push_back(r); });
    return reports;
}

MachineRegistry build_machine_registry(StatusSource& source, const DataRoot& root, Instant now) {
    const auto snap = parse_status_output(source.fetch_status(now), now);
    MachineRegistry reg;
    if (registry_exists(root)) {
        reg = load_registry(root);
    }
    for (const auto& m : snap.machines) {
        bool found = false;
        for (auto& e : reg.entries) {
            if (e.machine == m.info.machine) {
                e.slot_count = m.info.slot_count;
                found = true;
            }
        }
        if (!found) {
            reg.entries.push_back({m.info.machine, m.info.slot_count, std::nullopt});
        }
    }
    reg.normalize();
    save_registry(root, reg);
    return reg;
}

} // namespace poolgaze
