#include "poolgaze/simulator.hpp"

#include "poolgaze/error.hpp"
#include "poolgaze/record_format.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <random>

namespace poolgaze {

using namespace std::chrono;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Exponential with the given mean, in whole seconds, at least `floor_s`.
    Seconds exponential(double mean, Seconds floor_s) {
        const double v = -mean * std::log1p(-uniform());
        return std::max<Seconds>(floor_s, static_cast<Seconds>(std::llround(v)));
    }

    std::size_t pick(std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n))); }

private:
    std::mt19937_64 engine_;
};

struct OsChoice {
    const char* name;
    const char* version;
};

constexpr OsChoice kOperatingSystems[] = {
    {"Fedora", "19"}, {"Fedora", "20"}, {"Ubuntu", "14.04"}, {"openSUSE", "13.1"}, {"CentOS", "6.5"},
};

constexpr std::int64_t kMemoryPerSlotChoices[] = {1024, 2048, 4096};

std::vector<std::string> split_list(std::string_view s, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto p = s.find(delim, start);
        out.emplace_back(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
        if (p == std::string_view::npos) {
            break;
        }
        start = p + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T v{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw InvalidScenario(fmt::format("bad value '{}' for {}", value, key));
    }
    return v;
}

double parse_real(std::string_view key, std::string_view value) {
    try {
        std::size_t used = 0;
        const std::string s(value);
        const double v = std::stod(s, &used);
        if (used != s.size()) {
            throw InvalidScenario(fmt::format("bad value '{}' for {}", value, key));
        }
        return v;
    } catch (const std::logic_error&) {
        throw InvalidScenario(fmt::format("bad value '{}' for {}", value, key));
    }
}

ScheduleWindows nights_and_weekends() {
    ScheduleWindows w;
    for (int d = 0; d < 5; ++d) {
        w.windows.push_back({d, 20 * 60, 7 * 60 + 59});
    }
    w.windows.push_back({5, 0, 23 * 60 + 59});
    w.windows.push_back({6, 0, 23 * 60 + 59});
    return w;
}

} // namespace

Scenario::Scenario() : restriction(nights_and_weekends()) {}

int Scenario::slots_of(int machine_index) const {
    if (slots_per_machine.size() == 1) {
        return slots_per_machine.front();
    }
    return slots_per_machine.at(static_cast<std::size_t>(machine_index));
}

std::string Scenario::machine_name(int machine_index) const {
    return fmt::format("{}{:03}", machine_prefix, machine_index + 1);
}

void Scenario::validate() const {
    if (machines < 1) {
        throw InvalidScenario("machine count must be >= 1");
    }
    if (slots_per_machine.empty() ||
        (slots_per_machine.size() != 1 && slots_per_machine.size() != static_cast<std::size_t>(machines))) {
        throw InvalidScenario("slots_per_machine needs one entry or one per machine");
    }
    if (std::any_of(slots_per_machine.begin(), slots_per_machine.end(), [](int s) { return s < 1 || s > 1024; })) {
        throw InvalidScenario("slot counts must be within 1..1024");
    }
    if (duration_s <= 0) {
        throw InvalidScenario("duration must be positive");
    }
    const auto bad_rate = [](double r) { return !(r >= 0.0) || !std::isfinite(r); };
    if (bad_rate(job_rate_per_slot_hour) || bad_rate(owner_rate_per_hour) || mean_job_length_s <= 0 ||
        mean_owner_length_s <= 0) {
        throw InvalidScenario("rates must be >= 0 and mean lengths positive");
    }
    if (!(suspend_probability >= 0.0 && suspend_probability <= 1.0) ||
        !(restricted_fraction >= 0.0 && restricted_fraction <= 1.0)) {
        throw InvalidScenario("probabilities must lie in [0, 1]");
    }
    if (users.empty() || !std::all_of(users.begin(), users.end(), [](const std::string& u) { return is_valid_user_name(u); })) {
        throw InvalidScenario("user population must be non-empty valid names");
    }
    if (machine_prefix.empty() || !is_valid_machine_name(machine_prefix)) {
        throw InvalidScenario("invalid machine prefix");
    }
    if (interval_s < 30 || interval_s > 3600) {
        throw InvalidScenario("interval_s must lie in 30..3600");
    }
    if (backlog_per_user < 0) {
        throw InvalidScenario("backlog_per_user must be >= 0");
    }
    try {
        restriction.validate();
    } catch (const InvalidValue& e) {
        throw InvalidScenario(e.what());
    }
}

Scenario parse_scenario(std::string_view text) {
    Scenario s;
    for (const auto& line : split_lines(text)) {
        auto body = line.text;
        if (const auto hash = body.find('#'); hash != std::string_view::npos) {
            body = body.substr(0, hash);
        }
        body = trim(body);
        if (body.empty()) {
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw InvalidScenario(fmt::format("line {}: expected key=value", line.number));
        }
        const auto key = trim(body.substr(0, eq));
        const auto value = trim(body.substr(eq + 1));
        if (key == "seed") {
            s.seed = parse_number<std::uint64_t>(key, value);
        } else if (key == "machines") {
            s.machines = parse_number<int>(key, value);
        } else if (key == "slots_per_machine") {
            s.slots_per_machine.clear();
            for (const auto& item : split_list(value, ',')) {
                s.slots_per_machine.push_back(parse_number<int>(key, trim(item)));
            }
        } else if (key == "duration_s") {
            s.duration_s = parse_number<Seconds>(key, value);
        } else if (key == "start") {
            const auto d = parse_date(value);
            if (!d) {
                throw InvalidScenario(fmt::format("bad start date '{}'", value));
            }
            s.start = *d;
        } else if (key == "job_rate_per_slot_hour") {
            s.job_rate_per_slot_hour = parse_real(key, value);
        } else if (key == "mean_job_length_s") {
            s.mean_job_length_s = parse_number<Seconds>(key, value);
        } else if (key == "owner_rate_per_hour") {
            s.owner_rate_per_hour = parse_real(key, value);
        } else if (key == "mean_owner_length_s") {
            s.mean_owner_length_s = parse_number<Seconds>(key, value);
        } else if (key == "suspend_probability") {
            s.suspend_probability = parse_real(key, value);
        } else if (key == "restricted_fraction") {
            s.restricted_fraction = parse_real(key, value);
        } else if (key == "restriction") {
            auto r = ScheduleWindows::parse_spec(value);
            if (!r) {
                throw InvalidScenario(fmt::format("bad restriction '{}'", value));
            }
            s.restriction = std::move(*r);
        } else if (key == "users") {
            s.users.clear();
            for (const auto& item : split_list(value, ',')) {
                s.users.emplace_back(trim(item));
            }
        } else if (key == "machine_prefix") {
            s.machine_prefix = std::string(value);
        } else if (key == "interval_s") {
            s.interval_s = parse_number<Seconds>(key, value);
        } else if (key == "backlog_per_user") {
            s.backlog_per_user = parse_number<int>(key, value);
        } else {
            throw InvalidScenario(fmt::format("unknown scenario key '{}'", key));
        }
    }
    s.validate();
    return s;
}

std::string render_scenario(const Scenario& s) {
    return fmt::format("seed={}\nmachines={}\nslots_per_machine={}\nduration_s={}\nstart={}\n"
                       "job_rate_per_slot_hour={}\nmean_job_length_s={}\nowner_rate_per_hour={}\n"
                       "mean_owner_length_s={}\nsuspend_probability={}\nrestricted_fraction={}\n"
                       "restriction={}\nusers={}\nmachine_prefix={}\ninterval_s={}\nbacklog_per_user={}\n",
                       s.seed, s.machines, fmt::join(s.slots_per_machine, ","), s.duration_s, format_date(s.start),
                       s.job_rate_per_slot_hour, s.mean_job_length_s, s.owner_rate_per_hour, s.mean_owner_length_s,
                       s.suspend_probability, s.restricted_fraction, s.restriction.to_spec(),
                       fmt::join(s.users, ","), s.machine_prefix, s.interval_s, s.backlog_per_user);
}

// ---------------------------------------------------------------------------

namespace {

struct PendingJob {
    int machine;
    int slot;
    std::size_t span_index;
    std::string owner;
    std::vector<JobSegment> segments;
};

struct Session {
    Seconds start;
    Seconds end;
    bool suspends;
};

// Times inside the simulation are offsets in seconds from the run start.
class MachineSim {
public:
    MachineSim(const Scenario& sc, int index, Instant origin)
        : sc_(sc), index_(index), origin_(origin), rng_(splitmix64(sc.seed ^ splitmix64(static_cast<std::uint64_t>(index) + 1))) {}

    SimMachine run(std::vector<PendingJob>& jobs) {
        SimMachine m;
        draw_attributes(m.info);
        draw_sessions();
        for (const auto& s : sessions_) {
            m.owner_sessions.push_back({at(s.start), at(s.end)});
        }
        for (int slot = 1; slot <= m.info.slot_count; ++slot) {
            m.slots.push_back(run_slot(slot, jobs));
        }
        return m;
    }

private:
    Instant at(Seconds offset) const { return origin_ + seconds{offset}; }

    void draw_attributes(MachineInfo& info) {
        info.machine = sc_.machine_name(index_);
        info.slot_count = sc_.slots_of(index_);
        const auto& os = kOperatingSystems[rng_.pick(std::size(kOperatingSystems))];
        info.os_name = os.name;
        info.os_version = os.version;
        const auto per_slot_mem = kMemoryPerSlotChoices[rng_.pick(std::size(kMemoryPerSlotChoices))];
        info.memory_mb_total = per_slot_mem * info.slot_count;
        info.memory_mb_per_slot.assign(static_cast<std::size_t>(info.slot_count), per_slot_mem);
        info.disk_mb_free_total = 500 + static_cast<std::int64_t>(rng_.uniform() * 199500.0);
        info.disk_mb_free_per_slot.assign(static_cast<std::size_t>(info.slot_count),
                                          info.disk_mb_free_total / info.slot_count);
        restricted_ = rng_.uniform() < sc_.restricted_fraction;
        if (restricted_) {
            info.restriction = sc_.restriction;
        }
    }

    void draw_sessions() {
        if (sc_.owner_rate_per_hour <= 0.0) {
            return;
        }
        const double mean_gap = 3600.0 / sc_.owner_rate_per_hour;
        Seconds t = 0;
        while (true) {
            t += rng_.exponential(mean_gap, 1);
            if (t >= sc_.duration_s) {
                break;
            }
            const Seconds len = rng_.exponential(static_cast<double>(sc_.mean_owner_length_s), 60);
            const bool suspends = rng_.uniform() < sc_.suspend_probability;
            const Seconds end = std::min(t + len, sc_.duration_s);
            sessions_.push_back({t, end, suspends});
            t = end;
        }
    }

    const Session* session_at(Seconds t) const {
        const auto it = std::upper_bound(sessions_.begin(), sessions_.end(), t,
                                         [](Seconds v, const Session& s) { return v < s.start; });
        if (it == sessions_.begin()) {
            return nullptr;
        }
        const auto& s = *std::prev(it);
        return t < s.end ? &s : nullptr;
    }

    Seconds next_suspending_start(Seconds t) const {
        for (const auto& s : sessions_) {
            if (s.start > t && s.suspends) {
                return s.start;
            }
        }
        return sc_.duration_s;
    }

    std::vector<JobSegment> execute(Seconds begin, Seconds work) const {
        std::vector<JobSegment> segs;
        Seconds cur = begin;
        Seconds remaining = work;
        while (remaining > 0 && cur < sc_.duration_s) {
            const auto* s = session_at(cur);
            if (s && s->suspends) {
                segs.push_back({JobPhase::Suspended, at(cur), at(s->end)});
                cur = s->end;
                continue;
            }
            const Seconds stop = std::min({cur + remaining, next_suspending_start(cur), sc_.duration_s});
            segs.push_back({JobPhase::Running, at(cur), at(stop)});
            remaining -= stop - cur;
            cur = stop;
        }
        return segs;
    }

    // Idle or owner spans covering [from, to) on a slot.
    void fill_free(std::vector<SlotSpan>& spans, int slot, Seconds from, Seconds to) const {
        Seconds cur = from;
        if (slot == 1) {
            for (const auto& s : sessions_) {
                if (s.end <= cur || s.start >= to) {
                    continue;
                }
                if (s.start > cur) {
                    spans.push_back({at(cur), at(s.start), SpanKind::Idle});
                    cur = s.start;
                }
                const Seconds end = std::min(s.end, to);
                spans.push_back({at(cur), at(end), SpanKind::Owner});
                cur = end;
            }
        }
        if (cur < to) {
            spans.push_back({at(cur), at(to), SpanKind::Idle});
        }
    }

    std::vector<SlotSpan> run_slot(int slot, std::vector<PendingJob>& jobs) {
        std::vector<SlotSpan> spans;
        Seconds t = 0;         // arrival clock
        Seconds free_from = 0; // end of the previous job
        if (sc_.job_rate_per_slot_hour > 0.0) {
            const double mean_gap = 3600.0 / sc_.job_rate_per_slot_hour;
            while (true) {
                const Seconds arrival = t + rng_.exponential(mean_gap, 1);
                if (arrival >= sc_.duration_s) {
                    break;
                }
                const bool owner_busy = session_at(arrival) != nullptr;
                const bool window_closed = restricted_ && !schedule_allows(sc_.restriction, at(arrival));
                if (owner_busy || window_closed) {
                    t = arrival;
                    continue;
                }
                const Seconds work = rng_.exponential(static_cast<double>(sc_.mean_job_length_s), 60);
                auto owner = sc_.users[rng_.pick(sc_.users.size())];
                auto segs = execute(arrival, work);
                const Seconds end = (segs.back().end - origin_).count();
                fill_free(spans, slot, free_from, arrival);
                jobs.push_back({index_, slot, spans.size(), std::move(owner), std::move(segs)});
                spans.push_back({at(arrival), at(end), SpanKind::Job});
                t = end;
                free_from = end;
                if (t >= sc_.duration_s) {
                    break;
                }
            }
        }
        fill_free(spans, slot, free_from, sc_.duration_s);
        return spans;
    }

    const Scenario& sc_;
    int index_;
    Instant origin_;
    Rng rng_;
    bool restricted_ = false;
    std::vector<Session> sessions_;
};

const SlotSpan& span_at(const std::vector<SlotSpan>& spans, Instant t) {
    auto it = std::upper_bound(spans.begin(), spans.end(), t,
                               [](Instant v, const SlotSpan& s) { return v < s.start; });
    if (it != spans.begin()) {
        --it;
    }
    return *it;
}

JobPhase phase_at(const JobInterval& job, Instant t) {
    for (const auto& s : job.segments) {
        if (s.start <= t && t < s.end) {
            return s.phase;
        }
    }
    return job.segments.back().phase;
}

} // namespace

MachineRegistry GroundTruth::registry() const {
    MachineRegistry reg;
    for (const auto& m : machines) {
        reg.entries.push_back({m.info.machine, m.info.slot_count, m.info.restriction});
    }
    reg.normalize();
    return reg;
}

GroundTruth simulate(const Scenario& scenario) {
    scenario.validate();
    GroundTruth gt;
    gt.scenario = scenario;
    gt.start = start_of(scenario.start);
    gt.end = gt.start + seconds{scenario.duration_s};

    std::vector<PendingJob> pending;
    for (int i = 0; i < scenario.machines; ++i) {
        MachineSim sim(scenario, i, gt.start);
        gt.machines.push_back(sim.run(pending));
    }

    std::sort(pending.begin(), pending.end(), [](const PendingJob& a, const PendingJob& b) {
        return std::tie(a.segments.front().start, a.machine, a.slot) <
               std::tie(b.segments.front().start, b.machine, b.slot);
    });
    for (std::size_t k = 0; k < pending.size(); ++k) {
        auto& p = pending[k];
        auto& m = gt.machines[static_cast<std::size_t>(p.machine)];
        JobInterval iv;
        iv.machine = m.info.machine;
        iv.slot = p.slot;
        iv.job_id = fmt::format("{}.0", 1000 + k);
        iv.owner = std::move(p.owner);
        iv.start = p.segments.front().start;
        iv.end = p.segments.back().end;
        iv.segments = std::move(p.segments);
        m.slots[static_cast<std::size_t>(p.slot - 1)][p.span_index].job = static_cast<int>(k);
        gt.jobs.push_back(std::move(iv));
    }
    return gt;
}

SimStatus status_at(const GroundTruth& truth, Instant t) {
    if (truth.machines.empty()) {
        return {};
    }
    t = std::clamp(t, truth.start, truth.end - seconds{1});
    SimStatus out;
    std::map<std::string, std::int64_t> in_flight;

    for (const auto& m : truth.machines) {
        const bool owner_active = std::any_of(m.owner_sessions.begin(), m.owner_sessions.end(),
                                              [&](const TimeSpan& s) { return s.start <= t && t < s.end; });
        std::int64_t busy = 0;
        std::vector<SlotObservation> slots;
        for (std::size_t i = 0; i < m.slots.size(); ++i) {
            const auto& span = span_at(m.slots[i], t);
            SlotObservation obs;
            obs.timestamp = t;
            obs.machine = m.info.machine;
            obs.slot = static_cast<int>(i) + 1;
            switch (span.kind) {
            case SpanKind::Idle:
                obs.state = SlotState::Unclaimed;
                obs.activity = SlotActivity::Idle;
                break;
            case SpanKind::Owner:
                obs.state = SlotState::Owner;
                obs.activity = SlotActivity::Idle;
                obs.load = Load::from_hundredths(35);
                break;
            case SpanKind::Job: {
                const auto& job = truth.jobs[static_cast<std::size_t>(span.job)];
                const auto phase = phase_at(job, t);
                obs.state = SlotState::Claimed;
                obs.activity = phase == JobPhase::Running ? SlotActivity::Busy : SlotActivity::Suspended;
                obs.load = Load::from_hundredths(phase == JobPhase::Running ? 100 : 0);
                obs.job_id = job.job_id;
                obs.owner = job.owner;
                busy += phase == JobPhase::Running ? 1 : 0;
                ++in_flight[job.owner];
                break;
            }
            }
            slots.push_back(std::move(obs));
        }
        MachineRecord rec{t, m.info};
        rec.info.restriction.reset();
        rec.info.load_avg_condor = Load::from_hundredths(100 * busy);
        rec.info.load_avg_total = Load::from_hundredths(100 * busy + 5 + (owner_active ? 35 : 0));
        out.status_text += render_record_line(rec);
        out.status_text += '\n';
        for (const auto& s : slots) {
            out.status_text += render_record_line(s);
            out.status_text += '\n';
        }
    }

    // Pending backlog per user changes hourly and is a pure function of
    // (seed, user, hour).
    const auto hour = static_cast<std::uint64_t>(duration_cast<hours>(t - truth.start).count());
    std::vector<QueueRow> rows;
    for (std::size_t u = 0; u < truth.scenario.users.size(); ++u) {
        const auto& user = truth.scenario.users[u];
        const auto h = splitmix64(truth.scenario.seed ^ splitmix64((u + 1) * 0x10001ULL + hour));
        const auto span = static_cast<std::uint64_t>(2 * truth.scenario.backlog_per_user + 1);
        QueueRow row{user, in_flight[user], static_cast<std::int64_t>(h % span),
                     static_cast<std::int64_t>((h >> 32) % 4 == 0 ? 1 : 0)};
        rows.push_back(std::move(row));
    }
    out.queue_text = render_queue_output(QueueSummary::from_rows(std::move(rows)));
    return out;
}

std::string render_ground_truth_json(const GroundTruth& truth) {
    using nlohmann::json;
    json doc;
    doc["start"] = format_instant(truth.start);
    doc["end"] = format_instant(truth.end);
    doc["seed"] = truth.scenario.seed;
    doc["interval_s"] = truth.scenario.interval_s;
    json machines = json::array();
    for (const auto& m : truth.machines) {
        json owner_sessions = json::array();
        for (const auto& s : m.owner_sessions) {
            owner_sessions.push_back({{"start", format_instant(s.start)}, {"end", format_instant(s.end)}});
        }
        machines.push_back({{"machine", m.info.machine},
                            {"slot_count", m.info.slot_count},
                            {"restriction", m.info.restriction ? json(m.info.restriction->to_spec()) : json(nullptr)},
                            {"owner_sessions", owner_sessions}});
    }
    doc["machines"] = machines;
    json jobs = json::array();
    for (const auto& j : truth.jobs) {
        json segs = json::array();
        for (const auto& s : j.segments) {
            segs.push_back({{"phase", to_string(s.phase)},
                            {"start", format_instant(s.start)},
                            {"end", format_instant(s.end)}});
        }
        jobs.push_back({{"machine", j.machine},
                        {"slot", j.slot},
                        {"job_id", j.job_id},
                        {"owner", j.owner},
                        {"start", format_instant(j.start)},
                        {"end", format_instant(j.end)},
                        {"segments", segs}});
    }
    doc["jobs"] = jobs;
    return doc.dump(1) + "\n";
}

} // namespace poolgaze
