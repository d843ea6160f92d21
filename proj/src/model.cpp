#include "poolgaze/model.hpp"

#include "poolgaze/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

namespace poolgaze {

using namespace std::chrono;

namespace {

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

int to_int(std::string_view s) {
    int v = 0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

} // namespace

std::string format_instant(Instant t) {
    const Date d = day_of(t);
    const year_month_day ymd{d};
    const hh_mm_ss hms{t - Instant{d}};
    return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                       hms.hours().count(), hms.minutes().count(), hms.seconds().count());
}

std::optional<Instant> parse_instant(std::string_view text) {
    // 2014-06-02T10:05:00Z
    if (text.size() != 20 || text[10] != 'T' || text[19] != 'Z') {
        return std::nullopt;
    }
    const auto date = parse_date(text.substr(0, 10));
    if (!date) {
        return std::nullopt;
    }
    const auto hh = text.substr(11, 2), mm = text.substr(14, 2), ss = text.substr(17, 2);
    if (text[13] != ':' || text[16] != ':' || !all_digits(hh) || !all_digits(mm) || !all_digits(ss)) {
        return std::nullopt;
    }
    const int h = to_int(hh), m = to_int(mm), s = to_int(ss);
    if (h > 23 || m > 59 || s > 59) {
        return std::nullopt;
    }
    return Instant{*date} + hours{h} + minutes{m} + seconds{s};
}

std::string format_date(Date d) {
    const year_month_day ymd{d};
    return fmt::format("{:04}-{:02}-{:02}", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

std::optional<Date> parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        return std::nullopt;
    }
    const auto ys = text.substr(0, 4), ms = text.substr(5, 2), ds = text.substr(8, 2);
    if (!all_digits(ys) || !all_digits(ms) || !all_digits(ds)) {
        return std::nullopt;
    }
    const year_month_day ymd{year{to_int(ys)}, month{static_cast<unsigned>(to_int(ms))},
                             day{static_cast<unsigned>(to_int(ds))}};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    return Date{ymd};
}

int days_in_month(Date d) {
    const year_month_day ymd{d};
    const year_month_day_last last{ymd.year(), month_day_last{ymd.month()}};
    return static_cast<int>(static_cast<unsigned>(last.day()));
}

// ---------------------------------------------------------------------------

std::string_view to_string(SlotState s) {
    switch (s) {
    case SlotState::Owner: return "Owner";
    case SlotState::Claimed: return "Claimed";
    case SlotState::Unclaimed: return "Unclaimed";
    case SlotState::Matched: return "Matched";
    case SlotState::Preempting: return "Preempting";
    case SlotState::Drained: return "Drained";
    }
    return "?";
}

std::string_view to_string(SlotActivity a) {
    switch (a) {
    case SlotActivity::Busy: return "Busy";
    case SlotActivity::Suspended: return "Suspended";
    case SlotActivity::Idle: return "Idle";
    case SlotActivity::Benchmarking: return "Benchmarking";
    case SlotActivity::Retiring: return "Retiring";
    case SlotActivity::Vacating: return "Vacating";
    }
    return "?";
}

std::string_view to_string(JobPhase p) {
    return p == JobPhase::Running ? "Running" : "Suspended";
}

std::string_view to_string(DisplayClass c) {
    switch (c) {
    case DisplayClass::OwnerBlue: return "owner";
    case DisplayClass::RunningRed: return "running";
    case DisplayClass::IdleGreen: return "idle";
    case DisplayClass::SuspendedAmber: return "suspended";
    case DisplayClass::OtherGray: return "other";
    }
    return "?";
}

std::optional<SlotState> parse_slot_state(std::string_view token) {
    for (auto s : kAllSlotStates) {
        if (to_string(s) == token) {
            return s;
        }
    }
    return std::nullopt;
}

std::optional<SlotActivity> parse_slot_activity(std::string_view token) {
    for (auto a : kAllSlotActivities) {
        if (to_string(a) == token) {
            return a;
        }
    }
    return std::nullopt;
}

DisplayClass slot_display_class(SlotState state, SlotActivity activity) {
    if (state == SlotState::Claimed && activity == SlotActivity::Busy) {
        return DisplayClass::RunningRed;
    }
    if (state == SlotState::Claimed && activity == SlotActivity::Suspended) {
        return DisplayClass::SuspendedAmber;
    }
    if (state == SlotState::Owner) {
        return DisplayClass::OwnerBlue;
    }
    if (state == SlotState::Unclaimed && activity == SlotActivity::Idle) {
        return DisplayClass::IdleGreen;
    }
    return DisplayClass::OtherGray;
}

std::optional<JobPhase> job_phase(SlotState state, SlotActivity activity) {
    if (state != SlotState::Claimed) {
        return std::nullopt;
    }
    if (activity == SlotActivity::Busy) {
        return JobPhase::Running;
    }
    if (activity == SlotActivity::Suspended) {
        return JobPhase::Suspended;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

bool is_valid_field_text(std::string_view s) {
    return std::none_of(s.begin(), s.end(), [](char c) {
        const auto u = static_cast<unsigned char>(c);
        return c == '|' || u < 0x20 || u == 0x7f;
    });
}

bool is_valid_machine_name(std::string_view s) {
    return !s.empty() && is_valid_field_text(s) && s != "." && s != ".." &&
           s.find_first_of(std::string_view{"/,;\0 \t", 6}) == std::string_view::npos;
}

bool is_valid_user_name(std::string_view s) {
    return !s.empty() && is_valid_field_text(s) && s.find(',') == std::string_view::npos;
}

bool is_valid_job_id(std::string_view s) {
    const auto dot = s.find('.');
    return dot != std::string_view::npos && all_digits(s.substr(0, dot)) && all_digits(s.substr(dot + 1));
}

Load Load::from_double(double v) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
        throw InvalidValue("load must be a finite non-negative number");
    }
    return Load{std::llround(v * 100.0)};
}

std::string Load::to_string() const {
    return fmt::format("{}.{:02}", hundredths_ / 100, hundredths_ % 100);
}

void SlotObservation::validate() const {
    if (!is_valid_machine_name(machine)) {
        throw InvalidValue(fmt::format("invalid machine name '{}'", machine));
    }
    if (slot < 1) {
        throw InvalidValue("slot index must be >= 1");
    }
    if (load.hundredths() < 0) {
        throw InvalidValue("load must be non-negative");
    }
    const bool claimed = state == SlotState::Claimed;
    if (claimed != job_id.has_value() || claimed != owner.has_value()) {
        throw InvalidValue("job_id and owner must be present exactly when the slot is Claimed");
    }
    if (job_id && !is_valid_job_id(*job_id)) {
        throw InvalidValue(fmt::format("invalid job id '{}'", *job_id));
    }
    if (owner && !is_valid_user_name(*owner)) {
        throw InvalidValue(fmt::format("invalid owner '{}'", *owner));
    }
}

// ---------------------------------------------------------------------------

std::optional<int> parse_hhmm(std::string_view text) {
    if (text.size() != 5 || text[2] != ':' || !all_digits(text.substr(0, 2)) || !all_digits(text.substr(3, 2))) {
        return std::nullopt;
    }
    const int h = to_int(text.substr(0, 2)), m = to_int(text.substr(3, 2));
    if (h > 23 || m > 59) {
        return std::nullopt;
    }
    return h * 60 + m;
}

std::string format_hhmm(int minute_of_day) {
    return fmt::format("{:02}:{:02}", minute_of_day / 60, minute_of_day % 60);
}

void ScheduleWindows::validate() const {
    for (const auto& w : windows) {
        if (w.day < 0 || w.day > 6 || w.start_minute < 0 || w.start_minute >= 1440 || w.end_minute < 0 ||
            w.end_minute >= 1440) {
            throw InvalidValue("schedule window out of range");
        }
    }
}

std::string ScheduleWindows::to_spec() const {
    std::string out;
    for (const auto& w : windows) {
        if (!out.empty()) {
            out += ';';
        }
        out += fmt::format("{}:{}-{}", w.day, format_hhmm(w.start_minute), format_hhmm(w.end_minute));
    }
    return out;
}

std::optional<ScheduleWindows> ScheduleWindows::parse_spec(std::string_view spec) {
    ScheduleWindows out;
    if (spec.empty()) {
        return out;
    }
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        const auto next = spec.find(';', pos);
        const auto item = spec.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
        // d:HH:MM-HH:MM
        if (item.size() != 13 || item[1] != ':' || item[7] != '-' || item[0] < '0' || item[0] > '6') {
            return std::nullopt;
        }
        const auto start = parse_hhmm(item.substr(2, 5));
        const auto end = parse_hhmm(item.substr(8, 5));
        if (!start || !end) {
            return std::nullopt;
        }
        out.windows.push_back({item[0] - '0', *start, *end});
        if (next == std::string_view::npos) {
            break;
        }
        pos = next + 1;
    }
    return out;
}

bool schedule_allows(const ScheduleWindows& schedule, Instant t, minutes pool_utc_offset) {
    constexpr int kWeek = 7 * 1440;
    const auto local = t + pool_utc_offset;
    const Date d = day_of(local);
    const int dow = static_cast<int>(weekday{d}.iso_encoding()) - 1;
    const int minute_of_week = dow * 1440 + static_cast<int>(duration_cast<minutes>(local - Instant{d}).count());
    for (const auto& w : schedule.windows) {
        const int begin = w.day * 1440 + w.start_minute;
        const int length = w.end_minute >= w.start_minute ? w.end_minute - w.start_minute + 1
                                                          : w.end_minute + 1440 - w.start_minute + 1;
        const int offset = ((minute_of_week - begin) % kWeek + kWeek) % kWeek;
        if (offset < length) {
            return true;
        }
    }
    return false;
}

void MachineInfo::validate() const {
    if (!is_valid_machine_name(machine)) {
        throw InvalidValue(fmt::format("invalid machine name '{}'", machine));
    }
    if (slot_count < 1) {
        throw InvalidValue("slot_count must be >= 1");
    }
    if (!is_valid_field_text(os_name) || !is_valid_field_text(os_version)) {
        throw InvalidValue("OS fields must not contain '|' or line breaks");
    }
    if (reachable) {
        if (memory_mb_per_slot.size() != static_cast<std::size_t>(slot_count) ||
            disk_mb_free_per_slot.size() != static_cast<std::size_t>(slot_count)) {
            throw InvalidValue("per-slot lists must have slot_count entries");
        }
    }
    const auto negative = [](std::int64_t v) { return v < 0; };
    if (memory_mb_total < 0 || disk_mb_free_total < 0 ||
        std::any_of(memory_mb_per_slot.begin(), memory_mb_per_slot.end(), negative) ||
        std::any_of(disk_mb_free_per_slot.begin(), disk_mb_free_per_slot.end(), negative)) {
        throw InvalidValue("memory and disk figures must be non-negative");
    }
    if (load_avg_total.hundredths() < 0 || load_avg_condor.hundredths() < 0) {
        throw InvalidValue("loads must be non-negative");
    }
    // One hundredth of jitter between the two load readings is tolerated.
    if (load_avg_condor.hundredths() > load_avg_total.hundredths() + 1) {
        throw InvalidValue("condor load exceeds total load");
    }
    if (restriction) {
        restriction->validate();
    }
}

// ---------------------------------------------------------------------------

void JobInterval::validate() const {
    if (!(start < end)) {
        throw InvalidValue("job interval must have start < end");
    }
    if (segments.empty() || segments.front().start != start || segments.back().end != end) {
        throw InvalidValue("job segments must cover the interval");
    }
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (!(segments[i].start < segments[i].end)) {
            throw InvalidValue("empty job segment");
        }
        if (i > 0 && (segments[i].start != segments[i - 1].end || segments[i].phase == segments[i - 1].phase)) {
            throw InvalidValue("job segments must be contiguous with alternating phases");
        }
    }
}

Seconds JobInterval::phase_s(JobPhase p) const {
    Seconds total = 0;
    for (const auto& s : segments) {
        if (s.phase == p) {
            total += s.length_s();
        }
    }
    return total;
}

// ---------------------------------------------------------------------------

DailySummary DailySummary::compute(std::string machine, Date date, int slot_count, Seconds running_s,
                                   Seconds suspended_s) {
    if (slot_count < 1) {
        throw InvalidValue("slot_count must be >= 1");
    }
    const Seconds theoretical = static_cast<Seconds>(slot_count) * kSecondsPerDay;
    if (running_s < 0 || suspended_s < 0 || running_s + suspended_s > theoretical) {
        throw InvalidValue(fmt::format("job time {}+{} s outside [0, {}] for {}", running_s, suspended_s,
                                       theoretical, machine));
    }
    const auto stats = [&](Seconds total) {
        return FigureStats{total, static_cast<double>(total) / slot_count,
                           100.0 * static_cast<double>(total) / static_cast<double>(theoretical)};
    };
    DailySummary s;
    s.machine = std::move(machine);
    s.date = date;
    s.slot_count = slot_count;
    s.theoretical_s = theoretical;
    s.running = stats(running_s);
    s.suspended = stats(suspended_s);
    s.condor_total = stats(running_s + suspended_s);
    s.owner_idle = stats(theoretical - running_s - suspended_s);
    return s;
}

int span_days(PeriodSpan span, Date start) {
    return span == PeriodSpan::Week ? 7 : days_in_month(start);
}

PeriodSummary PeriodSummary::compute(std::string machine, Date start_date, int slot_count,
                                     std::vector<DailySummary> per_day) {
    if (per_day.empty()) {
        throw InvalidValue("period must span at least one day");
    }
    PeriodSummary p;
    p.machine = std::move(machine);
    p.start_date = start_date;
    p.span_days = static_cast<int>(per_day.size());
    p.slot_count = slot_count;
    for (std::size_t i = 0; i < per_day.size(); ++i) {
        const auto& d = per_day[i];
        if (d.date != start_date + days{static_cast<int>(i)} || d.slot_count != slot_count) {
            throw InvalidValue("period days must be consecutive and share a slot count");
        }
        p.totals.theoretical += d.theoretical_s;
        p.totals.owner_idle += d.owner_idle.total_s;
        p.totals.condor_total += d.condor_total.total_s;
        p.totals.running += d.running.total_s;
        p.totals.suspended += d.suspended.total_s;
    }
    p.per_day = std::move(per_day);
    const double n = p.span_days;
    const auto avg = [&](Seconds total) { return static_cast<double>(total) / n; };
    p.avg_per_day_s = {avg(p.totals.theoretical), avg(p.totals.owner_idle), avg(p.totals.condor_total),
                       avg(p.totals.running), avg(p.totals.suspended)};
    const double slots = slot_count;
    p.avg_per_day_slot_s = {p.avg_per_day_s.theoretical / slots, p.avg_per_day_s.owner_idle / slots,
                            p.avg_per_day_s.condor_total / slots, p.avg_per_day_s.running / slots,
                            p.avg_per_day_s.suspended / slots};
    return p;
}

QueueSummary QueueSummary::from_rows(std::vector<QueueRow> rows) {
    QueueSummary q;
    for (const auto& r : rows) {
        if (r.running < 0 || r.idle < 0 || r.held < 0) {
            throw InvalidValue("queue counts must be non-negative");
        }
        q.totals.running += r.running;
        q.totals.idle += r.idle;
        q.totals.held += r.held;
    }
    q.rows = std::move(rows);
    return q;
}

const MachineStatus* PoolSnapshot::find(std::string_view machine) const {
    const auto it = std::lower_bound(machines.begin(), machines.end(), machine,
                                     [](const MachineStatus& m, std::string_view n) { return m.info.machine < n; });
    return it != machines.end() && it->info.machine == machine ? &*it : nullptr;
}

const RegistryEntry* MachineRegistry::find(std::string_view machine) const {
    for (const auto& e : entries) {
        if (e.machine == machine) {
            return &e;
        }
    }
    return nullptr;
}

void MachineRegistry::normalize() {
    std::sort(entries.begin(), entries.end(),
              [](const RegistryEntry& a, const RegistryEntry& b) { return a.machine < b.machine; });
    for (std::size_t i = 0; i < entries.size(); ++i) {
        auto& e = entries[i];
        // The registry line cannot tell an empty window list from no restriction.
        if (e.restriction && e.restriction->windows.empty()) {
            e.restriction.reset();
        }
        if (!is_valid_machine_name(e.machine) || e.slot_count < 1) {
            throw InvalidValue(fmt::format("invalid registry entry '{}'", e.machine));
        }
        if (e.restriction) {
            e.restriction->validate();
        }
        if (i > 0 && entries[i - 1].machine == e.machine) {
            throw InvalidValue(fmt::format("duplicate registry entry '{}'", e.machine));
        }
    }
}

} // namespace poolgaze
