#include "poolgaze/aggregator.hpp"

#include "poolgaze/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>

namespace poolgaze {

using namespace std::chrono;

void ReconstructionParams::validate() const {
    if (interval_s <= 0 || gap_limit_s < interval_s || gap_limit_s > kSecondsPerDay) {
        throw InvalidValue(fmt::format("invalid reconstruction parameters: interval {} s, gap limit {} s",
                                       interval_s, gap_limit_s));
    }
}

namespace {

struct OpenInterval {
    JobInterval interval;
    Instant last_tick;
};

// Drops empty segments and merges neighbours that share a phase.
void normalize_segments(JobInterval& iv) {
    std::vector<JobSegment> out;
    for (const auto& s : iv.segments) {
        if (!(s.start < s.end)) {
            continue;
        }
        if (!out.empty() && out.back().phase == s.phase && out.back().end == s.start) {
            out.back().end = s.end;
        } else {
            out.push_back(s);
        }
    }
    iv.segments = std::move(out);
    if (!iv.segments.empty()) {
        iv.start = iv.segments.front().start;
        iv.end = iv.segments.back().end;
    }
}

void close_interval(OpenInterval& open, Instant end, std::vector<JobInterval>& out) {
    open.interval.segments.back().end = end;
    normalize_segments(open.interval);
    if (!open.interval.segments.empty()) {
        out.push_back(std::move(open.interval));
    }
}

} // namespace

std::vector<JobInterval> reconstruct_intervals(std::span<const SlotObservation> observations,
                                               const ReconstructionParams& params) {
    params.validate();
    const seconds cover{params.interval_s};
    const seconds gap_limit{params.gap_limit_s};

    for (std::size_t i = 1; i < observations.size(); ++i) {
        const auto& a = observations[i - 1];
        const auto& b = observations[i];
        if (a.machine != b.machine) {
            throw MixedMachines(fmt::format("observations for both {} and {}", a.machine, b.machine));
        }
        if (std::tie(b.timestamp, b.slot) < std::tie(a.timestamp, a.slot)) {
            throw UnsortedInput(fmt::format("observation at {} slot {} follows {} slot {}", format_instant(b.timestamp),
                                            b.slot, format_instant(a.timestamp), a.slot));
        }
    }

    std::vector<JobInterval> out;
    std::map<int, OpenInterval> open;
    for (const auto& obs : observations) {
        const auto phase = obs.phase();
        auto it = open.find(obs.slot);
        if (it != open.end()) {
            auto& cur = it->second;
            const auto gap = obs.timestamp - cur.last_tick;
            if (phase && *obs.job_id == cur.interval.job_id && gap <= gap_limit) {
                cur.interval.segments.back().end = obs.timestamp;
                if (*phase != cur.interval.segments.back().phase) {
                    cur.interval.segments.push_back({*phase, obs.timestamp, obs.timestamp});
                }
                cur.last_tick = obs.timestamp;
                continue;
            }
            close_interval(cur, std::min(cur.last_tick + cover, obs.timestamp), out);
            open.erase(it);
        }
        if (phase) {
            OpenInterval fresh;
            fresh.interval.machine = obs.machine;
            fresh.interval.slot = obs.slot;
            fresh.interval.job_id = *obs.job_id;
            fresh.interval.owner = *obs.owner;
            fresh.interval.start = obs.timestamp;
            fresh.interval.segments.push_back({*phase, obs.timestamp, obs.timestamp});
            fresh.last_tick = obs.timestamp;
            open.emplace(obs.slot, std::move(fresh));
        }
    }
    for (auto& [slot, cur] : open) {
        close_interval(cur, cur.last_tick + cover, out);
    }
    std::sort(out.begin(), out.end(), [](const JobInterval& a, const JobInterval& b) {
        return std::tie(a.slot, a.start) < std::tie(b.slot, b.start);
    });
    return out;
}

std::vector<JobInterval> clip_to_day(std::span<const JobInterval> intervals, Date date) {
    const Instant lo = start_of(date);
    const Instant hi = start_of(date + days{1});
    std::vector<JobInterval> out;
    for (const auto& iv : intervals) {
        if (iv.end <= lo || iv.start >= hi) {
            continue;
        }
        JobInterval c = iv;
        c.segments.clear();
        for (const auto& s : iv.segments) {
            const auto a = std::max(s.start, lo);
            const auto b = std::min(s.end, hi);
            if (a < b) {
                c.segments.push_back({s.phase, a, b});
            }
        }
        c.start = c.segments.front().start;
        c.end = c.segments.back().end;
        out.push_back(std::move(c));
    }
    return out;
}

DailySummary day_summary(std::string_view machine, std::span<const JobInterval> clipped, int slot_count, Date date) {
    Seconds running = 0;
    Seconds suspended = 0;
    for (const auto& iv : clipped) {
        if (iv.slot > slot_count) {
            throw SlotCountMismatch(
                fmt::format("interval on slot {} of {} exceeds slot count {}", iv.slot, iv.machine, slot_count));
        }
        running += iv.phase_s(JobPhase::Running);
        suspended += iv.phase_s(JobPhase::Suspended);
    }
    return DailySummary::compute(std::string(machine), date, slot_count, running, suspended);
}

std::vector<ConcurrencyStep> concurrency_curve(std::span<const JobInterval> clipped, Date date) {
    struct Event {
        Instant t;
        int running;
        int suspended;
    };
    std::vector<Event> events;
    for (const auto& iv : clipped) {
        for (const auto& s : iv.segments) {
            const int r = s.phase == JobPhase::Running ? 1 : 0;
            events.push_back({s.start, r, 1 - r});
            events.push_back({s.end, -r, r - 1});
        }
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });

    std::vector<ConcurrencyStep> steps{{start_of(date), 0, 0}};
    const Instant day_end = start_of(date + days{1});
    int running = 0;
    int suspended = 0;
    for (std::size_t i = 0; i < events.size();) {
        const auto t = events[i].t;
        if (t >= day_end) {
            break;
        }
        for (; i < events.size() && events[i].t == t; ++i) {
            running += events[i].running;
            suspended += events[i].suspended;
        }
        if (running == steps.back().running && suspended == steps.back().suspended) {
            continue;
        }
        if (steps.back().t == t) {
            steps.back().running = running;
            steps.back().suspended = suspended;
        } else {
            steps.push_back({t, running, suspended});
        }
    }
    return steps;
}

Coverage observed_coverage(const DayRead& day, Date date, const ReconstructionParams& params) {
    std::vector<Instant> ticks;
    for (const auto& o : day.observations) {
        ticks.push_back(o.timestamp);
    }
    for (const auto& r : day.machine_records) {
        ticks.push_back(r.timestamp);
    }
    std::sort(ticks.begin(), ticks.end());
    ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());

    const Instant lo = start_of(date);
    const Instant hi = start_of(date + days{1});
    const seconds cover{params.interval_s};
    Coverage c;
    Instant cursor = lo; // end of the observed prefix so far
    for (const auto t : ticks) {
        const auto a = std::max(t, lo);
        const auto b = std::min(t + cover, hi);
        if (!(a < b)) {
            continue;
        }
        if (a > cursor) {
            c.gaps.push_back({cursor, a});
        }
        if (b > cursor) {
            c.observed_s += (b - std::max(a, cursor)).count();
            cursor = b;
        }
    }
    if (cursor < hi) {
        c.gaps.push_back({cursor, hi});
    }
    c.observed_pct = 100.0 * static_cast<double>(c.observed_s) / static_cast<double>(kSecondsPerDay);
    return c;
}

namespace {

std::vector<SlotObservation> concatenate(std::vector<DayData>& range) {
    std::vector<SlotObservation> all;
    for (auto& d : range) {
        std::move(d.read.observations.begin(), d.read.observations.end(), std::back_inserter(all));
        d.read.observations.clear();
    }
    return all;
}

} // namespace

MachineDay analyze_day(const DataRoot& root, std::string_view machine, int slot_count, Date date,
                       const ReconstructionParams& params, ReadMode mode) {
    auto range = read_range(root, machine, date - days{1}, 3, mode);
    MachineDay out;
    out.coverage = observed_coverage(range[1].read, date, params);
    for (const auto& d : range) {
        out.skipped_records += d.read.skipped;
    }
    const auto all = concatenate(range);
    const auto intervals = reconstruct_intervals(all, params);
    const auto clipped = clip_to_day(intervals, date);
    out.summary = day_summary(machine, clipped, slot_count, date);
    out.curve = concurrency_curve(clipped, date);
    const Instant lo = start_of(date);
    const Instant hi = start_of(date + days{1});
    for (const auto& iv : intervals) {
        if (iv.end > lo && iv.start < hi) {
            out.intervals.push_back(iv);
        }
    }
    return out;
}

PeriodSummary period_summary_days(const DataRoot& root, std::string_view machine, int slot_count, Date start,
                                  int span_days, const ReconstructionParams& params, ReadMode mode) {
    if (span_days < 1 || span_days > 366) {
        throw InvalidValue(fmt::format("span of {} days outside 1..366", span_days));
    }
    auto range = read_range(root, machine, start - days{1}, span_days + 2, mode);
    const auto intervals = reconstruct_intervals(concatenate(range), params);
    std::vector<DailySummary> per_day;
    per_day.reserve(static_cast<std::size_t>(span_days));
    for (int i = 0; i < span_days; ++i) {
        const Date d = start + days{i};
        per_day.push_back(day_summary(machine, clip_to_day(intervals, d), slot_count, d));
    }
    return PeriodSummary::compute(std::string(machine), start, slot_count, std::move(per_day));
}

PeriodSummary period_summary(const DataRoot& root, std::string_view machine, int slot_count, Date start,
                             PeriodSpan span, const ReconstructionParams& params, ReadMode mode) {
    return period_summary_days(root, machine, slot_count, start, span_days(span, start), params, mode);
}

} // namespace poolgaze
