#pragma once

// Job timelines and usage accounting from periodic slot samples.
//
// An observation at tick t showing job J in phase P covers [t, t + interval).
// Consecutive covers of the same job on the same slot merge into one
// interval. A gap between two covers of at most `gap_limit_s` is bridged by
// extending the earlier phase; a longer gap, or an observation of the slot
// in any other state, ends the interval at the last cover's end.

#include "poolgaze/model.hpp"
#include "poolgaze/storage.hpp"

#include <span>
#include <vector>

namespace poolgaze {

struct ReconstructionParams {
    Seconds interval_s = 300;
    Seconds gap_limit_s = 600;

    static ReconstructionParams for_interval(Seconds interval_s) { return {interval_s, 2 * interval_s}; }
    /// interval_s > 0 and interval_s <= gap_limit_s <= one day.
    void validate() const;
};

/// Intervals ordered by (slot, start). Input must be sorted by (timestamp,
/// slot) and belong to one machine.
std::vector<JobInterval> reconstruct_intervals(std::span<const SlotObservation> observations,
                                               const ReconstructionParams& params);

/// Restricts intervals to [date 00:00, next day 00:00), dropping those that
/// do not overlap it.
std::vector<JobInterval> clip_to_day(std::span<const JobInterval> intervals, Date date);

DailySummary day_summary(std::string_view machine, std::span<const JobInterval> clipped, int slot_count, Date date);

struct ConcurrencyStep {
    Instant t;
    int running = 0;
    int suspended = 0;

    friend bool operator==(const ConcurrencyStep&, const ConcurrencyStep&) = default;
};

/// Step function over the day: each step holds until the next one (the last
/// until midnight). The first step is always at 00:00.
std::vector<ConcurrencyStep> concurrency_curve(std::span<const JobInterval> clipped, Date date);

struct TimeSpan {
    Instant start;
    Instant end;

    friend bool operator==(const TimeSpan&, const TimeSpan&) = default;
};

/// How much of a day was actually sampled: the union of [t, t + interval)
/// over every stored tick, and the unobserved stretches in between.
struct Coverage {
    Seconds observed_s = 0;
    double observed_pct = 0.0;
    std::vector<TimeSpan> gaps;

    friend bool operator==(const Coverage&, const Coverage&) = default;
};

Coverage observed_coverage(const DayRead& day, Date date, const ReconstructionParams& params);

struct MachineDay {
    DailySummary summary;
    std::vector<JobInterval> intervals; // unclipped, overlapping the day
    std::vector<ConcurrencyStep> curve;
    Coverage coverage;
    std::size_t skipped_records = 0;
};

/// Full analysis of one machine-day, reading the neighbouring days so that
/// jobs crossing midnight are reconstructed identically whatever the query.
MachineDay analyze_day(const DataRoot& root, std::string_view machine, int slot_count, Date date,
                       const ReconstructionParams& params, ReadMode mode);

PeriodSummary period_summary(const DataRoot& root, std::string_view machine, int slot_count, Date start,
                             PeriodSpan span, const ReconstructionParams& params, ReadMode mode);

PeriodSummary period_summary_days(const DataRoot& root, std::string_view machine, int slot_count, Date start,
                                  int span_days, const ReconstructionParams& params, ReadMode mode);

} // namespace poolgaze
