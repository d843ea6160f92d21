#pragma once

// Domain values shared by every part of the pool monitor: slot states,
// sampled observations, machine attributes, schedule restrictions,
// reconstructed job intervals and the accounting summaries.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace poolgaze {

using Instant = std::chrono::sys_seconds;
using Date = std::chrono::sys_days;
using Seconds = std::int64_t;

inline constexpr Seconds kSecondsPerDay = 86400;

// ---------------------------------------------------------------------------
// Time helpers. All accounting is UTC.

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_instant(Instant t);
std::optional<Instant> parse_instant(std::string_view text);

/// "YYYY-MM-DD"
std::string format_date(Date d);
std::optional<Date> parse_date(std::string_view text);

inline Date day_of(Instant t) { return std::chrono::floor<std::chrono::days>(t); }
inline Instant start_of(Date d) { return Instant{d}; }
int days_in_month(Date d);

inline Instant instant_from_seconds(Seconds s) { return Instant{std::chrono::seconds{s}}; }
inline Seconds to_seconds(Instant t) { return t.time_since_epoch().count(); }

// ---------------------------------------------------------------------------
// Slot state and activity as reported by the scheduler.

enum class SlotState { Owner, Claimed, Unclaimed, Matched, Preempting, Drained };
enum class SlotActivity { Busy, Suspended, Idle, Benchmarking, Retiring, Vacating };
enum class JobPhase { Running, Suspended };
enum class DisplayClass { OwnerBlue, RunningRed, IdleGreen, SuspendedAmber, OtherGray };

inline constexpr SlotState kAllSlotStates[] = {SlotState::Owner,     SlotState::Claimed,
                                               SlotState::Unclaimed, SlotState::Matched,
                                               SlotState::Preempting, SlotState::Drained};
inline constexpr SlotActivity kAllSlotActivities[] = {
    SlotActivity::Busy,         SlotActivity::Suspended, SlotActivity::Idle,
    SlotActivity::Benchmarking, SlotActivity::Retiring,  SlotActivity::Vacating};

std::string_view to_string(SlotState s);
std::string_view to_string(SlotActivity a);
std::string_view to_string(JobPhase p);
std::string_view to_string(DisplayClass c);
std::optional<SlotState> parse_slot_state(std::string_view token);
std::optional<SlotActivity> parse_slot_activity(std::string_view token);

DisplayClass slot_display_class(SlotState state, SlotActivity activity);
std::optional<JobPhase> job_phase(SlotState state, SlotActivity activity);

// ---------------------------------------------------------------------------
// Name rules. Names end up as record fields and, for machines, file names.
/// No separators or control characters.

bool is_valid_field_text(std::string_view s);
bool is_valid_machine_name(std::string_view s);
bool is_valid_user_name(std::string_view s);
/// "cluster.proc", both parts decimal digits.
bool is_valid_job_id(std::string_view s);

/// Non-negative decimal with two fractional digits, stored exactly.
class Load {
public:
    constexpr Load() = default;
    static constexpr Load from_hundredths(std::int64_t h) { return Load{h}; }
    static Load from_double(double v);

    constexpr std::int64_t hundredths() const { return hundredths_; }
    double value() const { return static_cast<double>(hundredths_) / 100.0; }
    std::string to_string() const;

    friend constexpr auto operator<=>(Load, Load) = default;

private:
    constexpr explicit Load(std::int64_t h) : hundredths_(h) {}
    std::int64_t hundredths_ = 0;
};

// ---------------------------------------------------------------------------

struct SlotObservation {
    Instant timestamp;
    std::string machine;
    int slot = 1;
    SlotState state = SlotState::Unclaimed;
    SlotActivity activity = SlotActivity::Idle;
    Load load;
    std::optional<std::string> job_id;
    std::optional<std::string> owner;

    /// Throws InvalidValue when a field breaks the observation invariants.
    void validate() const;
    std::optional<JobPhase> phase() const { return job_phase(state, activity); }

    friend bool operator==(const SlotObservation&, const SlotObservation&) = default;
};

/// One weekly window. Days count from 0 = Monday; minutes are minutes of
/// the day. A window whose end precedes its start crosses midnight. The end
/// minute is part of the window, so 00:00-23:59 covers a whole day.
struct ScheduleWindow {
    int day = 0;
    int start_minute = 0;
    int end_minute = 0;

    friend bool operator==(const ScheduleWindow&, const ScheduleWindow&) = default;
};

struct ScheduleWindows {
    std::vector<ScheduleWindow> windows;

    void validate() const;
    /// ';'-joined "d:HH:MM-HH:MM".
    std::string to_spec() const;
    static std::optional<ScheduleWindows> parse_spec(std::string_view spec);

    friend bool operator==(const ScheduleWindows&, const ScheduleWindows&) = default;
};

/// True iff `t`, shifted by the pool's UTC offset, falls inside a window.
bool schedule_allows(const ScheduleWindows& schedule, Instant t,
                     std::chrono::minutes pool_utc_offset = std::chrono::minutes{0});

/// "HH:MM" <-> minute of day.
std::optional<int> parse_hhmm(std::string_view text);
std::string format_hhmm(int minute_of_day);

struct MachineInfo {
    std::string machine;
    int slot_count = 1;
    std::string os_name;
    std::string os_version;
    std::int64_t memory_mb_total = 0;
    std::vector<std::int64_t> memory_mb_per_slot;
    std::int64_t disk_mb_free_total = 0;
    std::vector<std::int64_t> disk_mb_free_per_slot;
    Load load_avg_total;
    Load load_avg_condor;
    std::optional<ScheduleWindows> restriction;
    std::optional<Instant> last_job_time;
    bool reachable = true;

    void validate() const;

    friend bool operator==(const MachineInfo&, const MachineInfo&) = default;
};

/// A machine-info record as sampled at one instant.
struct MachineRecord {
    Instant timestamp;
    MachineInfo info;

    friend bool operator==(const MachineRecord&, const MachineRecord&) = default;
};

struct JobSegment {
    JobPhase phase = JobPhase::Running;
    Instant start;
    Instant end;

    Seconds length_s() const { return (end - start).count(); }
    friend bool operator==(const JobSegment&, const JobSegment&) = default;
};

struct JobInterval {
    std::string machine;
    int slot = 1;
    std::string job_id;
    std::string owner;
    Instant start;
    Instant end;
    std::vector<JobSegment> segments;

    /// Segments must tile [start, end) with alternating phases.
    void validate() const;
    Seconds duration_s() const { return (end - start).count(); }
    Seconds phase_s(JobPhase p) const;

    friend bool operator==(const JobInterval&, const JobInterval&) = default;
};

struct FigureStats {
    Seconds total_s = 0;
    double avg_per_slot_s = 0.0;
    double pct_of_theoretical = 0.0;

    friend bool operator==(const FigureStats&, const FigureStats&) = default;
};

/// One machine-day of accounting. Only `compute` builds these, so the
/// residual and percentage invariants always hold.
struct DailySummary {
    std::string machine;
    Date date;
    int slot_count = 1;
    Seconds theoretical_s = 0;
    FigureStats owner_idle;
    FigureStats condor_total;
    FigureStats running;
    FigureStats suspended;

    static DailySummary compute(std::string machine, Date date, int slot_count,
                                Seconds running_s, Seconds suspended_s);

    friend bool operator==(const DailySummary&, const DailySummary&) = default;
};

template <typename T>
struct PeriodFigures {
    T theoretical{};
    T owner_idle{};
    T condor_total{};
    T running{};
    T suspended{};

    friend bool operator==(const PeriodFigures&, const PeriodFigures&) = default;
};

enum class PeriodSpan { Week, Month };

struct PeriodSummary {
    std::string machine;
    Date start_date;
    int span_days = 0;
    int slot_count = 1;
    std::vector<DailySummary> per_day;
    PeriodFigures<Seconds> totals;
    PeriodFigures<double> avg_per_day_s;
    PeriodFigures<double> avg_per_day_slot_s;

    static PeriodSummary compute(std::string machine, Date start_date, int slot_count,
                                 std::vector<DailySummary> per_day);

    friend bool operator==(const PeriodSummary&, const PeriodSummary&) = default;
};

int span_days(PeriodSpan span, Date start);

struct QueueRow {
    std::string user;
    std::int64_t running = 0;
    std::int64_t idle = 0;
    std::int64_t held = 0;

    friend bool operator==(const QueueRow&, const QueueRow&) = default;
};

struct QueueSummary {
    std::vector<QueueRow> rows;
    QueueRow totals{"total"};

    static QueueSummary from_rows(std::vector<QueueRow> rows);

    friend bool operator==(const QueueSummary&, const QueueSummary&) = default;
};

struct MachineStatus {
    MachineInfo info;
    std::vector<SlotObservation> slots;  // ordered by slot index
    std::vector<Seconds> time_in_state_s; // parallel to `slots`

    friend bool operator==(const MachineStatus&, const MachineStatus&) = default;
};

struct PoolSnapshot {
    Instant taken_at;
    std::vector<MachineStatus> machines; // ordered by name
    QueueSummary queue;

    const MachineStatus* find(std::string_view machine) const;

    friend bool operator==(const PoolSnapshot&, const PoolSnapshot&) = default;
};

struct RegistryEntry {
    std::string machine;
    int slot_count = 1;
    std::optional<ScheduleWindows> restriction;

    friend bool operator==(const RegistryEntry&, const RegistryEntry&) = default;
};

struct MachineRegistry {
    std::vector<RegistryEntry> entries; // ordered by name

    const RegistryEntry* find(std::string_view machine) const;
    /// Sorts by name and drops empty restrictions; throws InvalidValue on
    /// duplicates or bad entries.
    void normalize();

    friend bool operator==(const MachineRegistry&, const MachineRegistry&) = default;
};

} // namespace poolgaze
