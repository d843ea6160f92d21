#pragma once

// Deterministic synthetic pool. Slots alternate between idle, owner use and
// jobs; owner sessions may suspend every job on the machine until the owner
// leaves. The generated ground truth doubles as the oracle for the
// collector and the aggregator.
//
// Randomness comes from std::mt19937_64, whose output sequence is fixed by
// the C++ standard. Per-machine engines are seeded with SplitMix64 of
// (seed, machine index); uniform and exponential variates are derived here
// rather than through <random> distributions, which are not portable.

#include "poolgaze/aggregator.hpp"
#include "poolgaze/model.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace poolgaze {

struct Scenario {
    std::uint64_t seed = 1;
    int machines = 4;
    std::vector<int> slots_per_machine{4}; // one entry for all, or one per machine
    Seconds duration_s = 7 * kSecondsPerDay;
    Date start = Date{std::chrono::year{2014} / std::chrono::June / 2};
    double job_rate_per_slot_hour = 0.5;
    Seconds mean_job_length_s = 7200;
    double owner_rate_per_hour = 0.1;
    Seconds mean_owner_length_s = 1800;
    double suspend_probability = 0.8;
    double restricted_fraction = 0.0;
    ScheduleWindows restriction; // nights and weekends unless overridden
    std::vector<std::string> users{"alice", "bob", "carol"};
    std::string machine_prefix = "node";
    Seconds interval_s = 300;
    int backlog_per_user = 5;

    Scenario();
    int slots_of(int machine_index) const;
    std::string machine_name(int machine_index) const;
    /// Throws InvalidScenario.
    void validate() const;
};

/// Flat key=value text; '#' starts a comment. Unknown keys are rejected.
Scenario parse_scenario(std::string_view text);
std::string render_scenario(const Scenario& scenario);

enum class SpanKind { Idle, Owner, Job };

struct SlotSpan {
    Instant start;
    Instant end;
    SpanKind kind = SpanKind::Idle;
    int job = -1; // index into GroundTruth::jobs when kind == Job

    friend bool operator==(const SlotSpan&, const SlotSpan&) = default;
};

struct SimMachine {
    MachineInfo info; // static attributes; loads are filled in per instant
    std::vector<TimeSpan> owner_sessions;
    std::vector<std::vector<SlotSpan>> slots; // tiles [start, end) per slot

    friend bool operator==(const SimMachine&, const SimMachine&) = default;
};

struct GroundTruth {
    Scenario scenario;
    Instant start;
    Instant end;
    std::vector<SimMachine> machines;
    std::vector<JobInterval> jobs; // ids assigned in (start, machine, slot) order

    MachineRegistry registry() const;

    friend bool operator==(const GroundTruth& a, const GroundTruth& b) {
        return a.start == b.start && a.end == b.end && a.machines == b.machines && a.jobs == b.jobs;
    }
};

GroundTruth simulate(const Scenario& scenario);

struct SimStatus {
    std::string status_text;
    std::string queue_text;
};

/// Wire text a real source would emit at `t` (clamped to the simulated run).
SimStatus status_at(const GroundTruth& truth, Instant t);

/// JSON sidecar with machines and ground-truth job intervals.
std::string render_ground_truth_json(const GroundTruth& truth);

} // namespace poolgaze
