#pragma once

// Filtering, sorting and charting of a live pool snapshot for the panoramic
// view.
//
// Machine-level filters (reachability, OS, numeric ranges over machine
// attributes) must all hold. Slot-level filters (state set, owner, time in
// state) are evaluated per slot: when any is given, a machine is shown only
// if at least one slot satisfies all of them, and only those slots are
// returned. Ranges are inclusive and either end may be open. A range over an
// attribute that a down machine does not report excludes that machine.

#include "poolgaze/model.hpp"

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace poolgaze {

using QueryParams = std::vector<std::pair<std::string, std::string>>;

enum class MachineField {
    SlotCount,
    DiskTotal,
    DiskPerSlot,
    MemoryTotal,
    MemoryPerSlot,
    Os,
    LoadTotal,
    LoadCondor,
    Restriction,
    LastJobTime,
};

enum class SortKey { Name, Load, FreeDisk, Memory, SlotCount, LastJobTime };
enum class Reachability { Up, Down, Any };

struct Range {
    std::optional<double> min;
    std::optional<double> max;

    bool contains(double v) const { return (!min || v >= *min) && (!max || v <= *max); }
    /// "min:max", "min:" or ":max".
    static Range parse(std::string_view text);

    friend bool operator==(const Range&, const Range&) = default;
};

struct PanoramicQuery {
    bool show_machines = true;
    bool show_queue = true;
    bool show_charts = true;
    std::set<MachineField> fields;
    SortKey sort = SortKey::Name;
    bool descending = false;

    Reachability reachable = Reachability::Any;
    std::optional<std::string> os_name;
    std::optional<std::string> os_version_prefix;
    std::optional<std::set<SlotState>> slot_states;
    std::optional<std::string> owner;
    std::optional<Range> memory_mb;
    std::optional<Range> disk_mb_free;
    std::optional<Range> load_avg_total;
    std::optional<Range> load_avg_condor;
    std::optional<Range> slot_count;
    std::optional<Range> time_in_state_s;

    std::optional<std::int64_t> disk_alert_mb;
    std::vector<std::string> charts;
    int refresh_s = 30;

    PanoramicQuery();
    bool has_slot_filters() const { return slot_states || owner || time_in_state_s; }

    /// Throws InvalidValue for unknown parameters or bad values.
    static PanoramicQuery parse(const QueryParams& params);
    /// Parameter names accepted by `parse`.
    static const std::vector<std::string>& parameter_names();
};

std::string_view to_string(MachineField f);
std::string_view to_string(SortKey k);

struct PanoramicMachine {
    const MachineStatus* status = nullptr;
    std::vector<std::size_t> slots; // indices into status->slots
    bool disk_alert = false;
};

struct PanoramicResult {
    std::vector<PanoramicMachine> machines;
    std::size_t machines_total = 0;
    std::size_t slots_total = 0;
    std::size_t slots_shown = 0;
};

/// The returned entries point into `snapshot`, which must outlive them.
PanoramicResult apply_query(const PoolSnapshot& snapshot, const PanoramicQuery& query);

struct ChartPoint {
    std::string label;
    double value = 0.0;
};

struct ChartSpec {
    std::string_view id;
    std::string_view title;
    std::string_view kind; // "pie", "bar" or "histogram"
};

struct ChartData {
    ChartSpec spec;
    std::vector<ChartPoint> points;
};

inline constexpr std::size_t kChartCount = 15;
const std::array<ChartSpec, kChartCount>& chart_catalog();
bool is_chart_id(std::string_view id);

/// Chart series over the machines and slots the query selected.
ChartData compute_chart(std::string_view id, const PoolSnapshot& snapshot, const PanoramicResult& selection);

} // namespace poolgaze
