#include "poolgaze/panoramic.hpp"

#include "poolgaze/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

namespace poolgaze {

namespace {

constexpr std::pair<MachineField, std::string_view> kFieldNames[] = {
    {MachineField::SlotCount, "slots"},
    {MachineField::DiskTotal, "disk"},
    {MachineField::DiskPerSlot, "disk_per_slot"},
    {MachineField::MemoryTotal, "memory"},
    {MachineField::MemoryPerSlot, "memory_per_slot"},
    {MachineField::Os, "os"},
    {MachineField::LoadTotal, "load"},
    {MachineField::LoadCondor, "load_condor"},
    {MachineField::Restriction, "restriction"},
    {MachineField::LastJobTime, "last_job_time"},
};

constexpr std::pair<SortKey, std::string_view> kSortNames[] = {
    {SortKey::Name, "name"},         {SortKey::Load, "load"},
    {SortKey::FreeDisk, "free-disk"}, {SortKey::Memory, "memory"},
    {SortKey::SlotCount, "slot-count"}, {SortKey::LastJobTime, "last-job-time"},
};

constexpr std::array<ChartSpec, kChartCount> kCatalog{{
    {"slots-by-state", "Slots by state", "pie"},
    {"machines-up-down", "Machines up and down", "pie"},
    {"jobs-by-owner", "Jobs by owner", "bar"},
    {"running-vs-suspended", "Running and suspended jobs", "pie"},
    {"free-disk-histogram", "Free disk (MB)", "histogram"},
    {"memory-histogram", "Memory (MB)", "histogram"},
    {"load-histogram", "Total load average", "histogram"},
    {"condor-load-histogram", "Condor load average", "histogram"},
    {"slots-per-machine", "Slots per machine", "bar"},
    {"os-distribution", "Operating systems", "pie"},
    {"activity-distribution", "Slot activity", "pie"},
    {"time-in-state-histogram", "Time in current state", "histogram"},
    {"suspended-job-owners", "Owners of suspended jobs", "bar"},
    {"restricted-vs-unrestricted", "Schedule restrictions", "pie"},
    {"last-execution-age-histogram", "Time since last job", "histogram"},
}};

std::vector<std::string_view> split_csv(std::string_view s) {
    std::vector<std::string_view> out;
    if (s.empty()) {
        return out;
    }
    std::size_t start = 0;
    while (true) {
        const auto p = s.find(',', start);
        out.push_back(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
        if (p == std::string_view::npos) {
            break;
        }
        start = p + 1;
    }
    return out;
}

std::optional<double> parse_double(std::string_view s) {
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

std::int64_t parse_int(std::string_view key, std::string_view s, std::int64_t lo, std::int64_t hi) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || v < lo || v > hi) {
        throw InvalidValue(fmt::format("{} must be an integer in [{}, {}], got '{}'", key, lo, hi, s));
    }
    return v;
}

double machine_load(const MachineStatus& m) { return m.info.load_avg_total.value(); }

bool machine_matches(const MachineStatus& m, const PanoramicQuery& q) {
    const auto& i = m.info;
    if (q.reachable == Reachability::Up && !i.reachable) {
        return false;
    }
    if (q.reachable == Reachability::Down && i.reachable) {
        return false;
    }
    if (q.os_name && (!i.reachable || i.os_name != *q.os_name)) {
        return false;
    }
    if (q.os_version_prefix && (!i.reachable || i.os_version.rfind(*q.os_version_prefix, 0) != 0)) {
        return false;
    }
    const auto in = [&](const std::optional<Range>& r, double v) { return !r || (i.reachable && r->contains(v)); };
    if (!in(q.memory_mb, static_cast<double>(i.memory_mb_total)) ||
        !in(q.disk_mb_free, static_cast<double>(i.disk_mb_free_total)) ||
        !in(q.load_avg_total, i.load_avg_total.value()) || !in(q.load_avg_condor, i.load_avg_condor.value())) {
        return false;
    }
    if (q.slot_count && !q.slot_count->contains(i.slot_count)) {
        return false;
    }
    return true;
}

bool slot_matches(const MachineStatus& m, std::size_t k, const PanoramicQuery& q) {
    const auto& s = m.slots[k];
    if (q.slot_states && q.slot_states->count(s.state) == 0) {
        return false;
    }
    if (q.owner && s.owner != q.owner) {
        return false;
    }
    if (q.time_in_state_s && !q.time_in_state_s->contains(static_cast<double>(m.time_in_state_s[k]))) {
        return false;
    }
    return true;
}

// Sort value for machines that report the key; nullopt sorts last.
std::optional<double> sort_value(const MachineStatus& m, SortKey key) {
    const auto& i = m.info;
    switch (key) {
    case SortKey::Name: return 0.0;
    case SortKey::SlotCount: return i.slot_count;
    case SortKey::LastJobTime:
        if (!i.last_job_time) {
            return std::nullopt;
        }
        return static_cast<double>(to_seconds(*i.last_job_time));
    default: break;
    }
    if (!i.reachable) {
        return std::nullopt;
    }
    switch (key) {
    case SortKey::Load: return machine_load(m);
    case SortKey::FreeDisk: return static_cast<double>(i.disk_mb_free_total);
    case SortKey::Memory: return static_cast<double>(i.memory_mb_total);
    default: return std::nullopt;
    }
}

void add_count(std::vector<ChartPoint>& points, std::string_view label, double by = 1.0) {
    for (auto& p : points) {
        if (p.label == label) {
            p.value += by;
            return;
        }
    }
    points.push_back({std::string(label), by});
}

struct Bin {
    std::string_view label;
    double upper; // exclusive
};

std::vector<ChartPoint> histogram(const std::vector<Bin>& bins, const std::vector<double>& values) {
    std::vector<ChartPoint> points;
    for (const auto& b : bins) {
        points.push_back({std::string(b.label), 0.0});
    }
    for (const double v : values) {
        for (std::size_t i = 0; i < bins.size(); ++i) {
            if (v < bins[i].upper || i + 1 == bins.size()) {
                points[i].value += 1.0;
                break;
            }
        }
    }
    return points;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace

Range Range::parse(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos || text.find(':', colon + 1) != std::string_view::npos) {
        throw InvalidValue(fmt::format("range must be min:max with either end optional, got '{}'", text));
    }
    Range r;
    const auto lo = text.substr(0, colon);
    const auto hi = text.substr(colon + 1);
    if (!lo.empty()) {
        r.min = parse_double(lo);
        if (!r.min) {
            throw InvalidValue(fmt::format("bad range minimum '{}'", lo));
        }
    }
    if (!hi.empty()) {
        r.max = parse_double(hi);
        if (!r.max) {
            throw InvalidValue(fmt::format("bad range maximum '{}'", hi));
        }
    }
    if (r.min && r.max && *r.min > *r.max) {
        throw InvalidValue(fmt::format("range minimum exceeds maximum in '{}'", text));
    }
    return r;
}

std::string_view to_string(MachineField f) {
    for (const auto& [k, name] : kFieldNames) {
        if (k == f) {
            return name;
        }
    }
    return "?";
}

std::string_view to_string(SortKey key) {
    for (const auto& [k, name] : kSortNames) {
        if (k == key) {
            return name;
        }
    }
    return "?";
}

PanoramicQuery::PanoramicQuery() {
    for (const auto& [f, name] : kFieldNames) {
        fields.insert(f);
    }
    for (const auto& c : kCatalog) {
        charts.emplace_back(c.id);
    }
}

const std::vector<std::string>& PanoramicQuery::parameter_names() {
    static const std::vector<std::string> names{
        "show",      "fields",      "sort",           "order",           "reachable",  "os",
        "os_version", "state",      "owner",          "memory_mb",       "disk_mb_free", "load_avg_total",
        "load_avg_condor", "slot_count", "time_in_state_s", "disk_alert_mb", "charts",   "refresh_s",
    };
    return names;
}

PanoramicQuery PanoramicQuery::parse(const QueryParams& params) {
    PanoramicQuery q;
    std::set<std::string> seen;
    for (const auto& [key, value] : params) {
        if (!seen.insert(key).second) {
            throw InvalidValue(fmt::format("parameter '{}' given more than once", key));
        }
        if (key == "show") {
            q.show_machines = q.show_queue = q.show_charts = false;
            for (const auto item : split_csv(value)) {
                if (item == "machines") {
                    q.show_machines = true;
                } else if (item == "queue") {
                    q.show_queue = true;
                } else if (item == "charts") {
                    q.show_charts = true;
                } else {
                    throw InvalidValue(fmt::format("unknown display group '{}'", item));
                }
            }
        } else if (key == "fields") {
            q.fields.clear();
            for (const auto item : split_csv(value)) {
                const auto it = std::find_if(std::begin(kFieldNames), std::end(kFieldNames),
                                             [&](const auto& p) { return p.second == item; });
                if (it == std::end(kFieldNames)) {
                    throw InvalidValue(fmt::format("unknown machine field '{}'", item));
                }
                q.fields.insert(it->first);
            }
        } else if (key == "sort") {
            const auto it = std::find_if(std::begin(kSortNames), std::end(kSortNames),
                                         [&](const auto& p) { return p.second == value; });
            if (it == std::end(kSortNames)) {
                throw InvalidValue(fmt::format("unknown sort key '{}'", value));
            }
            q.sort = it->first;
        } else if (key == "order") {
            if (value != "asc" && value != "desc") {
                throw InvalidValue("order must be asc or desc");
            }
            q.descending = value == "desc";
        } else if (key == "reachable") {
            if (value == "up") {
                q.reachable = Reachability::Up;
            } else if (value == "down") {
                q.reachable = Reachability::Down;
            } else if (value == "any") {
                q.reachable = Reachability::Any;
            } else {
                throw InvalidValue("reachable must be up, down or any");
            }
        } else if (key == "os") {
            q.os_name = value;
        } else if (key == "os_version") {
            q.os_version_prefix = value;
        } else if (key == "state") {
            std::set<SlotState> states;
            for (const auto item : split_csv(value)) {
                const auto s = parse_slot_state(item);
                if (!s) {
                    throw InvalidValue(fmt::format("unknown slot state '{}'", item));
                }
                states.insert(*s);
            }
            q.slot_states = std::move(states);
        } else if (key == "owner") {
            q.owner = value;
        } else if (key == "memory_mb") {
            q.memory_mb = Range::parse(value);
        } else if (key == "disk_mb_free") {
            q.disk_mb_free = Range::parse(value);
        } else if (key == "load_avg_total") {
            q.load_avg_total = Range::parse(value);
        } else if (key == "load_avg_condor") {
            q.load_avg_condor = Range::parse(value);
        } else if (key == "slot_count") {
            q.slot_count = Range::parse(value);
        } else if (key == "time_in_state_s") {
            q.time_in_state_s = Range::parse(value);
        } else if (key == "disk_alert_mb") {
            q.disk_alert_mb = parse_int(key, value, 0, std::numeric_limits<std::int64_t>::max());
        } else if (key == "charts") {
            q.charts.clear();
            for (const auto item : split_csv(value)) {
                if (!is_chart_id(item)) {
                    throw InvalidValue(fmt::format("unknown chart '{}'", item));
                }
                q.charts.emplace_back(item);
            }
        } else if (key == "refresh_s") {
            q.refresh_s = static_cast<int>(parse_int(key, value, 1, 86400));
        } else {
            throw InvalidValue(fmt::format("unknown filter '{}'", key));
        }
    }
    return q;
}

PanoramicResult apply_query(const PoolSnapshot& snapshot, const PanoramicQuery& query) {
    PanoramicResult out;
    out.machines_total = snapshot.machines.size();
    for (const auto& m : snapshot.machines) {
        out.slots_total += m.slots.size();
        if (!machine_matches(m, query)) {
            continue;
        }
        PanoramicMachine pm;
        pm.status = &m;
        for (std::size_t k = 0; k < m.slots.size(); ++k) {
            if (slot_matches(m, k, query)) {
                pm.slots.push_back(k);
            }
        }
        if (query.has_slot_filters() && pm.slots.empty()) {
            continue;
        }
        pm.disk_alert = query.disk_alert_mb && m.info.reachable && m.info.disk_mb_free_total < *query.disk_alert_mb;
        out.slots_shown += pm.slots.size();
        out.machines.push_back(std::move(pm));
    }

    const auto key = query.sort;
    const bool desc = query.descending;
    std::stable_sort(out.machines.begin(), out.machines.end(), [&](const PanoramicMachine& a, const PanoramicMachine& b) {
        const auto& na = a.status->info.machine;
        const auto& nb = b.status->info.machine;
        if (key == SortKey::Name) {
            return desc ? nb < na : na < nb;
        }
        const auto va = sort_value(*a.status, key);
        const auto vb = sort_value(*b.status, key);
        if (va.has_value() != vb.has_value()) {
            return va.has_value();
        }
        if (va && *va != *vb) {
            return desc ? *va > *vb : *va < *vb;
        }
        return na < nb;
    });
    return out;
}

const std::array<ChartSpec, kChartCount>& chart_catalog() { return kCatalog; }

bool is_chart_id(std::string_view id) {
    return std::any_of(kCatalog.begin(), kCatalog.end(), [&](const ChartSpec& c) { return c.id == id; });
}

ChartData compute_chart(std::string_view id, const PoolSnapshot& snapshot, const PanoramicResult& selection) {
    const auto spec = std::find_if(kCatalog.begin(), kCatalog.end(), [&](const ChartSpec& c) { return c.id == id; });
    if (spec == kCatalog.end()) {
        throw InvalidValue(fmt::format("unknown chart '{}'", id));
    }
    ChartData chart{*spec, {}};
    auto& pts = chart.points;

    const auto for_slots = [&](auto&& fn) {
        for (const auto& pm : selection.machines) {
            for (const auto k : pm.slots) {
                fn(*pm.status, k);
            }
        }
    };
    std::vector<double> values;
    const auto reachable_values = [&](auto&& get) {
        for (const auto& pm : selection.machines) {
            if (pm.status->info.reachable) {
                values.push_back(get(pm.status->info));
            }
        }
    };

    if (id == "slots-by-state") {
        for (const auto s : kAllSlotStates) {
            pts.push_back({std::string(to_string(s)), 0.0});
        }
        for_slots([&](const MachineStatus& m, std::size_t k) { add_count(pts, to_string(m.slots[k].state)); });
    } else if (id == "machines-up-down") {
        pts = {{"up", 0.0}, {"down", 0.0}};
        for (const auto& pm : selection.machines) {
            pts[pm.status->info.reachable ? 0 : 1].value += 1.0;
        }
    } else if (id == "jobs-by-owner") {
        for_slots([&](const MachineStatus& m, std::size_t k) {
            if (m.slots[k].owner) {
                add_count(pts, *m.slots[k].owner);
            }
        });
        std::sort(pts.begin(), pts.end(), [](const ChartPoint& a, const ChartPoint& b) { return a.label < b.label; });
    } else if (id == "running-vs-suspended") {
        pts = {{"running", 0.0}, {"suspended", 0.0}};
        for_slots([&](const MachineStatus& m, std::size_t k) {
            if (const auto p = m.slots[k].phase()) {
                pts[*p == JobPhase::Running ? 0 : 1].value += 1.0;
            }
        });
    } else if (id == "free-disk-histogram") {
        reachable_values([](const MachineInfo& i) { return static_cast<double>(i.disk_mb_free_total); });
        pts = histogram({{"<1000", 1000},
                         {"1000-5000", 5000},
                         {"5000-20000", 20000},
                         {"20000-50000", 50000},
                         {"50000-100000", 100000},
                         {">=100000", kInf}},
                        values);
    } else if (id == "memory-histogram") {
        reachable_values([](const MachineInfo& i) { return static_cast<double>(i.memory_mb_total); });
        pts = histogram({{"<2048", 2048},
                         {"2048-4096", 4096},
                         {"4096-8192", 8192},
                         {"8192-16384", 16384},
                         {"16384-32768", 32768},
                         {">=32768", kInf}},
                        values);
    } else if (id == "load-histogram" || id == "condor-load-histogram") {
        const bool condor = id == "condor-load-histogram";
        reachable_values(
            [&](const MachineInfo& i) { return condor ? i.load_avg_condor.value() : i.load_avg_total.value(); });
        pts = histogram({{"<0.5", 0.5}, {"0.5-1", 1}, {"1-2", 2}, {"2-4", 4}, {"4-8", 8}, {">=8", kInf}}, values);
    } else if (id == "slots-per-machine") {
        for (const auto& pm : selection.machines) {
            add_count(pts, std::to_string(pm.status->info.slot_count));
        }
        std::sort(pts.begin(), pts.end(),
                  [](const ChartPoint& a, const ChartPoint& b) { return std::stoi(a.label) < std::stoi(b.label); });
    } else if (id == "os-distribution") {
        for (const auto& pm : selection.machines) {
            const auto& i = pm.status->info;
            add_count(pts, i.reachable ? fmt::format("{} {}", i.os_name, i.os_version) : "unknown");
        }
        std::sort(pts.begin(), pts.end(), [](const ChartPoint& a, const ChartPoint& b) { return a.label < b.label; });
    } else if (id == "activity-distribution") {
        for (const auto a : kAllSlotActivities) {
            pts.push_back({std::string(to_string(a)), 0.0});
        }
        for_slots([&](const MachineStatus& m, std::size_t k) { add_count(pts, to_string(m.slots[k].activity)); });
    } else if (id == "time-in-state-histogram") {
        for_slots([&](const MachineStatus& m, std::size_t k) {
            values.push_back(static_cast<double>(m.time_in_state_s[k]));
        });
        pts = histogram({{"<5m", 300}, {"5m-1h", 3600}, {"1h-6h", 21600}, {"6h-1d", 86400}, {">=1d", kInf}}, values);
    } else if (id == "suspended-job-owners") {
        for_slots([&](const MachineStatus& m, std::size_t k) {
            if (m.slots[k].phase() == JobPhase::Suspended) {
                add_count(pts, *m.slots[k].owner);
            }
        });
        std::sort(pts.begin(), pts.end(), [](const ChartPoint& a, const ChartPoint& b) { return a.label < b.label; });
    } else if (id == "restricted-vs-unrestricted") {
        pts = {{"restricted", 0.0}, {"unrestricted", 0.0}};
        for (const auto& pm : selection.machines) {
            pts[pm.status->info.restriction ? 0 : 1].value += 1.0;
        }
    } else if (id == "last-execution-age-histogram") {
        pts = {{"never", 0.0}, {"<1h", 0.0}, {"1h-1d", 0.0}, {"1d-7d", 0.0}, {">=7d", 0.0}};
        for (const auto& pm : selection.machines) {
            const auto& last = pm.status->info.last_job_time;
            if (!last) {
                pts[0].value += 1.0;
                continue;
            }
            const auto age = (snapshot.taken_at - *last).count();
            pts[age < 3600 ? 1 : age < 86400 ? 2 : age < 7 * 86400 ? 3 : 4].value += 1.0;
        }
    }
    return chart;
}

} // namespace poolgaze
