#include "poolgaze/record_format.hpp"

#include "poolgaze/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <map>

namespace poolgaze {

namespace {

struct Field {
    std::string_view text;
    std::size_t offset;
};

std::vector<Field> split_fields(std::string_view line, char delim) {
    std::vector<Field> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == delim) {
            out.push_back({line.substr(start, i - start), start});
            start = i + 1;
        }
    }
    return out;
}

[[noreturn]] void fail(const std::string& reason, std::size_t offset) {
    throw MalformedRecord(reason, offset);
}

std::int64_t parse_count(const Field& f, std::string_view what, std::int64_t min = 0) {
    const auto s = f.text;
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        fail(fmt::format("{} must be a non-negative integer, got '{}'", what, s), f.offset);
    }
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        fail(fmt::format("{} out of range", what), f.offset);
    }
    if (v < min) {
        fail(fmt::format("{} must be >= {}", what, min), f.offset);
    }
    return v;
}

int parse_slot_count(const Field& f, std::string_view what) {
    const auto v = parse_count(f, what, 1);
    if (v > 100000) {
        fail(fmt::format("{} implausibly large", what), f.offset);
    }
    return static_cast<int>(v);
}

std::vector<std::int64_t> parse_count_list(const Field& f, std::string_view what) {
    std::vector<std::int64_t> out;
    for (const auto& item : split_fields(f.text, ',')) {
        out.push_back(parse_count({item.text, f.offset + item.offset}, what));
    }
    return out;
}

Instant parse_time_field(const Field& f) {
    const auto t = parse_instant(f.text);
    if (!t) {
        fail(fmt::format("bad timestamp '{}'", f.text), f.offset);
    }
    return *t;
}

Load parse_load_field(const Field& f, std::string_view what) {
    const auto l = parse_load(f.text);
    if (!l) {
        fail(fmt::format("{} must be a non-negative decimal with at most two fractional digits", what), f.offset);
    }
    return *l;
}

std::string join_counts(const std::vector<std::int64_t>& v) {
    return fmt::format("{}", fmt::join(v, ","));
}

SlotObservation parse_slot_line(const std::vector<Field>& f) {
    if (f.size() != 9) {
        fail(fmt::format("slot record needs 9 fields, got {}", f.size()), 0);
    }
    SlotObservation obs;
    obs.timestamp = parse_time_field(f[1]);
    obs.machine = std::string(f[2].text);
    if (!is_valid_machine_name(obs.machine)) {
        fail("invalid machine name", f[2].offset);
    }
    obs.slot = parse_slot_count(f[3], "slot index");
    const auto state = parse_slot_state(f[4].text);
    if (!state) {
        fail(fmt::format("unknown slot state '{}'", f[4].text), f[4].offset);
    }
    const auto activity = parse_slot_activity(f[5].text);
    if (!activity) {
        fail(fmt::format("unknown slot activity '{}'", f[5].text), f[5].offset);
    }
    obs.state = *state;
    obs.activity = *activity;
    obs.load = parse_load_field(f[6], "load");
    const bool claimed = obs.state == SlotState::Claimed;
    if (claimed) {
        if (!is_valid_job_id(f[7].text)) {
            fail(fmt::format("Claimed slot requires a cluster.proc job id, got '{}'", f[7].text), f[7].offset);
        }
        if (!is_valid_user_name(f[8].text)) {
            fail("Claimed slot requires an owner", f[8].offset);
        }
        obs.job_id = std::string(f[7].text);
        obs.owner = std::string(f[8].text);
    } else {
        if (!f[7].text.empty()) {
            fail("job id only allowed on Claimed slots", f[7].offset);
        }
        if (!f[8].text.empty()) {
            fail("owner only allowed on Claimed slots", f[8].offset);
        }
    }
    return obs;
}

MachineRecord parse_machine_line(const std::vector<Field>& f) {
    if (f.size() != 12) {
        fail(fmt::format("machine record needs 12 fields, got {}", f.size()), 0);
    }
    MachineRecord rec;
    rec.timestamp = parse_time_field(f[1]);
    auto& info = rec.info;
    info.machine = std::string(f[2].text);
    if (!is_valid_machine_name(info.machine)) {
        fail("invalid machine name", f[2].offset);
    }
    info.slot_count = parse_slot_count(f[3], "slot count");
    info.os_name = std::string(f[4].text);
    info.os_version = std::string(f[5].text);
    info.memory_mb_total = parse_count(f[6], "memory total");
    info.memory_mb_per_slot = parse_count_list(f[7], "memory per slot");
    if (info.memory_mb_per_slot.size() != static_cast<std::size_t>(info.slot_count)) {
        fail("memory per slot list length differs from slot count", f[7].offset);
    }
    info.disk_mb_free_total = parse_count(f[8], "free disk total");
    info.disk_mb_free_per_slot = parse_count_list(f[9], "free disk per slot");
    if (info.disk_mb_free_per_slot.size() != static_cast<std::size_t>(info.slot_count)) {
        fail("free disk per slot list length differs from slot count", f[9].offset);
    }
    info.load_avg_total = parse_load_field(f[10], "total load");
    info.load_avg_condor = parse_load_field(f[11], "condor load");
    if (info.load_avg_condor.hundredths() > info.load_avg_total.hundredths() + 1) {
        fail("condor load exceeds total load", f[11].offset);
    }
    return rec;
}

} // namespace

std::vector<TextLine> split_lines(std::string_view text) {
    std::vector<TextLine> out;
    std::size_t start = 0;
    std::size_t number = 1;
    while (start < text.size()) {
        const auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            out.push_back({text.substr(start), number, false});
            break;
        }
        out.push_back({text.substr(start, nl - start), number, true});
        start = nl + 1;
        ++number;
    }
    return out;
}

std::optional<Load> parse_load(std::string_view text) {
    const auto dot = text.find('.');
    const auto whole = text.substr(0, dot);
    const auto frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
    const auto digits = [](std::string_view s) {
        return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    if (whole.empty() || whole.size() > 12 || !digits(whole) || !digits(frac) || frac.size() > 2 ||
        (dot != std::string_view::npos && frac.empty())) {
        return std::nullopt;
    }
    std::int64_t w = 0;
    std::from_chars(whole.data(), whole.data() + whole.size(), w);
    std::int64_t h = 0;
    if (!frac.empty()) {
        std::from_chars(frac.data(), frac.data() + frac.size(), h);
        if (frac.size() == 1) {
            h *= 10;
        }
    }
    return Load::from_hundredths(w * 100 + h);
}

bool is_format_header(std::string_view line) {
    if (line == kFormatHeader) {
        return true;
    }
    if (line.substr(0, kFormatHeaderPrefix.size()) == kFormatHeaderPrefix) {
        throw MalformedRecord(fmt::format("unsupported format version '{}'", line.substr(kFormatHeaderPrefix.size())),
                              kFormatHeaderPrefix.size());
    }
    return false;
}

Record parse_record_line(std::string_view line) {
    if (line.find_first_of("\n\r") != std::string_view::npos) {
        fail("record contains a line break", line.find_first_of("\n\r"));
    }
    const auto fields = split_fields(line, '|');
    if (fields[0].text == "S") {
        return parse_slot_line(fields);
    }
    if (fields[0].text == "M") {
        return parse_machine_line(fields);
    }
    fail(fmt::format("unknown record kind '{}'", fields[0].text), 0);
}

std::string render_record_line(const SlotObservation& obs) {
    return fmt::format("S|{}|{}|{}|{}|{}|{}|{}|{}", format_instant(obs.timestamp), obs.machine, obs.slot,
                       to_string(obs.state), to_string(obs.activity), obs.load.to_string(),
                       obs.job_id.value_or(""), obs.owner.value_or(""));
}

std::string render_record_line(const MachineRecord& rec) {
    const auto& i = rec.info;
    return fmt::format("M|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}", format_instant(rec.timestamp), i.machine, i.slot_count,
                       i.os_name, i.os_version, i.memory_mb_total, join_counts(i.memory_mb_per_slot),
                       i.disk_mb_free_total, join_counts(i.disk_mb_free_per_slot), i.load_avg_total.to_string(),
                       i.load_avg_condor.to_string());
}

std::string render_record_line(const Record& rec) {
    return std::visit([](const auto& r) { return render_record_line(r); }, rec);
}

PoolSnapshot parse_status_output(std::string_view text, Instant taken_at, const MachineRegistry* registry) {
    struct Group {
        std::optional<MachineRecord> info;
        std::map<int, SlotObservation> slots;
    };
    std::map<std::string, Group, std::less<>> groups;

    for (const auto& line : split_lines(text)) {
        if (line.text.empty() || is_format_header(line.text)) {
            continue;
        }
        Record rec;
        try {
            rec = parse_record_line(line.text);
        } catch (const MalformedRecord& e) {
            throw e.with_context(fmt::format("status line {}", line.number));
        }
        if (auto* obs = std::get_if<SlotObservation>(&rec)) {
            auto& g = groups[obs->machine];
            const int slot = obs->slot;
            if (g.slots.count(slot) != 0) {
                throw DuplicateSlot(obs->machine, slot);
            }
            obs->timestamp = taken_at;
            g.slots.emplace(slot, std::move(*obs));
        } else {
            auto& m = std::get<MachineRecord>(rec);
            auto& g = groups[m.info.machine];
            if (g.info) {
                throw MalformedRecord(fmt::format("duplicate machine record for {}", m.info.machine), 0,
                                      fmt::format("status line {}", line.number));
            }
            m.timestamp = taken_at;
            g.info = std::move(m);
        }
    }

    PoolSnapshot snap;
    snap.taken_at = taken_at;
    for (auto& [name, g] : groups) {
        if (!g.info) {
            throw MalformedRecord(fmt::format("slot records for {} without a machine record", name), 0);
        }
        MachineStatus ms;
        ms.info = std::move(g.info->info);
        if (registry) {
            if (const auto* e = registry->find(name)) {
                ms.info.restriction = e->restriction;
            }
        }
        for (auto& [slot, obs] : g.slots) {
            if (slot > ms.info.slot_count) {
                throw MalformedRecord(
                    fmt::format("slot {} exceeds slot count {} of {}", slot, ms.info.slot_count, name), 0);
            }
            ms.slots.push_back(std::move(obs));
        }
        ms.time_in_state_s.assign(ms.slots.size(), 0);
        snap.machines.push_back(std::move(ms));
    }
    if (registry) {
        for (const auto& e : registry->entries) {
            if (groups.count(e.machine) == 0) {
                MachineStatus ms;
                ms.info.machine = e.machine;
                ms.info.slot_count = e.slot_count;
                ms.info.restriction = e.restriction;
                ms.info.reachable = false;
                snap.machines.push_back(std::move(ms));
            }
        }
        std::sort(snap.machines.begin(), snap.machines.end(),
                  [](const MachineStatus& a, const MachineStatus& b) { return a.info.machine < b.info.machine; });
    }
    return snap;
}

std::string render_status_output(const PoolSnapshot& snapshot) {
    std::string out;
    for (const auto& m : snapshot.machines) {
        if (!m.info.reachable) {
            continue;
        }
        out += render_record_line(MachineRecord{snapshot.taken_at, m.info});
        out += '\n';
        for (const auto& s : m.slots) {
            out += render_record_line(s);
            out += '\n';
        }
    }
    return out;
}

QueueSummary parse_queue_output(std::string_view text) {
    std::vector<QueueRow> rows;
    for (const auto& line : split_lines(text)) {
        if (line.text.empty() || is_format_header(line.text)) {
            continue;
        }
        try {
            const auto f = split_fields(line.text, '|');
            if (f[0].text != "Q") {
                fail(fmt::format("expected queue record, got kind '{}'", f[0].text), 0);
            }
            if (f.size() != 5) {
                fail(fmt::format("queue record needs 5 fields, got {}", f.size()), 0);
            }
            if (!is_valid_user_name(f[1].text)) {
                fail("invalid user name", f[1].offset);
            }
            rows.push_back({std::string(f[1].text), parse_count(f[2], "running count"),
                            parse_count(f[3], "idle count"), parse_count(f[4], "held count")});
        } catch (const MalformedRecord& e) {
            throw e.with_context(fmt::format("queue line {}", line.number));
        }
    }
    return QueueSummary::from_rows(std::move(rows));
}

std::string render_queue_output(const QueueSummary& queue) {
    std::string out;
    for (const auto& r : queue.rows) {
        out += fmt::format("Q|{}|{}|{}|{}\n", r.user, r.running, r.idle, r.held);
    }
    return out;
}

RegistryEntry parse_registry_line(std::string_view line) {
    const auto f = split_fields(line, '|');
    if (f[0].text != "R") {
        fail(fmt::format("expected registry record, got kind '{}'", f[0].text), 0);
    }
    if (f.size() != 4) {
        fail(fmt::format("registry record needs 4 fields, got {}", f.size()), 0);
    }
    RegistryEntry e;
    e.machine = std::string(f[1].text);
    if (!is_valid_machine_name(e.machine)) {
        fail("invalid machine name", f[1].offset);
    }
    e.slot_count = parse_slot_count(f[2], "slot count");
    if (!f[3].text.empty()) {
        auto r = ScheduleWindows::parse_spec(f[3].text);
        if (!r) {
            fail(fmt::format("bad restriction spec '{}'", f[3].text), f[3].offset);
        }
        e.restriction = std::move(*r);
    }
    return e;
}

std::string render_registry_line(const RegistryEntry& entry) {
    return fmt::format("R|{}|{}|{}", entry.machine, entry.slot_count,
                       entry.restriction ? entry.restriction->to_spec() : std::string{});
}

} // namespace poolgaze
