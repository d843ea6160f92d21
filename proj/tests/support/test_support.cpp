#include "test_support.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace poolgaze::testing {

namespace fs = std::filesystem;
using namespace std::chrono;

TempDir::TempDir() {
    auto templ = (fs::temp_directory_path() / "poolgaze-test-XXXXXX").string();
    if (::mkdtemp(templ.data()) == nullptr) {
        throw std::runtime_error("mkdtemp failed");
    }
    path_ = templ;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::permissions(path_, fs::perms::owner_all, fs::perm_options::add, ec);
    fs::remove_all(path_, ec);
}

Instant at(std::string_view iso) {
    const auto t = parse_instant(iso);
    if (!t) {
        throw std::invalid_argument(fmt::format("bad instant literal {}", iso));
    }
    return *t;
}

Date date(std::string_view ymd) {
    const auto d = parse_date(ymd);
    if (!d) {
        throw std::invalid_argument(fmt::format("bad date literal {}", ymd));
    }
    return *d;
}

SlotObservation idle_obs(std::string machine, int slot, Instant t) {
    SlotObservation o;
    o.timestamp = t;
    o.machine = std::move(machine);
    o.slot = slot;
    o.state = SlotState::Unclaimed;
    o.activity = SlotActivity::Idle;
    return o;
}

SlotObservation job_obs(std::string machine, int slot, Instant t, JobPhase phase, std::string job_id,
                        std::string owner) {
    SlotObservation o;
    o.timestamp = t;
    o.machine = std::move(machine);
    o.slot = slot;
    o.state = SlotState::Claimed;
    o.activity = phase == JobPhase::Running ? SlotActivity::Busy : SlotActivity::Suspended;
    o.load = Load::from_hundredths(phase == JobPhase::Running ? 100 : 0);
    o.job_id = std::move(job_id);
    o.owner = std::move(owner);
    return o;
}

MachineInfo machine_info(std::string machine, int slots, std::int64_t disk_total) {
    MachineInfo m;
    m.machine = std::move(machine);
    m.slot_count = slots;
    m.os_name = "Fedora";
    m.os_version = "20";
    m.memory_mb_total = 2048LL * slots;
    m.memory_mb_per_slot.assign(static_cast<std::size_t>(slots), 2048);
    m.disk_mb_free_total = disk_total;
    m.disk_mb_free_per_slot.assign(static_cast<std::size_t>(slots), disk_total / slots);
    m.load_avg_total = Load::from_hundredths(50);
    m.load_avg_condor = Load::from_hundredths(0);
    return m;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file(const fs::path& path, std::string_view content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) {
            out[fs::relative(e.path(), root).string()] = read_file(e.path());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

template <typename T, std::size_t N>
const T& pick(std::mt19937_64& rng, const T (&items)[N]) {
    return items[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(N) - 1))];
}

} // namespace

std::string random_name(std::mt19937_64& rng, std::string_view prefix) {
    static constexpr char kChars[] = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_.";
    std::string s(prefix);
    const int n = uniform_int(rng, 1, 10);
    for (int i = 0; i < n; ++i) {
        s += kChars[uniform_int(rng, 0, static_cast<int>(sizeof(kChars)) - 2)];
    }
    return s;
}

SlotObservation random_observation(std::mt19937_64& rng) {
    SlotObservation o;
    o.timestamp = instant_from_seconds(std::uniform_int_distribution<Seconds>(0, 4102444799)(rng));
    o.machine = random_name(rng, "m");
    o.slot = uniform_int(rng, 1, 64);
    o.state = pick(rng, kAllSlotStates);
    o.activity = pick(rng, kAllSlotActivities);
    o.load = Load::from_hundredths(uniform_int(rng, 0, 6400));
    if (o.state == SlotState::Claimed) {
        o.job_id = fmt::format("{}.{}", uniform_int(rng, 0, 9999999), uniform_int(rng, 0, 99));
        o.owner = random_name(rng, "u");
    }
    return o;
}

MachineInfo random_machine_info(std::mt19937_64& rng, std::string machine) {
    static constexpr const char* kOs[] = {"Fedora", "openSUSE", "Scientific Linux", "Ubuntu"};
    MachineInfo m;
    m.machine = std::move(machine);
    m.slot_count = uniform_int(rng, 1, 16);
    m.os_name = pick(rng, kOs);
    m.os_version = fmt::format("{}.{}", uniform_int(rng, 5, 25), uniform_int(rng, 0, 9));
    for (int k = 0; k < m.slot_count; ++k) {
        m.memory_mb_per_slot.push_back(uniform_int(rng, 0, 8192));
        m.disk_mb_free_per_slot.push_back(uniform_int(rng, 0, 100000));
    }
    m.memory_mb_total = uniform_int(rng, 0, 262144);
    m.disk_mb_free_total = uniform_int(rng, 0, 2000000);
    m.load_avg_condor = Load::from_hundredths(uniform_int(rng, 0, 1600));
    m.load_avg_total = Load::from_hundredths(m.load_avg_condor.hundredths() + uniform_int(rng, 0, 400));
    return m;
}

ScheduleWindows random_schedule(std::mt19937_64& rng) {
    ScheduleWindows s;
    const int n = uniform_int(rng, 0, 5);
    for (int i = 0; i < n; ++i) {
        s.windows.push_back({uniform_int(rng, 0, 6), uniform_int(rng, 0, 1439), uniform_int(rng, 0, 1439)});
    }
    return s;
}

Scenario random_scenario(std::mt19937_64& rng, int days) {
    Scenario s;
    s.seed = rng();
    s.machines = uniform_int(rng, 1, 4);
    s.slots_per_machine = {uniform_int(rng, 1, 6)};
    s.duration_s = static_cast<Seconds>(days) * kSecondsPerDay;
    s.start = Date{year{2014} / June / 2} + std::chrono::days{uniform_int(rng, 0, 60)};
    s.job_rate_per_slot_hour = std::uniform_real_distribution<double>(0.0, 1.5)(rng);
    s.mean_job_length_s = uniform_int(rng, 600, 20000);
    s.owner_rate_per_hour = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
    s.mean_owner_length_s = uniform_int(rng, 300, 7200);
    s.suspend_probability = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    s.restricted_fraction = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    s.interval_s = 300;
    return s;
}

// ---------------------------------------------------------------------------

bool schedule_oracle(const ScheduleWindows& schedule, int minute_of_week) {
    const int day = minute_of_week / 1440;
    const int minute = minute_of_week % 1440;
    for (const auto& w : schedule.windows) {
        if (w.start_minute <= w.end_minute) {
            if (day == w.day && minute >= w.start_minute && minute <= w.end_minute) {
                return true;
            }
        } else {
            if (day == w.day && minute >= w.start_minute) {
                return true;
            }
            if (day == (w.day + 1) % 7 && minute <= w.end_minute) {
                return true;
            }
        }
    }
    return false;
}

namespace {

struct Paint {
    int job = -1; // index into the job table, -1 for nothing
    JobPhase phase = JobPhase::Running;
};

} // namespace

std::vector<JobInterval> interval_oracle(const std::vector<SlotObservation>& observations, Seconds interval_s,
                                         Seconds gap_limit_s) {
    if (observations.empty()) {
        return {};
    }
    Seconds lo = to_seconds(observations.front().timestamp);
    Seconds hi = lo;
    std::map<int, std::vector<const SlotObservation*>> by_slot;
    for (const auto& o : observations) {
        lo = std::min(lo, to_seconds(o.timestamp));
        hi = std::max(hi, to_seconds(o.timestamp) + interval_s);
        by_slot[o.slot].push_back(&o);
    }

    std::vector<std::pair<std::string, std::string>> jobs; // (job_id, owner)
    std::vector<JobInterval> out;
    for (auto& [slot, list] : by_slot) {
        std::stable_sort(list.begin(), list.end(),
                         [](const auto* a, const auto* b) { return a->timestamp < b->timestamp; });
        std::vector<Paint> seconds(static_cast<std::size_t>(hi - lo));
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto& o = *list[i];
            const auto phase = job_phase(o.state, o.activity);
            if (!phase) {
                continue;
            }
            const Seconds t = to_seconds(o.timestamp);
            Seconds end = t + interval_s;
            if (i + 1 < list.size()) {
                const auto& next = *list[i + 1];
                const Seconds tn = to_seconds(next.timestamp);
                if (next.phase() && next.job_id == o.job_id && tn - t <= gap_limit_s) {
                    end = tn;
                } else {
                    end = std::min(end, tn);
                }
            }
            auto it = std::find(jobs.begin(), jobs.end(), std::make_pair(*o.job_id, *o.owner));
            if (it == jobs.end()) {
                jobs.emplace_back(*o.job_id, *o.owner);
                it = jobs.end() - 1;
            }
            const int job = static_cast<int>(it - jobs.begin());
            for (Seconds s = t; s < end; ++s) {
                seconds[static_cast<std::size_t>(s - lo)] = {job, *phase};
            }
        }

        std::size_t s = 0;
        while (s < seconds.size()) {
            if (seconds[s].job < 0) {
                ++s;
                continue;
            }
            const int job = seconds[s].job;
            JobInterval iv;
            iv.machine = list.front()->machine;
            iv.slot = slot;
            iv.job_id = jobs[static_cast<std::size_t>(job)].first;
            iv.owner = jobs[static_cast<std::size_t>(job)].second;
            iv.start = instant_from_seconds(lo + static_cast<Seconds>(s));
            while (s < seconds.size() && seconds[s].job == job) {
                const auto phase = seconds[s].phase;
                const auto seg_start = s;
                while (s < seconds.size() && seconds[s].job == job && seconds[s].phase == phase) {
                    ++s;
                }
                iv.segments.push_back({phase, instant_from_seconds(lo + static_cast<Seconds>(seg_start)),
                                       instant_from_seconds(lo + static_cast<Seconds>(s))});
            }
            iv.end = iv.segments.back().end;
            out.push_back(std::move(iv));
        }
    }
    return out;
}

PhaseSeconds phase_seconds_oracle(const std::vector<JobInterval>& intervals, Instant from, Instant to) {
    PhaseSeconds out;
    for (const auto& iv : intervals) {
        for (const auto& seg : iv.segments) {
            for (auto s = std::max(seg.start, from); s < std::min(seg.end, to); s += seconds{1}) {
                (seg.phase == JobPhase::Running ? out.running : out.suspended) += 1;
            }
        }
    }
    return out;
}

std::vector<SlotObservation> sample_truth(const GroundTruth& truth, const SimMachine& machine, Seconds interval_s) {
    std::vector<SlotObservation> out;
    for (auto t = truth.start; t < truth.end; t += seconds{interval_s}) {
        for (std::size_t k = 0; k < machine.slots.size(); ++k) {
            const auto& spans = machine.slots[k];
            const auto span = std::find_if(spans.begin(), spans.end(),
                                           [&](const SlotSpan& s) { return s.start <= t && t < s.end; });
            const int slot = static_cast<int>(k) + 1;
            if (span == spans.end() || span->kind != SpanKind::Job) {
                auto o = idle_obs(machine.info.machine, slot, t);
                if (span != spans.end() && span->kind == SpanKind::Owner) {
                    o.state = SlotState::Owner;
                }
                out.push_back(std::move(o));
                continue;
            }
            const auto& job = truth.jobs[static_cast<std::size_t>(span->job)];
            const auto seg = std::find_if(job.segments.begin(), job.segments.end(),
                                          [&](const JobSegment& s) { return s.start <= t && t < s.end; });
            out.push_back(job_obs(machine.info.machine, slot, t, seg->phase, job.job_id, job.owner));
        }
    }
    return out;
}

} // namespace poolgaze::testing

namespace poolgaze::testing {

PoolSnapshot random_snapshot(std::mt19937_64& rng, Instant taken_at) {
    static constexpr const char* kUsers[] = {"alice", "bob", "carol", "dave"};
    PoolSnapshot snap;
    snap.taken_at = taken_at;
    const int n = uniform_int(rng, 0, 12);
    for (int i = 0; i < n; ++i) {
        MachineStatus m;
        m.info = random_machine_info(rng, fmt::format("host{:02}", i));
        if (rng() % 6 == 0) {
            m.info.reachable = false;
            m.info.memory_mb_per_slot.clear();
            m.info.disk_mb_free_per_slot.clear();
            m.info.memory_mb_total = 0;
            m.info.disk_mb_free_total = 0;
            m.info.load_avg_total = {};
            m.info.load_avg_condor = {};
            m.info.os_name.clear();
            m.info.os_version.clear();
        } else {
            for (int k = 1; k <= m.info.slot_count; ++k) {
                auto o = random_observation(rng);
                o.timestamp = taken_at;
                o.machine = m.info.machine;
                o.slot = k;
                if (o.owner) {
                    o.owner = pick(rng, kUsers);
                }
                m.slots.push_back(o);
                m.time_in_state_s.push_back(uniform_int(rng, 0, 20) * 300);
            }
        }
        if (rng() % 3 == 0) {
            m.info.last_job_time = taken_at - seconds{uniform_int(rng, 0, 86400 * 5)};
        }
        snap.machines.push_back(std::move(m));
    }
    return snap;
}

namespace {

std::string random_range(std::mt19937_64& rng, double lo, double hi, bool integral) {
    const auto draw = [&] {
        const double v = std::uniform_real_distribution<double>(lo, hi)(rng);
        return integral ? fmt::format("{}", static_cast<std::int64_t>(v)) : fmt::format("{:.2f}", v);
    };
    std::string a = draw();
    std::string b = draw();
    if (std::stod(a) > std::stod(b)) {
        std::swap(a, b);
    }
    switch (rng() % 4) {
    case 0: return a + ":";
    case 1: return ":" + b;
    default: return a + ":" + b;
    }
}

bool in_range(std::string_view spec, double v) {
    const auto colon = spec.find(':');
    const auto lo = spec.substr(0, colon);
    const auto hi = spec.substr(colon + 1);
    if (!lo.empty() && v < std::stod(std::string(lo))) {
        return false;
    }
    if (!hi.empty() && v > std::stod(std::string(hi))) {
        return false;
    }
    return true;
}

} // namespace

QueryParams random_query(std::mt19937_64& rng, const PoolSnapshot& snapshot) {
    static constexpr const char* kStates[] = {"Owner", "Claimed", "Unclaimed", "Matched", "Preempting", "Drained"};
    static constexpr const char* kUsers[] = {"alice", "bob", "carol", "dave", "nobody"};
    static constexpr const char* kSorts[] = {"name", "load", "free-disk", "memory", "slot-count", "last-job-time"};
    std::vector<std::string> os;
    for (const auto& m : snapshot.machines) {
        if (m.info.reachable) {
            os.push_back(m.info.os_name);
        }
    }
    os.emplace_back("Plan9");

    QueryParams q;
    const auto maybe = [&](int one_in) { return rng() % static_cast<unsigned>(one_in) == 0; };
    if (maybe(3)) {
        static constexpr const char* kReach[] = {"up", "down", "any"};
        q.emplace_back("reachable", pick(rng, kReach));
    }
    if (maybe(4)) {
        q.emplace_back("os", os[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(os.size()) - 1))]);
    }
    if (maybe(5)) {
        q.emplace_back("os_version", std::to_string(uniform_int(rng, 5, 25)));
    }
    if (maybe(3)) {
        std::string states;
        const int n = uniform_int(rng, 1, 3);
        for (int i = 0; i < n; ++i) {
            states += (i ? "," : "") + std::string(pick(rng, kStates));
        }
        q.emplace_back("state", states);
    }
    if (maybe(4)) {
        q.emplace_back("owner", pick(rng, kUsers));
    }
    if (maybe(4)) {
        q.emplace_back("memory_mb", random_range(rng, 0, 262144, true));
    }
    if (maybe(4)) {
        q.emplace_back("disk_mb_free", random_range(rng, 0, 2000000, true));
    }
    if (maybe(4)) {
        q.emplace_back("load_avg_total", random_range(rng, 0, 20, false));
    }
    if (maybe(4)) {
        q.emplace_back("load_avg_condor", random_range(rng, 0, 16, false));
    }
    if (maybe(4)) {
        q.emplace_back("slot_count", random_range(rng, 1, 16, true));
    }
    if (maybe(4)) {
        q.emplace_back("time_in_state_s", random_range(rng, 0, 6000, true));
    }
    if (maybe(3)) {
        q.emplace_back("sort", pick(rng, kSorts));
        q.emplace_back("order", maybe(2) ? "desc" : "asc");
    }
    if (maybe(4)) {
        q.emplace_back("disk_alert_mb", std::to_string(uniform_int(rng, 0, 1000000)));
    }
    std::shuffle(q.begin(), q.end(), rng);
    return q;
}

FilterOutcome filter_oracle(const PoolSnapshot& snapshot, const QueryParams& params) {
    const auto get = [&](std::string_view key) -> std::optional<std::string> {
        for (const auto& [k, v] : params) {
            if (k == key) {
                return v;
            }
        }
        return std::nullopt;
    };
    const auto reach = get("reachable").value_or("any");
    const auto os = get("os");
    const auto os_version = get("os_version");
    const auto states = get("state");
    const auto owner = get("owner");
    const auto time_range = get("time_in_state_s");

    FilterOutcome out;
    for (const auto& m : snapshot.machines) {
        const auto& i = m.info;
        bool ok = reach == "any" || (reach == "up") == i.reachable;
        ok = ok && (!os || (i.reachable && i.os_name == *os));
        ok = ok && (!os_version || (i.reachable && i.os_version.substr(0, os_version->size()) == *os_version));
        const std::pair<const char*, double> attributes[] = {
            {"memory_mb", static_cast<double>(i.memory_mb_total)},
            {"disk_mb_free", static_cast<double>(i.disk_mb_free_total)},
            {"load_avg_total", i.load_avg_total.value()},
            {"load_avg_condor", i.load_avg_condor.value()},
        };
        for (const auto& [key, value] : attributes) {
            if (const auto r = get(key)) {
                ok = ok && i.reachable && in_range(*r, value);
            }
        }
        if (const auto r = get("slot_count")) {
            ok = ok && in_range(*r, i.slot_count);
        }
        if (!ok) {
            continue;
        }
        std::size_t matching = 0;
        for (std::size_t k = 0; k < m.slots.size(); ++k) {
            const auto& s = m.slots[k];
            bool slot_ok = true;
            if (states) {
                const std::string token(to_string(s.state));
                slot_ok = ("," + *states + ",").find("," + token + ",") != std::string::npos;
            }
            slot_ok = slot_ok && (!owner || s.owner == *owner);
            slot_ok = slot_ok && (!time_range || in_range(*time_range, static_cast<double>(m.time_in_state_s[k])));
            matching += slot_ok ? 1 : 0;
        }
        const bool slot_filters = states || owner || time_range;
        if (slot_filters && matching == 0) {
            continue;
        }
        out.machines.push_back(i.machine);
        out.slots_shown += matching;
    }
    std::sort(out.machines.begin(), out.machines.end());
    return out;
}

} // namespace poolgaze::testing
