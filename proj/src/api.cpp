#include "poolgaze/api.hpp"

#include "poolgaze/error.hpp"
#include "poolgaze/record_format.hpp"

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include <algorithm>

namespace poolgaze {

using json = nlohmann::json;
using namespace std::chrono;

namespace {

ApiResponse respond(int status, const json& body) { return {status, body.dump()}; }

ApiResponse error_response(int status, std::string_view error, std::string_view detail, json extra = json::object()) {
    json body = std::move(extra);
    body["error"] = error;
    body["detail"] = detail;
    return respond(status, body);
}

std::vector<std::string_view> split_path(std::string_view path) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= path.size()) {
        const auto p = path.find('/', start);
        const auto part = path.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start);
        if (!part.empty()) {
            out.push_back(part);
        }
        if (p == std::string_view::npos) {
            break;
        }
        start = p + 1;
    }
    return out;
}

std::optional<std::string> reject_unknown(const QueryParams& params, std::initializer_list<std::string_view> allowed) {
    for (const auto& [k, v] : params) {
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
            return fmt::format("unknown parameter '{}'", k);
        }
    }
    return std::nullopt;
}

std::optional<std::string> param(const QueryParams& params, std::string_view key) {
    for (const auto& [k, v] : params) {
        if (k == key) {
            return v;
        }
    }
    return std::nullopt;
}

json optional_instant(const std::optional<Instant>& t) { return t ? json(format_instant(*t)) : json(nullptr); }

json registry_json(const MachineRegistry& reg) {
    json arr = json::array();
    for (const auto& e : reg.entries) {
        arr.push_back({{"name", e.machine},
                       {"slot_count", e.slot_count},
                       {"restriction", e.restriction ? json(e.restriction->to_spec()) : json(nullptr)}});
    }
    return arr;
}

json figure_row(std::string_view row, const FigureStats& f) {
    return {{"row", row}, {"total_s", f.total_s}, {"avg_per_slot_s", f.avg_per_slot_s}, {"pct", f.pct_of_theoretical}};
}

json summary_json(const DailySummary& s) {
    json table = json::array();
    table.push_back({{"row", "theoretical"},
                     {"total_s", s.theoretical_s},
                     {"avg_per_slot_s", kSecondsPerDay},
                     {"pct", 100.0}});
    table.push_back(figure_row("owner_idle", s.owner_idle));
    table.push_back(figure_row("condor_total", s.condor_total));
    table.push_back(figure_row("running", s.running));
    table.push_back(figure_row("suspended", s.suspended));
    return {{"machine", s.machine},
            {"date", format_date(s.date)},
            {"slot_count", s.slot_count},
            {"theoretical_s", s.theoretical_s},
            {"owner_idle_s", s.owner_idle.total_s},
            {"condor_total_s", s.condor_total.total_s},
            {"running_s", s.running.total_s},
            {"suspended_s", s.suspended.total_s},
            {"owner_idle_pct", s.owner_idle.pct_of_theoretical},
            {"condor_total_pct", s.condor_total.pct_of_theoretical},
            {"running_pct", s.running.pct_of_theoretical},
            {"suspended_pct", s.suspended.pct_of_theoretical},
            {"pct_basis", "theoretical"},
            {"table", table}};
}

json curve_json(const std::vector<ConcurrencyStep>& curve) {
    json arr = json::array();
    for (const auto& s : curve) {
        arr.push_back({{"t", format_instant(s.t)}, {"running", s.running}, {"suspended", s.suspended}});
    }
    return arr;
}

json coverage_json(const Coverage& c) {
    json gaps = json::array();
    for (const auto& g : c.gaps) {
        gaps.push_back({{"start", format_instant(g.start)}, {"end", format_instant(g.end)}});
    }
    return {{"observed_s", c.observed_s}, {"observed_pct", c.observed_pct}, {"gaps", gaps}};
}

json interval_json(const JobInterval& iv) {
    json segs = json::array();
    for (const auto& s : iv.segments) {
        segs.push_back({{"phase", to_string(s.phase)},
                        {"start", format_instant(s.start)},
                        {"end", format_instant(s.end)},
                        {"duration_s", s.length_s()}});
    }
    return {{"slot", iv.slot},
            {"job_id", iv.job_id},
            {"owner", iv.owner},
            {"status", to_string(iv.segments.back().phase)},
            {"start", format_instant(iv.start)},
            {"end", format_instant(iv.end)},
            {"duration_s", iv.duration_s()},
            {"running_s", iv.phase_s(JobPhase::Running)},
            {"suspended_s", iv.phase_s(JobPhase::Suspended)},
            {"segments", segs}};
}

template <typename T>
json figures_json(const PeriodFigures<T>& f) {
    return {{"theoretical_s", f.theoretical},
            {"owner_idle_s", f.owner_idle},
            {"condor_total_s", f.condor_total},
            {"running_s", f.running},
            {"suspended_s", f.suspended}};
}

json period_json(const PeriodSummary& p, std::string_view span) {
    json days = json::array();
    for (const auto& d : p.per_day) {
        days.push_back(summary_json(d));
    }
    const auto pct = [&](Seconds v) {
        return p.totals.theoretical > 0 ? 100.0 * static_cast<double>(v) / static_cast<double>(p.totals.theoretical)
                                        : 0.0;
    };
    return {{"machine", p.machine},
            {"start_date", format_date(p.start_date)},
            {"span", span},
            {"span_days", p.span_days},
            {"slot_count", p.slot_count},
            {"per_day", days},
            {"totals", figures_json(p.totals)},
            {"totals_pct",
             {{"owner_idle_pct", pct(p.totals.owner_idle)},
              {"condor_total_pct", pct(p.totals.condor_total)},
              {"running_pct", pct(p.totals.running)},
              {"suspended_pct", pct(p.totals.suspended)}}},
            {"avg_per_day_s", figures_json(p.avg_per_day_s)},
            {"avg_per_day_slot_s", figures_json(p.avg_per_day_slot_s)},
            {"pct_basis", "theoretical"}};
}

json queue_json(const QueueSummary& q) {
    json rows = json::array();
    for (const auto& r : q.rows) {
        rows.push_back({{"user", r.user}, {"running", r.running}, {"idle", r.idle}, {"held", r.held}});
    }
    return {{"rows", rows},
            {"totals", {{"running", q.totals.running}, {"idle", q.totals.idle}, {"held", q.totals.held}}}};
}

json machine_json(const PanoramicMachine& pm, const PanoramicQuery& q) {
    const auto& m = *pm.status;
    const auto& i = m.info;
    const auto want = [&](MachineField f) { return q.fields.count(f) != 0; };
    json j{{"name", i.machine}, {"reachable", i.reachable}, {"disk_alert", pm.disk_alert}};
    if (want(MachineField::SlotCount)) {
        j["slot_count"] = i.slot_count;
    }
    if (want(MachineField::Restriction)) {
        j["restriction"] = i.restriction ? json(i.restriction->to_spec()) : json(nullptr);
    }
    if (want(MachineField::LastJobTime)) {
        j["last_job_time"] = optional_instant(i.last_job_time);
    }
    if (i.reachable) {
        if (want(MachineField::DiskTotal)) {
            j["disk_mb_free_total"] = i.disk_mb_free_total;
        }
        if (want(MachineField::DiskPerSlot)) {
            j["disk_mb_free_per_slot"] = i.disk_mb_free_per_slot;
        }
        if (want(MachineField::MemoryTotal)) {
            j["memory_mb_total"] = i.memory_mb_total;
        }
        if (want(MachineField::MemoryPerSlot)) {
            j["memory_mb_per_slot"] = i.memory_mb_per_slot;
        }
        if (want(MachineField::Os)) {
            j["os_name"] = i.os_name;
            j["os_version"] = i.os_version;
        }
        if (want(MachineField::LoadTotal)) {
            j["load_avg_total"] = i.load_avg_total.value();
        }
        if (want(MachineField::LoadCondor)) {
            j["load_avg_condor"] = i.load_avg_condor.value();
        }
    }
    json slots = json::array();
    for (const auto k : pm.slots) {
        const auto& s = m.slots[k];
        slots.push_back({{"slot", s.slot},
                         {"state", to_string(s.state)},
                         {"activity", to_string(s.activity)},
                         {"display_class", to_string(slot_display_class(s.state, s.activity))},
                         {"load", s.load.value()},
                         {"job_id", s.job_id ? json(*s.job_id) : json(nullptr)},
                         {"owner", s.owner ? json(*s.owner) : json(nullptr)},
                         {"time_in_state_s", m.time_in_state_s[k]}});
    }
    j["slots"] = slots;
    return j;
}

} // namespace

Seconds time_in_state(const std::vector<SlotObservation>& history, const SlotObservation& current, Instant now,
                      const ReconstructionParams& params) {
    const seconds gap_limit{params.gap_limit_s};
    const auto same = [&](const SlotObservation& o) {
        return o.state == current.state && o.activity == current.activity && o.job_id == current.job_id;
    };
    auto it = std::find_if(history.rbegin(), history.rend(), [&](const SlotObservation& o) { return o.timestamp <= now; });
    if (it == history.rend() || !same(*it) || now - it->timestamp > gap_limit) {
        return 0;
    }
    Instant since = it->timestamp;
    for (++it; it != history.rend() && same(*it) && since - it->timestamp <= gap_limit; ++it) {
        since = it->timestamp;
    }
    return (now - since).count();
}

ApiService::ApiService(ServiceConfig config, StatusSource& source, NowFn now)
    : config_(std::move(config)),
      root_(config_.data_root),
      source_(source),
      now_(now ? std::move(now) : NowFn([] { return floor<seconds>(system_clock::now()); })),
      params_(ReconstructionParams::for_interval(config_.interval_s)) {
    params_.validate();
}

ApiResponse ApiService::handle(std::string_view method, std::string_view path, const QueryParams& params) {
    try {
        const auto parts = split_path(path);
        if (parts.empty() || parts[0] != "api") {
            return error_response(404, "not_found", fmt::format("no resource at {}", path));
        }
        if (method != "GET") {
            return error_response(405, "method_not_allowed", "only GET is supported");
        }
        if (parts.size() == 2 && parts[1] == "machines") {
            if (auto bad = reject_unknown(params, {})) {
                return error_response(400, "bad_request", *bad);
            }
            return machines();
        }
        if (parts.size() == 5 && parts[1] == "machines" && parts[3] == "day") {
            return machine_day(parts[2], parts[4], params);
        }
        if (parts.size() == 5 && parts[1] == "machines" && parts[3] == "period") {
            return machine_period(parts[2], parts[4], params);
        }
        if (parts.size() == 3 && parts[1] == "pool" && parts[2] == "status") {
            return pool_status(params);
        }
        if (parts.size() == 2 && parts[1] == "queue") {
            if (auto bad = reject_unknown(params, {})) {
                return error_response(400, "bad_request", *bad);
            }
            return queue();
        }
        if (parts.size() == 2 && parts[1] == "health") {
            return health();
        }
        return error_response(404, "not_found", fmt::format("no resource at {}", path));
    } catch (const std::exception& e) {
        return error_response(500, "internal_error", e.what());
    }
}

ApiResponse ApiService::machines() {
    if (!registry_exists(root_)) {
        return error_response(503, "registry_unavailable", "machine registry file is missing");
    }
    try {
        return respond(200, registry_json(load_registry(root_)));
    } catch (const Error& e) {
        return error_response(503, "registry_unavailable", e.what());
    }
}

ApiResponse ApiService::machine_day(std::string_view machine, std::string_view date_text, const QueryParams& params) {
    if (auto bad = reject_unknown(params, {"view"})) {
        return error_response(400, "bad_request", *bad);
    }
    const auto date = parse_date(date_text);
    if (!date) {
        return error_response(400, "bad_request", fmt::format("'{}' is not a valid YYYY-MM-DD date", date_text));
    }
    const auto view = param(params, "view").value_or("summary");
    if (view != "summary" && view != "detail") {
        return error_response(400, "bad_request", "view must be summary or detail");
    }
    if (!registry_exists(root_)) {
        return error_response(503, "registry_unavailable", "machine registry file is missing");
    }
    const auto reg = load_registry(root_);
    const auto* entry = reg.find(machine);
    if (!entry) {
        return error_response(404, "unknown_machine", fmt::format("machine '{}' is not registered", machine));
    }
    MachineDay day;
    try {
        day = analyze_day(root_, entry->machine, entry->slot_count, *date, params_, config_.read_mode);
    } catch (const Error& e) {
        return error_response(500, "inconsistent_data", e.what());
    }
    json body{{"machine", entry->machine},
              {"date", format_date(*date)},
              {"view", view},
              {"slot_count", entry->slot_count},
              {"interval_s", params_.interval_s},
              {"concurrency_curve", curve_json(day.curve)},
              {"coverage", coverage_json(day.coverage)},
              {"skipped_records", day.skipped_records}};
    if (view == "summary") {
        body["summary"] = summary_json(day.summary);
    } else {
        json intervals = json::array();
        for (const auto& iv : day.intervals) {
            intervals.push_back(interval_json(iv));
        }
        body["intervals"] = intervals;
    }
    return respond(200, body);
}

ApiResponse ApiService::machine_period(std::string_view machine, std::string_view start_text,
                                       const QueryParams& params) {
    if (auto bad = reject_unknown(params, {"span"})) {
        return error_response(400, "bad_request", *bad);
    }
    const auto start = parse_date(start_text);
    if (!start) {
        return error_response(400, "bad_request", fmt::format("'{}' is not a valid YYYY-MM-DD date", start_text));
    }
    const auto span_text = param(params, "span").value_or("week");
    if (span_text != "week" && span_text != "month") {
        return error_response(400, "bad_request", "span must be week or month");
    }
    if (!registry_exists(root_)) {
        return error_response(503, "registry_unavailable", "machine registry file is missing");
    }
    const auto reg = load_registry(root_);
    const auto* entry = reg.find(machine);
    if (!entry) {
        return error_response(404, "unknown_machine", fmt::format("machine '{}' is not registered", machine));
    }
    const auto span = span_text == "week" ? PeriodSpan::Week : PeriodSpan::Month;
    try {
        const auto p = period_summary(root_, entry->machine, entry->slot_count, *start, span, params_, config_.read_mode);
        return respond(200, period_json(p, span_text));
    } catch (const Error& e) {
        return error_response(500, "inconsistent_data", e.what());
    }
}

std::shared_ptr<const LiveView> ApiService::fetch_live(Instant now) {
    const auto status_text = source_.fetch_status(now);
    std::optional<MachineRegistry> reg;
    if (registry_exists(root_)) {
        try {
            reg = load_registry(root_);
        } catch (const Error&) {
            reg.reset();
        }
    }
    auto view = std::make_shared<LiveView>();
    try {
        view->snapshot = parse_status_output(status_text, now, reg ? &*reg : nullptr);
    } catch (const Error& e) {
        throw SourceUnavailable(fmt::format("unusable status output: {}", e.what()));
    }
    try {
        view->snapshot.queue = parse_queue_output(source_.fetch_queue(now));
        view->queue_ok = true;
    } catch (const Error& e) {
        view->queue_error = e.what();
    }

    const Date today = day_of(now);
    for (auto& m : view->snapshot.machines) {
        if (m.info.reachable) {
            std::vector<SlotObservation> history;
            for (auto& d : read_range(root_, m.info.machine, today - days{1}, 2, ReadMode::Lenient)) {
                std::move(d.read.observations.begin(), d.read.observations.end(), std::back_inserter(history));
            }
            for (std::size_t k = 0; k < m.slots.size(); ++k) {
                std::vector<SlotObservation> slot_history;
                std::copy_if(history.begin(), history.end(), std::back_inserter(slot_history),
                             [&](const SlotObservation& o) { return o.slot == m.slots[k].slot; });
                m.time_in_state_s[k] = time_in_state(slot_history, m.slots[k], now, params_);
            }
        }
        const bool running_now =
            std::any_of(m.slots.begin(), m.slots.end(), [](const SlotObservation& s) { return s.phase().has_value(); });
        m.info.last_job_time = running_now ? std::optional<Instant>(now)
                                           : last_job_time(root_, m.info.machine, today,
                                                           config_.last_job_lookback_days, ReadMode::Lenient);
    }
    return view;
}

std::shared_ptr<const LiveView> ApiService::live() {
    std::lock_guard lock(fetch_mu_);
    const auto t = steady_clock::now();
    if (cached_ && config_.cache_s > 0 && t - cached_at_ < seconds{config_.cache_s}) {
        return cached_;
    }
    cached_ = fetch_live(now_());
    cached_at_ = t;
    return cached_;
}

ApiResponse ApiService::pool_status(const QueryParams& params) {
    PanoramicQuery query;
    try {
        query = PanoramicQuery::parse(params);
    } catch (const InvalidValue& e) {
        return error_response(400, "invalid_filter", e.what());
    }
    std::shared_ptr<const LiveView> view;
    try {
        view = live();
    } catch (const Error& e) {
        json registry = json::array();
        if (registry_exists(root_)) {
            try {
                registry = registry_json(load_registry(root_));
            } catch (const Error&) {
            }
        }
        return error_response(502, "source_unavailable", e.what(), {{"registry", registry}});
    }
    const auto& snap = view->snapshot;
    const auto result = apply_query(snap, query);

    json body{{"taken_at", format_instant(snap.taken_at)},
              {"refresh_s", query.refresh_s},
              {"disk_alert_mb", query.disk_alert_mb ? json(*query.disk_alert_mb) : json(nullptr)},
              {"sort", {{"key", to_string(query.sort)}, {"order", query.descending ? "desc" : "asc"}}},
              {"counts",
               {{"machines_shown", result.machines.size()},
                {"machines_total", result.machines_total},
                {"slots_shown", result.slots_shown},
                {"slots_total", result.slots_total}}}};
    if (query.show_machines) {
        json machines = json::array();
        for (const auto& pm : result.machines) {
            machines.push_back(machine_json(pm, query));
        }
        body["machines"] = machines;
    }
    if (query.show_queue) {
        if (view->queue_ok) {
            body["queue"] = queue_json(snap.queue);
        } else {
            body["queue"] = nullptr;
            body["queue_error"] = view->queue_error;
        }
    }
    if (query.show_charts) {
        json charts = json::array();
        for (const auto& id : query.charts) {
            const auto c = compute_chart(id, snap, result);
            json points = json::array();
            for (const auto& p : c.points) {
                points.push_back({{"label", p.label}, {"value", p.value}});
            }
            charts.push_back({{"id", c.spec.id}, {"title", c.spec.title}, {"kind", c.spec.kind}, {"points", points}});
        }
        body["charts"] = charts;
    }
    return respond(200, body);
}

ApiResponse ApiService::queue() {
    std::shared_ptr<const LiveView> view;
    try {
        view = live();
    } catch (const Error& e) {
        return error_response(502, "source_unavailable", e.what());
    }
    if (!view->queue_ok) {
        return error_response(502, "source_unavailable", view->queue_error);
    }
    return respond(200, queue_json(view->snapshot.queue));
}

ApiResponse ApiService::health() {
    std::error_code ec;
    const bool data_root_ok = std::filesystem::is_directory(root_.path(), ec);
    bool source_ok = true;
    try {
        source_ok = live()->queue_ok;
    } catch (const Error&) {
        source_ok = false;
    }
    std::optional<Seconds> age;
    if (data_root_ok) {
        if (const auto latest = latest_record_time(root_)) {
            age = (now_() - *latest).count();
        }
    }
    const bool fresh = age && *age <= 3 * config_.interval_s;
    const bool registry_ok = data_root_ok && registry_exists(root_);
    json body{{"status", data_root_ok && source_ok && fresh && registry_ok ? "ok" : "degraded"},
              {"data_root_ok", data_root_ok},
              {"registry_ok", registry_ok},
              {"source_ok", source_ok},
              {"last_poll_age_s", age ? json(*age) : json(nullptr)},
              {"last_poll_fresh", fresh},
              {"interval_s", config_.interval_s}};
    return respond(200, body);
}

void register_routes(httplib::Server& server, ApiService& service) {
    const auto origin = service.config().cors_origin;
    const auto add_cors = [origin](httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", origin);
        res.set_header("Access-Control-Allow-Methods", "GET, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
    };
    server.Get(".*", [&service, add_cors](const httplib::Request& req, httplib::Response& res) {
        QueryParams params(req.params.begin(), req.params.end());
        const auto r = service.handle("GET", req.path, params);
        res.status = r.status;
        add_cors(res);
        res.set_content(r.body, "application/json");
    });
    server.Options(".*", [add_cors](const httplib::Request&, httplib::Response& res) {
        add_cors(res);
        res.status = 204;
    });
}

} // namespace poolgaze
