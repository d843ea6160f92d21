#pragma once

// JSON HTTP API over the store and the live status source.
//
//   GET /api/machines
//   GET /api/machines/{name}/day/{YYYY-MM-DD}?view=summary|detail
//   GET /api/machines/{name}/period/{YYYY-MM-DD}?span=week|month
//   GET /api/pool/status?{panoramic query}
//   GET /api/queue
//   GET /api/health
//
// Errors carry a {"error", "detail"} body. Percentages are relative to the
// theoretical maximum (slots x 24 h).

#include "poolgaze/aggregator.hpp"
#include "poolgaze/collector.hpp"
#include "poolgaze/panoramic.hpp"
#include "poolgaze/storage.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>

namespace httplib {
class Server;
}

namespace poolgaze {

struct ServiceConfig {
    std::filesystem::path data_root;
    Seconds interval_s = 300;
    /// Lifetime of a fetched live snapshot; 0 disables the cache.
    Seconds cache_s = 5;
    int last_job_lookback_days = 30;
    std::string cors_origin = "*";
    ReadMode read_mode = ReadMode::Lenient;
};

struct ApiResponse {
    int status = 200;
    std::string body;
};

/// Live view of the pool: the snapshot augmented from storage and the
/// registry, plus the queue when its fetch succeeded.
struct LiveView {
    PoolSnapshot snapshot;
    bool queue_ok = false;
    std::string queue_error;
};

class ApiService {
public:
    using NowFn = std::function<Instant()>;

    ApiService(ServiceConfig config, StatusSource& source, NowFn now = {});

    /// Dispatches a request; never throws.
    ApiResponse handle(std::string_view method, std::string_view path, const QueryParams& params);

    ApiResponse machines();
    ApiResponse machine_day(std::string_view machine, std::string_view date, const QueryParams& params);
    ApiResponse machine_period(std::string_view machine, std::string_view start, const QueryParams& params);
    ApiResponse pool_status(const QueryParams& params);
    ApiResponse queue();
    ApiResponse health();

    /// Cached live view; at most one source fetch runs at a time. Throws
    /// SourceUnavailable when the status fetch fails.
    std::shared_ptr<const LiveView> live();

    const ServiceConfig& config() const { return config_; }

private:
    std::shared_ptr<const LiveView> fetch_live(Instant now);

    ServiceConfig config_;
    DataRoot root_;
    StatusSource& source_;
    NowFn now_;
    ReconstructionParams params_;

    std::mutex fetch_mu_;
    std::shared_ptr<const LiveView> cached_;
    std::chrono::steady_clock::time_point cached_at_;
};

/// Wires every endpoint (plus CORS preflight) into an httplib server.
void register_routes(httplib::Server& server, ApiService& service);

/// Seconds the slot has held its current (state, activity, job) according
/// to stored samples ending at `now`.
Seconds time_in_state(const std::vector<SlotObservation>& history, const SlotObservation& current, Instant now,
                      const ReconstructionParams& params);

} // namespace poolgaze
