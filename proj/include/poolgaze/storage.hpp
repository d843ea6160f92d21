#pragma once

// Append-only flat-file store:
//
//   <root>/machines.reg               machine registry
//   <root>/<YYYY>/<MM>/<DD>/<m>.rec   records for machine m on that UTC day
//
// Every file starts with the format header line. There is one writer per
// root (see WriterLock); readers never take locks and ignore a trailing
// partial line left by an append in progress.

#include "poolgaze/model.hpp"
#include "poolgaze/record_format.hpp"

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace poolgaze {

class DataRoot {
public:
    explicit DataRoot(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& path() const noexcept { return root_; }
    std::filesystem::path day_dir(Date d) const;
    std::filesystem::path machine_file(Date d, std::string_view machine) const;
    std::filesystem::path registry_file() const { return root_ / "machines.reg"; }
    std::filesystem::path lock_file() const { return root_ / ".writer.lock"; }

private:
    std::filesystem::path root_;
};

enum class ReadMode {
    Strict,  // first bad line throws MalformedRecord with file:line context
    Lenient, // bad lines are skipped and counted
};

struct DayRead {
    std::vector<SlotObservation> observations; // sorted by (timestamp, slot)
    std::vector<MachineRecord> machine_records; // sorted by timestamp
    std::size_t skipped = 0;
};

struct DayData {
    Date date;
    DayRead read;
};

/// Routes each record to its (UTC day, machine) file and appends it. Each
/// file receives its lines in a single write. Returns the number of lines
/// written.
std::size_t append_observations(const DataRoot& root, std::span<const Record> records);

DayRead read_machine_day(const DataRoot& root, std::string_view machine, Date date, ReadMode mode);

/// Exactly `span_days` consecutive entries starting at `start` (1..366).
std::vector<DayData> read_range(const DataRoot& root, std::string_view machine, Date start, int span_days,
                                ReadMode mode);

/// Latest observation carrying a job phase within the `lookback_days` days
/// ending with `today`, scanning newest first.
std::optional<Instant> last_job_time(const DataRoot& root, std::string_view machine, Date today,
                                     int lookback_days, ReadMode mode);

/// Timestamp of the newest stored record, scanning the newest day directory.
std::optional<Instant> latest_record_time(const DataRoot& root);

bool registry_exists(const DataRoot& root);
/// Throws IoFailure when the file is missing or unreadable.
MachineRegistry load_registry(const DataRoot& root);
void save_registry(const DataRoot& root, const MachineRegistry& registry);

MachineRegistry parse_registry_text(std::string_view text);
std::string render_registry_text(const MachineRegistry& registry);

/// Exclusive advisory lock on the root's writer lock file, held for the
/// lifetime of the object. Throws IoFailure if another process holds it.
class WriterLock {
public:
    explicit WriterLock(const DataRoot& root);
    ~WriterLock();
    WriterLock(const WriterLock&) = delete;
    WriterLock& operator=(const WriterLock&) = delete;

private:
    int fd_ = -1;
};

} // namespace poolgaze
