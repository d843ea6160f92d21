#include "poolgaze/storage.hpp"

#include "poolgaze/error.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <map>

namespace poolgaze {

namespace fs = std::filesystem;
using namespace std::chrono;

namespace {

std::string errno_text() { return std::strerror(errno); }

void write_all(int fd, std::string_view data, const fs::path& path) {
    while (!data.empty()) {
        const auto n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw IoFailure(path.string(), errno_text());
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

class Fd {
public:
    explicit Fd(int fd) : fd_(fd) {}
    ~Fd() {
        if (fd_ >= 0) {
            ::close(fd_);
        }
    }
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    int get() const { return fd_; }

private:
    int fd_;
};

fs::path unique_temp(const fs::path& target) {
    static std::atomic<unsigned> counter{0};
    return target.parent_path() /
           fmt::format(".{}.{}.{}.tmp", target.filename().string(), ::getpid(), counter.fetch_add(1));
}

// Publishes a file that already carries the header, so no reader ever sees
// a record file without one. link() fails if another creator won the race.
void ensure_record_file(const fs::path& target) {
    if (fs::exists(target)) {
        return;
    }
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) {
        throw IoFailure(target.parent_path().string(), ec.message());
    }
    const auto tmp = unique_temp(target);
    {
        Fd fd{::open(tmp.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644)};
        if (fd.get() < 0) {
            throw IoFailure(tmp.string(), errno_text());
        }
        write_all(fd.get(), std::string(kFormatHeader) + "\n", tmp);
        ::fsync(fd.get());
    }
    if (::link(tmp.c_str(), target.c_str()) != 0 && errno != EEXIST) {
        const auto err = errno_text();
        ::unlink(tmp.c_str());
        throw IoFailure(target.string(), err);
    }
    ::unlink(tmp.c_str());
}

std::optional<std::string> read_file(const fs::path& path) {
    Fd fd{::open(path.c_str(), O_RDONLY | O_CLOEXEC)};
    if (fd.get() < 0) {
        if (errno == ENOENT) {
            return std::nullopt;
        }
        throw IoFailure(path.string(), fmt::format("cannot open for reading: {}", errno_text()));
    }
    std::string out;
    char buf[1 << 16];
    for (;;) {
        const auto n = ::read(fd.get(), buf, sizeof buf);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw IoFailure(path.string(), fmt::format("read error: {}", errno_text()));
        }
        if (n == 0) {
            break;
        }
        out.append(buf, static_cast<std::size_t>(n));
    }
    return out;
}

std::string slot_context(const fs::path& path, std::size_t line) {
    return fmt::format("{}:{}", path.string(), line);
}

bool is_number_dir(const fs::directory_entry& e, std::size_t width) {
    const auto name = e.path().filename().string();
    return e.is_directory() && name.size() == width &&
           std::all_of(name.begin(), name.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::vector<fs::path> sorted_number_dirs(const fs::path& dir, std::size_t width) {
    std::vector<fs::path> out;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec)) {
        if (is_number_dir(e, width)) {
            out.push_back(e.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

fs::path DataRoot::day_dir(Date d) const {
    const year_month_day ymd{d};
    return root_ / fmt::format("{:04}", static_cast<int>(ymd.year())) /
           fmt::format("{:02}", static_cast<unsigned>(ymd.month())) /
           fmt::format("{:02}", static_cast<unsigned>(ymd.day()));
}

fs::path DataRoot::machine_file(Date d, std::string_view machine) const {
    return day_dir(d) / (std::string(machine) + ".rec");
}

std::size_t append_observations(const DataRoot& root, std::span<const Record> records) {
    std::map<std::pair<Date, std::string>, std::string> batches;
    std::size_t count = 0;
    for (const auto& rec : records) {
        const auto [t, machine] = std::visit(
            [](const auto& r) -> std::pair<Instant, std::string> {
                if constexpr (std::is_same_v<std::decay_t<decltype(r)>, SlotObservation>) {
                    r.validate();
                    return {r.timestamp, r.machine};
                } else {
                    r.info.validate();
                    return {r.timestamp, r.info.machine};
                }
            },
            rec);
        const Date d = day_of(t);
        const int y = static_cast<int>(year_month_day{d}.year());
        if (y < 1970 || y > 9999) {
            throw RoutingError(fmt::format("timestamp {} cannot be routed to a day file", format_instant(t)));
        }
        auto& buf = batches[{d, machine}];
        buf += render_record_line(rec);
        buf += '\n';
        ++count;
    }
    std::error_code ec;
    if (!fs::is_directory(root.path(), ec)) {
        throw IoFailure(root.path().string(), "data root is not a directory");
    }
    for (const auto& [key, lines] : batches) {
        const auto path = root.machine_file(key.first, key.second);
        ensure_record_file(path);
        Fd fd{::open(path.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC)};
        if (fd.get() < 0) {
            throw IoFailure(path.string(), errno_text());
        }
        write_all(fd.get(), lines, path);
    }
    return count;
}

DayRead read_machine_day(const DataRoot& root, std::string_view machine, Date date, ReadMode mode) {
    DayRead out;
    const auto path = root.machine_file(date, machine);
    const auto content = read_file(path);
    if (!content || content->empty()) {
        return out;
    }
    const auto lines = split_lines(*content);
    bool header_seen = false;
    for (const auto& line : lines) {
        if (!line.complete) {
            break; // append in progress
        }
        if (!header_seen) {
            try {
                if (!is_format_header(line.text)) {
                    throw MalformedRecord("missing format header", 0);
                }
            } catch (const MalformedRecord& e) {
                throw e.with_context(slot_context(path, line.number));
            }
            header_seen = true;
            continue;
        }
        try {
            auto rec = parse_record_line(line.text);
            const auto [t, name] = std::visit(
                [](const auto& r) -> std::pair<Instant, std::string_view> {
                    if constexpr (std::is_same_v<std::decay_t<decltype(r)>, SlotObservation>) {
                        return {r.timestamp, r.machine};
                    } else {
                        return {r.timestamp, r.info.machine};
                    }
                },
                rec);
            if (name != machine) {
                throw MalformedRecord(fmt::format("record for machine '{}' in file of '{}'", name, machine), 2);
            }
            if (day_of(t) != date) {
                throw MalformedRecord("record timestamp outside the file's day", 2);
            }
            if (auto* obs = std::get_if<SlotObservation>(&rec)) {
                out.observations.push_back(std::move(*obs));
            } else {
                out.machine_records.push_back(std::move(std::get<MachineRecord>(rec)));
            }
        } catch (const MalformedRecord& e) {
            if (mode == ReadMode::Strict) {
                throw e.with_context(slot_context(path, line.number));
            }
            ++out.skipped;
        }
    }
    std::stable_sort(out.observations.begin(), out.observations.end(),
                     [](const SlotObservation& a, const SlotObservation& b) {
                         return std::tie(a.timestamp, a.slot) < std::tie(b.timestamp, b.slot);
                     });
    std::stable_sort(out.machine_records.begin(), out.machine_records.end(),
                     [](const MachineRecord& a, const MachineRecord& b) { return a.timestamp < b.timestamp; });
    return out;
}

std::vector<DayData> read_range(const DataRoot& root, std::string_view machine, Date start, int span_days,
                                ReadMode mode) {
    if (span_days < 1 || span_days > 366) {
        throw InvalidValue(fmt::format("span of {} days outside 1..366", span_days));
    }
    std::vector<DayData> out;
    out.reserve(static_cast<std::size_t>(span_days));
    for (int i = 0; i < span_days; ++i) {
        const Date d = start + days{i};
        out.push_back({d, read_machine_day(root, machine, d, mode)});
    }
    return out;
}

std::optional<Instant> last_job_time(const DataRoot& root, std::string_view machine, Date today,
                                     int lookback_days, ReadMode mode) {
    if (lookback_days < 1) {
        throw InvalidValue("lookback must be at least one day");
    }
    for (int i = 0; i < lookback_days; ++i) {
        const auto day = read_machine_day(root, machine, today - days{i}, mode);
        std::optional<Instant> best;
        for (const auto& obs : day.observations) {
            if (obs.phase() && (!best || obs.timestamp > *best)) {
                best = obs.timestamp;
            }
        }
        if (best) {
            return best;
        }
    }
    return std::nullopt;
}

std::optional<Instant> latest_record_time(const DataRoot& root) {
    const auto years = sorted_number_dirs(root.path(), 4);
    for (auto y = years.rbegin(); y != years.rend(); ++y) {
        const auto months = sorted_number_dirs(*y, 2);
        for (auto m = months.rbegin(); m != months.rend(); ++m) {
            const auto day_dirs = sorted_number_dirs(*m, 2);
            for (auto d = day_dirs.rbegin(); d != day_dirs.rend(); ++d) {
                const auto date = parse_date(fmt::format("{}-{}-{}", y->filename().string(),
                                                         m->filename().string(), d->filename().string()));
                if (!date) {
                    continue;
                }
                std::optional<Instant> best;
                std::error_code ec;
                for (const auto& e : fs::directory_iterator(*d, ec)) {
                    if (e.path().extension() != ".rec" || e.path().filename().string().front() == '.') {
                        continue;
                    }
                    const auto read = read_machine_day(root, e.path().stem().string(), *date, ReadMode::Lenient);
                    for (const auto& o : read.observations) {
                        best = std::max(best.value_or(o.timestamp), o.timestamp);
                    }
                    for (const auto& r : read.machine_records) {
                        best = std::max(best.value_or(r.timestamp), r.timestamp);
                    }
                }
                if (best) {
                    return best;
                }
            }
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

MachineRegistry parse_registry_text(std::string_view text) {
    MachineRegistry reg;
    for (const auto& line : split_lines(text)) {
        if (line.text.empty()) {
            continue;
        }
        try {
            if (line.number == 1 && is_format_header(line.text)) {
                continue;
            }
            reg.entries.push_back(parse_registry_line(line.text));
        } catch (const MalformedRecord& e) {
            throw e.with_context(fmt::format("registry line {}", line.number));
        }
    }
    try {
        reg.normalize();
    } catch (const InvalidValue& e) {
        throw MalformedRecord(e.what(), 0, "registry");
    }
    return reg;
}

std::string render_registry_text(const MachineRegistry& registry) {
    auto sorted = registry;
    sorted.normalize();
    std::string out = std::string(kFormatHeader) + "\n";
    for (const auto& e : sorted.entries) {
        out += render_registry_line(e);
        out += '\n';
    }
    return out;
}

bool registry_exists(const DataRoot& root) {
    std::error_code ec;
    return fs::is_regular_file(root.registry_file(), ec);
}

MachineRegistry load_registry(const DataRoot& root) {
    const auto text = read_file(root.registry_file());
    if (!text) {
        throw IoFailure(root.registry_file().string(), "registry file missing");
    }
    return parse_registry_text(*text);
}

void save_registry(const DataRoot& root, const MachineRegistry& registry) {
    const auto text = render_registry_text(registry);
    const auto target = root.registry_file();
    std::error_code ec;
    fs::create_directories(root.path(), ec);
    if (ec) {
        throw IoFailure(root.path().string(), ec.message());
    }
    const auto tmp = unique_temp(target);
    {
        Fd fd{::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644)};
        if (fd.get() < 0) {
            throw IoFailure(tmp.string(), errno_text());
        }
        write_all(fd.get(), text, tmp);
        ::fsync(fd.get());
    }
    if (::rename(tmp.c_str(), target.c_str()) != 0) {
        const auto err = errno_text();
        ::unlink(tmp.c_str());
        throw IoFailure(target.string(), err);
    }
}

// ---------------------------------------------------------------------------

WriterLock::WriterLock(const DataRoot& root) {
    const auto path = root.lock_file();
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) {
        throw IoFailure(path.string(), errno_text());
    }
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        const auto err = errno == EWOULDBLOCK ? std::string("held by another writer") : errno_text();
        ::close(fd_);
        fd_ = -1;
        throw IoFailure(path.string(), err);
    }
}

WriterLock::~WriterLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

} // namespace poolgaze
