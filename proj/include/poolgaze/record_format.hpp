#pragma once

// The pipe-delimited record format shared by sources, the collector and the
// on-disk store. One record per line, empty field for an absent optional:
//
//   S|<time>|<machine>|<slot>|<state>|<activity>|<load>|<job_id>|<owner>
//   M|<time>|<machine>|<slots>|<os>|<os_version>|<mem>|<mem,per,slot>|<disk>|<disk,per,slot>|<load>|<condor_load>
//   Q|<user>|<running>|<idle>|<held>
//   R|<machine>|<slots>|<d:HH:MM-HH:MM;...>
//
// Times are "YYYY-MM-DDTHH:MM:SSZ"; loads carry exactly two decimals.

#include "poolgaze/model.hpp"

#include <string>
#include <string_view>
#include <variant>

namespace poolgaze {

inline constexpr std::string_view kFormatHeader = "#congusto-format 1";
inline constexpr std::string_view kFormatHeaderPrefix = "#congusto-format ";

using Record = std::variant<SlotObservation, MachineRecord>;

/// Strict parse of one S or M line (no trailing newline). Throws MalformedRecord.
Record parse_record_line(std::string_view line);

std::string render_record_line(const SlotObservation& obs);
std::string render_record_line(const MachineRecord& rec);
std::string render_record_line(const Record& rec);

/// Returns true for the supported version header, false for a line that is
/// not a header at all; throws MalformedRecord for any other version.
bool is_format_header(std::string_view line);

std::optional<Load> parse_load(std::string_view text);

/// Groups S and M lines into a snapshot stamped at `taken_at`. Machines listed
/// in `registry` but absent from the text come back unreachable.
PoolSnapshot parse_status_output(std::string_view text, Instant taken_at,
                                 const MachineRegistry* registry = nullptr);

/// Renders a snapshot back into status text (S and M lines only).
std::string render_status_output(const PoolSnapshot& snapshot);

QueueSummary parse_queue_output(std::string_view text);
std::string render_queue_output(const QueueSummary& queue);

RegistryEntry parse_registry_line(std::string_view line);
std::string render_registry_line(const RegistryEntry& entry);

/// Splits on '\n'. A final segment without a terminating newline is returned
/// with `complete == false`.
struct TextLine {
    std::string_view text;
    std::size_t number; // 1-based
    bool complete;
};
std::vector<TextLine> split_lines(std::string_view text);

} // namespace poolgaze
