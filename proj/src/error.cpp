#include "poolgaze/error.hpp"

#include <fmt/format.h>

namespace poolgaze {

namespace {

std::string describe(const std::string& reason, std::size_t offset, const std::string& context) {
    if (context.empty()) {
        return fmt::format("malformed record: {} (byte {})", reason, offset);
    }
    return fmt::format("malformed record at {}: {} (byte {})", context, reason, offset);
}

} // namespace

MalformedRecord::MalformedRecord(std::string reason, std::size_t offset, std::string context)
    : Error(describe(reason, offset, context)),
      reason_(std::move(reason)),
      offset_(offset),
      context_(std::move(context)) {}

MalformedRecord MalformedRecord::with_context(std::string context) const {
    return MalformedRecord(reason_, offset_, std::move(context));
}

DuplicateSlot::DuplicateSlot(std::string machine, int slot)
    : Error(fmt::format("duplicate slot {} for machine {}", slot, machine)), machine_(std::move(machine)), slot_(slot) {}

IoFailure::IoFailure(std::string path, const std::string& what)
    : Error(fmt::format("I/O failure on {}: {}", path, what)), path_(std::move(path)) {}

} // namespace poolgaze
