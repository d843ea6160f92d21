#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace poolgaze {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A line that does not conform to the record format. `offset` is the byte
/// offset inside the offending line; `context` names the file and line when
/// the record came from storage.
class MalformedRecord : public Error {
public:
    MalformedRecord(std::string reason, std::size_t offset, std::string context = {});

    const std::string& reason() const noexcept { return reason_; }
    std::size_t offset() const noexcept { return offset_; }
    const std::string& context() const noexcept { return context_; }

    MalformedRecord with_context(std::string context) const;

private:
    std::string reason_;
    std::size_t offset_;
    std::string context_;
};

class DuplicateSlot : public Error {
public:
    DuplicateSlot(std::string machine, int slot);
    const std::string& machine() const noexcept { return machine_; }
    int slot() const noexcept { return slot_; }

private:
    std::string machine_;
    int slot_;
};

class IoFailure : public Error {
public:
    IoFailure(std::string path, const std::string& what);
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class RoutingError : public Error {
public:
    using Error::Error;
};

class SourceUnavailable : public Error {
public:
    using Error::Error;
};

class UnsortedInput : public Error {
public:
    using Error::Error;
};

class MixedMachines : public Error {
public:
    using Error::Error;
};

class SlotCountMismatch : public Error {
public:
    using Error::Error;
};

class InvalidScenario : public Error {
public:
    using Error::Error;
};

/// Violated construction-time invariant of a domain value.
class InvalidValue : public Error {
public:
    using Error::Error;
};

} // namespace poolgaze
