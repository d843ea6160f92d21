#pragma once

#include "poolgaze/model.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <stop_token>
#include <thread>

namespace poolgaze::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

/// Help requests exit 0; every other parse problem is a configuration error.
int parse_error_exit(CLI::App& app, const CLI::ParseError& e);

/// Parses an optional "--now" override, falling back to the wall clock.
Instant now_or(const std::string& text);

/// Blocks SIGINT and SIGTERM in the calling thread (and every thread it
/// starts afterwards) and requests `stop` when one arrives.
class SignalStopper {
public:
    explicit SignalStopper(std::stop_source stop);
    ~SignalStopper();
    SignalStopper(const SignalStopper&) = delete;
    SignalStopper& operator=(const SignalStopper&) = delete;

private:
    sigset_t set_{};
    std::stop_source stop_;
    std::atomic<bool> fired_{false};
    std::jthread waiter_;
};

} // namespace poolgaze::cli
