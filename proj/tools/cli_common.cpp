#include "cli_common.hpp"

#include "poolgaze/error.hpp"

#include <fmt/format.h>

#include <pthread.h>

namespace poolgaze::cli {

int parse_error_exit(CLI::App& app, const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
        return app.exit(e);
    }
    app.exit(e);
    return kExitConfig;
}

Instant now_or(const std::string& text) {
    if (text.empty()) {
        return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
    }
    if (auto t = parse_instant(text)) {
        return *t;
    }
    throw InvalidValue(fmt::format("'{}' is not a YYYY-MM-DDTHH:MM:SSZ instant", text));
}

SignalStopper::SignalStopper(std::stop_source stop) : stop_(std::move(stop)) {
    sigemptyset(&set_);
    sigaddset(&set_, SIGINT);
    sigaddset(&set_, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set_, nullptr);
    waiter_ = std::jthread([this](std::stop_token) {
        int sig = 0;
        sigwait(&set_, &sig);
        fired_ = true;
        stop_.request_stop();
    });
}

SignalStopper::~SignalStopper() {
    if (!fired_) {
        // Wake the waiter so it can be joined.
        pthread_kill(waiter_.native_handle(), SIGTERM);
    }
}

} // namespace poolgaze::cli
