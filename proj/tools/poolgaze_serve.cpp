// Serves the JSON API over a data root and a live status source.

#include "cli_common.hpp"

#include "poolgaze/api.hpp"
#include "poolgaze/error.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <charconv>

using namespace poolgaze;

namespace {

std::pair<std::string, int> parse_listen(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0) {
        throw InvalidValue(fmt::format("listen address '{}' is not HOST:PORT", text));
    }
    int port = 0;
    const auto* first = text.data() + colon + 1;
    const auto* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, port);
    if (ec != std::errc{} || ptr != last || port < 0 || port > 65535) {
        throw InvalidValue(fmt::format("listen port in '{}' is invalid", text));
    }
    return {text.substr(0, colon), port};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Serve pool history and live status as JSON over HTTP."};
    ServiceConfig config;
    std::string data_root;
    std::string source_spec;
    std::string listen;
    app.add_option("--data-root", data_root, "Data root written by the collector")->required();
    app.add_option("--source", source_spec, "cmd:COMMAND, file:PATH or sim:SCENARIO_FILE")->required();
    app.add_option("--listen", listen, "HOST:PORT to bind")->required();
    app.add_option("--refresh-cache-s", config.cache_s, "Lifetime of the live snapshot cache")
        ->default_val(5)
        ->check(CLI::Range(0, 3600));
    app.add_option("--interval-s", config.interval_s, "Collector polling interval")->default_val(300);
    app.add_option("--cors-origin", config.cors_origin, "Value of Access-Control-Allow-Origin")->default_val("*");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return cli::parse_error_exit(app, e);
    }

    std::unique_ptr<StatusSource> source;
    std::unique_ptr<ApiService> service;
    std::pair<std::string, int> address;
    try {
        config.data_root = data_root;
        address = parse_listen(listen);
        source = make_source(source_spec);
        service = std::make_unique<ApiService>(config, *source);
    } catch (const std::exception& e) {
        fmt::print(stderr, "configuration error: {}\n", e.what());
        return cli::kExitConfig;
    }

    httplib::Server server;
    register_routes(server, *service);
    std::stop_source stop;
    cli::SignalStopper stopper(stop);
    std::stop_callback on_stop(stop.get_token(), [&server] { server.stop(); });
    if (!server.bind_to_port(address.first, address.second)) {
        fmt::print(stderr, "configuration error: cannot listen on {}\n", listen);
        return cli::kExitConfig;
    }
    fmt::print(stderr, "listening on {}\n", listen);
    server.listen_after_bind();
    return cli::kExitOk;
}
