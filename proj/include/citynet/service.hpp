#pragma once

#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <string>

#include "citynet/graph.hpp"
#include "citynet/ingest.hpp"
#include "citynet/scenario.hpp"

namespace httplib {
class Server;
}

namespace citynet {

/// Service configuration, read from `key = value` lines (`#` comments).
/// Relative paths are resolved against the config file's directory.
struct ServiceConfig {
    std::filesystem::path cities; // city CSV, built with `graph` settings
    std::filesystem::path graph;  // or a prebuilt edge list (takes precedence)
    std::filesystem::path events; // optional event CSV
    EventKind event_kind = EventKind::terrorism;
    DateWindow window;
    GraphConfig graph_config;
    AnalysisConfig analysis;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::optional<std::filesystem::path> log_dir;
    int retry_after_ms = 500;
};

ServiceConfig parse_service_config(std::istream& in,
                                   const std::filesystem::path& base_dir = {});
ServiceConfig load_service_config(const std::filesystem::path& path);

/// Loads the base graph and events named by the config.
std::unique_ptr<ScenarioStore> make_store(const ServiceConfig& cfg);

/// HTTP front end of a ScenarioStore.
///   POST /scenarios                        {"from"?: id, "mutations"?: [...]}
///   GET  /scenarios, /scenarios/{id}
///   POST /scenarios/{id}/mutations         [...] or {"mutations": [...]}
///   GET  /scenarios/{id}/metrics | /risk | /geojson
///   GET  /scenarios/{id}/diff?against={id}
/// Unknown scenarios give 404, rejected mutations 422 with field reasons,
/// and reads during a pending recompute 409 with a retry hint.
class HttpService {
public:
    explicit HttpService(ScenarioStore& store, int retry_after_ms = 500);
    ~HttpService();

    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Binds the socket; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void listen();
    void stop();

private:
    void routes();

    ScenarioStore& store_;
    int retry_after_ms_;
    std::unique_ptr<httplib::Server> server_;
};

} // namespace citynet
