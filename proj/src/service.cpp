#include "citynet/service.hpp"

#include <algorithm>
#include <fstream>

#include "httplib.h"
#include "json.hpp"

#include "citynet/csv.hpp"
#include "citynet/error.hpp"

namespace citynet {

using nlohmann::json;

namespace {

double to_double(const std::string& key, const std::string& v) {
    auto d = csv::parse_double(v);
    if (!d) throw ValidationError("config key '" + key + "': expected a number, got '" + v + "'");
    return *d;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
    auto d = csv::parse_int(v);
    if (!d) throw ValidationError("config key '" + key + "': expected an integer, got '" + v + "'");
    return *d;
}

Date to_date(const std::string& key, const std::string& v) {
    auto d = parse_date(v);
    if (!d) throw ValidationError("config key '" + key + "': expected YYYY-MM-DD, got '" + v + "'");
    return *d;
}

std::string unquote(std::string_view v) {
    if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
        v = v.substr(1, v.size() - 2);
    }
    return std::string(v);
}

void send_json(httplib::Response& res, int status, const json& body,
               const char* type = "application/json") {
    res.status = status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(body.dump(), type);
}

void send_error(httplib::Response& res, int status, const std::string& kind,
                const std::string& message) {
    send_json(res, status, {{"error", kind}, {"message", message}});
}

} // namespace

ServiceConfig parse_service_config(std::istream& in, const std::filesystem::path& base_dir) {
    ServiceConfig c;
    auto path = [&](const std::string& v) {
        std::filesystem::path p(v);
        return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto body = csv::trim(line);
        if (body.empty() || body.front() == '#' || body.front() == '[') continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw ParseError(lineno, "expected key = value");
        const std::string key(csv::trim(body.substr(0, eq)));
        const std::string v = unquote(csv::trim(body.substr(eq + 1)));

        if (key == "cities") c.cities = path(v);
        else if (key == "graph") c.graph = path(v);
        else if (key == "events") c.events = path(v);
        else if (key == "event_kind") c.event_kind = parse_event_kind(v);
        else if (key == "window_from") c.window.from = to_date(key, v);
        else if (key == "window_to") c.window.to = to_date(key, v);
        else if (key == "radius_km") c.graph_config.radius_km = to_double(key, v);
        else if (key == "min_population") c.graph_config.min_population = to_double(key, v);
        else if (key == "sea_filter") c.graph_config.sea_filter = parse_sea_filter(v);
        else if (key == "landmask") c.graph_config.landmask_path = path(v).string();
        else if (key == "colocated") c.graph_config.colocated = parse_colocated_policy(v);
        else if (key == "flow_model") c.graph_config.flow_model = parse_flow_model(v);
        else if (key == "theta") c.analysis.centrality.theta = to_double(key, v);
        else if (key == "tie_tolerance") c.analysis.centrality.tie_tolerance = to_double(key, v);
        else if (key == "count_mode") c.analysis.centrality.count_mode = parse_count_mode(v);
        else if (key == "zone_radius_km") c.analysis.zones.radius_km = to_double(key, v);
        else if (key == "top_n") c.analysis.zones.top_n = static_cast<std::size_t>(to_int(key, v));
        else if (key == "major_threshold") c.analysis.zones.major_threshold = to_double(key, v);
        else if (key == "fit_a") c.analysis.fit_a = to_double(key, v);
        else if (key == "fit_b") c.analysis.fit_b = to_double(key, v);
        else if (key == "threshold_d") c.analysis.thresholds.d = to_double(key, v);
        else if (key == "threshold_b") c.analysis.thresholds.b = to_double(key, v);
        else if (key == "threshold_s") c.analysis.thresholds.s = to_double(key, v);
        else if (key == "outlier_ratio") c.analysis.outliers.ratio_threshold = to_double(key, v);
        else if (key == "outlier_s") c.analysis.outliers.s_threshold = to_double(key, v);
        else if (key == "host") c.host = v;
        else if (key == "port") c.port = static_cast<int>(to_int(key, v));
        else if (key == "log_dir") c.log_dir = path(v);
        else if (key == "retry_after_ms") c.retry_after_ms = static_cast<int>(to_int(key, v));
        else throw ParseError(lineno, "unknown config key '" + key + "'");
    }
    if (c.cities.empty() && c.graph.empty()) {
        throw ValidationError("config needs either 'cities' or 'graph'");
    }
    c.graph_config.theta = c.analysis.centrality.theta;
    validate(c.analysis.centrality);
    validate(c.analysis.zones);
    if (c.port < 0 || c.port > 65535) throw ValidationError("port out of range");
    return c;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path.string());
    return parse_service_config(in, path.parent_path());
}

std::unique_ptr<ScenarioStore> make_store(const ServiceConfig& cfg) {
    SpatialGraph g = !cfg.graph.empty() ? read_graph(cfg.graph)
                                        : build_graph(read_cities_csv(cfg.cities), cfg.graph_config);
    std::vector<ConflictEvent> events;
    if (!cfg.events.empty()) events = parse_events(cfg.events, cfg.event_kind, cfg.window).events;
    return std::make_unique<ScenarioStore>(std::move(g), std::move(events), cfg.analysis,
                                           cfg.log_dir);
}

HttpService::HttpService(ScenarioStore& store, int retry_after_ms)
    : store_(store), retry_after_ms_(retry_after_ms), server_(std::make_unique<httplib::Server>()) {
    routes();
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = server_->bind_to_any_port(host);
        if (p < 0) throw ValidationError("cannot bind " + host);
        return p;
    }
    if (!server_->bind_to_port(host, port)) {
        throw ValidationError("cannot bind " + host + ":" + std::to_string(port));
    }
    return port;
}

void HttpService::listen() { server_->listen_after_bind(); }

void HttpService::stop() {
    if (server_) server_->stop();
}

void HttpService::routes() {
    auto& srv = *server_;

    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                                 std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const MutationError& e) {
            send_json(res, 422, e.to_json());
        } catch (const NotFoundError& e) {
            send_error(res, 404, e.kind(), e.what());
        } catch (const Error& e) {
            send_error(res, 400, e.kind(), e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    });

    // Runs `fn` with fresh metrics, or answers 409 while a recompute is pending.
    auto with_metrics = [this](const std::string& id, httplib::Response& res, auto&& fn) {
        const auto st = store_.status(id);
        auto m = store_.metrics(id);
        if (!m) {
            if (!st.error.empty()) {
                send_error(res, 500, "recompute_failed", st.error);
                return;
            }
            const int seconds = std::max(1, (retry_after_ms_ + 999) / 1000);
            res.set_header("Retry-After", std::to_string(seconds));
            send_json(res, 409,
                      {{"error", "stale"},
                       {"message", "metrics are being recomputed"},
                       {"retry_after_ms", retry_after_ms_},
                       {"version", st.version}});
            return;
        }
        fn(*m);
    };

    srv.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}});
    });

    srv.Get("/scenarios", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"scenarios", store_.ids()}});
    });

    srv.Post("/scenarios", [this](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::string> from;
        std::vector<Mutation> mutations;
        if (!csv::trim(req.body).empty()) {
            json body;
            try {
                body = json::parse(req.body);
            } catch (const json::parse_error& e) {
                throw MutationError(0, {{"", std::string("invalid JSON: ") + e.what()}});
            }
            if (!body.is_object()) throw MutationError(0, {{"", "expected a JSON object"}});
            if (body.contains("from") && !body["from"].is_null()) {
                if (!body["from"].is_string()) throw MutationError(0, {{"from", "must be a string"}});
                from = body["from"].get<std::string>();
            }
            if (body.contains("mutations")) mutations = parse_mutations(body["mutations"]);
        }
        const auto id = store_.create(from, mutations);
        const auto st = store_.status(id);
        send_json(res, 201, {{"id", id}, {"version", st.version}, {"stale", st.stale}});
    });

    srv.Get("/scenarios/:id", [this](const httplib::Request& req, httplib::Response& res) {
        const auto& id = req.path_params.at("id");
        const auto st = store_.status(id);
        const auto log = store_.log(id);
        json body = {{"id", id},
                     {"version", st.version},
                     {"stale", st.stale},
                     {"mutations", to_json(std::span<const Mutation>(log))}};
        if (!st.error.empty()) body["error"] = st.error;
        send_json(res, 200, body);
    });

    srv.Post("/scenarios/:id/mutations", [this](const httplib::Request& req,
                                                httplib::Response& res) {
        const auto& id = req.path_params.at("id");
        store_.status(id); // 404 before looking at the body
        const auto mutations = parse_mutations_text(req.body);
        const auto version = store_.submit(id, mutations);
        send_json(res, 202, {{"id", id}, {"version", version}, {"stale", true},
                             {"accepted", mutations.size()}});
    });

    srv.Get("/scenarios/:id/metrics", [this, with_metrics](const httplib::Request& req,
                                                          httplib::Response& res) {
        with_metrics(req.path_params.at("id"), res,
                     [&](const Metrics& m) { send_json(res, 200, metrics_json(m)); });
    });

    srv.Get("/scenarios/:id/risk", [this, with_metrics](const httplib::Request& req,
                                                       httplib::Response& res) {
        with_metrics(req.path_params.at("id"), res, [&](const Metrics& m) {
            send_json(res, 200, risk_json(m, store_.config()));
        });
    });

    srv.Get("/scenarios/:id/geojson", [this, with_metrics](const httplib::Request& req,
                                                          httplib::Response& res) {
        with_metrics(req.path_params.at("id"), res, [&](const Metrics& m) {
            send_json(res, 200, geojson(m, store_.config()), "application/geo+json");
        });
    });

    srv.Get("/scenarios/:id/diff", [this, with_metrics](const httplib::Request& req,
                                                       httplib::Response& res) {
        const auto& id = req.path_params.at("id");
        if (!req.has_param("against")) {
            send_json(res, 422,
                      {{"error", "invalid_request"},
                       {"fields", {{{"field", "against"}, {"reason", "required"}}}}});
            return;
        }
        const auto against = req.get_param_value("against");
        store_.status(against); // 404 for an unknown comparison scenario
        with_metrics(id, res, [&](const Metrics& mine) {
            with_metrics(against, res, [&](const Metrics& base) {
                json body = diff_json(base, mine, store_.config());
                body["id"] = id;
                body["against"] = against;
                send_json(res, 200, body);
            });
        });
    });
}

} // namespace citynet
