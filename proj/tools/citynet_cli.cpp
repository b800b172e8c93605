// citynet: batch pipeline and scenario service front end.

#include <cmath>
#include <csignal>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "citynet/abm.hpp"
#include "citynet/centrality.hpp"
#include "citynet/csv.hpp"
#include "citynet/error.hpp"
#include "citynet/fixture.hpp"
#include "citynet/format.hpp"
#include "citynet/fragmentation.hpp"
#include "citynet/graph.hpp"
#include "citynet/ingest.hpp"
#include "citynet/mutation.hpp"
#include "citynet/service.hpp"
#include "citynet/zones.hpp"

using namespace citynet;
using nlohmann::json;

namespace {

// Writes to `path`, or stdout when it is empty or "-".
class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_.open(path, std::ios::binary);
            if (!file_) throw ValidationError("cannot write " + path);
        }
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

IntRange parse_range(const std::string& s) {
    const auto dots = s.find("..");
    auto num = [&](const std::string& v) {
        auto i = csv::parse_int(v);
        if (!i) throw CLI::ValidationError("range", "expected N or LO..HI, got '" + s + "'");
        return static_cast<int>(*i);
    };
    if (dots == std::string::npos) {
        const int v = num(s);
        return {v, v};
    }
    IntRange r{num(s.substr(0, dots)), num(s.substr(dots + 2))};
    if (r.lo > r.hi) throw CLI::ValidationError("range", "empty range '" + s + "'");
    return r;
}

DateWindow window_from(const std::string& from, const std::string& to) {
    DateWindow w;
    if (!from.empty()) {
        auto d = parse_date(from);
        if (!d) throw ValidationError("invalid --from date '" + from + "'");
        w.from = *d;
    }
    if (!to.empty()) {
        auto d = parse_date(to);
        if (!d) throw ValidationError("invalid --to date '" + to + "'");
        w.to = *d;
    }
    return w;
}

SpatialGraph load_graph(const std::string& path, const std::string& mutations) {
    SpatialGraph g = read_graph(path);
    if (!mutations.empty()) g = apply_mutations(g, parse_mutations_text(slurp(mutations)));
    return g;
}

// Centrality aligned with g: read from file when given (and no mutations were
// applied), computed otherwise.
std::vector<CityCentrality> centrality_for(const SpatialGraph& g, const std::string& path,
                                           bool mutated, const CentralityConfig& cfg) {
    if (!path.empty() && !mutated) {
        auto rows = read_centrality_csv(path);
        if (rows.size() != g.size()) throw ValidationError("centrality file does not match graph");
        return rows;
    }
    return compute_centrality(g, cfg);
}

std::vector<ConflictEvent> events_for(const SpatialGraph& g, const std::string& path,
                                      EventKind kind, const DateWindow& window, bool reassign) {
    if (path.empty()) return {};
    auto events = parse_events(std::filesystem::path(path), kind, window).events;
    bool missing = reassign;
    for (const auto& e : events) {
        if (!e.assigned_city || !g.index_of(*e.assigned_city)) missing = true;
    }
    if (missing) assign_nearest_city(events, g);
    return events;
}

void error_json(const std::string& kind, const std::string& message,
                std::optional<std::size_t> line = std::nullopt) {
    json j{{"error", kind}, {"message", message}};
    if (line) j["line"] = *line;
    std::cerr << j.dump() << '\n';
}

HttpService* g_service = nullptr;

void on_signal(int) {
    if (g_service != nullptr) g_service->stop();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"citynet: spatial interaction network analytics"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    // build-graph
    std::string cities_path, graph_out, landmask, sea_filter = "none", colocated = "reject",
                                                  flow_model = "gravity";
    GraphConfig gcfg;
    auto* build = app.add_subcommand("build-graph", "Gravity network from a city CSV");
    build->add_option("--cities", cities_path, "City CSV")->required()->check(CLI::ExistingFile);
    build->add_option("--radius-km", gcfg.radius_km, "Hard-disk radius")->capture_default_str();
    build->add_option("--min-pop", gcfg.min_population, "Population threshold")
        ->capture_default_str();
    build->add_option("--sea-filter", sea_filter, "none|landmask")->capture_default_str();
    build->add_option("--landmask", landmask, "Land polygons (GeoJSON)");
    build->add_option("--max-sea-km", gcfg.max_sea_km)->capture_default_str();
    build->add_option("--sea-sample-km", gcfg.sea_sample_km)->capture_default_str();
    build->add_option("--colocated", colocated, "reject|merge")->capture_default_str();
    build->add_option("--flow-model", flow_model, "gravity|uniform")->capture_default_str();
    build->add_option("--theta", gcfg.theta, "Recorded default theta")->capture_default_str();
    build->add_option("--out", graph_out, "Edge list path (sidecar <out>.json)")->required();

    // centrality
    std::string graph_path, mutations_path, cent_out, count_mode = "fractional";
    CentralityConfig ccfg;
    auto* cent = app.add_subcommand("centrality", "Degree, betweenness and strategic centrality");
    cent->add_option("--graph", graph_path)->required()->check(CLI::ExistingFile);
    cent->add_option("--theta", ccfg.theta)->capture_default_str();
    cent->add_option("--tie-tolerance", ccfg.tie_tolerance)->capture_default_str();
    cent->add_option("--count-mode", count_mode, "fractional|raw")->capture_default_str();
    cent->add_option("--mutations", mutations_path, "Mutation JSON applied first")
        ->check(CLI::ExistingFile);
    cent->add_option("--out", cent_out);

    // ingest-events
    std::string events_path, kind = "terrorism", from, to, events_out, report_out;
    auto* ingest = app.add_subcommand("ingest-events", "Parse events and assign nearest cities");
    ingest->add_option("--events", events_path)->required()->check(CLI::ExistingFile);
    ingest->add_option("--graph", graph_path)->required()->check(CLI::ExistingFile);
    ingest->add_option("--kind", kind, "terrorism|battle")->capture_default_str();
    ingest->add_option("--from", from, "Window start (default 2002-01-01)");
    ingest->add_option("--to", to, "Window end (default 2014-12-31)");
    ingest->add_option("--out", events_out);
    ingest->add_option("--report", report_out, "Rejection report JSON");

    // zones
    std::string cent_path, zones_out, thresholds_out, fit_path;
    ZoneConfig zcfg;
    ThresholdConfig tcfg;
    double fit_a = 4.0, fit_b = -9.0;
    auto* zones = app.add_subcommand("zones", "Zone metrics and threshold statistics");
    zones->add_option("--graph", graph_path)->required()->check(CLI::ExistingFile);
    zones->add_option("--centrality", cent_path)->check(CLI::ExistingFile);
    zones->add_option("--events", events_path, "Event CSV (assigned or raw)")
        ->check(CLI::ExistingFile);
    zones->add_option("--kind", kind)->capture_default_str();
    zones->add_option("--from", from);
    zones->add_option("--to", to);
    zones->add_option("--theta", ccfg.theta, "Used when centrality is computed")
        ->capture_default_str();
    zones->add_option("--count-mode", count_mode)->capture_default_str();
    zones->add_option("--radius-km", zcfg.radius_km)->capture_default_str();
    zones->add_option("--top-n", zcfg.top_n, "0 keeps all zones")->capture_default_str();
    zones->add_option("--major-threshold", zcfg.major_threshold)->capture_default_str();
    zones->add_option("--fit", fit_path, "Fit JSON for A*")->check(CLI::ExistingFile);
    zones->add_option("--a", fit_a)->capture_default_str();
    zones->add_option("--b", fit_b)->capture_default_str();
    zones->add_option("--threshold-d", tcfg.d)->capture_default_str();
    zones->add_option("--threshold-b", tcfg.b)->capture_default_str();
    zones->add_option("--threshold-s", tcfg.s)->capture_default_str();
    zones->add_option("--mutations", mutations_path)->check(CLI::ExistingFile);
    zones->add_option("--report", thresholds_out, "Threshold report JSON");
    zones->add_option("--out", zones_out);

    // fit
    std::string zones_path, fit_out, fit_mode = "exclude_zero";
    auto* fit = app.add_subcommand("fit", "Power-law fit of attacks on S_z");
    fit->add_option("--zones", zones_path)->required()->check(CLI::ExistingFile);
    fit->add_option("--mode", fit_mode, "exclude_zero|log_plus_one")->capture_default_str();
    fit->add_option("--top-n", zcfg.top_n, "Recorded selection size")->capture_default_str();
    fit->add_option("--out", fit_out);

    // predict
    std::vector<double> s_values;
    std::string predict_out;
    auto* predict = app.add_subcommand("predict", "Predicted attacks A* for S values or zones");
    predict->add_option("--fit", fit_path)->check(CLI::ExistingFile);
    predict->add_option("--a", fit_a)->capture_default_str();
    predict->add_option("--b", fit_b)->capture_default_str();
    auto* s_opt = predict->add_option("--s", s_values, "S values");
    auto* z_opt = predict->add_option("--zones", zones_path)->check(CLI::ExistingFile);
    s_opt->excludes(z_opt);
    predict->add_option("--out", predict_out);

    // outliers
    OutlierConfig ocfg;
    std::string outliers_out;
    auto* outliers = app.add_subcommand("outliers", "Vulnerable zones (few attacks for their S)");
    outliers->add_option("--zones", zones_path)->required()->check(CLI::ExistingFile);
    outliers->add_option("--fit", fit_path)->check(CLI::ExistingFile);
    outliers->add_option("--a", fit_a)->capture_default_str();
    outliers->add_option("--b", fit_b)->capture_default_str();
    outliers->add_option("--ratio", ocfg.ratio_threshold)->capture_default_str();
    outliers->add_option("--s-threshold", ocfg.s_threshold)->capture_default_str();
    outliers->add_option("--out", outliers_out);

    // fragment-sweep
    std::string m_range = "2..4", n_range = "1..6", k_range = "1..4", sweep_out;
    auto* sweep = app.add_subcommand("fragment-sweep", "Relay/core formulas vs computed metrics");
    sweep->add_option("--m", m_range)->capture_default_str();
    sweep->add_option("--n", n_range)->capture_default_str();
    sweep->add_option("--k", k_range)->capture_default_str();
    sweep->add_option("--out", sweep_out);

    // abm-run
    abm::AbmConfig acfg;
    std::string abm_config, update_mode = "synchronous", run_out, mod_out, rationality = "2";
    std::size_t torus_n = 0;
    double torus_degree = 8.0, abm_theta = 0.0;
    std::uint64_t torus_seed = 1;
    bool no_support = false;
    auto* abm_cmd = app.add_subcommand("abm-run", "Cultural-state agent-based model");
    auto* abm_graph = abm_cmd->add_option("--graph", graph_path)->check(CLI::ExistingFile);
    auto* abm_torus = abm_cmd->add_option("--torus-n", torus_n, "Use a toroidal geometric graph");
    abm_graph->excludes(abm_torus);
    abm_cmd->add_option("--torus-degree", torus_degree)->capture_default_str();
    abm_cmd->add_option("--torus-seed", torus_seed)->capture_default_str();
    abm_cmd->add_option("--config", abm_config, "Config JSON")->check(CLI::ExistingFile);
    abm_cmd->add_option("--rationality", rationality, "Exponent r, or 'inf'")
        ->capture_default_str();
    abm_cmd->add_option("--self-weight", acfg.self_weight)->capture_default_str();
    abm_cmd->add_flag("--no-same-state-support", no_support);
    abm_cmd->add_option("--update-mode", update_mode, "synchronous|asynchronous")
        ->capture_default_str();
    abm_cmd->add_option("--burn-in", acfg.burn_in)->capture_default_str();
    abm_cmd->add_option("--measure", acfg.measure_window)->capture_default_str();
    abm_cmd->add_option("--seed", acfg.seed)->capture_default_str();
    abm_cmd->add_option("--record-interval", acfg.record_interval)->capture_default_str();
    abm_cmd->add_option("--theta", abm_theta, "Theta of the betweenness in the flip report")
        ->capture_default_str();
    abm_cmd->add_option("--out", run_out, "Per-city flip rates CSV");
    abm_cmd->add_option("--modularity-out", mod_out, "Modularity series CSV");

    // holdout
    double b_threshold = 1e7, holdout_radius = 50.0;
    auto* holdout = app.add_subcommand("holdout", "Share of events near high-betweenness cities");
    holdout->add_option("--events", events_path)->required()->check(CLI::ExistingFile);
    holdout->add_option("--graph", graph_path)->required()->check(CLI::ExistingFile);
    holdout->add_option("--centrality", cent_path)->check(CLI::ExistingFile);
    holdout->add_option("--theta", ccfg.theta)->capture_default_str();
    holdout->add_option("--b-threshold", b_threshold)->capture_default_str();
    holdout->add_option("--radius-km", holdout_radius)->capture_default_str();
    holdout->add_option("--kind", kind)->capture_default_str();
    holdout->add_option("--from", from);
    holdout->add_option("--to", to);

    // serve
    std::string config_path, host;
    int port = -1;
    auto* serve = app.add_subcommand("serve", "HTTP scenario service");
    serve->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
    serve->add_option("--host", host);
    serve->add_option("--port", port);

    // gen-fixture
    std::string out_dir;
    std::uint64_t fixture_seed = 7;
    auto* gen = app.add_subcommand("gen-fixture", "Write the synthetic city/event fixture");
    gen->add_option("--out-dir", out_dir)->required();
    gen->add_option("--seed", fixture_seed)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        error_json("usage", e.what());
        return 2;
    }

    try {
        if (*build) {
            gcfg.sea_filter = parse_sea_filter(sea_filter);
            gcfg.colocated = parse_colocated_policy(colocated);
            gcfg.flow_model = parse_flow_model(flow_model);
            gcfg.landmask_path = landmask;
            if (gcfg.sea_filter == SeaFilter::landmask && landmask.empty()) {
                throw ValidationError("--sea-filter landmask needs --landmask");
            }
            const auto g = build_graph(read_cities_csv(std::filesystem::path(cities_path)), gcfg);
            write_graph(graph_out, g);
            std::cerr << json{{"cities", g.size()}, {"edges", g.edges().size()}}.dump() << '\n';
        } else if (*cent) {
            ccfg.count_mode = parse_count_mode(count_mode);
            const auto g = load_graph(graph_path, mutations_path);
            const auto rows = compute_centrality(g, ccfg);
            Output out(cent_out);
            write_centrality_csv(out.stream(), rows, ccfg);
        } else if (*ingest) {
            const auto g = read_graph(graph_path);
            auto parsed = parse_events(std::filesystem::path(events_path), parse_event_kind(kind),
                                       window_from(from, to));
            const auto summary = assign_nearest_city(parsed.events, g);
            Output out(events_out);
            write_events_csv(out.stream(), parsed.events);
            json report = json::parse(parsed.report.to_json());
            report["assigned"] = summary.assigned;
            report["mean_distance_km"] = summary.mean_distance_km;
            report["max_distance_km"] = summary.max_distance_km;
            if (!report_out.empty()) {
                Output r(report_out);
                r.stream() << report.dump(1) << '\n';
            } else {
                std::cerr << report.dump() << '\n';
            }
        } else if (*zones) {
            ccfg.count_mode = parse_count_mode(count_mode);
            const auto g = load_graph(graph_path, mutations_path);
            const bool mutated = !mutations_path.empty();
            const auto rows = centrality_for(g, cent_path, mutated, ccfg);
            const auto events = events_for(g, events_path, parse_event_kind(kind),
                                           window_from(from, to), mutated);
            const auto zs = make_zones(g, rows, events, zcfg);
            RiskFit rf;
            if (!fit_path.empty()) {
                rf = fit_from_json(slurp(fit_path));
            } else {
                rf.a = fit_a;
                rf.b = fit_b;
            }
            Output out(zones_out);
            write_zones_csv(out.stream(), zs, rf);
            if (!thresholds_out.empty()) {
                Output r(thresholds_out);
                r.stream() << threshold_report(zs, tcfg).to_json() << '\n';
            }
        } else if (*fit) {
            const auto zs = read_zones_csv(zones_path);
            const std::string selection =
                zcfg.top_n > 0 ? "top-" + std::to_string(zcfg.top_n) + " by zone population"
                               : "all zones";
            const auto rf = fit_power_law(zs, parse_fit_mode(fit_mode), selection);
            Output out(fit_out);
            out.stream() << fit_json(rf, zcfg) << '\n';
        } else if (*predict || *outliers) {
            RiskFit rf;
            if (!fit_path.empty()) {
                rf = fit_from_json(slurp(fit_path));
            } else {
                rf.a = fit_a;
                rf.b = fit_b;
            }
            if (*predict) {
                Output out(predict_out);
                if (!zones_path.empty()) {
                    out.stream() << "center_city_id,S_z,A_star\n";
                    for (const auto& z : read_zones_csv(zones_path)) {
                        const auto p = predict_attacks(z.s, rf);
                        out.stream() << z.center << ',' << fmt_double(z.s) << ','
                                     << (p ? fmt_double(*p) : std::string()) << '\n';
                    }
                } else {
                    if (s_values.empty()) throw ValidationError("predict needs --s or --zones");
                    out.stream() << "S,A_star\n";
                    for (double s : s_values) {
                        const auto p = predict_attacks(s, rf);
                        out.stream() << fmt_double(s) << ','
                                     << (p ? fmt_double(*p) : std::string()) << '\n';
                    }
                }
            } else {
                const auto zs = read_zones_csv(zones_path);
                Output out(outliers_out);
                out.stream() << "center_city_id,S_z,A_z,A_star,ratio\n";
                for (const auto& o : vulnerability_outliers(zs, rf, ocfg)) {
                    out.stream() << o.center << ',' << fmt_double(o.s) << ',' << o.attacks << ','
                                 << fmt_double(o.predicted) << ',' << fmt_double(o.ratio) << '\n';
                }
            }
        } else if (*sweep) {
            const auto rows =
                fragment_sweep(parse_range(m_range), parse_range(n_range), parse_range(k_range));
            Output out(sweep_out);
            write_sweep_csv(out.stream(), rows);
            std::size_t mismatches = 0;
            for (const auto& r : rows) {
                // B sums path fractions in a different order than the closed form
                const bool b_ok =
                    std::abs(r.b_formula - r.b_computed) <= 1e-12 * std::abs(r.b_formula);
                if (r.d_formula != r.d_computed || !b_ok || !r.degrees_uniform) {
                    ++mismatches;
                }
            }
            std::cerr << json{{"rows", rows.size()}, {"mismatches", mismatches}}.dump() << '\n';
            if (mismatches > 0) return 1;
        } else if (*abm_cmd) {
            if (!abm_config.empty()) acfg = abm::config_from_json(slurp(abm_config));
            if (abm_cmd->count("--rationality") > 0 || abm_config.empty()) {
                if (rationality == "inf") {
                    acfg.rationality = abm::kArgmax;
                } else {
                    auto r = csv::parse_double(rationality);
                    if (!r) throw ValidationError("invalid --rationality '" + rationality + "'");
                    acfg.rationality = *r;
                }
            }
            if (abm_cmd->count("--update-mode") > 0 || abm_config.empty()) {
                acfg.update_mode = abm::parse_update_mode(update_mode);
            }
            if (no_support) acfg.same_state_support = false;
            SpatialGraph g;
            if (torus_n > 0) {
                const double radius =
                    std::sqrt(torus_degree / (static_cast<double>(torus_n) * std::numbers::pi));
                g = abm::toroidal_geometric_graph(torus_n, radius, 1.0, torus_seed).graph;
            } else if (!graph_path.empty()) {
                g = read_graph(graph_path);
            } else {
                throw ValidationError("abm-run needs --graph or --torus-n");
            }
            const auto run = abm::run(g, acfg);
            CentralityConfig bcfg;
            bcfg.theta = abm_theta;
            const auto b = betweenness_all(g, bcfg);
            if (!run_out.empty()) {
                Output out(run_out);
                abm::write_run_csv(out.stream(), run, g, b);
            }
            if (!mod_out.empty()) {
                Output out(mod_out);
                abm::write_modularity_csv(out.stream(), run);
            }
            const auto report = abm::flip_betweenness_report(run, b);
            double q_sum = 0.0;
            std::size_t q_n = 0;
            for (std::size_t i = 0; i < run.recorded_steps.size(); ++i) {
                if (run.recorded_steps[i] > acfg.burn_in) {
                    q_sum += run.modularity_series[i];
                    ++q_n;
                }
            }
            json summary{{"cities", g.size()},
                         {"edges", g.edges().size()},
                         {"seed", acfg.seed},
                         {"config_hash", hex64(fnv1a64(abm::config_json(acfg)))},
                         {"mean_modularity_measure", q_n ? json(q_sum / q_n) : json()},
                         {"spearman_flip_betweenness",
                          report.spearman ? json(*report.spearman) : json()},
                         {"decile_mean_flip", report.decile_mean_flip}};
            std::cout << summary.dump(1) << '\n';
        } else if (*holdout) {
            const auto g = read_graph(graph_path);
            const auto rows = centrality_for(g, cent_path, false, ccfg);
            const auto events = parse_events(std::filesystem::path(events_path),
                                             parse_event_kind(kind), window_from(from, to))
                                    .events;
            const auto hubs = high_betweenness_cities(g, rows, b_threshold);
            const auto frac = holdout_proximity(events, hubs, holdout_radius);
            std::cout << json{{"events", events.size()},
                              {"high_betweenness_cities", hubs.size()},
                              {"radius_km", holdout_radius},
                              {"fraction_within", frac ? json(*frac) : json()}}
                             .dump(1)
                      << '\n';
        } else if (*serve) {
            auto cfg = load_service_config(config_path);
            if (!host.empty()) cfg.host = host;
            if (port >= 0) cfg.port = port;
            auto store = make_store(cfg);
            HttpService service(*store, cfg.retry_after_ms);
            const int bound = service.bind(cfg.host, cfg.port);
            std::cerr << json{{"listening", cfg.host}, {"port", bound}}.dump() << std::endl;
            g_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            service.listen();
            g_service = nullptr;
        } else if (*gen) {
            std::filesystem::create_directories(out_dir);
            const auto f = make_fixture(fixture_seed);
            {
                Output out((std::filesystem::path(out_dir) / "cities.csv").string());
                write_cities_csv(out.stream(), f.cities);
            }
            std::ofstream ev(std::filesystem::path(out_dir) / "events.csv", std::ios::binary);
            ev << "event_id,date,lat,lon,deaths,kind\n";
            for (const auto& e : f.events) {
                ev << e.id << ',' << to_string(e.date) << ',' << fmt_double(e.lat) << ','
                   << fmt_double(e.lon) << ',' << (e.deaths ? std::to_string(*e.deaths) : "")
                   << ',' << to_string(e.kind) << '\n';
            }
        }
    } catch (const MutationError& e) {
        std::cerr << e.to_json().dump() << '\n';
        return 1;
    } catch (const ParseError& e) {
        error_json(e.kind(), e.what(), e.line());
        return 1;
    } catch (const CLI::ValidationError& e) {
        error_json("usage", e.what());
        return 2;
    } catch (const Error& e) {
        error_json(e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        error_json("internal", e.what());
        return 1;
    }
    return 0;
}
