// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <thread>

#include <omp.h>

#include "httplib.h"
#include "json.hpp"
#include "oracles.hpp"
#include "process.hpp"

#include "citynet/abm.hpp"
#include "citynet/centrality.hpp"
#include "citynet/fixture.hpp"
#include "citynet/fragmentation.hpp"
#include "citynet/service.hpp"
#include "citynet/zones.hpp"

using namespace citynet;
using nlohmann::json;

namespace {

constexpr double kKmPerDeg = kEarthRadiusKm * std::numbers::pi / 180.0;

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// --- betweenness vs path enumeration ---------------------------------------

Outcome oracle_equivalence() {
    std::size_t graphs = 0, mismatches = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        std::mt19937_64 pick(seed * 7919);
        const std::size_t n = 2 + pick() % 39; // 2..40
        const double p = std::array{0.06, 0.12, 0.25, 0.5, 0.8}[seed % 5];
        const bool ties = seed % 4 == 0;
        const auto g = oracle::random_graph(seed, n, p, ties);
        ++graphs;
        for (double theta : {0.0, 0.5, 1.0}) {
            CentralityConfig cfg;
            cfg.theta = theta;
            const auto got = betweenness_all(g, cfg);
            const auto want = oracle::betweenness(g, theta, true);
            const double tol = theta == 0.0 ? 1e-12 : 1e-6;
            for (std::size_t i = 0; i < n; ++i) {
                const double scale = std::max(std::abs(want[i]), 1e-12);
                worst = std::max(worst, std::abs(got[i] - want[i]) / scale);
                if (!oracle::close_rel(got[i], want[i], tol)) ++mismatches;
            }
        }
    }
    return {mismatches == 0,
            fmt("%zu graphs x 3 theta, %zu mismatches, worst rel diff %.2e", graphs, mismatches,
                worst)};
}

// --- relay/core closed forms -------------------------------------------------

Outcome fragmentation_algebra() {
    const auto rows = fragment_sweep({2, 4}, {1, 6}, {1, 4});
    std::size_t bad = 0;
    for (const auto& r : rows) {
        const bool d_ok = r.d_formula == r.d_computed && r.degrees_uniform;
        const bool b_ok = oracle::close_rel(r.b_formula, r.b_computed, 1e-12);
        const double s = r.b_computed / static_cast<double>(r.d_computed);
        const bool s_ok = oracle::close_rel(r.s_exact, s, 1e-12);
        if (!(d_ok && b_ok && s_ok)) ++bad;
    }
    return {bad == 0 && rows.size() == 72, fmt("%zu (M,N,K) cases, %zu disagree", rows.size(), bad)};
}

// --- power-law recovery --------------------------------------------------------

Outcome regression_recovery() {
    std::size_t good = 0;
    double a_lo = 1e9, a_hi = -1e9, r2_lo = 1e9;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> log_s(2.75, 3.5);
        std::normal_distribution<double> noise(0.0, 0.3);
        std::vector<ZoneMetrics> zones(250);
        for (std::size_t i = 0; i < zones.size(); ++i) {
            const double ls = log_s(rng);
            zones[i].center = static_cast<CityId>(i + 1);
            zones[i].s = std::pow(10.0, ls);
            const double a = std::round(std::pow(10.0, 4.0 * ls - 9.0 + noise(rng)));
            zones[i].attacks = static_cast<std::size_t>(std::max(a, 0.0));
        }
        const auto fit = fit_power_law(zones, FitMode::exclude_zero, "top-250 synthetic");
        a_lo = std::min(a_lo, fit.a);
        a_hi = std::max(a_hi, fit.a);
        r2_lo = std::min(r2_lo, fit.r2_adjusted);
        if (fit.a >= 3.6 && fit.a <= 4.4 && fit.r2_adjusted > 0.7) ++good;
    }
    return {good >= 95, fmt("%zu/100 seeds in range; a in [%.3f, %.3f], min adj R2 %.3f", good,
                            a_lo, a_hi, r2_lo)};
}

// --- threshold report -----------------------------------------------------------

Outcome threshold_report_check() {
    // six cities on the equator, 10 degrees apart, so every zone holds only
    // its centre; majors (A > 100) at lon 0, 20 and 50
    std::vector<City> cities;
    for (CityId i = 1; i <= 6; ++i) {
        cities.push_back({i, "z" + std::to_string(i), "", "", 0.0, 10.0 * (i - 1), 50000.0});
    }
    GraphConfig gc;
    const auto g = build_graph(cities, gc);
    const std::vector<std::pair<std::size_t, double>> db{
        {20000, 5e8}, {5000, 2e7}, {5000, 1e6}, {20000, 1e6}, {30000, 4e8}, {100, 5e6}};
    std::vector<CityCentrality> rows;
    for (std::size_t i = 0; i < 6; ++i) {
        rows.push_back({static_cast<CityId>(i + 1), db[i].first, db[i].second,
                        db[i].second / static_cast<double>(db[i].first)});
    }
    const std::vector<std::size_t> attacks{150, 0, 101, 100, 3, 200};
    std::vector<ConflictEvent> events;
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t k = 0; k < attacks[i]; ++k) {
            ConflictEvent e;
            e.lat = 0.0;
            e.lon = 10.0 * static_cast<double>(i);
            e.assigned_city = static_cast<CityId>(i + 1);
            e.deaths = 1;
            events.push_back(e);
        }
    }
    const auto zones = make_zones(g, rows, events, ZoneConfig{});
    const auto r = threshold_report(zones);

    std::vector<std::string> wrong;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok) wrong.push_back(what);
    };
    auto p_is = [](const std::optional<double>& v, double want) { return v && *v == want; };
    auto km = [](double deg) { return deg * kKmPerDeg; };
    auto near = [](const std::optional<double>& v, double want) {
        return v && oracle::close_rel(*v, want, 1e-12);
    };

    expect(r.zones == 6 && r.major_zones == 3, "zone counts");
    const auto& d = r.panels[0];
    expect(d.above == 3 && d.below == 3, "D counts");
    expect(p_is(d.p_major_above, 1.0 / 3.0), "P(major | D above)");
    expect(p_is(d.p_major_below, 2.0 / 3.0), "P(major | D below)");
    const auto& b = r.panels[1];
    expect(b.above == 3 && b.below == 3, "B counts");
    expect(p_is(b.p_major_above, 1.0 / 3.0), "P(major | B above)");
    expect(p_is(b.p_major_below, 2.0 / 3.0), "P(major | B below)");
    const auto& s = r.panels[2];
    expect(s.above == 3 && s.below == 3, "S counts");
    expect(p_is(s.p_major_above, 2.0 / 3.0), "P(major | S above)");
    expect(p_is(s.p_major_below, 1.0 / 3.0), "P(major | S below)");

    const std::array<double, 6> dist_deg{20, 10, 20, 10, 10, 30};
    for (std::size_t i = 0; i < 6; ++i) {
        expect(near(r.distance_to_major_km[i], km(dist_deg[i])),
               "distance of zone " + std::to_string(i + 1));
    }
    expect(near(r.mean_distance_km, km(100.0 / 6.0)), "mean distance");
    expect(near(d.mean_distance_above, km(40.0 / 3.0)), "mean distance D above");
    expect(near(d.mean_distance_below, km(60.0 / 3.0)), "mean distance D below");
    expect(near(s.mean_distance_above, km(60.0 / 3.0)), "mean distance S above");

    std::string detail = "3 panels, 6 distances";
    if (!wrong.empty()) {
        detail = "mismatch:";
        for (const auto& w : wrong) detail += " [" + w + "]";
    }
    return {wrong.empty(), detail};
}

// --- ABM ------------------------------------------------------------------------

Outcome abm_properties() {
    const std::size_t n = 500;
    const double radius = std::sqrt(8.0 / (static_cast<double>(n) * std::numbers::pi));
    std::size_t spearman_ok = 0, decile_ok = 0, invariant_fail = 0;
    double q_total = 0.0, deg_total = 0.0;
    double q_min = 1.0;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const auto tg = abm::toroidal_geometric_graph(n, radius, 1.0, seed);
        const auto& g = tg.graph;
        deg_total += 2.0 * static_cast<double>(g.edges().size()) / static_cast<double>(n);
        abm::AbmConfig cfg;
        cfg.seed = seed;
        cfg.rationality = 2.0;
        cfg.self_weight = 1.0;
        const auto run = abm::run(g, cfg);

        double q_sum = 0.0;
        std::size_t q_n = 0;
        for (std::size_t k = 0; k < run.recorded_steps.size(); ++k) {
            if (run.recorded_steps[k] > cfg.burn_in) {
                q_sum += run.modularity_series[k];
                ++q_n;
            }
        }
        const double q = q_sum / static_cast<double>(q_n);
        q_total += q;
        q_min = std::min(q_min, q);

        CentralityConfig bc;
        bc.theta = 0.0;
        const auto b = betweenness_all(g, bc);
        const auto rep = abm::flip_betweenness_report(run, b);
        if (rep.spearman && *rep.spearman > 0.3) ++spearman_ok;
        const double top = rep.decile_mean_flip[9];
        const double bottom = rep.decile_mean_flip[0];
        if (top > 0.0 && top >= 3.0 * bottom) ++decile_ok;

        // consensus is a fixed point
        const std::vector<abm::State> same(n, 1);
        if (abm::step(g, same, cfg, 0) != same) ++invariant_fail;
        // every city's capacity is split exactly over its dissimilar neighbours
        const auto& last = run.states.back();
        for (std::size_t j = 0; j < n; ++j) {
            const auto nd = abm::dissimilar_neighbors(g, last, j);
            if (nd == 0) continue;
            double sent = 0.0;
            for (const auto& nb : g.neighbors(j)) {
                if (last[nb.index] != last[j]) sent += abm::influence_share(g.city(j).population, nd);
            }
            if (!oracle::close_rel(sent, g.city(j).population, 1e-12)) ++invariant_fail;
        }
        // same seed, same trajectory
        const auto again = abm::run(g, cfg);
        if (again.states != run.states || again.flip_counts != run.flip_counts) ++invariant_fail;
    }
    const double q_mean = q_total / 30.0;
    const bool pass = q_min >= 0.6 && spearman_ok >= 24 && decile_ok >= 24 && invariant_fail == 0;
    return {pass, fmt("mean degree %.2f; plateau Q mean %.3f (min %.3f); spearman>0.3 in %zu/30; "
                      "decile ratio>=3 in %zu/30; invariant failures %zu",
                      deg_total / 30.0, q_mean, q_min, spearman_ok, decile_ok, invariant_fail)};
}

Outcome abm_hand_oracle() {
    constexpr abm::State A = 1, B = 2, C = 3;
    std::vector<City> cs{{0, "", "", "", 0, 0, 1}, {1, "", "", "", 0, 1, 2}, {2, "", "", "", 0, 2, 3}};
    GraphConfig gc;
    gc.min_population = 0;
    const auto g = SpatialGraph::from_parts(cs, {{0, 1, 1, 1}, {1, 2, 1, 1}}, gc);
    const std::vector<abm::State> st{A, B, A};

    // hand evaluation with r = 2: n = (1, 2, 1), shares C_j / n_j = (1, 1, 3)
    //   city 0: h_A = 1/1 (self), h_B = 1        -> P(A) = 1/2
    //   city 1: h_A = 1 + 3, h_B = 2/2 (self)    -> P(A) = 16/17
    //   city 2: h_A = 3/1 (self), h_B = 1        -> P(B) = 1/10
    const std::array<std::pair<abm::State, double>, 3> want{
        std::pair{A, 0.5}, std::pair{A, 16.0 / 17.0}, std::pair{B, 0.1}};
    double worst = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto f = abm::influence_field(g, st, i, 1.0);
        const auto p = abm::adoption_probabilities(f, 2.0);
        double got = 0.0;
        for (std::size_t k = 0; k < f.size(); ++k) {
            if (f[k].state == want[i].first) got = p[k];
        }
        worst = std::max(worst, std::abs(got - want[i].second));
    }

    // r = 0: city 1 of the path A-B-C sees three candidates, sampled uniformly
    const std::vector<abm::State> abc{A, B, C};
    const auto field = abm::influence_field(g, abc, 1, 1.0);
    const std::size_t draws = 100000;
    std::array<double, 3> counts{};
    for (std::size_t k = 0; k < draws; ++k) {
        CounterRng rng(2024, 0, k);
        const auto s = abm::adopt_state(field, B, 0.0, rng.uniform());
        counts[static_cast<std::size_t>(s - A)] += 1.0;
    }
    double chi2 = 0.0;
    const double expected = draws / 3.0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    const double p_value = std::exp(-chi2 / 2.0); // two degrees of freedom
    const bool pass = worst <= 1e-12 && field.size() == 3 && p_value > 0.01;
    return {pass, fmt("max |P - hand| = %.1e; r=0 chi2 = %.3f, p = %.3f", worst, chi2, p_value)};
}

// --- CLI pipeline determinism ------------------------------------------------------

Outcome pipeline_determinism() {
    const std::filesystem::path fixture = CITYNET_FIXTURE_DIR;
    auto pipeline = [&](const std::filesystem::path& dir) -> std::string {
        using proc::q;
        const std::vector<std::string> steps{
            "build-graph --cities " + q(fixture / "cities.csv") + " --out " + q(dir / "graph.edges"),
            "centrality --graph " + q(dir / "graph.edges") + " --out " + q(dir / "centrality.csv"),
            "ingest-events --events " + q(fixture / "events.csv") + " --graph " +
                q(dir / "graph.edges") + " --out " + q(dir / "events.csv") + " --report " +
                q(dir / "rejections.json"),
            "zones --graph " + q(dir / "graph.edges") + " --centrality " +
                q(dir / "centrality.csv") + " --events " + q(dir / "events.csv") + " --out " +
                q(dir / "zones.csv") + " --report " + q(dir / "thresholds.json"),
            "fit --zones " + q(dir / "zones.csv") + " --out " + q(dir / "fit.json"),
            "predict --fit " + q(dir / "fit.json") + " --zones " + q(dir / "zones.csv") +
                " --out " + q(dir / "predict.csv"),
            "outliers --zones " + q(dir / "zones.csv") + " --fit " + q(dir / "fit.json") +
                " --s-threshold 10 --out " + q(dir / "outliers.csv"),
            "fragment-sweep --out " + q(dir / "sweep.csv"),
            "abm-run --graph " + q(dir / "graph.edges") + " --burn-in 200 --measure 200 --out " +
                q(dir / "abm.csv") + " --modularity-out " + q(dir / "modularity.csv"),
            "holdout --events " + q(dir / "events.csv") + " --graph " + q(dir / "graph.edges") +
                " --centrality " + q(dir / "centrality.csv") + " --b-threshold 50"};
        std::string stdout_all;
        for (const auto& s : steps) {
            const auto r = proc::cli(s);
            if (r.code != 0) return "step failed: " + s + " -> " + r.err;
            stdout_all += r.out;
        }
        std::ofstream(dir / "stdout.txt", std::ios::binary) << stdout_all;
        return {};
    };
    const auto d1 = proc::scratch_dir("accept_run1");
    const auto d2 = proc::scratch_dir("accept_run2");
    if (auto e = pipeline(d1); !e.empty()) return {false, e};
    if (auto e = pipeline(d2); !e.empty()) return {false, e};
    std::size_t files = 0;
    std::vector<std::string> differ;
    for (const auto& entry : std::filesystem::directory_iterator(d1)) {
        ++files;
        const auto name = entry.path().filename();
        if (proc::read_file(entry.path()) != proc::read_file(d2 / name)) differ.push_back(name);
    }
    std::string detail = fmt("%zu output files compared", files);
    for (const auto& d : differ) detail += "; differs: " + d;
    return {differ.empty() && files >= 14, detail};
}

// --- scenario service over HTTP --------------------------------------------------------

bool numbers_close(const json& a, const json& b, double tol, std::string& where,
                   const std::string& path = "") {
    if (a.type() != b.type() && !(a.is_number() && b.is_number())) {
        where = path;
        return false;
    }
    if (a.is_number()) {
        const double x = a.get<double>(), y = b.get<double>();
        if (std::abs(x - y) > tol * std::max({1.0, std::abs(x), std::abs(y)})) {
            where = path;
            return false;
        }
        return true;
    }
    if (a.is_array() || a.is_object()) {
        if (a.size() != b.size()) {
            where = path;
            return false;
        }
        if (a.is_array()) {
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (!numbers_close(a[i], b[i], tol, where, path + "/" + std::to_string(i))) {
                    return false;
                }
            }
        } else {
            for (auto it = a.begin(); it != a.end(); ++it) {
                if (!b.contains(it.key()) ||
                    !numbers_close(it.value(), b[it.key()], tol, where, path + "/" + it.key())) {
                    return false;
                }
            }
        }
        return true;
    }
    if (a != b) where = path;
    return a == b;
}

Outcome scenario_service() {
    const RelayCoreSpec spec{2, 3, 1};
    const auto rc = build_relay_core_graph(spec);
    ScenarioStore store(rc.graph, {}, AnalysisConfig{});
    HttpService svc(store, 20);
    const int port = svc.bind("127.0.0.1", 0);
    std::thread server([&] { svc.listen(); });
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(60, 0);

    auto fresh = [&](const std::string& path) -> json {
        for (int i = 0; i < 3000; ++i) {
            auto r = c.Get(path);
            if (!r) return json();
            if (r->status == 200) return json::parse(r->body);
            if (r->status != 409) return json();
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        return json();
    };
    auto create = [&] {
        auto r = c.Post("/scenarios", "{}", "application/json");
        return r && r->status == 201 ? json::parse(r->body)["id"].get<std::string>() : "";
    };
    auto mutate = [&](const std::string& id, const json& m) {
        auto r = c.Post("/scenarios/" + id + "/mutations", json::array({m}).dump(),
                        "application/json");
        return r && r->status == 202;
    };

    std::vector<std::string> wrong;
    const auto base = create();
    const auto frag = create();
    const CityId relay = rc.relays.front();
    if (!mutate(frag, {{"op", "fragment"}, {"city", relay}, {"k", 2}})) wrong.push_back("fragment");
    const auto diff = fresh("/scenarios/" + frag + "/diff?against=" + base);
    const RelayCoreSpec split{spec.m, spec.n, 2};
    double b_before = -1, b_copy0 = -1, b_copy1 = -1;
    long d_copy = -1;
    for (const auto& row : diff.value("cities", json::array())) {
        if (row["id"] == relay) {
            b_before = row["base"]["B"];
            b_copy0 = row["other"]["B"];
            d_copy = row["other"]["degree"];
        }
        if (row["id"] == static_cast<CityId>(rc.graph.size())) b_copy1 = row["other"]["B"];
    }
    if (b_before != relay_betweenness(spec)) wrong.push_back("base relay B");
    if (b_copy0 != relay_betweenness(split) || b_copy1 != relay_betweenness(split)) {
        wrong.push_back("fragment relay B");
    }
    if (d_copy != relay_degree(split)) wrong.push_back("fragment relay D");

    const auto edit = create();
    const CityId core = rc.cores.front().front();
    const json link{{"a", core}, {"b", relay}};
    json rm = link, add = link;
    rm["op"] = "remove_edge";
    add["op"] = "add_edge";
    if (!mutate(edit, rm)) wrong.push_back("remove_edge");
    const auto cut = fresh("/scenarios/" + edit + "/metrics");
    if (cut.value("counts", json())["edges"] != rc.graph.edges().size() - 1) {
        wrong.push_back("edge removed");
    }
    if (!mutate(edit, add)) wrong.push_back("add_edge");
    const auto restored = fresh("/scenarios/" + edit + "/metrics");
    const auto original = fresh("/scenarios/" + base + "/metrics");
    std::string where;
    json r_cmp = restored, o_cmp = original;
    for (auto* j : {&r_cmp, &o_cmp}) {
        if (j->contains("counts")) {
            (*j)["counts"].erase("components_recomputed");
            (*j)["counts"].erase("components_reused");
        }
    }
    if (restored.is_null() || !numbers_close(o_cmp, r_cmp, 1e-9, where)) {
        wrong.push_back("restored metrics differ at " + where);
    }
    const auto r_risk = fresh("/scenarios/" + edit + "/risk");
    const auto o_risk = fresh("/scenarios/" + base + "/risk");
    if (r_risk.is_null() || !numbers_close(o_risk, r_risk, 1e-9, where)) {
        wrong.push_back("restored risk differs at " + where);
    }

    svc.stop();
    server.join();
    std::string detail =
        fmt("relay B %.3g -> %.3g + %.3g (K=2), relay D %ld; remove+re-add compared within 1e-9",
            b_before, b_copy0, b_copy1, d_copy);
    for (const auto& w : wrong) detail += "; " + w;
    return {wrong.empty(), detail};
}

// --- full-scale timing ------------------------------------------------------------------

Outcome full_scale_performance() {
    using clock = std::chrono::steady_clock;
    const auto cities = synthesize_cities(7322, 90, 11, 800.0);
    const auto t0 = clock::now();
    GraphConfig gc;
    gc.colocated = ColocatedPolicy::merge;
    const auto g = build_graph(cities, gc);
    const auto t1 = clock::now();
    CentralityConfig cc;
    cc.theta = 0.5;
    const auto b = betweenness_all(g, cc);
    const auto t2 = clock::now();
    std::size_t largest = 0;
    for (const auto& c : connected_components(g)) largest = std::max(largest, c.size());
    const double build_s = std::chrono::duration<double>(t1 - t0).count();
    const double total_s = std::chrono::duration<double>(t2 - t0).count();
    return {total_s <= 600.0 && b.size() == g.size(),
            fmt("synthetic %zu cities, %zu links, largest component %zu; build %.1fs, "
                "build + betweenness %.1fs on %d thread(s)",
                g.size(), g.edges().size(), largest, build_s, total_s, omp_get_max_threads())};
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"betweenness-oracle-equivalence", oracle_equivalence},
        {"fragmentation-algebra", fragmentation_algebra},
        {"regression-recovery", regression_recovery},
        {"threshold-report", threshold_report_check},
        {"abm-properties", abm_properties},
        {"abm-hand-oracle", abm_hand_oracle},
        {"pipeline-determinism", pipeline_determinism},
        {"scenario-service", scenario_service},
        {"full-scale-performance", full_scale_performance},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %s (%.1fs): %s\n", o.pass ? "PASS" : "FAIL", c.name, secs, o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
