#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "citynet/fixture.hpp"
#include "citynet/fragmentation.hpp"
#include "citynet/scenario.hpp"

using namespace citynet;
using namespace std::chrono_literals;
using nlohmann::json;

namespace {

SpatialGraph fixture_graph() { return build_graph(make_fixture().cities, {}); }

Mutation remove_edge(CityId a, CityId b) {
    Mutation m;
    m.op = MutationOp::remove_edge;
    m.a = a;
    m.b = b;
    return m;
}

Mutation fragment(CityId c, int k) {
    Mutation m;
    m.city = c;
    m.k = k;
    return m;
}

} // namespace

TEST_CASE("incremental betweenness equals a full recompute bitwise") {
    const auto base = fixture_graph();
    REQUIRE(connected_components(base).size() > 1);
    CentralityConfig cfg;
    const auto full = betweenness_all(base, cfg);

    const auto& e = base.edges()[base.edges().size() / 2];
    const auto g = apply_mutation(base, remove_edge(e.a, e.b));
    std::size_t rec = 0, reu = 0;
    const auto inc = betweenness_incremental(g, cfg, base, full, &rec, &reu);
    CHECK(inc == betweenness_all(g, cfg));
    CHECK(rec >= 1);
    CHECK(reu >= 1);

    const auto f = apply_mutation(g, fragment(base.city(3).id, 3));
    CHECK(betweenness_incremental(f, cfg, g, inc) == betweenness_all(f, cfg));

    std::size_t rec0 = 9, reu0 = 0;
    CHECK(betweenness_incremental(base, cfg, base, full, &rec0, &reu0) == full);
    CHECK(rec0 == 0);
}

TEST_CASE("metrics with a previous snapshot match a fresh computation") {
    const auto fx = make_fixture();
    auto base = std::make_shared<const SpatialGraph>(build_graph(fx.cities, {}));
    AnalysisConfig cfg;
    const auto m0 = compute_metrics(base, fx.events, cfg);
    auto next = std::make_shared<const SpatialGraph>(
        apply_mutation(*base, fragment(base->city(0).id, 2)));
    const auto inc = compute_metrics(next, fx.events, cfg, &m0);
    const auto fresh = compute_metrics(next, fx.events, cfg);
    REQUIRE(inc.cities.size() == fresh.cities.size());
    for (std::size_t i = 0; i < inc.cities.size(); ++i) {
        CHECK(inc.cities[i].betweenness == fresh.cities[i].betweenness);
        CHECK(inc.city_attacks[i] == fresh.city_attacks[i]);
    }
    CHECK(metrics_json(inc)["zones"] == metrics_json(fresh)["zones"]);
    std::size_t total = 0;
    for (auto a : m0.city_attacks) total += a;
    CHECK(total == fx.events.size());
}

TEST_CASE("JSON views") {
    const auto fx = make_fixture();
    auto g = std::make_shared<const SpatialGraph>(build_graph(fx.cities, {}));
    AnalysisConfig cfg;
    const auto m = compute_metrics(g, fx.events, cfg);
    const auto geo = geojson(m, cfg);
    CHECK(geo["type"] == "FeatureCollection");
    REQUIRE(geo["features"].size() == g->size());
    const auto& f0 = geo["features"][0];
    CHECK(f0["geometry"]["coordinates"][0] == g->city(0).lon);
    CHECK(f0["geometry"]["coordinates"][1] == g->city(0).lat);
    CHECK(f0["properties"].contains("A*"));
    CHECK(f0["properties"].contains("vulnerable"));

    const auto risk = risk_json(m, cfg);
    CHECK(risk["fit"]["a"] == 4.0);
    CHECK(risk["zones"].size() == m.zones.size());

    const auto self = diff_json(m, m, cfg);
    for (const auto& row : self["cities"]) CHECK(row["delta"]["B"] == 0.0);
}

TEST_CASE("scenario store lifecycle") {
    const auto dir = std::filesystem::temp_directory_path() / "citynet_store_test";
    std::filesystem::remove_all(dir);
    const auto rc = build_relay_core_graph({2, 3, 1});
    ScenarioStore store(rc.graph, {}, AnalysisConfig{}, dir);

    const auto s1 = store.create();
    CHECK(s1 == "s1");
    CHECK_FALSE(store.status(s1).stale);
    REQUIRE(store.metrics(s1));
    CHECK(store.metrics(s1)->cities[6].betweenness == 9.0);

    const std::vector<Mutation> batch{fragment(6, 2)};
    CHECK(store.submit(s1, batch) == 2);
    const auto m = store.wait_fresh(s1, 10s);
    REQUIRE(m);
    CHECK(m->graph->size() == 8);
    CHECK(m->cities[*m->graph->index_of(6)].betweenness == 4.5);
    CHECK(m->cities[*m->graph->index_of(7)].betweenness == 4.5);

    SUBCASE("other scenarios are isolated") {
        const auto s2 = store.create();
        CHECK(store.wait_fresh(s2, 10s)->graph->size() == 7);
        CHECK(store.base_metrics()->graph->size() == 7);
    }
    SUBCASE("a rejected batch leaves the log untouched") {
        const std::vector<Mutation> bad{remove_edge(0, 6), remove_edge(0, 6)};
        CHECK_THROWS_AS(store.submit(s1, bad), MutationError);
        CHECK(store.status(s1).version == 2);
        CHECK(store.log(s1).size() == 1);
    }
    SUBCASE("forks replay the parent log") {
        const std::vector<Mutation> more{remove_edge(0, 6)};
        const auto s3 = store.create(s1, more);
        CHECK(store.log(s3).size() == 2);
        const auto m3 = store.wait_fresh(s3, 10s);
        REQUIRE(m3);
        CHECK(m3->graph->edges().size() == apply_mutations(rc.graph, store.log(s3)).edges().size());
    }
    SUBCASE("logs are persisted") {
        std::ifstream in(dir / "s1.json");
        REQUIRE(in);
        const auto j = json::parse(in);
        const auto replayed = apply_mutations(rc.graph, parse_mutations(j));
        CHECK(replayed.size() == 8);
    }
    CHECK_THROWS_AS(store.status("nope"), NotFoundError);
    CHECK_THROWS_AS(store.create(std::string("nope")), NotFoundError);
}

TEST_CASE("remove then re-add restores metrics") {
    const auto rc = build_relay_core_graph({2, 3, 1});
    ScenarioStore store(rc.graph, {}, AnalysisConfig{});
    const auto id = store.create();
    Mutation add = remove_edge(0, 6);
    add.op = MutationOp::add_edge;
    const std::vector<Mutation> rm{remove_edge(0, 6)}, re{add};
    store.submit(id, rm);
    const auto cut = store.wait_fresh(id, 10s);
    REQUIRE(cut);
    CHECK(cut->cities[6].degree == 5);
    CHECK(cut->cities[1].betweenness > 0.0);
    store.submit(id, re);
    const auto back = store.wait_fresh(id, 10s);
    REQUIRE(back);
    for (std::size_t i = 0; i < back->cities.size(); ++i) {
        CHECK(back->cities[i].betweenness ==
              doctest::Approx(store.base_metrics()->cities[i].betweenness).epsilon(1e-9));
    }
}
