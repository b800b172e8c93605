#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"

#include "citynet/error.hpp"
#include "citynet/graph.hpp"

using namespace citynet;

namespace {

constexpr double kKmPerDeg = kEarthRadiusKm * std::numbers::pi / 180.0;

City city(CityId id, double lat, double lon, double pop = 20000) {
    return {id, "c" + std::to_string(id), "X", "", lat, lon, pop};
}

std::vector<City> random_cities(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> lat(30, 50), lon(0, 30), pop(0, 2e6);
    std::vector<City> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(city(static_cast<CityId>(i + 1), lat(rng), lon(rng), pop(rng)));
    }
    return out;
}

bool same_edges(const SpatialGraph& a, const SpatialGraph& b) {
    if (a.edges().size() != b.edges().size()) return false;
    for (std::size_t i = 0; i < a.edges().size(); ++i) {
        const auto& x = a.edges()[i];
        const auto& y = b.edges()[i];
        if (x.a != y.a || x.b != y.b || x.distance_km != y.distance_km || x.flow != y.flow) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("gravity flow") {
    CHECK(gravity_flow(1, 1, 1) == 1.0);
    CHECK(gravity_flow(100000, 50000, 100) == 5.0e5);
    CHECK(gravity_flow(7, 3, 2) == gravity_flow(3, 7, 2));
    CHECK(gravity_flow(5e5, 5e5, 10) == doctest::Approx(4 * gravity_flow(5e5, 5e5, 20)));
    CHECK_THROWS_AS(gravity_flow(1, 1, 0), DegeneratePairError);
}

TEST_CASE("radius rule on small layouts") {
    GraphConfig cfg;
    SUBCASE("499 km apart links, 501 km does not") {
        const auto near = build_graph({city(1, 0, 0), city(2, 0, 499 / kKmPerDeg)}, cfg);
        CHECK(near.edges().size() == 1);
        const auto far = build_graph({city(1, 0, 0), city(2, 0, 501 / kKmPerDeg)}, cfg);
        CHECK(far.edges().empty());
        CHECK(far.size() == 2);
    }
    SUBCASE("three cities 400 km apart form a path") {
        const double step = 400 / kKmPerDeg;
        const auto g = build_graph({city(1, 0, 0), city(2, 0, step), city(3, 0, 2 * step)}, cfg);
        REQUIRE(g.edges().size() == 2);
        CHECK(g.edges()[0].a == 1);
        CHECK(g.edges()[0].b == 2);
        CHECK(g.edges()[1].a == 2);
        CHECK(g.edges()[1].b == 3);
    }
}

TEST_CASE("population threshold drops small cities") {
    GraphConfig cfg;
    const auto g = build_graph({city(1, 0, 0, 20000), city(2, 0, 1, 9999)}, cfg);
    CHECK(g.size() == 1);
    cfg.min_population = 0;
    CHECK(build_graph({city(1, 0, 0, 20000), city(2, 0, 1, 9999)}, cfg).edges().size() == 1);
}

TEST_CASE("stored flows and distances follow the endpoints") {
    const auto g = build_graph(random_cities(3, 150), {});
    REQUIRE(!g.edges().empty());
    for (const auto& e : g.edges()) {
        const auto& a = g.city(*g.index_of(e.a));
        const auto& b = g.city(*g.index_of(e.b));
        CHECK(e.a < e.b);
        CHECK(e.distance_km <= g.config().radius_km);
        CHECK(e.distance_km == haversine_km(a.position(), b.position()));
        const double f = a.population * b.population / (e.distance_km * e.distance_km);
        CHECK(std::abs(e.flow - f) <= 1e-12 * f);
        CHECK(a.population >= g.config().min_population);
    }
}

TEST_CASE("build is invariant under input order and bit-identical on repeat") {
    auto cities = random_cities(5, 200);
    const auto g1 = build_graph(cities, {});
    std::mt19937_64 rng(9);
    std::shuffle(cities.begin(), cities.end(), rng);
    const auto g2 = build_graph(cities, {});
    CHECK(same_edges(g1, g2));
    CHECK(same_edges(g1, build_graph(cities, {})));
}

TEST_CASE("monotone in radius and population threshold") {
    const auto cities = random_cities(8, 150);
    GraphConfig small, big;
    small.radius_km = 200;
    big.radius_km = 400;
    const auto gs = build_graph(cities, small);
    const auto gb = build_graph(cities, big);
    CHECK(gs.size() == gb.size());
    for (const auto& e : gs.edges()) {
        const bool found = std::any_of(gb.edges().begin(), gb.edges().end(),
                                       [&](const Edge& f) { return f.a == e.a && f.b == e.b; });
        CHECK(found);
    }
    GraphConfig strict, loose;
    strict.min_population = 500000;
    loose.min_population = 100000;
    const auto st = build_graph(cities, strict);
    const auto lo = build_graph(cities, loose);
    for (const auto& e : st.edges()) {
        CHECK(std::any_of(lo.edges().begin(), lo.edges().end(),
                          [&](const Edge& f) { return f.a == e.a && f.b == e.b; }));
    }
}

TEST_CASE("duplicate ids and co-located cities") {
    CHECK_THROWS_AS(build_graph({city(1, 0, 0), city(1, 0, 1)}, {}), ValidationError);
    try {
        build_graph({city(1, 0, 0), city(2, 0, 0), city(3, 0, 1)}, {});
        FAIL("expected a degenerate pair error");
    } catch (const DegeneratePairError& e) {
        CHECK(std::string(e.what()).find("(1, 2)") != std::string::npos);
    }
    GraphConfig merge;
    merge.colocated = ColocatedPolicy::merge;
    const auto g = build_graph({city(1, 0, 0, 20000), city(2, 0, 0, 30000), city(3, 0, 1)}, merge);
    REQUIRE(g.size() == 2);
    CHECK(g.city(0).id == 1);
    CHECK(g.city(0).population == 50000);
    CHECK(g.edges().size() == 1);
}

TEST_CASE("from_parts rejects malformed links") {
    const std::vector<City> cs{city(1, 0, 0), city(2, 0, 1)};
    CHECK_THROWS_AS(SpatialGraph::from_parts(cs, {{1, 1, 1, 1}}, {}), ValidationError);
    CHECK_THROWS_AS(SpatialGraph::from_parts(cs, {{1, 3, 1, 1}}, {}), ValidationError);
    CHECK_THROWS_AS(SpatialGraph::from_parts(cs, {{1, 2, 0, 1}}, {}), ValidationError);
    CHECK_THROWS_AS(SpatialGraph::from_parts(cs, {{1, 2, 1, 1}, {2, 1, 1, 1}}, {}),
                    ValidationError);
    const auto g = SpatialGraph::from_parts(cs, {{2, 1, 5, 7}}, {});
    CHECK(g.edges()[0].a == 1);
    CHECK(g.degree(0) == 1);
    CHECK(g.neighbors(1)[0].index == 0);
}

TEST_CASE("connected components") {
    CHECK(connected_components(SpatialGraph{}).empty());
    std::vector<City> cs;
    for (CityId i = 1; i <= 6; ++i) cs.push_back(city(i, 0, static_cast<double>(i)));
    const auto two = SpatialGraph::from_parts(
        cs, {{1, 2, 1, 1}, {2, 3, 1, 1}, {1, 3, 1, 1}, {4, 5, 1, 1}, {5, 6, 1, 1}, {4, 6, 1, 1}},
        {});
    const auto comps = connected_components(two);
    REQUIRE(comps.size() == 2);
    CHECK(comps[0] == std::vector<CityId>{1, 2, 3});
    CHECK(comps[1] == std::vector<CityId>{4, 5, 6});
    const auto path = SpatialGraph::from_parts(
        cs, {{1, 2, 1, 1}, {2, 3, 1, 1}, {3, 4, 1, 1}, {4, 5, 1, 1}, {5, 6, 1, 1}}, {});
    CHECK(connected_components(path).size() == 1);
}

TEST_CASE("induced subgraph keeps internal links only") {
    std::vector<City> cs;
    for (CityId i = 1; i <= 4; ++i) cs.push_back(city(i, 0, static_cast<double>(i)));
    const auto g = SpatialGraph::from_parts(cs, {{1, 2, 1, 1}, {2, 3, 1, 1}, {3, 4, 1, 1}}, {});
    const std::vector<CityId> keep{2, 3, 4, 99};
    const auto sub = g.induced(keep);
    CHECK(sub.size() == 3);
    CHECK(sub.edges().size() == 2);
}

TEST_CASE("city CSV round trip and errors") {
    std::vector<City> cs{city(2, 10.5, -3.25, 12345), {1, "Quoted, Name", "Y", "P", -1, 2, 3e6}};
    std::stringstream ss;
    write_cities_csv(ss, cs);
    const auto back = read_cities_csv(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[0].id == 2);
    CHECK(back[0].lon == -3.25);
    CHECK(back[1].name == "Quoted, Name");
    CHECK(back[1].population == 3e6);

    std::stringstream bad("id,name,country,province,lat,lon,population\n1,a,b,c,x,2,3\n");
    try {
        read_cities_csv(bad);
        FAIL("expected parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    std::stringstream header("id,name\n");
    CHECK_THROWS_AS(read_cities_csv(header), ParseError);
}

TEST_CASE("graph export round trip") {
    const auto g = build_graph(random_cities(4, 60), {});
    const auto path = std::filesystem::temp_directory_path() / "citynet_graph_test.edges";
    write_graph(path, g);
    const auto back = read_graph(path);
    CHECK(back.size() == g.size());
    CHECK(same_edges(g, back));
    CHECK(back.config().radius_km == g.config().radius_km);
    std::ifstream side(path.string() + ".json");
    std::string text((std::istreambuf_iterator<char>(side)), {});
    CHECK(text.find("\"counts\"") != std::string::npos);
}

TEST_CASE("sea filter drops links over long water crossings") {
    const auto path = std::filesystem::temp_directory_path() / "citynet_graph_mask.geojson";
    std::ofstream(path) << R"({"type":"Polygon","coordinates":[[[0,-1],[2,-1],[2,1],[0,1],[0,-1]]]})"
                        << "\n";
    GraphConfig cfg;
    cfg.sea_filter = SeaFilter::landmask;
    cfg.landmask_path = path.string();
    // 1 and 2 on land, 3 is 2 degrees offshore: about 222 km over sea to 2,
    // while 4 is only about 30 km offshore
    const auto g = build_graph({city(1, 0, 0.5), city(2, 0, 1.5), city(3, 0, 4.0),
                                city(4, 0, 2.0 + 30 / kKmPerDeg)},
                               cfg);
    auto linked = [&](CityId a, CityId b) {
        return std::any_of(g.edges().begin(), g.edges().end(),
                           [&](const Edge& e) { return e.a == a && e.b == b; });
    };
    CHECK(linked(1, 2));
    CHECK_FALSE(linked(2, 3));
    CHECK(linked(2, 4));
    cfg.sea_filter = SeaFilter::none;
    const auto open = build_graph({city(2, 0, 1.5), city(3, 0, 4.0)}, cfg);
    CHECK(open.edges().size() == 1);
}
