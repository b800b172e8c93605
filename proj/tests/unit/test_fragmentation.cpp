#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

#include "citynet/error.hpp"
#include "citynet/fragmentation.hpp"

using namespace citynet;

namespace {

double relay_b(const SpatialGraph& g, CityId id) {
    CentralityConfig cfg;
    cfg.theta = 0.0;
    return betweenness_all(g, cfg)[*g.index_of(id)];
}

} // namespace

TEST_CASE("closed forms") {
    CHECK(relay_degree({2, 3, 1}) == 6);
    CHECK(relay_betweenness({2, 3, 1}) == 9.0);
    CHECK(relay_degree({2, 3, 2}) == 7);
    CHECK(relay_betweenness({2, 3, 2}) == 4.5);
    CHECK(relay_betweenness({3, 2, 1}) == 12.0);
    CHECK(relay_strategic({2, 3, 1}).exact == 1.5);
    CHECK(relay_strategic({2, 3, 1}).approx == 1.5);
    CHECK_THROWS_AS(validate(RelayCoreSpec{1, 3, 1}), ValidationError);
    CHECK_THROWS_AS(validate(RelayCoreSpec{2, 0, 1}), ValidationError);
    CHECK_THROWS_AS(validate(RelayCoreSpec{2, 3, 0}), ValidationError);
}

TEST_CASE("relay/core graph shape") {
    const auto one = build_relay_core_graph({2, 3, 1});
    CHECK(one.graph.size() == 7);
    CHECK(one.graph.edges().size() == 12);
    CHECK(one.relays == std::vector<CityId>{6});
    const auto two = build_relay_core_graph({2, 3, 2});
    CHECK(two.graph.edges().size() == 19);
    CHECK(relay_b(one.graph, 6) == 9.0);
    CHECK(relay_b(two.graph, 6) == 4.5);
    CHECK(relay_b(two.graph, 7) == 4.5);
}

TEST_CASE("relay/core link set follows the radius rule") {
    for (int m = 2; m <= 5; ++m) {
        const auto rc = build_relay_core_graph({m, 3, 2});
        std::vector<City> cs(rc.graph.cities().begin(), rc.graph.cities().end());
        const auto rebuilt = build_graph(cs, rc.graph.config());
        CHECK(rebuilt.edges().size() == rc.graph.edges().size());
    }
}

TEST_CASE("fragmenting a relay splits its betweenness") {
    const auto rc = build_relay_core_graph({2, 3, 1});
    const auto g = fragment_city(rc.graph, 6, 2);
    REQUIRE(g.size() == 8);
    CHECK(g.edges().size() == 19);
    CHECK(relay_b(g, 6) == 4.5);
    CHECK(relay_b(g, 7) == 4.5);
    CHECK(g.city(*g.index_of(7)).population == 50000.0);
    CHECK(g.city(*g.index_of(6)).population == 50000.0);
    CHECK_THROWS_AS(fragment_city(rc.graph, 6, 1), ValidationError);
    CHECK_THROWS_AS(fragment_city(rc.graph, 99, 2), ValidationError);
}

TEST_CASE("merge undoes a fragment") {
    const auto rc = build_relay_core_graph({2, 3, 1});
    const auto split = fragment_city(rc.graph, 6, 3);
    const std::vector<CityId> ids{6, 7, 8};
    const auto back = merge_cities(split, ids);
    REQUIRE(back.size() == rc.graph.size());
    CHECK(back.edges().size() == rc.graph.edges().size());
    const auto& relay = back.city(*back.index_of(6));
    CHECK(relay.population == doctest::Approx(100000.0).epsilon(1e-12));
    CHECK(haversine_km(relay.position(), rc.graph.city(6).position()) < 1e-3);
    CHECK(relay_b(back, 6) == 9.0);
    const std::vector<CityId> one{6};
    CHECK_THROWS_AS(merge_cities(split, one), ValidationError);
}

TEST_CASE("relay betweenness falls as relays are added") {
    for (int m = 2; m <= 4; ++m) {
        for (int n = 1; n <= 5; ++n) {
            double last = 1e300;
            for (int k = 1; k <= 4; ++k) {
                const double b = relay_betweenness({m, n, k});
                CHECK(b < last);
                last = b;
                // approximation overshoots by (K-1)/(MN) in relative terms
                const auto s = relay_strategic({m, n, k});
                const double rel = (s.approx - s.exact) / s.exact;
                CHECK(rel == doctest::Approx(double(k - 1) / (m * n)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("sweep agrees with computed relay metrics") {
    const auto rows = fragment_sweep({2, 4}, {1, 6}, {1, 4});
    CHECK(rows.size() == 3 * 6 * 4);
    for (const auto& r : rows) {
        CHECK(r.d_formula == r.d_computed);
        CHECK(oracle::close_rel(r.b_formula, r.b_computed, 1e-12));
        CHECK(r.degrees_uniform);
    }
    std::ostringstream out;
    write_sweep_csv(out, rows);
    CHECK(out.str().rfind("M,N,K,D_formula,D_computed,B_formula,B_computed,S_exact,S_approx\n", 0) ==
          0);
}
