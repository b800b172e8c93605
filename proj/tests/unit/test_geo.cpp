#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"

#include "citynet/error.hpp"
#include "citynet/geo.hpp"

using namespace citynet;

TEST_CASE("haversine reference distances") {
    CHECK(haversine_km({0, 0}, {0, 0}) == 0.0);
    CHECK(haversine_km({0, 0}, {0, 180}) == doctest::Approx(std::numbers::pi * 6371.0088).epsilon(1e-9));
    CHECK(std::abs(haversine_km({0, 0}, {0, 180}) - 20015.1) < 0.1);
    // London - Paris; an independent Vincenty/WGS84 figure is 343.9 km, the
    // spherical mean-radius value is 343.6 km
    CHECK(std::abs(haversine_km({51.5074, -0.1278}, {48.8566, 2.3522}) - 343.6) < 1.0);
}

TEST_CASE("haversine is symmetric and positive off the diagonal") {
    const LatLon pts[] = {{10, 20}, {-33.9, 151.2}, {89.9, 0}, {-89.9, 179.9}, {0, -180}};
    for (const auto& a : pts) {
        for (const auto& b : pts) {
            CHECK(haversine_km(a, b) == haversine_km(b, a));
            if (&a != &b) CHECK(haversine_km(a, b) > 0.0);
        }
    }
}

TEST_CASE("coordinates out of range are rejected") {
    CHECK_THROWS_AS(haversine_km({91, 0}, {0, 0}), ValidationError);
    CHECK_THROWS_AS(haversine_km({0, 0}, {0, 180.5}), ValidationError);
    CHECK_THROWS_AS(validate_coordinates({std::nan(""), 0}), ValidationError);
    CHECK_NOTHROW(validate_coordinates({-90, -180}));
}

TEST_CASE("great-circle interpolation hits the endpoints and the midpoint") {
    const LatLon a{0, 0}, b{0, 90};
    const auto m = interpolate_great_circle(a, b, 0.5);
    CHECK(m.lat == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m.lon == doctest::Approx(45.0));
    const auto e = interpolate_great_circle(a, b, 1.0);
    CHECK(e.lon == doctest::Approx(90.0));
}

namespace {

std::filesystem::path write_mask() {
    // two square "islands" separated by a strait along the equator:
    // lon [0, 2] and lon [3, 5], lat [-1, 1]
    const auto path = std::filesystem::temp_directory_path() / "citynet_mask_test.geojson";
    std::ofstream out(path);
    out << R"({"type":"FeatureCollection","features":[
      {"type":"Feature","properties":{},"geometry":{"type":"Polygon","coordinates":
        [[[0,-1],[2,-1],[2,1],[0,1],[0,-1]]]}},
      {"type":"Feature","properties":{},"geometry":{"type":"MultiPolygon","coordinates":
        [[[[3,-1],[5,-1],[5,1],[3,1],[3,-1]]]]}}]})";
    return path;
}

} // namespace

TEST_CASE("land mask classifies points and measures sea crossings") {
    const auto mask = LandMask::load_geojson(write_mask());
    CHECK(mask.on_land({0, 1}));
    CHECK(mask.on_land({0.5, 4}));
    CHECK_FALSE(mask.on_land({0, 2.5}));
    CHECK_FALSE(mask.on_land({5, 1}));

    // across the 1 degree strait (about 111 km of sea)
    const double sea = mask.sea_crossing_km({0, 1}, {0, 4}, 5.0);
    CHECK(sea == doctest::Approx(111.2).epsilon(0.06));
    // within one island
    CHECK(mask.sea_crossing_km({0, 0.2}, {0, 1.8}, 5.0) == 0.0);
}

TEST_CASE("land mask rejects unsupported input") {
    const auto path = std::filesystem::temp_directory_path() / "citynet_bad_mask.geojson";
    std::ofstream(path) << R"({"type":"Point","coordinates":[0,0]})";
    CHECK_THROWS_AS(LandMask::load_geojson(path), ValidationError);
    CHECK_THROWS(LandMask::load_geojson("/nonexistent/mask.geojson"));
}
