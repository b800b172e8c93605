#include "citynet/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "citynet/rng.hpp"

namespace citynet {

namespace {

constexpr std::uint64_t kCentreStream = 0x63656e74;
constexpr std::uint64_t kCityStream = 0x63697479;
constexpr std::uint64_t kBackgroundStream = 0x6267;

} // namespace

std::vector<City> synthesize_cities(std::size_t n, std::size_t clusters, std::uint64_t seed,
                                    double spread_km) {
    clusters = std::max<std::size_t>(clusters, 1);
    const double km_per_deg = kEarthRadiusKm * std::numbers::pi / 180.0;
    std::vector<LatLon> centres;
    for (std::size_t c = 0; c < clusters; ++c) {
        CounterRng rng(seed, kCentreStream, c);
        centres.push_back({-45.0 + 105.0 * rng.uniform(), -170.0 + 340.0 * rng.uniform()});
    }
    std::vector<City> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng(seed, kCityStream, i);
        const LatLon& c = centres[i % clusters];
        City city;
        city.id = static_cast<CityId>(i + 1);
        city.name = "City-" + std::to_string(i + 1);
        city.country = "C" + std::to_string(i % clusters + 1);
        city.province = "P" + std::to_string((i / clusters) % 4 + 1);
        city.lat = std::clamp(c.lat + rng.normal() * spread_km / km_per_deg, -89.0, 89.0);
        const double coslat = std::cos(c.lat * std::numbers::pi / 180.0);
        city.lon = c.lon + rng.normal() * spread_km / (km_per_deg * coslat);
        if (city.lon > 180.0) city.lon -= 360.0;
        if (city.lon < -180.0) city.lon += 360.0;
        city.population = std::round(std::pow(10.0, 4.0 + std::log10(500.0) * rng.uniform()));
        out.push_back(std::move(city));
    }
    return out;
}

Fixture make_fixture(std::uint64_t seed) {
    Fixture f;
    f.cities = synthesize_cities(120, 6, seed, 150.0);
    GraphConfig cfg;
    const SpatialGraph g = build_graph(f.cities, cfg);
    // hubs: the most populous city of the first three clusters
    std::vector<PlantedSite> sites;
    const std::size_t counts[] = {180, 130, 45};
    for (std::size_t c = 0; c < 3; ++c) {
        const City* best = nullptr;
        for (const auto& city : g.cities()) {
            if (static_cast<std::size_t>(city.id - 1) % 6 != c) continue;
            if (best == nullptr || city.population > best->population) best = &city;
        }
        sites.push_back({best->id, counts[c], 20.0});
    }
    // a light background spread over every city
    for (const auto& city : g.cities()) {
        CounterRng rng(seed, kBackgroundStream, static_cast<std::uint64_t>(city.id));
        const auto k = static_cast<std::size_t>(rng.uniform() * 3.0);
        if (k > 0) sites.push_back({city.id, k, 5.0});
    }
    f.events = synthesize_events(g, sites, DateWindow{}, EventKind::terrorism, seed);
    return f;
}

} // namespace citynet
