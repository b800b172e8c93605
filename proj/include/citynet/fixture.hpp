#pragma once

#include <cstdint>
#include <vector>

#include "citynet/graph.hpp"
#include "citynet/ingest.hpp"

namespace citynet {

/// `n` cities (ids 1..n) scattered around `clusters` random centres with a
/// normal offset of `spread_km`; populations log-uniform in [1e4, 5e6].
std::vector<City> synthesize_cities(std::size_t n, std::size_t clusters, std::uint64_t seed,
                                    double spread_km = 150.0);

struct Fixture {
    std::vector<City> cities;
    std::vector<ConflictEvent> events;
};

/// Small deterministic city set with events planted around a few hubs, used
/// by the examples and the pipeline tests.
Fixture make_fixture(std::uint64_t seed = 7);

} // namespace citynet
