#include "citynet/fragmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "citynet/error.hpp"
#include "citynet/format.hpp"

namespace citynet {

namespace {

constexpr double kKmPerDegree = kEarthRadiusKm * std::numbers::pi / 180.0;

LatLon offset_km(LatLon origin, double east_km, double north_km) {
    const double lat = origin.lat + north_km / kKmPerDegree;
    const double lon =
        origin.lon + east_km / (kKmPerDegree * std::cos(origin.lat * std::numbers::pi / 180.0));
    return {lat, lon};
}

LatLon on_ring(LatLon center, double radius_km, int i, int count) {
    if (count == 1) return center;
    const double angle = 2.0 * std::numbers::pi * i / count;
    return offset_km(center, radius_km * std::cos(angle), radius_km * std::sin(angle));
}

void add_link(std::vector<Edge>& edges, const City& a, const City& b, FlowModel model) {
    const double d = haversine_km(a.position(), b.position());
    edges.push_back({a.id, b.id, d, model_flow(model, a, b, d)});
}

} // namespace

void validate(const RelayCoreSpec& spec) {
    if (spec.m < 2 || spec.n < 1 || spec.k < 1) {
        throw ValidationError("relay/core spec needs M >= 2, N >= 1, K >= 1");
    }
}

long relay_degree(const RelayCoreSpec& spec) {
    validate(spec);
    return static_cast<long>(spec.m) * spec.n + spec.k - 1;
}

double relay_betweenness(const RelayCoreSpec& spec) {
    validate(spec);
    const double pairs = spec.m * (spec.m - 1) / 2.0;
    return pairs * spec.n * spec.n / spec.k;
}

RelayStrategic relay_strategic(const RelayCoreSpec& spec) {
    return {relay_betweenness(spec) / static_cast<double>(relay_degree(spec)),
            (spec.m - 1) * static_cast<double>(spec.n) / (2.0 * spec.k)};
}

RelayCoreGraph build_relay_core_graph(const RelayCoreSpec& spec) {
    validate(spec);
    const LatLon center{10.0, 20.0};
    const double core_spread_km = 10.0;
    double core_distance_km = 200.0;
    if (spec.m <= 5) {
        // keep neighbouring cores further apart than the link radius
        const double chord_factor = 2.0 * std::sin(std::numbers::pi / spec.m) - 1.0;
        core_distance_km = std::max(core_distance_km, 75.0 / chord_factor);
    }

    RelayCoreGraph out;
    std::vector<City> cities;
    const double population = 100000.0;
    for (int c = 0; c < spec.m; ++c) {
        const LatLon core_center = on_ring(center, core_distance_km, c, spec.m);
        std::vector<CityId> members;
        for (int j = 0; j < spec.n; ++j) {
            const LatLon p = on_ring(core_center, core_spread_km, j, spec.n);
            const CityId id = static_cast<CityId>(c) * spec.n + j;
            cities.push_back({id, "core" + std::to_string(c) + "-" + std::to_string(j), "", "",
                              p.lat, p.lon, population});
            members.push_back(id);
        }
        out.cores.push_back(std::move(members));
    }
    for (int r = 0; r < spec.k; ++r) {
        const LatLon p = on_ring(center, 1.0, r, spec.k);
        const CityId id = static_cast<CityId>(spec.m) * spec.n + r;
        cities.push_back({id, "relay-" + std::to_string(r), "", "", p.lat, p.lon, population});
        out.relays.push_back(id);
    }

    GraphConfig config;
    config.flow_model = FlowModel::uniform;
    config.min_population = 0.0;
    config.radius_km = core_distance_km + 50.0;

    auto by_id = [&](CityId id) -> const City& { return cities[static_cast<std::size_t>(id)]; };
    std::vector<Edge> edges;
    for (const auto& core : out.cores) {
        for (std::size_t i = 0; i < core.size(); ++i) {
            for (std::size_t j = i + 1; j < core.size(); ++j) {
                add_link(edges, by_id(core[i]), by_id(core[j]), config.flow_model);
            }
        }
    }
    for (std::size_t r = 0; r < out.relays.size(); ++r) {
        for (const auto& core : out.cores) {
            for (CityId v : core) add_link(edges, by_id(out.relays[r]), by_id(v), config.flow_model);
        }
        for (std::size_t q = r + 1; q < out.relays.size(); ++q) {
            add_link(edges, by_id(out.relays[r]), by_id(out.relays[q]), config.flow_model);
        }
    }
    out.graph = SpatialGraph::from_parts(std::move(cities), std::move(edges), config);
    return out;
}

SpatialGraph fragment_city(const SpatialGraph& g, CityId city, int k) {
    if (k < 2) throw ValidationError("fragment needs k >= 2");
    const auto idx = g.index_of(city);
    if (!idx) throw ValidationError("unknown city " + std::to_string(city));
    const City& original = g.city(*idx);

    CityId next_id = g.cities().back().id + 1;
    std::vector<City> copies;
    for (int i = 0; i < k; ++i) {
        City c = original;
        const LatLon p = on_ring(original.position(), 1.0, i, k);
        c.lat = p.lat;
        c.lon = p.lon;
        c.population = original.population / k;
        if (i > 0) {
            c.id = next_id++;
            c.name = original.name + "#" + std::to_string(i);
        }
        copies.push_back(std::move(c));
    }

    std::vector<City> cities;
    for (const auto& c : g.cities()) {
        if (c.id != city) cities.push_back(c);
    }
    std::vector<Edge> edges;
    for (const auto& e : g.edges()) {
        if (e.a != city && e.b != city) edges.push_back(e);
    }
    const FlowModel model = g.config().flow_model;
    for (const auto& nb : g.neighbors(*idx)) {
        for (const auto& c : copies) add_link(edges, c, g.city(nb.index), model);
    }
    for (std::size_t i = 0; i < copies.size(); ++i) {
        for (std::size_t j = i + 1; j < copies.size(); ++j) add_link(edges, copies[i], copies[j], model);
    }
    cities.insert(cities.end(), copies.begin(), copies.end());
    return SpatialGraph::from_parts(std::move(cities), std::move(edges), g.config());
}

SpatialGraph merge_cities(const SpatialGraph& g, std::span<const CityId> ids) {
    std::vector<CityId> sorted(ids.begin(), ids.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (sorted.size() < 2) throw ValidationError("merge needs at least two distinct cities");
    for (CityId id : sorted) {
        if (!g.index_of(id)) throw ValidationError("unknown city " + std::to_string(id));
    }

    City merged = g.city(*g.index_of(sorted.front()));
    double total = 0.0;
    for (CityId id : sorted) total += g.city(*g.index_of(id)).population;
    std::array<double, 3> acc{0.0, 0.0, 0.0};
    for (CityId id : sorted) {
        const City& c = g.city(*g.index_of(id));
        const double w = total > 0.0 ? c.population / total : 1.0 / sorted.size();
        const auto u = to_unit_vector(c.position());
        for (int i = 0; i < 3; ++i) acc[i] += w * u[i];
    }
    const double norm = std::sqrt(acc[0] * acc[0] + acc[1] * acc[1] + acc[2] * acc[2]);
    if (norm < 1e-12) throw ValidationError("merged cities have no defined centroid");
    merged.lat = std::asin(std::clamp(acc[2] / norm, -1.0, 1.0)) * 180.0 / std::numbers::pi;
    merged.lon = std::atan2(acc[1], acc[0]) * 180.0 / std::numbers::pi;
    merged.population = total;

    auto removed = [&](CityId id) { return std::binary_search(sorted.begin(), sorted.end(), id); };
    std::vector<City> cities;
    for (const auto& c : g.cities()) {
        if (!removed(c.id)) cities.push_back(c);
    }
    std::vector<Edge> edges;
    for (const auto& e : g.edges()) {
        if (!removed(e.a) && !removed(e.b)) edges.push_back(e);
    }
    for (const auto& c : cities) {
        const double d = haversine_km(merged.position(), c.position());
        if (d <= g.config().radius_km && d > 0.0) add_link(edges, merged, c, g.config().flow_model);
    }
    cities.push_back(std::move(merged));
    return SpatialGraph::from_parts(std::move(cities), std::move(edges), g.config());
}

std::vector<SweepRow> fragment_sweep(IntRange m, IntRange n, IntRange k) {
    std::vector<SweepRow> rows;
    CentralityConfig cfg;
    cfg.theta = 0.0;
    for (int mm = m.lo; mm <= m.hi; ++mm) {
        for (int nn = n.lo; nn <= n.hi; ++nn) {
            for (int kk = k.lo; kk <= k.hi; ++kk) {
                const RelayCoreSpec spec{mm, nn, kk};
                const auto rc = build_relay_core_graph(spec);
                const auto b = betweenness_all(rc.graph, cfg);
                double b_sum = 0.0;
                long d_first = -1;
                bool uniform = true;
                for (CityId r : rc.relays) {
                    const auto i = *rc.graph.index_of(r);
                    b_sum += b[i];
                    const long d = static_cast<long>(rc.graph.degree(i));
                    if (d_first < 0) d_first = d;
                    uniform = uniform && d == d_first;
                }
                const auto s = relay_strategic(spec);
                rows.push_back({spec, relay_degree(spec), d_first, relay_betweenness(spec),
                                b_sum / static_cast<double>(rc.relays.size()), s.exact, s.approx,
                                uniform});
            }
        }
    }
    return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
    out << "M,N,K,D_formula,D_computed,B_formula,B_computed,S_exact,S_approx\n";
    for (const auto& r : rows) {
        out << r.spec.m << ',' << r.spec.n << ',' << r.spec.k << ',' << r.d_formula << ','
            << r.d_computed << ',' << fmt_double(r.b_formula) << ',' << fmt_double(r.b_computed)
            << ',' << fmt_double(r.s_exact) << ',' << fmt_double(r.s_approx) << '\n';
    }
}

} // namespace citynet
