#include "citynet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "citynet/csv.hpp"
#include "citynet/error.hpp"
#include "citynet/format.hpp"

namespace citynet {

namespace {

// Distances below this are treated as the same location.
constexpr double kColocatedKm = 1e-6;

} // namespace

std::string to_string(SeaFilter v) { return v == SeaFilter::none ? "none" : "landmask"; }
std::string to_string(ColocatedPolicy v) { return v == ColocatedPolicy::reject ? "reject" : "merge"; }
std::string to_string(FlowModel v) { return v == FlowModel::gravity ? "gravity" : "uniform"; }

SeaFilter parse_sea_filter(const std::string& s) {
    if (s == "none") return SeaFilter::none;
    if (s == "landmask") return SeaFilter::landmask;
    throw ValidationError("unknown sea filter mode: " + s);
}

ColocatedPolicy parse_colocated_policy(const std::string& s) {
    if (s == "reject") return ColocatedPolicy::reject;
    if (s == "merge") return ColocatedPolicy::merge;
    throw ValidationError("unknown co-located policy: " + s);
}

FlowModel parse_flow_model(const std::string& s) {
    if (s == "gravity") return FlowModel::gravity;
    if (s == "uniform") return FlowModel::uniform;
    throw ValidationError("unknown flow model: " + s);
}

double gravity_flow(double pop_a, double pop_b, double distance_km) {
    if (!(distance_km > 0.0)) {
        throw DegeneratePairError("gravity flow undefined at distance " + fmt_double(distance_km));
    }
    if (pop_a < 0.0 || pop_b < 0.0) throw ValidationError("negative population");
    return pop_a * pop_b / (distance_km * distance_km);
}

double model_flow(FlowModel model, const City& a, const City& b, double distance_km) {
    if (model == FlowModel::uniform) return 1.0;
    return gravity_flow(a.population, b.population, distance_km);
}

void validate_city(const City& c) {
    validate_coordinates(c.position());
    if (!std::isfinite(c.population) || c.population < 0.0) {
        throw ValidationError("city " + std::to_string(c.id) + ": invalid population");
    }
}

SpatialGraph SpatialGraph::from_parts(std::vector<City> cities, std::vector<Edge> edges,
                                      GraphConfig config) {
    SpatialGraph g;
    std::sort(cities.begin(), cities.end(),
              [](const City& x, const City& y) { return x.id < y.id; });
    for (std::size_t i = 0; i < cities.size(); ++i) {
        validate_city(cities[i]);
        if (i > 0 && cities[i].id == cities[i - 1].id) {
            throw ValidationError("duplicate city id " + std::to_string(cities[i].id));
        }
    }
    g.cities_ = std::move(cities);
    g.config_ = std::move(config);

    for (auto& e : edges) {
        if (e.a == e.b) throw ValidationError("self loop on city " + std::to_string(e.a));
        if (e.a > e.b) std::swap(e.a, e.b);
        if (!g.index_of(e.a) || !g.index_of(e.b)) {
            throw ValidationError("edge references missing city (" + std::to_string(e.a) + ", " +
                                  std::to_string(e.b) + ")");
        }
        if (!std::isfinite(e.distance_km) || e.distance_km <= 0.0) {
            throw ValidationError("edge (" + std::to_string(e.a) + ", " + std::to_string(e.b) +
                                  ") has non-positive distance");
        }
        if (!std::isfinite(e.flow) || e.flow < 0.0) {
            throw ValidationError("edge (" + std::to_string(e.a) + ", " + std::to_string(e.b) +
                                  ") has invalid flow");
        }
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
        return x.a != y.a ? x.a < y.a : x.b < y.b;
    });
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (edges[i].a == edges[i - 1].a && edges[i].b == edges[i - 1].b) {
            throw ValidationError("duplicate edge (" + std::to_string(edges[i].a) + ", " +
                                  std::to_string(edges[i].b) + ")");
        }
    }
    g.edges_ = std::move(edges);

    const std::size_t n = g.cities_.size();
    std::vector<std::size_t> deg(n, 0);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> ends(g.edges_.size());
    for (std::size_t k = 0; k < g.edges_.size(); ++k) {
        const auto ia = static_cast<std::uint32_t>(*g.index_of(g.edges_[k].a));
        const auto ib = static_cast<std::uint32_t>(*g.index_of(g.edges_[k].b));
        ends[k] = {ia, ib};
        ++deg[ia];
        ++deg[ib];
    }
    g.offsets_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) g.offsets_[i + 1] = g.offsets_[i] + deg[i];
    g.adjacency_.resize(g.offsets_[n]);
    std::vector<std::size_t> fill(g.offsets_.begin(), g.offsets_.end() - 1);
    // edges are sorted, so each adjacency row ends up sorted by neighbor index
    for (std::size_t k = 0; k < ends.size(); ++k) {
        const auto [ia, ib] = ends[k];
        g.adjacency_[fill[ia]++] = {ib, static_cast<std::uint32_t>(k)};
    }
    for (std::size_t k = 0; k < ends.size(); ++k) {
        const auto [ia, ib] = ends[k];
        g.adjacency_[fill[ib]++] = {ia, static_cast<std::uint32_t>(k)};
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::sort(g.adjacency_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i]),
                  g.adjacency_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i + 1]),
                  [](const Neighbor& x, const Neighbor& y) { return x.index < y.index; });
    }
    return g;
}

std::optional<std::size_t> SpatialGraph::index_of(CityId id) const {
    auto it = std::lower_bound(cities_.begin(), cities_.end(), id,
                               [](const City& c, CityId v) { return c.id < v; });
    if (it == cities_.end() || it->id != id) return std::nullopt;
    return static_cast<std::size_t>(it - cities_.begin());
}

SpatialGraph SpatialGraph::induced(std::span<const CityId> ids) const {
    std::vector<char> keep(cities_.size(), 0);
    for (CityId id : ids) {
        if (auto i = index_of(id)) keep[*i] = 1;
    }
    std::vector<City> cities;
    for (std::size_t i = 0; i < cities_.size(); ++i) {
        if (keep[i]) cities.push_back(cities_[i]);
    }
    std::vector<Edge> edges;
    for (const auto& e : edges_) {
        if (keep[*index_of(e.a)] && keep[*index_of(e.b)]) edges.push_back(e);
    }
    return from_parts(std::move(cities), std::move(edges), config_);
}

namespace {

struct PairScan {
    std::vector<Edge> edges;
    std::vector<std::pair<CityId, CityId>> colocated;
};

PairScan scan_pairs(const std::vector<City>& cities, const GraphConfig& config,
                    const LandMask* mask) {
    const std::size_t n = cities.size();
    const double max_dlat_deg = config.radius_km / (kEarthRadiusKm * std::numbers::pi / 180.0);
    std::vector<std::vector<Edge>> rows(n);
    std::vector<std::vector<std::pair<CityId, CityId>>> coloc(n);

#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n); ++si) {
        const auto i = static_cast<std::size_t>(si);
        const City& ci = cities[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            const City& cj = cities[j];
            if (std::abs(ci.lat - cj.lat) > max_dlat_deg) continue;
            const double d = haversine_km(ci.position(), cj.position());
            if (d < kColocatedKm) {
                coloc[i].emplace_back(ci.id, cj.id);
                continue;
            }
            if (d > config.radius_km) continue;
            if (mask != nullptr &&
                mask->sea_crossing_km(ci.position(), cj.position(), config.sea_sample_km) >
                    config.max_sea_km) {
                continue;
            }
            rows[i].push_back({ci.id, cj.id, d, model_flow(config.flow_model, ci, cj, d)});
        }
    }
    PairScan out;
    for (std::size_t i = 0; i < n; ++i) {
        out.edges.insert(out.edges.end(), rows[i].begin(), rows[i].end());
        out.colocated.insert(out.colocated.end(), coloc[i].begin(), coloc[i].end());
    }
    return out;
}

// Collapses co-located groups into their lowest-id member, summing populations.
std::vector<City> merge_colocated(std::vector<City> cities,
                                  const std::vector<std::pair<CityId, CityId>>& pairs) {
    std::vector<std::size_t> parent(cities.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    auto idx = [&](CityId id) {
        return static_cast<std::size_t>(
            std::lower_bound(cities.begin(), cities.end(), id,
                             [](const City& c, CityId v) { return c.id < v; }) -
            cities.begin());
    };
    for (const auto& [a, b] : pairs) {
        auto ra = find(idx(a));
        auto rb = find(idx(b));
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
    std::vector<City> out;
    for (std::size_t i = 0; i < cities.size(); ++i) {
        if (find(i) != i) cities[find(i)].population += cities[i].population;
    }
    for (std::size_t i = 0; i < cities.size(); ++i) {
        if (find(i) == i) out.push_back(std::move(cities[i]));
    }
    return out;
}

} // namespace

SpatialGraph build_graph(std::vector<City> cities, const GraphConfig& config,
                         const LandMask* mask) {
    if (!(config.radius_km > 0.0)) throw ValidationError("radius_km must be positive");
    std::sort(cities.begin(), cities.end(),
              [](const City& x, const City& y) { return x.id < y.id; });
    for (std::size_t i = 0; i < cities.size(); ++i) {
        validate_city(cities[i]);
        if (i > 0 && cities[i].id == cities[i - 1].id) {
            throw ValidationError("duplicate city id " + std::to_string(cities[i].id));
        }
    }
    std::erase_if(cities, [&](const City& c) { return c.population < config.min_population; });

    LandMask loaded;
    if (config.sea_filter == SeaFilter::landmask && mask == nullptr) {
        loaded = LandMask::load_geojson(config.landmask_path);
        mask = &loaded;
    }
    if (config.sea_filter == SeaFilter::none) mask = nullptr;

    PairScan scan = scan_pairs(cities, config, mask);
    if (!scan.colocated.empty()) {
        if (config.colocated == ColocatedPolicy::reject) {
            std::ostringstream msg;
            msg << scan.colocated.size() << " co-located city pair(s):";
            for (const auto& [a, b] : scan.colocated) msg << " (" << a << ", " << b << ")";
            throw DegeneratePairError(msg.str());
        }
        cities = merge_colocated(std::move(cities), scan.colocated);
        scan = scan_pairs(cities, config, mask);
    }
    return SpatialGraph::from_parts(std::move(cities), std::move(scan.edges), config);
}

std::vector<std::vector<CityId>> connected_components(const SpatialGraph& g) {
    const std::size_t n = g.size();
    std::vector<char> seen(n, 0);
    std::vector<std::vector<CityId>> out;
    std::vector<std::size_t> stack;
    // cities are sorted by id, so components come out ordered by smallest member
    for (std::size_t s = 0; s < n; ++s) {
        if (seen[s]) continue;
        std::vector<CityId> comp;
        seen[s] = 1;
        stack.push_back(s);
        while (!stack.empty()) {
            const auto v = stack.back();
            stack.pop_back();
            comp.push_back(g.city(v).id);
            for (const auto& nb : g.neighbors(v)) {
                if (!seen[nb.index]) {
                    seen[nb.index] = 1;
                    stack.push_back(nb.index);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
    }
    return out;
}

std::vector<City> read_cities_csv(std::istream& in) {
    csv::Reader reader(in);
    std::vector<std::string> f;
    if (!reader.next(f)) throw ParseError(1, "empty city file");
    const std::vector<std::string> expected{"id", "name", "country", "province", "lat", "lon",
                                            "population"};
    for (auto& h : f) h = std::string(csv::trim(h));
    if (f != expected) {
        throw ParseError(reader.line(), "expected header id,name,country,province,lat,lon,population");
    }
    std::vector<City> out;
    while (reader.next(f)) {
        if (f.size() != expected.size()) {
            throw ParseError(reader.line(), "expected 7 fields, got " + std::to_string(f.size()));
        }
        City c;
        auto id = csv::parse_int(f[0]);
        auto lat = csv::parse_double(f[4]);
        auto lon = csv::parse_double(f[5]);
        auto pop = csv::parse_double(f[6]);
        if (!id) throw ParseError(reader.line(), "invalid id '" + f[0] + "'");
        if (!lat || !lon) throw ParseError(reader.line(), "invalid coordinate");
        if (!pop) throw ParseError(reader.line(), "invalid population '" + f[6] + "'");
        c.id = *id;
        c.name = f[1];
        c.country = f[2];
        c.province = f[3];
        c.lat = *lat;
        c.lon = *lon;
        c.population = *pop;
        try {
            validate_city(c);
        } catch (const ValidationError& e) {
            throw ParseError(reader.line(), e.what());
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<City> read_cities_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    return read_cities_csv(in);
}

void write_cities_csv(std::ostream& out, std::span<const City> cities) {
    out << "id,name,country,province,lat,lon,population\n";
    for (const auto& c : cities) {
        out << c.id << ',' << csv::escape(c.name) << ',' << csv::escape(c.country) << ','
            << csv::escape(c.province) << ',' << fmt_double(c.lat) << ',' << fmt_double(c.lon)
            << ',' << fmt_double(c.population) << '\n';
    }
}

namespace {

nlohmann::json config_json(const GraphConfig& c) {
    return {{"radius_km", c.radius_km},
            {"min_population", c.min_population},
            {"sea_filter", to_string(c.sea_filter)},
            {"landmask_path", c.landmask_path},
            {"max_sea_km", c.max_sea_km},
            {"sea_sample_km", c.sea_sample_km},
            {"colocated", to_string(c.colocated)},
            {"flow_model", to_string(c.flow_model)},
            {"theta", c.theta}};
}

GraphConfig config_from_json(const nlohmann::json& j) {
    GraphConfig c;
    c.radius_km = j.value("radius_km", c.radius_km);
    c.min_population = j.value("min_population", c.min_population);
    c.sea_filter = parse_sea_filter(j.value("sea_filter", std::string("none")));
    c.landmask_path = j.value("landmask_path", std::string());
    c.max_sea_km = j.value("max_sea_km", c.max_sea_km);
    c.sea_sample_km = j.value("sea_sample_km", c.sea_sample_km);
    c.colocated = parse_colocated_policy(j.value("colocated", std::string("reject")));
    c.flow_model = parse_flow_model(j.value("flow_model", std::string("gravity")));
    c.theta = j.value("theta", c.theta);
    return c;
}

} // namespace

void write_graph(const std::filesystem::path& edges_path, const SpatialGraph& g) {
    std::ofstream out(edges_path);
    if (!out) throw ValidationError("cannot write " + edges_path.string());
    for (const auto& e : g.edges()) {
        out << e.a << ' ' << e.b << ' ' << fmt_double(e.distance_km) << ' ' << fmt_double(e.flow)
            << '\n';
    }
    nlohmann::json side;
    side["config"] = config_json(g.config());
    side["counts"] = {{"cities", g.size()}, {"edges", g.edges().size()}};
    auto& cities = side["cities"] = nlohmann::json::array();
    for (const auto& c : g.cities()) {
        cities.push_back({{"id", c.id},
                          {"name", c.name},
                          {"country", c.country},
                          {"province", c.province},
                          {"lat", c.lat},
                          {"lon", c.lon},
                          {"population", c.population}});
    }
    std::ofstream js(edges_path.string() + ".json");
    js << side.dump(1) << '\n';
}

SpatialGraph read_graph(const std::filesystem::path& edges_path) {
    std::ifstream js(edges_path.string() + ".json");
    if (!js) throw ValidationError("missing graph sidecar " + edges_path.string() + ".json");
    nlohmann::json side;
    try {
        side = nlohmann::json::parse(js);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("invalid graph sidecar: " + std::string(e.what()));
    }
    std::vector<City> cities;
    for (const auto& c : side.at("cities")) {
        cities.push_back({c.at("id").get<CityId>(), c.value("name", std::string()),
                          c.value("country", std::string()), c.value("province", std::string()),
                          c.at("lat").get<double>(), c.at("lon").get<double>(),
                          c.at("population").get<double>()});
    }
    std::ifstream in(edges_path);
    if (!in) throw ValidationError("cannot open " + edges_path.string());
    std::vector<Edge> edges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.front() == '#') continue;
        std::istringstream ls(line);
        std::string a, b, d, f, extra;
        if (!(ls >> a >> b >> d >> f) || (ls >> extra)) {
            throw ParseError(lineno, "expected 'a b distance_km flow'");
        }
        auto ia = csv::parse_int(a);
        auto ib = csv::parse_int(b);
        auto dd = csv::parse_double(d);
        auto ff = csv::parse_double(f);
        if (!ia || !ib || !dd || !ff) throw ParseError(lineno, "malformed edge");
        edges.push_back({*ia, *ib, *dd, *ff});
    }
    return SpatialGraph::from_parts(std::move(cities), std::move(edges),
                                    config_from_json(side.at("config")));
}

} // namespace citynet
