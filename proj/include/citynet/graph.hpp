#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "citynet/geo.hpp"

namespace citynet {

using CityId = std::int64_t;

struct City {
    CityId id = 0;
    std::string name;
    std::string country;
    std::string province;
    double lat = 0.0;
    double lon = 0.0;
    double population = 0.0;

    LatLon position() const { return {lat, lon}; }
};

/// Undirected link, stored once with a < b.
struct Edge {
    CityId a = 0;
    CityId b = 0;
    double distance_km = 0.0;
    double flow = 0.0;
};

enum class SeaFilter { none, landmask };
enum class ColocatedPolicy { reject, merge };

/// How flows on new links are derived. `uniform` gives every link flow 1 and
/// is used for abstract topologies whose shortest paths must not depend on
/// the weighting exponent.
enum class FlowModel { gravity, uniform };

struct GraphConfig {
    double radius_km = 500.0;
    double min_population = 10000.0;
    SeaFilter sea_filter = SeaFilter::none;
    std::string landmask_path;
    double max_sea_km = 50.0;
    double sea_sample_km = 5.0;
    ColocatedPolicy colocated = ColocatedPolicy::reject;
    FlowModel flow_model = FlowModel::gravity;
    double theta = 0.5;
};

std::string to_string(SeaFilter v);
std::string to_string(ColocatedPolicy v);
std::string to_string(FlowModel v);
SeaFilter parse_sea_filter(const std::string& s);
ColocatedPolicy parse_colocated_policy(const std::string& s);
FlowModel parse_flow_model(const std::string& s);

/// pop_a * pop_b / d^2. Throws DegeneratePairError when d == 0.
double gravity_flow(double pop_a, double pop_b, double distance_km);

/// Flow a new link between `a` and `b` receives under `model`.
double model_flow(FlowModel model, const City& a, const City& b, double distance_km);

/// Throws ValidationError on out-of-range coordinates, negative or
/// non-finite population.
void validate_city(const City& c);

/// Immutable graph snapshot. Cities are kept sorted by id and edges sorted by
/// (a, b); adjacency is stored as a CSR over city indices.
class SpatialGraph {
public:
    struct Neighbor {
        std::uint32_t index; // neighbor city index
        std::uint32_t edge;  // index into edges()
    };

    SpatialGraph() = default;

    /// Validates and canonicalizes an explicit node/link set. Edges may be
    /// given in any orientation and order; duplicates, self loops, and links
    /// to unknown cities are rejected.
    static SpatialGraph from_parts(std::vector<City> cities, std::vector<Edge> edges,
                                   GraphConfig config);

    std::span<const City> cities() const { return cities_; }
    std::span<const Edge> edges() const { return edges_; }
    const GraphConfig& config() const { return config_; }

    std::size_t size() const { return cities_.size(); }
    const City& city(std::size_t index) const { return cities_[index]; }
    std::optional<std::size_t> index_of(CityId id) const;
    std::span<const Neighbor> neighbors(std::size_t index) const {
        return {adjacency_.data() + offsets_[index], adjacency_.data() + offsets_[index + 1]};
    }
    std::size_t degree(std::size_t index) const { return offsets_[index + 1] - offsets_[index]; }

    /// Induced subgraph on the given city ids (unknown ids ignored).
    SpatialGraph induced(std::span<const CityId> ids) const;

private:
    std::vector<City> cities_;
    std::vector<Edge> edges_;
    GraphConfig config_;
    std::vector<std::size_t> offsets_{0};
    std::vector<Neighbor> adjacency_;
};

using GraphPtr = std::shared_ptr<const SpatialGraph>;

/// Gravity-law network under the hard-disk radius, population threshold and
/// optional sea-crossing filter. When `config.sea_filter` is landmask and no
/// mask is passed, it is loaded from `config.landmask_path`.
SpatialGraph build_graph(std::vector<City> cities, const GraphConfig& config,
                         const LandMask* mask = nullptr);

/// Components as sorted id lists, ordered by smallest member id.
std::vector<std::vector<CityId>> connected_components(const SpatialGraph& g);

// City CSV: id,name,country,province,lat,lon,population
std::vector<City> read_cities_csv(std::istream& in);
std::vector<City> read_cities_csv(const std::filesystem::path& path);
void write_cities_csv(std::ostream& out, std::span<const City> cities);

/// Edge list `a b distance_km flow` sorted by (a, b), plus `<path>.json`
/// carrying the config, counts and the city table.
void write_graph(const std::filesystem::path& edges_path, const SpatialGraph& g);
SpatialGraph read_graph(const std::filesystem::path& edges_path);

} // namespace citynet
