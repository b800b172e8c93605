#pragma once

#include <array>
#include <filesystem>
#include <vector>

namespace citynet {

/// Mean Earth radius (IUGG), km.
inline constexpr double kEarthRadiusKm = 6371.0088;

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;
};

/// Throws ValidationError unless lat in [-90, 90] and lon in [-180, 180].
void validate_coordinates(LatLon p);

/// Great-circle distance in km.
double haversine_km(LatLon p1, LatLon p2);

/// Unit vector on the sphere; used for fast chord-length comparisons.
std::array<double, 3> to_unit_vector(LatLon p);

/// Point at fraction t in [0, 1] along the great circle from a to b.
LatLon interpolate_great_circle(LatLon a, LatLon b, double t);

/// Land polygons for the optional sea-crossing filter. Rings are in
/// (lon, lat) degrees; a point is on land if it falls inside an odd number
/// of rings of any polygon (holes work naturally).
class LandMask {
public:
    using Ring = std::vector<std::array<double, 2>>;

    LandMask() = default;
    explicit LandMask(std::vector<Ring> rings);

    /// Loads a GeoJSON Polygon, MultiPolygon, Feature or FeatureCollection.
    static LandMask load_geojson(const std::filesystem::path& path);

    bool on_land(LatLon p) const;

    /// Length of the great-circle chord a-b that lies over sea, estimated by
    /// classifying the midpoints of segments of at most `step_km`.
    double sea_crossing_km(LatLon a, LatLon b, double step_km) const;

    bool empty() const noexcept { return rings_.empty(); }

private:
    struct BoundedRing {
        Ring points;
        double min_lon, max_lon, min_lat, max_lat;
    };
    std::vector<BoundedRing> rings_;
};

} // namespace citynet
