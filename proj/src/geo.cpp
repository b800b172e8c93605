#include "citynet/geo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "json.hpp"

#include "citynet/error.hpp"

namespace citynet {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

} // namespace

void validate_coordinates(LatLon p) {
    if (!std::isfinite(p.lat) || !std::isfinite(p.lon) || p.lat < -90.0 || p.lat > 90.0 ||
        p.lon < -180.0 || p.lon > 180.0) {
        throw ValidationError("coordinate out of range: (" + std::to_string(p.lat) + ", " +
                              std::to_string(p.lon) + ")");
    }
}

double haversine_km(LatLon p1, LatLon p2) {
    validate_coordinates(p1);
    validate_coordinates(p2);
    const double phi1 = p1.lat * kDegToRad;
    const double phi2 = p2.lat * kDegToRad;
    const double dphi = (p2.lat - p1.lat) * kDegToRad;
    const double dlambda = (p2.lon - p1.lon) * kDegToRad;
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlambda / 2.0);
    double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    h = std::clamp(h, 0.0, 1.0);
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

std::array<double, 3> to_unit_vector(LatLon p) {
    const double phi = p.lat * kDegToRad;
    const double lambda = p.lon * kDegToRad;
    return {std::cos(phi) * std::cos(lambda), std::cos(phi) * std::sin(lambda), std::sin(phi)};
}

LatLon interpolate_great_circle(LatLon a, LatLon b, double t) {
    const auto u = to_unit_vector(a);
    const auto v = to_unit_vector(b);
    const double dot = std::clamp(u[0] * v[0] + u[1] * v[1] + u[2] * v[2], -1.0, 1.0);
    const double omega = std::acos(dot);
    std::array<double, 3> p{};
    if (omega < 1e-12) {
        p = u;
    } else {
        const double s = std::sin(omega);
        const double wa = std::sin((1.0 - t) * omega) / s;
        const double wb = std::sin(t * omega) / s;
        for (int i = 0; i < 3; ++i) p[i] = wa * u[i] + wb * v[i];
    }
    const double norm = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    return {std::asin(std::clamp(p[2] / norm, -1.0, 1.0)) * kRadToDeg,
            std::atan2(p[1], p[0]) * kRadToDeg};
}

LandMask::LandMask(std::vector<Ring> rings) {
    for (auto& r : rings) {
        if (r.size() < 3) continue;
        BoundedRing br{std::move(r), 1e9, -1e9, 1e9, -1e9};
        for (const auto& pt : br.points) {
            br.min_lon = std::min(br.min_lon, pt[0]);
            br.max_lon = std::max(br.max_lon, pt[0]);
            br.min_lat = std::min(br.min_lat, pt[1]);
            br.max_lat = std::max(br.max_lat, pt[1]);
        }
        rings_.push_back(std::move(br));
    }
}

namespace {

void collect_rings(const nlohmann::json& geom, std::vector<LandMask::Ring>& out) {
    const auto type = geom.at("type").get<std::string>();
    auto add_polygon = [&](const nlohmann::json& poly) {
        for (const auto& ring : poly) {
            LandMask::Ring r;
            for (const auto& pt : ring) r.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
            out.push_back(std::move(r));
        }
    };
    if (type == "FeatureCollection") {
        for (const auto& f : geom.at("features")) collect_rings(f, out);
    } else if (type == "Feature") {
        if (!geom.at("geometry").is_null()) collect_rings(geom.at("geometry"), out);
    } else if (type == "Polygon") {
        add_polygon(geom.at("coordinates"));
    } else if (type == "MultiPolygon") {
        for (const auto& poly : geom.at("coordinates")) add_polygon(poly);
    } else if (type == "GeometryCollection") {
        for (const auto& g : geom.at("geometries")) collect_rings(g, out);
    }
}

} // namespace

LandMask LandMask::load_geojson(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open land mask: " + path.string());
    std::vector<Ring> rings;
    try {
        collect_rings(nlohmann::json::parse(in), rings);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("invalid land mask GeoJSON: " + std::string(e.what()));
    }
    if (rings.empty()) throw ValidationError("land mask has no polygons: " + path.string());
    return LandMask(std::move(rings));
}

bool LandMask::on_land(LatLon p) const {
    bool inside = false;
    for (const auto& ring : rings_) {
        if (p.lon < ring.min_lon || p.lon > ring.max_lon || p.lat < ring.min_lat ||
            p.lat > ring.max_lat) {
            continue;
        }
        const auto& pts = ring.points;
        const std::size_t n = pts.size();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            const double xi = pts[i][0], yi = pts[i][1];
            const double xj = pts[j][0], yj = pts[j][1];
            if ((yi > p.lat) != (yj > p.lat) &&
                p.lon < (xj - xi) * (p.lat - yi) / (yj - yi) + xi) {
                inside = !inside;
            }
        }
    }
    return inside;
}

double LandMask::sea_crossing_km(LatLon a, LatLon b, double step_km) const {
    const double total = haversine_km(a, b);
    if (total <= 0.0) return 0.0;
    const auto segments = static_cast<std::size_t>(std::ceil(total / step_km));
    const double seg_len = total / static_cast<double>(segments);
    double sea = 0.0;
    for (std::size_t s = 0; s < segments; ++s) {
        const double t = (static_cast<double>(s) + 0.5) / static_cast<double>(segments);
        if (!on_land(interpolate_great_circle(a, b, t))) sea += seg_len;
    }
    return sea;
}

} // namespace citynet
