#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "citynet/centrality.hpp"
#include "citynet/graph.hpp"
#include "citynet/ingest.hpp"

namespace citynet {

struct ZoneConfig {
    double radius_km = 500.0;
    std::size_t top_n = 0; // 0 keeps every zone
    double major_threshold = 100.0;
};

void validate(const ZoneConfig& cfg);

/// Circular zone centred on a city. Zones overlap freely.
struct ZoneMetrics {
    CityId center = 0;
    LatLon center_position;
    std::vector<CityId> members; // sorted
    double population = 0.0;
    double d = 0.0; // sum of member degrees
    double b = 0.0; // sum of member betweenness
    double s = 0.0; // b / d, 0 when d == 0
    std::size_t attacks = 0;
    std::int64_t deaths = 0;           // known tolls only
    std::size_t unknown_deaths = 0;    // events with unknown toll
    double mortality_rate = 0.0;       // deaths / max(attacks, 1)
    bool mortality_lower_bound = false; // set when unknown_deaths > 0
    bool major = false;                 // attacks > major_threshold
};

/// Sorted ids of the cities within `radius_km` of city index `center`.
std::vector<CityId> zone_members(const SpatialGraph& g, std::size_t center, double radius_km);

/// One zone per city, ranked by member population (ties to the lower centre
/// id); the top `cfg.top_n` are kept and returned sorted by centre id.
/// `centrality` is indexed like g.cities(); every event must be assigned to a
/// city of g.
std::vector<ZoneMetrics> make_zones(const SpatialGraph& g, std::span<const CityCentrality> centrality,
                                    std::span<const ConflictEvent> events, const ZoneConfig& cfg);

enum class FitMode { exclude_zero, log_plus_one };

std::string to_string(FitMode m);
FitMode parse_fit_mode(const std::string& s);

/// log10(A*) = a log10(S) + b
struct RiskFit {
    double a = 4.0;
    double b = -9.0;
    double r2_adjusted = 0.0;
    std::size_t n = 0;
    std::string selection;
    FitMode mode = FitMode::exclude_zero;
};

struct LineFit {
    double slope;
    double intercept;
    double r2_adjusted;
    std::size_t n;
};

/// Ordinary least squares of y on x with adjusted R^2 (one regressor).
/// Throws InsufficientDataError for fewer than 3 points or constant x.
LineFit ols(std::span<const double> x, std::span<const double> y);

/// OLS on (log10 S_z, log10 A_z) over zones with S_z > 0 and A_z >= 1, or on
/// log10(A_z + 1) over zones with S_z > 0 in log_plus_one mode.
RiskFit fit_power_law(std::span<const ZoneMetrics> zones, FitMode mode = FitMode::exclude_zero,
                      std::string selection = "");

/// 10^(a log10 S + b); none when S <= 0.
std::optional<double> predict_attacks(double s, double a, double b);
std::optional<double> predict_attacks(double s, const RiskFit& fit);

/// Great-circle distance from each zone centre to the nearest major zone
/// centre, excluding the zone itself. None when no other major zone exists.
std::vector<std::optional<double>> distances_to_major(std::span<const ZoneMetrics> zones);

struct ThresholdConfig {
    double d = 1e4;
    double b = 1e7;
    double s = 1e4;
};

struct MetricPanel {
    std::string metric; // "D", "B" or "S"
    double threshold = 0.0;
    std::size_t above = 0; // metric > threshold
    std::size_t below = 0; // metric <= threshold
    std::size_t major_above = 0;
    std::size_t major_below = 0;
    std::optional<double> p_major_above;
    std::optional<double> p_major_below;
    std::optional<double> mean_distance_above;
    std::optional<double> mean_distance_below;
};

struct ThresholdReport {
    std::size_t zones = 0;
    std::size_t major_zones = 0;
    std::array<MetricPanel, 3> panels;
    std::vector<CityId> centers;
    std::vector<std::optional<double>> distance_to_major_km;
    std::optional<double> mean_distance_km;
    // min, 25%, median, 75%, max over defined distances (linear interpolation)
    std::optional<std::array<double, 5>> distance_quantiles_km;

    std::string to_json() const;
};

ThresholdReport threshold_report(std::span<const ZoneMetrics> zones,
                                 const ThresholdConfig& cfg = {});

struct OutlierConfig {
    double ratio_threshold = 10.0;
    double s_threshold = 1e4;
};

struct Outlier {
    CityId center = 0;
    double s = 0.0;
    std::size_t attacks = 0;
    double predicted = 0.0;
    double ratio = 0.0; // predicted / max(attacks, 1)
};

/// Zones whose predicted attacks exceed observed by the ratio threshold and
/// whose S_z is above the high-risk threshold, sorted by ratio descending
/// (then centre id).
std::vector<Outlier> vulnerability_outliers(std::span<const ZoneMetrics> zones, const RiskFit& fit,
                                            const OutlierConfig& cfg = {});

/// Cities with betweenness above `threshold`. `centrality` is indexed like
/// g.cities().
std::vector<City> high_betweenness_cities(const SpatialGraph& g,
                                          std::span<const CityCentrality> centrality,
                                          double threshold);

/// Fraction of events whose nearest listed city is within `radius_km`; none
/// when either input is empty.
std::optional<double> holdout_proximity(std::span<const ConflictEvent> events,
                                        std::span<const City> cities, double radius_km = 50.0);

/// `center_city_id,population,D_z,B_z,S_z,A_z,deaths_z,major,dist_to_major_km,A_star,vuln_ratio`
/// sorted by centre id; undefined values are left empty.
void write_zones_csv(std::ostream& out, std::span<const ZoneMetrics> zones, const RiskFit& fit);
/// Reads back the metric columns of a zone CSV (members and centre positions
/// are not stored and stay empty).
std::vector<ZoneMetrics> read_zones_csv(const std::filesystem::path& path);

/// {a, b, r2_adjusted, n, selection, config}
std::string fit_json(const RiskFit& fit, const ZoneConfig& zone_cfg);
RiskFit fit_from_json(const std::string& text);

} // namespace citynet
