#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "citynet/graph.hpp"

namespace citynet {

enum class EventKind { terrorism, battle };

std::string to_string(EventKind k);
EventKind parse_event_kind(const std::string& s);

/// Calendar day (proleptic Gregorian).
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;
};

/// Parses YYYY-MM-DD; none on malformed or impossible dates.
std::optional<Date> parse_date(const std::string& s);
std::string to_string(const Date& d);
std::int64_t days_from_civil(const Date& d);
Date civil_from_days(std::int64_t days);

/// Closed interval [from, to].
struct DateWindow {
    Date from{2002, 1, 1};
    Date to{2014, 12, 31};

    bool contains(const Date& d) const { return from <= d && d <= to; }
};

struct ConflictEvent {
    std::string id;
    Date date;
    double lat = 0.0;
    double lon = 0.0;
    std::optional<std::int64_t> deaths; // none = unknown toll
    EventKind kind = EventKind::terrorism;
    std::optional<CityId> assigned_city;
    double assignment_distance_km = 0.0;

    LatLon position() const { return {lat, lon}; }
};

struct RejectionReport {
    std::size_t rows = 0;     // data rows read
    std::size_t accepted = 0; // rows turned into events
    std::map<std::string, std::size_t> by_reason;

    std::size_t rejected() const;
    std::string to_json() const;
};

struct ParsedEvents {
    std::vector<ConflictEvent> events;
    RejectionReport report;
};

namespace rejection {
inline constexpr const char* kMissingCoordinate = "missing coordinate";
inline constexpr const char* kInvalidCoordinate = "invalid coordinate";
inline constexpr const char* kOutsideWindow = "outside window";
inline constexpr const char* kKindMismatch = "kind mismatch";
} // namespace rejection

/// Event CSV `event_id,date,lat,lon,deaths,kind` (extra trailing columns
/// `assigned_city,assignment_distance_km` are accepted and read back).
/// Rows with missing or invalid coordinates, dates outside `window`, or a
/// different kind are dropped and counted. A malformed header, field count,
/// date, death toll or kind is a ParseError carrying the line number.
ParsedEvents parse_events(std::istream& in, EventKind kind, const DateWindow& window);
ParsedEvents parse_events(const std::filesystem::path& path, EventKind kind,
                          const DateWindow& window);

void write_events_csv(std::ostream& out, std::span<const ConflictEvent> events);

/// Exact nearest-city lookup. Candidates are pre-selected by 3-D chord length
/// and decided by haversine distance; ties within 1e-9 km go to the lower id.
class NearestCityIndex {
public:
    explicit NearestCityIndex(std::span<const City> cities);

    struct Hit {
        std::size_t index;
        double distance_km;
    };
    Hit nearest(LatLon p) const;

    bool empty() const noexcept { return cities_.empty(); }

private:
    std::vector<City> cities_;
    std::vector<std::array<double, 3>> unit_;
};

struct AssignmentSummary {
    std::size_t assigned = 0;
    double mean_distance_km = 0.0;
    double max_distance_km = 0.0;
};

/// Sets assigned_city / assignment_distance_km on every event. Death tolls
/// are left untouched. Throws ValidationError on an empty graph.
AssignmentSummary assign_nearest_city(std::vector<ConflictEvent>& events, const SpatialGraph& g);

struct PlantedSite {
    CityId city = 0;
    std::size_t count = 0;
    double spread_km = 10.0; // standard deviation of the isotropic offset
};

/// Synthetic events scattered around chosen cities with uniform dates in
/// `window`. Death tolls are geometric-ish small integers; a fraction
/// `unknown_deaths` of them is left unknown.
std::vector<ConflictEvent> synthesize_events(const SpatialGraph& g,
                                             std::span<const PlantedSite> sites,
                                             const DateWindow& window, EventKind kind,
                                             std::uint64_t seed, double unknown_deaths = 0.05);

} // namespace citynet
