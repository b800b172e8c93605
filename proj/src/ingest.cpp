#include "citynet/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"

#include "citynet/csv.hpp"
#include "citynet/error.hpp"
#include "citynet/format.hpp"
#include "citynet/rng.hpp"

namespace citynet {

namespace {

constexpr double kTieKm = 1e-9;

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && leap(y) ? 29 : kDays[m - 1];
}

double chord2(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

} // namespace

std::string to_string(EventKind k) { return k == EventKind::terrorism ? "terrorism" : "battle"; }

EventKind parse_event_kind(const std::string& s) {
    if (s == "terrorism") return EventKind::terrorism;
    if (s == "battle") return EventKind::battle;
    throw ValidationError("unknown event kind: " + s);
}

std::optional<Date> parse_date(const std::string& raw) {
    const auto s = csv::trim(raw);
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    auto y = csv::parse_int(s.substr(0, 4));
    auto m = csv::parse_int(s.substr(5, 2));
    auto d = csv::parse_int(s.substr(8, 2));
    if (!y || !m || !d || *m < 1 || *m > 12) return std::nullopt;
    const Date out{static_cast<int>(*y), static_cast<int>(*m), static_cast<int>(*d)};
    if (out.day < 1 || out.day > days_in_month(out.year, out.month)) return std::nullopt;
    return out;
}

std::string to_string(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

// Howard Hinnant's days_from_civil / civil_from_days.
std::int64_t days_from_civil(const Date& d) {
    const std::int64_t y = d.year - (d.month <= 2 ? 1 : 0);
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned mp = static_cast<unsigned>(d.month + (d.month > 2 ? -3 : 9));
    const unsigned doy = (153 * mp + 2) / 5 + static_cast<unsigned>(d.day) - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

Date civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {static_cast<int>(y + (m <= 2 ? 1 : 0)), static_cast<int>(m), static_cast<int>(d)};
}

std::size_t RejectionReport::rejected() const {
    std::size_t n = 0;
    for (const auto& [reason, count] : by_reason) n += count;
    return n;
}

std::string RejectionReport::to_json() const {
    nlohmann::json j;
    j["rows"] = rows;
    j["accepted"] = accepted;
    j["rejected"] = rejected();
    j["by_reason"] = nlohmann::json::object();
    for (const auto& [reason, count] : by_reason) j["by_reason"][reason] = count;
    return j.dump(1);
}

ParsedEvents parse_events(std::istream& in, EventKind kind, const DateWindow& window) {
    csv::Reader reader(in);
    std::vector<std::string> f;
    if (!reader.next(f)) throw ParseError(1, "empty event file");
    for (auto& h : f) h = std::string(csv::trim(h));
    const std::vector<std::string> base{"event_id", "date", "lat", "lon", "deaths", "kind"};
    const bool with_assignment =
        f.size() == 8 && f[6] == "assigned_city" && f[7] == "assignment_distance_km";
    if (!std::equal(base.begin(), base.end(), f.begin(), f.end()) && !with_assignment) {
        throw ParseError(reader.line(), "expected header event_id,date,lat,lon,deaths,kind");
    }
    if (with_assignment && !std::equal(base.begin(), base.end(), f.begin())) {
        throw ParseError(reader.line(), "expected header event_id,date,lat,lon,deaths,kind");
    }
    const std::size_t width = with_assignment ? 8 : 6;

    ParsedEvents out;
    while (reader.next(f)) {
        const auto line = reader.line();
        if (f.size() != width) {
            throw ParseError(line, "expected " + std::to_string(width) + " fields, got " +
                                       std::to_string(f.size()));
        }
        ++out.report.rows;
        ConflictEvent ev;
        ev.id = std::string(csv::trim(f[0]));
        auto date = parse_date(f[1]);
        if (!date) throw ParseError(line, "invalid date '" + f[1] + "'");
        ev.date = *date;
        if (!csv::trim(f[4]).empty()) {
            auto deaths = csv::parse_int(f[4]);
            if (!deaths || *deaths < 0) throw ParseError(line, "invalid death toll '" + f[4] + "'");
            ev.deaths = *deaths;
        }
        try {
            ev.kind = parse_event_kind(std::string(csv::trim(f[5])));
        } catch (const ValidationError&) {
            throw ParseError(line, "invalid kind '" + f[5] + "'");
        }

        const auto lat_s = csv::trim(f[2]);
        const auto lon_s = csv::trim(f[3]);
        const char* reason = nullptr;
        if (lat_s.empty() || lon_s.empty()) {
            reason = rejection::kMissingCoordinate;
        } else {
            auto lat = csv::parse_double(lat_s);
            auto lon = csv::parse_double(lon_s);
            if (!lat || !lon || *lat < -90.0 || *lat > 90.0 || *lon < -180.0 || *lon > 180.0) {
                reason = rejection::kInvalidCoordinate;
            } else {
                ev.lat = *lat;
                ev.lon = *lon;
            }
        }
        if (reason == nullptr && !window.contains(ev.date)) reason = rejection::kOutsideWindow;
        if (reason == nullptr && ev.kind != kind) reason = rejection::kKindMismatch;
        if (reason != nullptr) {
            ++out.report.by_reason[reason];
            continue;
        }
        if (with_assignment && !csv::trim(f[6]).empty()) {
            auto city = csv::parse_int(f[6]);
            auto dist = csv::parse_double(f[7]);
            if (!city || !dist) throw ParseError(line, "invalid assignment columns");
            ev.assigned_city = *city;
            ev.assignment_distance_km = *dist;
        }
        out.events.push_back(std::move(ev));
        ++out.report.accepted;
    }
    return out;
}

ParsedEvents parse_events(const std::filesystem::path& path, EventKind kind,
                          const DateWindow& window) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    return parse_events(in, kind, window);
}

void write_events_csv(std::ostream& out, std::span<const ConflictEvent> events) {
    out << "event_id,date,lat,lon,deaths,kind,assigned_city,assignment_distance_km\n";
    for (const auto& e : events) {
        out << csv::escape(e.id) << ',' << to_string(e.date) << ',' << fmt_double(e.lat) << ','
            << fmt_double(e.lon) << ',';
        if (e.deaths) out << *e.deaths;
        out << ',' << to_string(e.kind) << ',';
        if (e.assigned_city) out << *e.assigned_city << ',' << fmt_double(e.assignment_distance_km);
        else out << ',';
        out << '\n';
    }
}

NearestCityIndex::NearestCityIndex(std::span<const City> cities)
    : cities_(cities.begin(), cities.end()) {
    std::sort(cities_.begin(), cities_.end(),
              [](const City& a, const City& b) { return a.id < b.id; });
    unit_.reserve(cities_.size());
    for (const auto& c : cities_) unit_.push_back(to_unit_vector(c.position()));
}

NearestCityIndex::Hit NearestCityIndex::nearest(LatLon p) const {
    if (cities_.empty()) throw ValidationError("nearest-city lookup on an empty city set");
    const auto u = to_unit_vector(p);
    double best2 = std::numeric_limits<double>::infinity();
    for (const auto& v : unit_) best2 = std::min(best2, chord2(u, v));
    // chord length is monotone in great-circle distance; keep a margin for rounding
    const double limit = best2 * (1.0 + 1e-6) + 1e-18;
    Hit hit{0, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < cities_.size(); ++i) {
        if (chord2(u, unit_[i]) > limit) continue;
        const double d = haversine_km(p, cities_[i].position());
        if (d < hit.distance_km - kTieKm) hit = {i, d};
    }
    return hit;
}

AssignmentSummary assign_nearest_city(std::vector<ConflictEvent>& events, const SpatialGraph& g) {
    if (g.size() == 0) throw ValidationError("cannot assign events: graph has no cities");
    const NearestCityIndex index(g.cities());
    // index sorts by id exactly like the graph, so positions coincide
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(events.size()); ++k) {
        auto& e = events[static_cast<std::size_t>(k)];
        const auto hit = index.nearest(e.position());
        e.assigned_city = g.city(hit.index).id;
        e.assignment_distance_km = hit.distance_km;
    }
    AssignmentSummary s;
    s.assigned = events.size();
    double sum = 0.0;
    for (const auto& e : events) {
        sum += e.assignment_distance_km;
        s.max_distance_km = std::max(s.max_distance_km, e.assignment_distance_km);
    }
    s.mean_distance_km = events.empty() ? 0.0 : sum / static_cast<double>(events.size());
    return s;
}

std::vector<ConflictEvent> synthesize_events(const SpatialGraph& g,
                                             std::span<const PlantedSite> sites,
                                             const DateWindow& window, EventKind kind,
                                             std::uint64_t seed, double unknown_deaths) {
    const double km_per_deg = kEarthRadiusKm * std::numbers::pi / 180.0;
    const auto day0 = days_from_civil(window.from);
    const auto span_days = days_from_civil(window.to) - day0 + 1;
    std::vector<ConflictEvent> out;
    std::size_t serial = 0;
    for (std::size_t s = 0; s < sites.size(); ++s) {
        const auto idx = g.index_of(sites[s].city);
        if (!idx) throw ValidationError("planted site references unknown city");
        const City& c = g.city(*idx);
        for (std::size_t k = 0; k < sites[s].count; ++k) {
            CounterRng rng(seed, static_cast<std::uint64_t>(s), k);
            ConflictEvent e;
            e.id = "ev" + std::to_string(++serial);
            const double north = rng.normal() * sites[s].spread_km;
            const double east = rng.normal() * sites[s].spread_km;
            e.lat = std::clamp(c.lat + north / km_per_deg, -90.0, 90.0);
            const double coslat = std::max(std::cos(c.lat * std::numbers::pi / 180.0), 1e-6);
            e.lon = c.lon + east / (km_per_deg * coslat);
            if (e.lon > 180.0) e.lon -= 360.0;
            if (e.lon < -180.0) e.lon += 360.0;
            e.date = civil_from_days(day0 + static_cast<std::int64_t>(rng.uniform() *
                                                                      static_cast<double>(span_days)));
            if (rng.uniform() >= unknown_deaths) {
                e.deaths = static_cast<std::int64_t>(std::floor(-std::log1p(-rng.uniform()) * 3.0));
            }
            e.kind = kind;
            out.push_back(std::move(e));
        }
    }
    return out;
}

} // namespace citynet
