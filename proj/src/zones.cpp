#include "citynet/zones.hpp"

#include <algorithm>
#include <fstream>
#include <cmath>
#include <numbers>
#include <numeric>

#include "json.hpp"

#include "citynet/csv.hpp"
#include "citynet/error.hpp"
#include "citynet/format.hpp"

namespace citynet {

namespace {

using nlohmann::json;

struct CityEvents {
    std::size_t attacks = 0;
    std::int64_t deaths = 0;
    std::size_t unknown = 0;
};

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double quantile_sorted(const std::vector<double>& v, double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

} // namespace

void validate(const ZoneConfig& cfg) {
    if (!(cfg.radius_km >= 0.0) || !std::isfinite(cfg.radius_km)) {
        throw ValidationError("zone radius_km must be finite and >= 0");
    }
    if (!std::isfinite(cfg.major_threshold)) throw ValidationError("major_threshold must be finite");
}

std::vector<CityId> zone_members(const SpatialGraph& g, std::size_t center, double radius_km) {
    const double km_per_deg = kEarthRadiusKm * std::numbers::pi / 180.0;
    const City& c = g.city(center);
    std::vector<CityId> out;
    for (std::size_t j = 0; j < g.size(); ++j) {
        const City& o = g.city(j);
        if (std::abs(o.lat - c.lat) * km_per_deg > radius_km * (1.0 + 1e-9)) continue;
        if (j == center || haversine_km(c.position(), o.position()) <= radius_km) out.push_back(o.id);
    }
    return out; // cities are id-sorted, so members are too
}

std::vector<ZoneMetrics> make_zones(const SpatialGraph& g, std::span<const CityCentrality> centrality,
                                    std::span<const ConflictEvent> events, const ZoneConfig& cfg) {
    validate(cfg);
    if (centrality.size() != g.size()) {
        throw ValidationError("centrality table does not match the graph");
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (centrality[i].id != g.city(i).id) {
            throw ValidationError("centrality table is not aligned with the graph cities");
        }
    }
    std::vector<CityEvents> per_city(g.size());
    for (const auto& e : events) {
        if (!e.assigned_city) throw ValidationError("event " + e.id + " has no assigned city");
        const auto idx = g.index_of(*e.assigned_city);
        if (!idx) {
            throw ValidationError("event " + e.id + " is assigned to unknown city " +
                                  std::to_string(*e.assigned_city));
        }
        auto& ce = per_city[*idx];
        ++ce.attacks;
        if (e.deaths) ce.deaths += *e.deaths;
        else ++ce.unknown;
    }

    const auto n = static_cast<std::ptrdiff_t>(g.size());
    std::vector<std::vector<CityId>> members(g.size());
    std::vector<double> population(g.size(), 0.0);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        members[u] = zone_members(g, u, cfg.radius_km);
        double p = 0.0;
        for (CityId id : members[u]) p += g.city(*g.index_of(id)).population;
        population[u] = p;
    }

    std::vector<std::size_t> order(g.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return population[a] > population[b];
    });
    if (cfg.top_n > 0 && order.size() > cfg.top_n) order.resize(cfg.top_n);
    std::sort(order.begin(), order.end());

    std::vector<ZoneMetrics> out;
    out.reserve(order.size());
    for (std::size_t ci : order) {
        ZoneMetrics z;
        z.center = g.city(ci).id;
        z.center_position = g.city(ci).position();
        z.members = std::move(members[ci]);
        z.population = population[ci];
        for (CityId id : z.members) {
            const auto k = *g.index_of(id);
            z.d += static_cast<double>(centrality[k].degree);
            z.b += centrality[k].betweenness;
            z.attacks += per_city[k].attacks;
            z.deaths += per_city[k].deaths;
            z.unknown_deaths += per_city[k].unknown;
        }
        z.s = z.d > 0.0 ? z.b / z.d : 0.0;
        z.mortality_rate =
            static_cast<double>(z.deaths) / static_cast<double>(std::max<std::size_t>(z.attacks, 1));
        z.mortality_lower_bound = z.unknown_deaths > 0;
        z.major = static_cast<double>(z.attacks) > cfg.major_threshold;
        out.push_back(std::move(z));
    }
    return out;
}

std::string to_string(FitMode m) {
    return m == FitMode::exclude_zero ? "exclude_zero" : "log_plus_one";
}

FitMode parse_fit_mode(const std::string& s) {
    if (s == "exclude_zero") return FitMode::exclude_zero;
    if (s == "log_plus_one") return FitMode::log_plus_one;
    throw ValidationError("unknown fit mode: " + s);
}

LineFit ols(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("ols: x and y differ in length");
    const std::size_t n = x.size();
    if (n < 3) {
        throw InsufficientDataError("regression needs at least 3 usable points, got " +
                                    std::to_string(n));
    }
    const double nd = static_cast<double>(n);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= nd;
    my /= nd;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw InsufficientDataError("regression needs at least two distinct x values");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.n = n;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (f.slope * x[i] + f.intercept);
        ss_res += r * r;
    }
    const double r2 = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
    f.r2_adjusted = 1.0 - (1.0 - r2) * (nd - 1.0) / (nd - 2.0);
    return f;
}

RiskFit fit_power_law(std::span<const ZoneMetrics> zones, FitMode mode, std::string selection) {
    std::vector<double> x, y;
    for (const auto& z : zones) {
        if (!(z.s > 0.0)) continue;
        if (mode == FitMode::exclude_zero) {
            if (z.attacks < 1) continue;
            y.push_back(std::log10(static_cast<double>(z.attacks)));
        } else {
            y.push_back(std::log10(static_cast<double>(z.attacks) + 1.0));
        }
        x.push_back(std::log10(z.s));
    }
    const auto f = ols(x, y);
    RiskFit r;
    r.a = f.slope;
    r.b = f.intercept;
    r.r2_adjusted = f.r2_adjusted;
    r.n = f.n;
    r.selection = std::move(selection);
    r.mode = mode;
    return r;
}

std::optional<double> predict_attacks(double s, double a, double b) {
    if (!(s > 0.0)) return std::nullopt;
    return std::pow(10.0, a * std::log10(s) + b);
}

std::optional<double> predict_attacks(double s, const RiskFit& fit) {
    return predict_attacks(s, fit.a, fit.b);
}

std::vector<std::optional<double>> distances_to_major(std::span<const ZoneMetrics> zones) {
    std::vector<std::optional<double>> out(zones.size());
    std::vector<std::size_t> majors;
    for (std::size_t i = 0; i < zones.size(); ++i) {
        if (zones[i].major) majors.push_back(i);
    }
    for (std::size_t i = 0; i < zones.size(); ++i) {
        for (std::size_t m : majors) {
            if (m == i) continue;
            const double d = haversine_km(zones[i].center_position, zones[m].center_position);
            if (!out[i] || d < *out[i]) out[i] = d;
        }
    }
    return out;
}

ThresholdReport threshold_report(std::span<const ZoneMetrics> zones, const ThresholdConfig& cfg) {
    ThresholdReport r;
    r.zones = zones.size();
    r.distance_to_major_km = distances_to_major(zones);
    for (const auto& z : zones) {
        r.centers.push_back(z.center);
        if (z.major) ++r.major_zones;
    }

    const std::array<std::string, 3> names{"D", "B", "S"};
    const std::array<double, 3> thresholds{cfg.d, cfg.b, cfg.s};
    for (std::size_t p = 0; p < 3; ++p) {
        MetricPanel& panel = r.panels[p];
        panel.metric = names[p];
        panel.threshold = thresholds[p];
        std::vector<double> dist_above, dist_below;
        for (std::size_t i = 0; i < zones.size(); ++i) {
            const auto& z = zones[i];
            const double v = p == 0 ? z.d : p == 1 ? z.b : z.s;
            const bool above = v > panel.threshold;
            (above ? panel.above : panel.below) += 1;
            if (z.major) (above ? panel.major_above : panel.major_below) += 1;
            if (r.distance_to_major_km[i]) {
                (above ? dist_above : dist_below).push_back(*r.distance_to_major_km[i]);
            }
        }
        if (panel.above > 0) {
            panel.p_major_above =
                static_cast<double>(panel.major_above) / static_cast<double>(panel.above);
        }
        if (panel.below > 0) {
            panel.p_major_below =
                static_cast<double>(panel.major_below) / static_cast<double>(panel.below);
        }
        panel.mean_distance_above = mean_of(dist_above);
        panel.mean_distance_below = mean_of(dist_below);
    }

    std::vector<double> defined;
    for (const auto& d : r.distance_to_major_km) {
        if (d) defined.push_back(*d);
    }
    r.mean_distance_km = mean_of(defined);
    if (!defined.empty()) {
        std::sort(defined.begin(), defined.end());
        r.distance_quantiles_km = std::array<double, 5>{
            defined.front(), quantile_sorted(defined, 0.25), quantile_sorted(defined, 0.5),
            quantile_sorted(defined, 0.75), defined.back()};
    }
    return r;
}

std::string ThresholdReport::to_json() const {
    json j;
    j["zones"] = zones;
    j["major_zones"] = major_zones;
    j["panels"] = json::array();
    for (const auto& p : panels) {
        j["panels"].push_back({{"metric", p.metric},
                               {"threshold", p.threshold},
                               {"above", p.above},
                               {"below", p.below},
                               {"major_above", p.major_above},
                               {"major_below", p.major_below},
                               {"p_major_above", opt_json(p.p_major_above)},
                               {"p_major_below", opt_json(p.p_major_below)},
                               {"mean_distance_above_km", opt_json(p.mean_distance_above)},
                               {"mean_distance_below_km", opt_json(p.mean_distance_below)}});
    }
    j["mean_distance_to_major_km"] = opt_json(mean_distance_km);
    if (distance_quantiles_km) {
        const auto& q = *distance_quantiles_km;
        j["distance_quantiles_km"] = {
            {"min", q[0]}, {"q25", q[1]}, {"median", q[2]}, {"q75", q[3]}, {"max", q[4]}};
    } else {
        j["distance_quantiles_km"] = nullptr;
    }
    json per_zone = json::array();
    for (std::size_t i = 0; i < centers.size(); ++i) {
        per_zone.push_back({{"center_city_id", centers[i]},
                            {"dist_to_major_km", opt_json(distance_to_major_km[i])}});
    }
    j["zones_detail"] = std::move(per_zone);
    return j.dump(1);
}

std::vector<Outlier> vulnerability_outliers(std::span<const ZoneMetrics> zones, const RiskFit& fit,
                                            const OutlierConfig& cfg) {
    std::vector<Outlier> out;
    for (const auto& z : zones) {
        if (!(z.s > cfg.s_threshold)) continue;
        const auto pred = predict_attacks(z.s, fit);
        if (!pred) continue;
        const double ratio = *pred / static_cast<double>(std::max<std::size_t>(z.attacks, 1));
        if (ratio >= cfg.ratio_threshold) out.push_back({z.center, z.s, z.attacks, *pred, ratio});
    }
    std::sort(out.begin(), out.end(), [](const Outlier& a, const Outlier& b) {
        if (a.ratio != b.ratio) return a.ratio > b.ratio;
        return a.center < b.center;
    });
    return out;
}

std::vector<City> high_betweenness_cities(const SpatialGraph& g,
                                          std::span<const CityCentrality> centrality,
                                          double threshold) {
    if (centrality.size() != g.size()) {
        throw ValidationError("centrality table does not match the graph");
    }
    std::vector<City> out;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (centrality[i].betweenness > threshold) out.push_back(g.city(i));
    }
    return out;
}

std::optional<double> holdout_proximity(std::span<const ConflictEvent> events,
                                        std::span<const City> cities, double radius_km) {
    if (events.empty() || cities.empty()) return std::nullopt;
    const NearestCityIndex index(cities);
    std::size_t within = 0;
    for (const auto& e : events) {
        if (index.nearest(e.position()).distance_km <= radius_km) ++within;
    }
    return static_cast<double>(within) / static_cast<double>(events.size());
}

void write_zones_csv(std::ostream& out, std::span<const ZoneMetrics> zones, const RiskFit& fit) {
    std::vector<std::size_t> order(zones.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return zones[a].center < zones[b].center; });
    const auto dist = distances_to_major(zones);
    out << "center_city_id,population,D_z,B_z,S_z,A_z,deaths_z,major,dist_to_major_km,A_star,"
           "vuln_ratio\n";
    for (std::size_t i : order) {
        const auto& z = zones[i];
        out << z.center << ',' << fmt_double(z.population) << ',' << fmt_double(z.d) << ','
            << fmt_double(z.b) << ',' << fmt_double(z.s) << ',' << z.attacks << ',' << z.deaths
            << ',' << (z.major ? 1 : 0) << ',';
        if (dist[i]) out << fmt_double(*dist[i]);
        out << ',';
        const auto pred = predict_attacks(z.s, fit);
        if (pred) {
            out << fmt_double(*pred) << ','
                << fmt_double(*pred / static_cast<double>(std::max<std::size_t>(z.attacks, 1)));
        } else {
            out << ',';
        }
        out << '\n';
    }
}

std::vector<ZoneMetrics> read_zones_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    csv::Reader reader(in);
    std::vector<std::string> f;
    if (!reader.next(f) || f.size() != 11 || f[0] != "center_city_id" || f[5] != "A_z") {
        throw ParseError(reader.line(), "expected zone report header");
    }
    std::vector<ZoneMetrics> out;
    while (reader.next(f)) {
        if (f.size() != 11) throw ParseError(reader.line(), "expected 11 fields");
        auto id = csv::parse_int(f[0]);
        auto pop = csv::parse_double(f[1]);
        auto d = csv::parse_double(f[2]);
        auto b = csv::parse_double(f[3]);
        auto s = csv::parse_double(f[4]);
        auto a = csv::parse_int(f[5]);
        auto deaths = csv::parse_int(f[6]);
        auto major = csv::parse_int(f[7]);
        if (!id || !pop || !d || !b || !s || !a || *a < 0 || !deaths || !major) {
            throw ParseError(reader.line(), "malformed zone row");
        }
        ZoneMetrics z;
        z.center = *id;
        z.population = *pop;
        z.d = *d;
        z.b = *b;
        z.s = *s;
        z.attacks = static_cast<std::size_t>(*a);
        z.deaths = *deaths;
        z.major = *major != 0;
        z.mortality_rate = static_cast<double>(z.deaths) /
                           static_cast<double>(std::max<std::size_t>(z.attacks, 1));
        out.push_back(std::move(z));
    }
    return out;
}

std::string fit_json(const RiskFit& fit, const ZoneConfig& zone_cfg) {
    json j;
    j["a"] = fit.a;
    j["b"] = fit.b;
    j["r2_adjusted"] = fit.r2_adjusted;
    j["n"] = fit.n;
    j["selection"] = fit.selection;
    j["config"] = {{"mode", to_string(fit.mode)},
                   {"radius_km", zone_cfg.radius_km},
                   {"top_n", zone_cfg.top_n},
                   {"major_threshold", zone_cfg.major_threshold}};
    return j.dump(1);
}

RiskFit fit_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("fit JSON: ") + e.what());
    }
    RiskFit f;
    try {
        f.a = j.at("a").get<double>();
        f.b = j.at("b").get<double>();
        f.r2_adjusted = j.value("r2_adjusted", 0.0);
        f.n = j.value("n", std::size_t{0});
        f.selection = j.value("selection", std::string());
        if (j.contains("config") && j["config"].contains("mode")) {
            f.mode = parse_fit_mode(j["config"]["mode"].get<std::string>());
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("fit JSON: ") + e.what());
    }
    return f;
}

} // namespace citynet
