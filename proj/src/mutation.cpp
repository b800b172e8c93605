#include "citynet/mutation.hpp"

#include <algorithm>
#include <cmath>

#include "citynet/fragmentation.hpp"

namespace citynet {

using nlohmann::json;

namespace {

std::string field_list(const std::vector<FieldError>& fields) {
    std::string s;
    for (const auto& f : fields) {
        if (!s.empty()) s += "; ";
        s += f.field + ": " + f.reason;
    }
    return s;
}

// Collects field problems while reading one mutation object.
class Reader {
public:
    explicit Reader(const json& j) : j_(j) {}

    std::optional<CityId> id(const std::string& key) {
        if (!j_.contains(key)) return fail(key, "required");
        const auto& v = j_[key];
        if (!v.is_number_integer()) return fail(key, "must be an integer city id");
        return v.get<CityId>();
    }

    std::optional<double> number(const json& obj, const std::string& prefix, const std::string& key) {
        if (!obj.contains(key)) return fail(prefix + key, "required");
        if (!obj[key].is_number()) return fail(prefix + key, "must be a number");
        return obj[key].get<double>();
    }

    std::string text(const json& obj, const std::string& prefix, const std::string& key) {
        if (!obj.contains(key) || obj[key].is_null()) return {};
        if (!obj[key].is_string()) {
            fail(prefix + key, "must be a string");
            return {};
        }
        return obj[key].get<std::string>();
    }

    std::nullopt_t fail(std::string field, std::string reason) {
        errors.push_back({std::move(field), std::move(reason)});
        return std::nullopt;
    }

    std::vector<FieldError> errors;

private:
    const json& j_;
};

void require_city(const SpatialGraph& g, CityId id, const std::string& field,
                  std::vector<FieldError>& errors) {
    if (!g.index_of(id)) errors.push_back({field, "unknown city " + std::to_string(id)});
}

bool has_edge(const SpatialGraph& g, CityId a, CityId b) {
    const auto ia = g.index_of(a);
    const auto ib = g.index_of(b);
    if (!ia || !ib) return false;
    const auto nbs = g.neighbors(*ia);
    return std::any_of(nbs.begin(), nbs.end(),
                       [&](const SpatialGraph::Neighbor& n) { return n.index == *ib; });
}

} // namespace

std::string to_string(MutationOp op) {
    switch (op) {
    case MutationOp::fragment: return "fragment";
    case MutationOp::merge: return "merge";
    case MutationOp::add_edge: return "add_edge";
    case MutationOp::remove_edge: return "remove_edge";
    case MutationOp::add_city: return "add_city";
    }
    return "?";
}

MutationError::MutationError(std::size_t index, std::vector<FieldError> fields)
    : Error("invalid_mutation",
            "mutation " + std::to_string(index) + " rejected: " + field_list(fields)),
      index_(index), fields_(std::move(fields)) {}

json MutationError::to_json() const {
    json j;
    j["error"] = kind();
    j["message"] = what();
    j["index"] = index_;
    j["fields"] = json::array();
    for (const auto& f : fields_) j["fields"].push_back({{"field", f.field}, {"reason", f.reason}});
    return j;
}

Mutation mutation_from_json(const json& j, std::size_t index) {
    if (!j.is_object()) throw MutationError(index, {{"", "mutation must be a JSON object"}});
    Reader r(j);
    Mutation m;
    if (!j.contains("op") || !j["op"].is_string()) {
        throw MutationError(index, {{"op", "required string"}});
    }
    const auto op = j["op"].get<std::string>();
    if (op == "fragment") {
        m.op = MutationOp::fragment;
        if (auto c = r.id("city")) m.city = *c;
        if (!j.contains("k")) {
            r.fail("k", "required");
        } else if (!j["k"].is_number_integer()) {
            r.fail("k", "must be an integer");
        } else {
            const auto k = j["k"].get<std::int64_t>();
            if (k < 2 || k > 1000) r.fail("k", "must be between 2 and 1000");
            else m.k = static_cast<int>(k);
        }
    } else if (op == "merge") {
        m.op = MutationOp::merge;
        if (!j.contains("cities") || !j["cities"].is_array()) {
            r.fail("cities", "required array of city ids");
        } else {
            for (std::size_t i = 0; i < j["cities"].size(); ++i) {
                const auto& v = j["cities"][i];
                if (!v.is_number_integer()) {
                    r.fail("cities[" + std::to_string(i) + "]", "must be an integer city id");
                } else {
                    m.cities.push_back(v.get<CityId>());
                }
            }
            auto distinct = m.cities;
            std::sort(distinct.begin(), distinct.end());
            distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
            if (r.errors.empty() && distinct.size() < 2) {
                r.fail("cities", "needs at least two distinct cities");
            }
        }
    } else if (op == "add_edge" || op == "remove_edge") {
        m.op = op == "add_edge" ? MutationOp::add_edge : MutationOp::remove_edge;
        auto a = r.id("a");
        auto b = r.id("b");
        if (a && b) {
            if (*a == *b) r.fail("b", "must differ from a");
            m.a = std::min(*a, *b);
            m.b = std::max(*a, *b);
        }
    } else if (op == "add_city") {
        m.op = MutationOp::add_city;
        if (!j.contains("city") || !j["city"].is_object()) {
            r.fail("city", "required object");
        } else {
            const auto& c = j["city"];
            City& nc = m.new_city;
            if (!c.contains("id") || !c["id"].is_number_integer()) {
                r.fail("city.id", "required integer");
            } else {
                nc.id = c["id"].get<CityId>();
            }
            nc.name = r.text(c, "city.", "name");
            nc.country = r.text(c, "city.", "country");
            nc.province = r.text(c, "city.", "province");
            if (auto v = r.number(c, "city.", "lat")) {
                if (!(*v >= -90.0 && *v <= 90.0)) r.fail("city.lat", "must be within [-90, 90]");
                nc.lat = *v;
            }
            if (auto v = r.number(c, "city.", "lon")) {
                if (!(*v >= -180.0 && *v <= 180.0)) r.fail("city.lon", "must be within [-180, 180]");
                nc.lon = *v;
            }
            if (auto v = r.number(c, "city.", "population")) {
                if (!(*v >= 0.0) || !std::isfinite(*v)) {
                    r.fail("city.population", "must be finite and >= 0");
                }
                nc.population = *v;
            }
        }
    } else {
        r.fail("op", "unknown operation '" + op +
                         "' (expected fragment, merge, add_edge, remove_edge or add_city)");
    }
    if (!r.errors.empty()) throw MutationError(index, std::move(r.errors));
    return m;
}

json to_json(const Mutation& m) {
    json j;
    j["op"] = to_string(m.op);
    switch (m.op) {
    case MutationOp::fragment:
        j["city"] = m.city;
        j["k"] = m.k;
        break;
    case MutationOp::merge: j["cities"] = m.cities; break;
    case MutationOp::add_edge:
    case MutationOp::remove_edge:
        j["a"] = m.a;
        j["b"] = m.b;
        break;
    case MutationOp::add_city:
        j["city"] = {{"id", m.new_city.id},
                     {"name", m.new_city.name},
                     {"country", m.new_city.country},
                     {"province", m.new_city.province},
                     {"lat", m.new_city.lat},
                     {"lon", m.new_city.lon},
                     {"population", m.new_city.population}};
        break;
    }
    return j;
}

std::vector<Mutation> parse_mutations(const json& j) {
    const json* list = &j;
    if (j.is_object() && j.contains("mutations")) list = &j["mutations"];
    if (!list->is_array()) throw MutationError(0, {{"mutations", "expected an array"}});
    std::vector<Mutation> out;
    for (std::size_t i = 0; i < list->size(); ++i) out.push_back(mutation_from_json((*list)[i], i));
    return out;
}

std::vector<Mutation> parse_mutations_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw MutationError(0, {{"", std::string("invalid JSON: ") + e.what()}});
    }
    return parse_mutations(j);
}

json to_json(std::span<const Mutation> log) {
    json j = json::array();
    for (const auto& m : log) j.push_back(to_json(m));
    return j;
}

SpatialGraph apply_mutation(const SpatialGraph& g, const Mutation& m, std::size_t index) {
    std::vector<FieldError> errors;
    switch (m.op) {
    case MutationOp::fragment:
        require_city(g, m.city, "city", errors);
        if (!errors.empty()) throw MutationError(index, errors);
        return fragment_city(g, m.city, m.k);

    case MutationOp::merge:
        for (std::size_t i = 0; i < m.cities.size(); ++i) {
            require_city(g, m.cities[i], "cities[" + std::to_string(i) + "]", errors);
        }
        if (!errors.empty()) throw MutationError(index, errors);
        try {
            return merge_cities(g, m.cities);
        } catch (const ValidationError& e) {
            throw MutationError(index, {{"cities", e.what()}});
        }

    case MutationOp::add_edge:
    case MutationOp::remove_edge: {
        require_city(g, m.a, "a", errors);
        require_city(g, m.b, "b", errors);
        if (!errors.empty()) throw MutationError(index, errors);
        const bool exists = has_edge(g, m.a, m.b);
        std::vector<Edge> edges(g.edges().begin(), g.edges().end());
        if (m.op == MutationOp::add_edge) {
            if (exists) throw MutationError(index, {{"b", "link already exists"}});
            const City& ca = g.city(*g.index_of(m.a));
            const City& cb = g.city(*g.index_of(m.b));
            const double d = haversine_km(ca.position(), cb.position());
            if (!(d > 0.0)) throw MutationError(index, {{"b", "cities are co-located"}});
            edges.push_back({m.a, m.b, d, model_flow(g.config().flow_model, ca, cb, d)});
        } else {
            if (!exists) throw MutationError(index, {{"b", "no such link"}});
            std::erase_if(edges, [&](const Edge& e) { return e.a == m.a && e.b == m.b; });
        }
        std::vector<City> cities(g.cities().begin(), g.cities().end());
        return SpatialGraph::from_parts(std::move(cities), std::move(edges), g.config());
    }

    case MutationOp::add_city: {
        const City& nc = m.new_city;
        if (g.index_of(nc.id)) errors.push_back({"city.id", "id already in use"});
        std::vector<City> cities(g.cities().begin(), g.cities().end());
        std::vector<Edge> edges(g.edges().begin(), g.edges().end());
        const auto& cfg = g.config();
        for (const auto& c : cities) {
            const double d = haversine_km(nc.position(), c.position());
            if (d < 1e-6) {
                errors.push_back({"city", "co-located with city " + std::to_string(c.id)});
                break;
            }
            if (d <= cfg.radius_km && nc.population >= cfg.min_population &&
                c.population >= cfg.min_population) {
                edges.push_back({nc.id, c.id, d, model_flow(cfg.flow_model, nc, c, d)});
            }
        }
        if (!errors.empty()) throw MutationError(index, errors);
        cities.push_back(nc);
        return SpatialGraph::from_parts(std::move(cities), std::move(edges), cfg);
    }
    }
    throw MutationError(index, {{"op", "unsupported"}});
}

SpatialGraph apply_mutations(const SpatialGraph& g, std::span<const Mutation> log) {
    SpatialGraph cur = g;
    for (std::size_t i = 0; i < log.size(); ++i) cur = apply_mutation(cur, log[i], i);
    return cur;
}

} // namespace citynet
