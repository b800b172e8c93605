#include "citynet/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace citynet {

using nlohmann::json;

namespace {

std::vector<std::pair<CityId, CityId>> internal_links(const SpatialGraph& g,
                                                      std::span<const CityId> ids,
                                                      std::vector<double>& flows) {
    std::vector<std::pair<CityId, CityId>> out;
    flows.clear();
    for (CityId id : ids) {
        const auto i = *g.index_of(id);
        for (const auto& nb : g.neighbors(i)) {
            if (nb.index > i) {
                out.emplace_back(id, g.city(nb.index).id);
                flows.push_back(g.edges()[nb.edge].flow);
            }
        }
    }
    return out;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json city_values(const Metrics& m, std::size_t i) {
    const auto& c = m.cities[i];
    return {{"degree", c.degree},
            {"B", c.betweenness},
            {"S", c.strategic},
            {"A", m.city_attacks[i]},
            {"population", m.graph->city(i).population}};
}

json zone_values(const ZoneMetrics& z, const Metrics& m) {
    const auto pred = predict_attacks(z.s, m.fit);
    return {{"population", z.population}, {"D_z", z.d},     {"B_z", z.b},
            {"S_z", z.s},                 {"A_z", z.attacks}, {"A_star", opt(pred)}};
}

json delta(const json& a, const json& b) {
    json d = json::object();
    for (auto it = a.begin(); it != a.end(); ++it) {
        const auto& va = it.value();
        const auto& vb = b.at(it.key());
        if (va.is_number() && vb.is_number()) {
            d[it.key()] = vb.get<double>() - va.get<double>();
        } else {
            d[it.key()] = nullptr;
        }
    }
    return d;
}

} // namespace

std::vector<double> betweenness_incremental(const SpatialGraph& g, const CentralityConfig& cfg,
                                            const SpatialGraph& old_g,
                                            std::span<const double> old_b, std::size_t* recomputed,
                                            std::size_t* reused) {
    if (old_b.size() != old_g.size()) {
        throw ValidationError("previous betweenness does not match the previous graph");
    }
    const auto old_comps = connected_components(old_g);
    std::vector<std::size_t> old_comp_of(old_g.size());
    for (std::size_t c = 0; c < old_comps.size(); ++c) {
        for (CityId id : old_comps[c]) old_comp_of[*old_g.index_of(id)] = c;
    }

    std::vector<double> out(g.size(), 0.0);
    std::vector<CityId> dirty;
    std::size_t n_rec = 0, n_reu = 0;
    std::vector<double> flows_new, flows_old;
    for (const auto& comp : connected_components(g)) {
        bool same = false;
        if (const auto oi = old_g.index_of(comp.front())) {
            const auto& old = old_comps[old_comp_of[*oi]];
            if (old == comp) {
                same = internal_links(g, comp, flows_new) == internal_links(old_g, old, flows_old) &&
                       flows_new == flows_old;
            }
        }
        if (same) {
            for (CityId id : comp) out[*g.index_of(id)] = old_b[*old_g.index_of(id)];
            if (comp.size() >= 3) ++n_reu;
        } else {
            dirty.insert(dirty.end(), comp.begin(), comp.end());
            if (comp.size() >= 3) ++n_rec;
        }
    }
    if (!dirty.empty()) {
        std::sort(dirty.begin(), dirty.end());
        const SpatialGraph sub = g.induced(dirty);
        const auto b = betweenness_all(sub, cfg);
        for (std::size_t k = 0; k < sub.size(); ++k) out[*g.index_of(sub.city(k).id)] = b[k];
    }
    if (recomputed) *recomputed = n_rec;
    if (reused) *reused = n_reu;
    return out;
}

Metrics compute_metrics(GraphPtr g, std::span<const ConflictEvent> events,
                        const AnalysisConfig& cfg, const Metrics* previous) {
    Metrics m;
    m.graph = g;
    const auto degrees = degree_all(*g);
    std::vector<double> b;
    if (previous != nullptr && previous->graph) {
        std::vector<double> old_b;
        old_b.reserve(previous->cities.size());
        for (const auto& c : previous->cities) old_b.push_back(c.betweenness);
        b = betweenness_incremental(*g, cfg.centrality, *previous->graph, old_b,
                                    &m.components_recomputed, &m.components_reused);
    } else {
        b = betweenness_all(*g, cfg.centrality);
        for (const auto& comp : connected_components(*g)) {
            if (comp.size() >= 3) ++m.components_recomputed;
        }
    }
    const auto s = strategic_all(degrees, b);
    m.cities.resize(g->size());
    for (std::size_t i = 0; i < g->size(); ++i) {
        m.cities[i] = {g->city(i).id, degrees[i], b[i], s[i]};
    }

    std::vector<ConflictEvent> assigned(events.begin(), events.end());
    m.city_attacks.assign(g->size(), 0);
    if (g->size() > 0) {
        assign_nearest_city(assigned, *g);
        for (const auto& e : assigned) ++m.city_attacks[*g->index_of(*e.assigned_city)];
    } else {
        assigned.clear();
    }
    m.zones = make_zones(*g, m.cities, assigned, cfg.zones);
    m.fit.a = cfg.fit_a;
    m.fit.b = cfg.fit_b;
    m.fit.selection = "configured";
    return m;
}

json metrics_json(const Metrics& m) {
    json cities = json::array();
    for (std::size_t i = 0; i < m.cities.size(); ++i) {
        json c = city_values(m, i);
        c["id"] = m.cities[i].id;
        c["name"] = m.graph->city(i).name;
        cities.push_back(std::move(c));
    }
    json zones = json::array();
    for (const auto& z : m.zones) {
        json v = zone_values(z, m);
        v["center_city_id"] = z.center;
        v["members"] = z.members.size();
        v["deaths_z"] = z.deaths;
        v["major"] = z.major;
        zones.push_back(std::move(v));
    }
    return {{"counts",
             {{"cities", m.graph->size()},
              {"edges", m.graph->edges().size()},
              {"components_recomputed", m.components_recomputed},
              {"components_reused", m.components_reused}}},
            {"cities", std::move(cities)},
            {"zones", std::move(zones)}};
}

json risk_json(const Metrics& m, const AnalysisConfig& cfg) {
    const auto report = threshold_report(m.zones, cfg.thresholds);
    const auto outliers = vulnerability_outliers(m.zones, m.fit, cfg.outliers);
    const auto dist = distances_to_major(m.zones);
    json zones = json::array();
    for (std::size_t i = 0; i < m.zones.size(); ++i) {
        const auto& z = m.zones[i];
        json v = zone_values(z, m);
        v["center_city_id"] = z.center;
        v["deaths_z"] = z.deaths;
        v["mortality_rate"] = z.mortality_rate;
        v["mortality_lower_bound"] = z.mortality_lower_bound;
        v["major"] = z.major;
        v["dist_to_major_km"] = opt(dist[i]);
        const auto pred = predict_attacks(z.s, m.fit);
        v["vuln_ratio"] =
            pred ? json(*pred / static_cast<double>(std::max<std::size_t>(z.attacks, 1))) : json();
        zones.push_back(std::move(v));
    }
    json out_list = json::array();
    for (const auto& o : outliers) {
        out_list.push_back({{"center_city_id", o.center},
                            {"S_z", o.s},
                            {"A_z", o.attacks},
                            {"A_star", o.predicted},
                            {"ratio", o.ratio}});
    }
    return {{"fit", {{"a", m.fit.a}, {"b", m.fit.b}}},
            {"thresholds", json::parse(report.to_json())},
            {"outliers", std::move(out_list)},
            {"zones", std::move(zones)}};
}

json geojson(const Metrics& m, const AnalysisConfig& cfg) {
    std::set<CityId> vulnerable;
    for (const auto& o : vulnerability_outliers(m.zones, m.fit, cfg.outliers)) {
        vulnerable.insert(o.center);
    }
    std::map<CityId, const ZoneMetrics*> zone_of;
    for (const auto& z : m.zones) zone_of[z.center] = &z;
    json features = json::array();
    for (std::size_t i = 0; i < m.cities.size(); ++i) {
        const City& c = m.graph->city(i);
        json props = {{"id", c.id},
                      {"name", c.name},
                      {"population", c.population},
                      {"D", m.cities[i].degree},
                      {"B", m.cities[i].betweenness},
                      {"S", m.cities[i].strategic},
                      {"A", m.city_attacks[i]},
                      {"A*", nullptr},
                      {"vulnerable", vulnerable.count(c.id) > 0}};
        if (auto it = zone_of.find(c.id); it != zone_of.end()) {
            props["A*"] = opt(predict_attacks(it->second->s, m.fit));
        }
        features.push_back({{"type", "Feature"},
                            {"geometry", {{"type", "Point"}, {"coordinates", {c.lon, c.lat}}}},
                            {"properties", std::move(props)}});
    }
    return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

json diff_json(const Metrics& base, const Metrics& other, const AnalysisConfig& cfg) {
    (void)cfg;
    std::set<CityId> ids;
    for (const auto& c : base.cities) ids.insert(c.id);
    for (const auto& c : other.cities) ids.insert(c.id);
    json cities = json::array();
    for (CityId id : ids) {
        const auto ia = base.graph->index_of(id);
        const auto ib = other.graph->index_of(id);
        json row = {{"id", id},
                    {"base", ia ? city_values(base, *ia) : json()},
                    {"other", ib ? city_values(other, *ib) : json()}};
        row["delta"] = ia && ib ? delta(row["base"], row["other"]) : json();
        cities.push_back(std::move(row));
    }

    std::map<CityId, std::pair<const ZoneMetrics*, const ZoneMetrics*>> zones;
    for (const auto& z : base.zones) zones[z.center].first = &z;
    for (const auto& z : other.zones) zones[z.center].second = &z;
    json zone_rows = json::array();
    for (const auto& [center, pair] : zones) {
        json row = {{"center_city_id", center},
                    {"base", pair.first ? zone_values(*pair.first, base) : json()},
                    {"other", pair.second ? zone_values(*pair.second, other) : json()}};
        row["delta"] = pair.first && pair.second ? delta(row["base"], row["other"]) : json();
        zone_rows.push_back(std::move(row));
    }
    return {{"cities", std::move(cities)}, {"zones", std::move(zone_rows)}};
}

ScenarioStore::ScenarioStore(SpatialGraph base, std::vector<ConflictEvent> events,
                             AnalysisConfig cfg, std::optional<std::filesystem::path> log_dir)
    : base_(std::make_shared<const SpatialGraph>(std::move(base))), events_(std::move(events)),
      cfg_(std::move(cfg)), log_dir_(std::move(log_dir)) {
    base_metrics_ = std::make_shared<const Metrics>(compute_metrics(base_, events_, cfg_));
    if (log_dir_) std::filesystem::create_directories(*log_dir_);
}

ScenarioStore::~ScenarioStore() {
    std::vector<std::shared_ptr<Scenario>> all;
    {
        std::lock_guard lock(mu_);
        for (auto& [id, s] : scenarios_) all.push_back(s);
    }
    for (auto& s : all) {
        std::thread t;
        {
            std::lock_guard lock(s->mu);
            t = std::move(s->worker);
        }
        if (t.joinable()) t.join();
    }
}

std::shared_ptr<ScenarioStore::Scenario> ScenarioStore::find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = scenarios_.find(id);
    if (it == scenarios_.end()) throw NotFoundError("unknown scenario '" + id + "'");
    return it->second;
}

std::string ScenarioStore::create(const std::optional<std::string>& from,
                                  std::span<const Mutation> mutations) {
    auto s = std::make_shared<Scenario>();
    std::shared_ptr<const Metrics> seed_metrics = base_metrics_;
    if (from) {
        auto parent = find(*from);
        std::lock_guard lock(parent->mu);
        s->log = parent->log;
        s->graph = parent->graph;
        seed_metrics = parent->metrics;
        if (parent->metrics_version != parent->version) seed_metrics.reset();
    } else {
        s->graph = base_;
    }
    if (!mutations.empty()) {
        SpatialGraph g = *s->graph;
        for (std::size_t i = 0; i < mutations.size(); ++i) g = apply_mutation(g, mutations[i], i);
        s->graph = std::make_shared<const SpatialGraph>(std::move(g));
        s->log.insert(s->log.end(), mutations.begin(), mutations.end());
    }

    std::string id;
    {
        std::lock_guard lock(mu_);
        id = "s" + std::to_string(next_id_++);
        scenarios_[id] = s;
    }
    std::lock_guard lock(s->mu);
    s->version = 1;
    if (seed_metrics && mutations.empty()) {
        s->metrics = seed_metrics;
        s->metrics_version = 1;
    } else {
        // reuse whatever the parent had as the starting point for the recompute
        s->metrics = seed_metrics ? seed_metrics : base_metrics_;
        s->metrics_version = 0;
        schedule(*s);
    }
    persist(id, *s);
    return id;
}

std::uint64_t ScenarioStore::submit(const std::string& id, std::span<const Mutation> mutations) {
    auto s = find(id);
    std::lock_guard lock(s->mu);
    SpatialGraph g = *s->graph;
    for (std::size_t i = 0; i < mutations.size(); ++i) g = apply_mutation(g, mutations[i], i);
    if (mutations.empty()) return s->version;
    s->graph = std::make_shared<const SpatialGraph>(std::move(g));
    s->log.insert(s->log.end(), mutations.begin(), mutations.end());
    ++s->version;
    s->error.clear();
    schedule(*s);
    persist(id, *s);
    return s->version;
}

void ScenarioStore::schedule(Scenario& s) {
    if (s.running) return; // the running worker picks up the new version
    if (s.worker.joinable()) s.worker.join();
    s.running = true;
    s.worker = std::thread([this, &s] { work(s); });
}

void ScenarioStore::work(Scenario& s) {
    for (;;) {
        GraphPtr g;
        std::uint64_t v = 0;
        std::shared_ptr<const Metrics> prev;
        {
            std::lock_guard lock(s.mu);
            if (s.metrics_version == s.version) {
                s.running = false;
                s.cv.notify_all();
                return;
            }
            g = s.graph;
            v = s.version;
            prev = s.metrics;
        }
        try {
            auto m = std::make_shared<const Metrics>(compute_metrics(g, events_, cfg_, prev.get()));
            std::lock_guard lock(s.mu);
            s.metrics = std::move(m);
            s.metrics_version = v;
            s.cv.notify_all();
        } catch (const std::exception& e) {
            std::lock_guard lock(s.mu);
            s.error = e.what();
            s.running = false;
            s.cv.notify_all();
            return;
        }
    }
}

std::shared_ptr<const Metrics> ScenarioStore::metrics(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lock(s->mu);
    if (s->metrics_version != s->version) return nullptr;
    return s->metrics;
}

std::shared_ptr<const Metrics> ScenarioStore::wait_fresh(const std::string& id,
                                                         std::chrono::milliseconds timeout) const {
    auto s = find(id);
    std::unique_lock lock(s->mu);
    s->cv.wait_for(lock, timeout, [&] {
        return s->metrics_version == s->version || (!s->running && !s->error.empty());
    });
    if (s->metrics_version != s->version) return nullptr;
    return s->metrics;
}

ScenarioStore::Status ScenarioStore::status(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lock(s->mu);
    return {s->version, s->log.size(), s->metrics_version != s->version, s->error};
}

std::vector<Mutation> ScenarioStore::log(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lock(s->mu);
    return s->log;
}

std::vector<std::string> ScenarioStore::ids() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, s] : scenarios_) out.push_back(id);
    return out;
}

void ScenarioStore::persist(const std::string& id, const Scenario& s) const {
    if (!log_dir_) return;
    std::ofstream out(*log_dir_ / (id + ".json"));
    out << json{{"id", id}, {"mutations", to_json(std::span<const Mutation>(s.log))}}.dump(1)
        << '\n';
}

} // namespace citynet
