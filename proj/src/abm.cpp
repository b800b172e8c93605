#include "citynet/abm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "citynet/error.hpp"
#include "citynet/format.hpp"

namespace citynet::abm {

namespace {

// Shares C_j / n_j for every city, given per-city dissimilar counts.
std::vector<double> all_shares(const SpatialGraph& g, std::span<const std::size_t> dissimilar) {
    std::vector<double> f(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
        f[j] = influence_share(g.city(j).population, dissimilar[j]);
    }
    return f;
}

// Field for city i given neighbour shares; `own_n` is n_i.
template <typename ShareFn>
std::vector<Influence> field_from_shares(const SpatialGraph& g, std::span<const State> states,
                                         std::size_t i, std::size_t own_n, double self_weight,
                                         bool same_state_support, ShareFn share_of) {
    std::vector<Influence> field;
    if (own_n == 0) return field;
    const State own = states[i];
    for (const auto& nb : g.neighbors(i)) {
        const State s = states[nb.index];
        if (s == own && !same_state_support) continue;
        const double f = share_of(nb.index);
        auto it = std::find_if(field.begin(), field.end(),
                               [s](const Influence& x) { return x.state == s; });
        if (it == field.end()) {
            field.push_back({s, f});
        } else {
            it->weight += f;
        }
    }
    if (self_weight > 0.0) {
        const double w = self_weight * g.city(i).population / static_cast<double>(own_n);
        auto it = std::find_if(field.begin(), field.end(),
                               [own](const Influence& x) { return x.state == own; });
        if (it == field.end()) {
            field.push_back({own, w});
        } else {
            it->weight += w;
        }
    }
    std::sort(field.begin(), field.end(),
              [](const Influence& a, const Influence& b) { return a.state < b.state; });
    return field;
}

std::string stamp(const AbmRun& run) {
    return "# seed=" + std::to_string(run.config.seed) +
           " config_hash=" + hex64(fnv1a64(config_json(run.config))) + "\n";
}

} // namespace

std::string to_string(UpdateMode m) {
    return m == UpdateMode::synchronous ? "synchronous" : "asynchronous";
}

UpdateMode parse_update_mode(const std::string& s) {
    if (s == "synchronous") return UpdateMode::synchronous;
    if (s == "asynchronous") return UpdateMode::asynchronous;
    throw ValidationError("unknown update mode: " + s);
}

void validate(const AbmConfig& cfg) {
    if (!(cfg.rationality >= 0.0)) throw ValidationError("rationality must be >= 0");
    if (!(cfg.self_weight >= 0.0) || !std::isfinite(cfg.self_weight)) {
        throw ValidationError("self_weight must be finite and >= 0");
    }
    if (cfg.burn_in < 1 || cfg.measure_window < 1) {
        throw ValidationError("burn_in and measure_window must be >= 1");
    }
    if (cfg.record_interval < 1) throw ValidationError("record_interval must be >= 1");
}

std::string config_json(const AbmConfig& cfg) {
    nlohmann::json j;
    if (std::isinf(cfg.rationality)) {
        j["rationality"] = "inf";
    } else {
        j["rationality"] = cfg.rationality;
    }
    j["self_weight"] = cfg.self_weight;
    j["same_state_support"] = cfg.same_state_support;
    j["update_mode"] = to_string(cfg.update_mode);
    j["burn_in"] = cfg.burn_in;
    j["measure_window"] = cfg.measure_window;
    j["seed"] = cfg.seed;
    j["record_interval"] = cfg.record_interval;
    return j.dump();
}

AbmConfig config_from_json(const std::string& text) {
    AbmConfig cfg;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        if (j.contains("rationality")) {
            const auto& r = j["rationality"];
            if (r.is_string()) {
                const auto s = r.get<std::string>();
                if (s != "inf" && s != "argmax") throw ValidationError("rationality: " + s);
                cfg.rationality = kArgmax;
            } else {
                cfg.rationality = r.get<double>();
            }
        }
        cfg.self_weight = j.value("self_weight", cfg.self_weight);
        cfg.same_state_support = j.value("same_state_support", cfg.same_state_support);
        cfg.update_mode = parse_update_mode(j.value("update_mode", to_string(cfg.update_mode)));
        cfg.burn_in = j.value("burn_in", cfg.burn_in);
        cfg.measure_window = j.value("measure_window", cfg.measure_window);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.record_interval = j.value("record_interval", cfg.record_interval);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("invalid ABM config: " + std::string(e.what()));
    }
    validate(cfg);
    return cfg;
}

std::size_t dissimilar_neighbors(const SpatialGraph& g, std::span<const State> states,
                                 std::size_t i) {
    std::size_t n = 0;
    for (const auto& nb : g.neighbors(i)) {
        if (states[nb.index] != states[i]) ++n;
    }
    return n;
}

double influence_share(double capacity, std::size_t dissimilar) {
    return dissimilar == 0 ? 0.0 : capacity / static_cast<double>(dissimilar);
}

std::vector<Influence> influence_field(const SpatialGraph& g, std::span<const State> states,
                                       std::size_t i, double self_weight, bool same_state_support) {
    return field_from_shares(g, states, i, dissimilar_neighbors(g, states, i), self_weight,
                             same_state_support, [&](std::size_t j) {
                                 return influence_share(g.city(j).population,
                                                        dissimilar_neighbors(g, states, j));
                             });
}

std::vector<double> adoption_probabilities(std::span<const Influence> field, double rationality) {
    std::vector<double> p(field.size(), 0.0);
    double hmax = 0.0;
    for (const auto& x : field) hmax = std::max(hmax, x.weight);
    if (!(hmax > 0.0)) return {};
    if (std::isinf(rationality)) {
        for (std::size_t q = 0; q < field.size(); ++q) {
            if (field[q].weight == hmax) {
                p[q] = 1.0;
                break;
            }
        }
        return p;
    }
    double total = 0.0;
    for (std::size_t q = 0; q < field.size(); ++q) {
        if (field[q].weight > 0.0) {
            p[q] = rationality == 0.0 ? 1.0 : std::pow(field[q].weight / hmax, rationality);
            total += p[q];
        }
    }
    for (auto& v : p) v /= total;
    return p;
}

State adopt_state(std::span<const Influence> field, State current, double rationality, double u) {
    const auto p = adoption_probabilities(field, rationality);
    if (p.empty()) return current;
    double cum = 0.0;
    std::size_t last = 0;
    for (std::size_t q = 0; q < p.size(); ++q) {
        if (p[q] <= 0.0) continue;
        cum += p[q];
        last = q;
        if (u < cum) return field[q].state;
    }
    return field[last].state;
}

std::vector<State> step(const SpatialGraph& g, std::span<const State> states, const AbmConfig& cfg,
                        std::uint64_t iteration) {
    const std::size_t n = g.size();
    std::vector<State> next(states.begin(), states.end());
    if (cfg.update_mode == UpdateMode::synchronous) {
        std::vector<std::size_t> dissimilar(n);
        for (std::size_t i = 0; i < n; ++i) dissimilar[i] = dissimilar_neighbors(g, states, i);
        const auto shares = all_shares(g, dissimilar);
#pragma omp parallel for schedule(static) if (n > 4096)
        for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n); ++si) {
            const auto i = static_cast<std::size_t>(si);
            if (dissimilar[i] == 0) continue;
            const auto field =
                field_from_shares(g, states, i, dissimilar[i], cfg.self_weight,
                                  cfg.same_state_support, [&](std::size_t j) { return shares[j]; });
            CounterRng rng(cfg.seed, static_cast<std::uint64_t>(g.city(i).id), iteration);
            next[i] = adopt_state(field, states[i], cfg.rationality, rng.uniform());
        }
        return next;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    CounterRng shuffle_rng(cfg.seed, ~std::uint64_t{0}, iteration);
    for (std::size_t k = n; k > 1; --k) {
        const auto j = static_cast<std::size_t>(shuffle_rng.uniform() * static_cast<double>(k));
        std::swap(order[k - 1], order[std::min(j, k - 1)]);
    }
    for (std::size_t i : order) {
        const auto field = influence_field(g, next, i, cfg.self_weight, cfg.same_state_support);
        CounterRng rng(cfg.seed, static_cast<std::uint64_t>(g.city(i).id), iteration);
        next[i] = adopt_state(field, next[i], cfg.rationality, rng.uniform());
    }
    return next;
}

double modularity(const SpatialGraph& g, std::span<const State> states) {
    const double m = static_cast<double>(g.edges().size());
    if (m == 0.0) return 0.0;
    std::vector<State> labels(states.begin(), states.end());
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    auto group = [&](State s) {
        return static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), s) -
                                        labels.begin());
    };
    std::vector<std::size_t> of(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) of[i] = group(states[i]);
    std::vector<double> internal(labels.size(), 0.0);
    std::vector<double> volume(labels.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) volume[of[i]] += static_cast<double>(g.degree(i));
    for (const auto& e : g.edges()) {
        const auto a = of[*g.index_of(e.a)];
        if (a == of[*g.index_of(e.b)]) internal[a] += 1.0;
    }
    double q = 0.0;
    for (std::size_t c = 0; c < labels.size(); ++c) {
        const double a = volume[c] / (2.0 * m);
        q += internal[c] / m - a * a;
    }
    return q;
}

AbmRun run(const SpatialGraph& g, const AbmConfig& cfg) {
    validate(cfg);
    AbmRun out;
    out.config = cfg;
    const std::size_t n = g.size();
    std::vector<State> states(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.city_ids.push_back(g.city(i).id);
        states[i] = g.city(i).id;
    }
    out.flip_counts.assign(n, 0);

    auto record = [&](std::size_t t) {
        out.recorded_steps.push_back(t);
        out.modularity_series.push_back(modularity(g, states));
        out.states.push_back(states);
    };
    record(0);
    const std::size_t total = cfg.burn_in + cfg.measure_window;
    for (std::size_t t = 1; t <= total; ++t) {
        auto next = step(g, states, cfg, t);
        if (t > cfg.burn_in) {
            for (std::size_t i = 0; i < n; ++i) {
                if (next[i] != states[i]) ++out.flip_counts[i];
            }
        }
        states = std::move(next);
        if (t % cfg.record_interval == 0 || t == total) record(t);
    }
    out.flip_rate.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.flip_rate[i] =
            static_cast<double>(out.flip_counts[i]) / static_cast<double>(cfg.measure_window);
    }
    return out;
}

TorusGraph toroidal_geometric_graph(std::size_t n, double radius, double box, std::uint64_t seed,
                                    double pop_lo, double pop_hi) {
    if (n < 1) throw ValidationError("torus graph needs n >= 1");
    if (!(box > 0.0) || !(radius >= 0.0) || !(radius < box / 2.0)) {
        throw ValidationError("torus graph needs 0 <= radius < box / 2");
    }
    if (!(pop_lo >= 0.0) || !(pop_hi >= pop_lo)) throw ValidationError("invalid population range");
    TorusGraph out;
    out.box = box;
    std::vector<City> cities;
    for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng(seed, i, 0x746f7275ULL);
        const double x = rng.uniform() * box;
        const double y = rng.uniform() * box;
        const double pop = pop_lo + (pop_hi - pop_lo) * rng.uniform();
        out.positions.push_back({x, y});
        cities.push_back({static_cast<CityId>(i), "t" + std::to_string(i), "", "", 0.0, 0.0, pop});
    }
    auto wrap = [box](double d) {
        d = std::abs(d);
        return std::min(d, box - d);
    };
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = wrap(out.positions[i][0] - out.positions[j][0]);
            const double dy = wrap(out.positions[i][1] - out.positions[j][1]);
            const double d = std::sqrt(dx * dx + dy * dy);
            if (d <= radius && d > 0.0) {
                edges.push_back({static_cast<CityId>(i), static_cast<CityId>(j), d,
                                 gravity_flow(cities[i].population, cities[j].population, d)});
            }
        }
    }
    GraphConfig config;
    config.radius_km = radius > 0.0 ? radius : box;
    config.min_population = 0.0;
    out.graph = SpatialGraph::from_parts(std::move(cities), std::move(edges), config);
    return out;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) return std::nullopt;
    auto ranks = [](std::span<const double> v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

FlipReport flip_betweenness_report(const AbmRun& run, std::span<const double> betweenness) {
    if (betweenness.size() != run.flip_rate.size()) {
        throw ValidationError("betweenness and run come from different graphs");
    }
    FlipReport rep;
    const std::size_t n = betweenness.size();
    for (std::size_t i = 0; i < n; ++i) rep.pairs.push_back({run.flip_rate[i], betweenness[i]});
    rep.spearman = spearman(run.flip_rate, betweenness);

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return betweenness[a] < betweenness[b]; });
    for (std::size_t d = 0; d < 10; ++d) {
        const std::size_t lo = d * n / 10;
        const std::size_t hi = (d + 1) * n / 10;
        double sum = 0.0;
        for (std::size_t k = lo; k < hi; ++k) sum += run.flip_rate[idx[k]];
        rep.decile_mean_flip[d] = hi > lo ? sum / static_cast<double>(hi - lo) : 0.0;
    }
    return rep;
}

void write_run_csv(std::ostream& out, const AbmRun& run, const SpatialGraph& g,
                   std::span<const double> betweenness) {
    out << stamp(run);
    out << "city_id,flip_rate,degree,betweenness\n";
    for (std::size_t i = 0; i < run.city_ids.size(); ++i) {
        out << run.city_ids[i] << ',' << fmt_double(run.flip_rate[i]) << ',' << g.degree(i) << ','
            << fmt_double(betweenness[i]) << '\n';
    }
}

void write_modularity_csv(std::ostream& out, const AbmRun& run) {
    out << stamp(run);
    out << "step,modularity\n";
    for (std::size_t k = 0; k < run.recorded_steps.size(); ++k) {
        out << run.recorded_steps[k] << ',' << fmt_double(run.modularity_series[k]) << '\n';
    }
}

} // namespace citynet::abm
