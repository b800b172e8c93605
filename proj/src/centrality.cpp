#include "citynet/centrality.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <queue>

#include "citynet/csv.hpp"
#include "citynet/error.hpp"
#include "citynet/format.hpp"

namespace citynet {

namespace {

constexpr std::size_t kSourceBlock = 32;

struct Workspace {
    std::vector<double> dist;
    std::vector<double> sigma;
    std::vector<double> delta;
    std::vector<std::size_t> order_pos;
    std::vector<std::uint32_t> order;

    explicit Workspace(std::size_t n)
        : dist(n, std::numeric_limits<double>::infinity()), sigma(n, 0.0), delta(n, 0.0),
          order_pos(n, std::numeric_limits<std::size_t>::max()) {}

    void reset() {
        for (auto v : order) {
            dist[v] = std::numeric_limits<double>::infinity();
            sigma[v] = 0.0;
            delta[v] = 0.0;
            order_pos[v] = std::numeric_limits<std::size_t>::max();
        }
        order.clear();
    }
};

// Adds the single-source dependencies of `s` into `partial` (indexed by
// position within the component).
void accumulate_source(const SpatialGraph& g, std::span<const double> weight, double tol,
                       CountMode mode, std::uint32_t s, std::span<const std::size_t> local,
                       Workspace& ws, std::span<double> partial) {
    using Entry = std::pair<double, std::uint32_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    ws.dist[s] = 0.0;
    heap.push({0.0, s});
    while (!heap.empty()) {
        auto [d, v] = heap.top();
        heap.pop();
        if (ws.order_pos[v] != std::numeric_limits<std::size_t>::max() || d > ws.dist[v]) continue;
        ws.order_pos[v] = ws.order.size();
        ws.order.push_back(v);
        for (const auto& nb : g.neighbors(v)) {
            const double nd = d + weight[nb.edge];
            if (nd < ws.dist[nb.index]) {
                ws.dist[nb.index] = nd;
                heap.push({nd, nb.index});
            }
        }
    }

    // v precedes w on a shortest path when it was settled earlier and the
    // link closes the gap within tolerance.
    auto is_pred = [&](std::uint32_t v, std::uint32_t w, std::uint32_t e) {
        return ws.order_pos[v] < ws.order_pos[w] &&
               ws.dist[v] + weight[e] <= ws.dist[w] * (1.0 + tol);
    };

    ws.sigma[s] = 1.0;
    for (std::size_t k = 1; k < ws.order.size(); ++k) {
        const auto w = ws.order[k];
        double sum = 0.0;
        for (const auto& nb : g.neighbors(w)) {
            if (is_pred(nb.index, w, nb.edge)) sum += ws.sigma[nb.index];
        }
        ws.sigma[w] = sum;
    }

    for (std::size_t k = ws.order.size(); k-- > 1;) {
        const auto w = ws.order[k];
        for (const auto& nb : g.neighbors(w)) {
            if (!is_pred(nb.index, w, nb.edge)) continue;
            if (mode == CountMode::fractional) {
                ws.delta[nb.index] += ws.sigma[nb.index] / ws.sigma[w] * (1.0 + ws.delta[w]);
            } else {
                // delta holds the number of DAG paths leaving v
                ws.delta[nb.index] += 1.0 + ws.delta[w];
            }
        }
        if (mode == CountMode::fractional) {
            partial[local[w]] += ws.delta[w];
        } else {
            partial[local[w]] += ws.sigma[w] * ws.delta[w];
        }
    }
    ws.reset();
}

} // namespace

std::string to_string(CountMode m) { return m == CountMode::fractional ? "fractional" : "raw"; }

CountMode parse_count_mode(const std::string& s) {
    if (s == "fractional") return CountMode::fractional;
    if (s == "raw") return CountMode::raw;
    throw ValidationError("unknown count mode: " + s);
}

void validate(const CentralityConfig& cfg) {
    if (!(cfg.theta >= 0.0 && cfg.theta <= 1.0)) throw ValidationError("theta must be in [0, 1]");
    if (!(cfg.tie_tolerance >= 0.0)) throw ValidationError("tie_tolerance must be >= 0");
}

double edge_weight(double flow, double theta) {
    if (!(flow > 0.0) || !std::isfinite(flow)) {
        throw ValidationError("edge weight needs a positive flow, got " + fmt_double(flow));
    }
    return std::pow(flow, -theta);
}

std::vector<double> betweenness_all(const SpatialGraph& g, const CentralityConfig& cfg) {
    validate(cfg);
    const std::size_t n = g.size();
    std::vector<double> weight(g.edges().size());
    for (std::size_t k = 0; k < weight.size(); ++k) {
        weight[k] = edge_weight(g.edges()[k].flow, cfg.theta);
    }

    // component membership as sorted index lists
    std::vector<std::vector<std::uint32_t>> comps;
    std::vector<std::size_t> local(n, 0);
    {
        std::vector<char> seen(n, 0);
        std::vector<std::uint32_t> stack;
        for (std::size_t s = 0; s < n; ++s) {
            if (seen[s]) continue;
            std::vector<std::uint32_t> comp;
            seen[s] = 1;
            stack.push_back(static_cast<std::uint32_t>(s));
            while (!stack.empty()) {
                auto v = stack.back();
                stack.pop_back();
                comp.push_back(v);
                for (const auto& nb : g.neighbors(v)) {
                    if (!seen[nb.index]) {
                        seen[nb.index] = 1;
                        stack.push_back(nb.index);
                    }
                }
            }
            std::sort(comp.begin(), comp.end());
            for (std::size_t k = 0; k < comp.size(); ++k) local[comp[k]] = k;
            if (comp.size() >= 3) comps.push_back(std::move(comp));
        }
    }

    struct Task {
        std::size_t comp;
        std::size_t begin;
        std::size_t end;
        std::vector<double> partial;
    };
    std::vector<Task> tasks;
    for (std::size_t c = 0; c < comps.size(); ++c) {
        for (std::size_t b = 0; b < comps[c].size(); b += kSourceBlock) {
            tasks.push_back({c, b, std::min(b + kSourceBlock, comps[c].size()), {}});
        }
    }

#pragma omp parallel
    {
        Workspace ws(n);
#pragma omp for schedule(dynamic, 1)
        for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(tasks.size()); ++t) {
            auto& task = tasks[static_cast<std::size_t>(t)];
            const auto& comp = comps[task.comp];
            task.partial.assign(comp.size(), 0.0);
            for (std::size_t k = task.begin; k < task.end; ++k) {
                accumulate_source(g, weight, cfg.tie_tolerance, cfg.count_mode, comp[k], local, ws,
                                  task.partial);
            }
        }
    }

    std::vector<double> out(n, 0.0);
    for (const auto& task : tasks) {
        const auto& comp = comps[task.comp];
        for (std::size_t k = 0; k < comp.size(); ++k) out[comp[k]] += task.partial[k];
    }
    // each unordered pair was seen from both endpoints
    for (auto& v : out) v *= 0.5;
    return out;
}

std::vector<std::size_t> degree_all(const SpatialGraph& g) {
    std::vector<std::size_t> out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g.degree(i);
    return out;
}

double strategic_centrality(double betweenness, std::size_t degree) {
    return degree == 0 ? 0.0 : betweenness / static_cast<double>(degree);
}

std::vector<double> strategic_all(std::span<const std::size_t> degree,
                                  std::span<const double> betweenness) {
    if (degree.size() != betweenness.size()) {
        throw ValidationError("degree and betweenness come from different graphs");
    }
    std::vector<double> out(degree.size());
    for (std::size_t i = 0; i < degree.size(); ++i) {
        out[i] = strategic_centrality(betweenness[i], degree[i]);
    }
    return out;
}

std::vector<CityCentrality> compute_centrality(const SpatialGraph& g, const CentralityConfig& cfg) {
    const auto b = betweenness_all(g, cfg);
    const auto d = degree_all(g);
    std::vector<CityCentrality> out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        out[i] = {g.city(i).id, d[i], b[i], strategic_centrality(b[i], d[i])};
    }
    return out;
}

void write_centrality_csv(std::ostream& out, std::span<const CityCentrality> rows,
                          const CentralityConfig& cfg) {
    out << "# theta=" << fmt_double(cfg.theta) << " tie_tolerance=" << fmt_double(cfg.tie_tolerance)
        << " count_mode=" << to_string(cfg.count_mode) << " pairs=unordered\n";
    out << "city_id,degree,betweenness,strategic\n";
    std::vector<CityCentrality> sorted(rows.begin(), rows.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const CityCentrality& x, const CityCentrality& y) { return x.id < y.id; });
    for (const auto& r : sorted) {
        out << r.id << ',' << r.degree << ',' << fmt_double(r.betweenness) << ','
            << fmt_double(r.strategic) << '\n';
    }
}

std::vector<CityCentrality> read_centrality_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    csv::Reader reader(in);
    std::vector<std::string> f;
    if (!reader.next(f) || f.size() != 4 || f[0] != "city_id") {
        throw ParseError(reader.line(), "expected header city_id,degree,betweenness,strategic");
    }
    std::vector<CityCentrality> out;
    while (reader.next(f)) {
        if (f.size() != 4) throw ParseError(reader.line(), "expected 4 fields");
        auto id = csv::parse_int(f[0]);
        auto deg = csv::parse_int(f[1]);
        auto b = csv::parse_double(f[2]);
        auto s = csv::parse_double(f[3]);
        if (!id || !deg || *deg < 0 || !b || !s) throw ParseError(reader.line(), "malformed row");
        out.push_back({*id, static_cast<std::size_t>(*deg), *b, *s});
    }
    return out;
}

} // namespace citynet
