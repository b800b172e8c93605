#pragma once

#include <ostream>
#include <span>
#include <vector>

#include "citynet/centrality.hpp"
#include "citynet/graph.hpp"

namespace citynet {

/// M complete cores of N nodes bridged by K mutually linked relay nodes.
struct RelayCoreSpec {
    int m = 2; // cores, >= 2
    int n = 1; // nodes per core, >= 1
    int k = 1; // relays, >= 1
};

void validate(const RelayCoreSpec& spec);

/// Degree of each relay node: M*N + K - 1.
long relay_degree(const RelayCoreSpec& spec);

/// Mean betweenness of a relay node: C(M,2) * N^2 / K.
double relay_betweenness(const RelayCoreSpec& spec);

struct RelayStrategic {
    double exact;  // relay_betweenness / relay_degree
    double approx; // (M-1) N / (2K), valid for N >> K
};
RelayStrategic relay_strategic(const RelayCoreSpec& spec);

struct RelayCoreGraph {
    SpatialGraph graph;
    std::vector<CityId> relays;
    std::vector<std::vector<CityId>> cores;
};

/// Core c, node j gets id c*N + j; relays follow at M*N + r. Nodes are laid
/// out around (10N, 20E) so that for M <= 5 the link set coincides with the
/// radius rule under the returned config (uniform flows).
RelayCoreGraph build_relay_core_graph(const RelayCoreSpec& spec);

/// Replaces `city` by `k` copies on a 1 km ring around it. Copy 0 keeps the
/// original id, the rest take fresh ids above the current maximum. Every copy
/// inherits the original neighbor set, the copies form a clique, and the
/// population is split equally.
SpatialGraph fragment_city(const SpatialGraph& g, CityId city, int k);

/// Replaces `ids` by one node (lowest id) at the population-weighted centroid
/// with the summed population; its links are rebuilt by the radius rule.
SpatialGraph merge_cities(const SpatialGraph& g, std::span<const CityId> ids);

struct SweepRow {
    RelayCoreSpec spec;
    long d_formula;
    long d_computed;
    double b_formula;
    double b_computed;
    double s_exact;
    double s_approx;
    bool degrees_uniform; // every relay had the same computed degree
};

struct IntRange {
    int lo;
    int hi;
};

/// Evaluates the closed forms and the computed relay metrics (theta = 0,
/// fractional counting) for every (M, N, K) in the ranges.
std::vector<SweepRow> fragment_sweep(IntRange m, IntRange n, IntRange k);

/// `M,N,K,D_formula,D_computed,B_formula,B_computed,S_exact,S_approx`
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

} // namespace citynet
