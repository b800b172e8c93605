#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "citynet/graph.hpp"
#include "citynet/rng.hpp"

namespace citynet::abm {

/// Cultural state label. Runs start with every city in its own state, equal
/// to its city id.
using State = std::int64_t;

/// Rationality value selecting deterministic strongest-influence adoption.
inline constexpr double kArgmax = std::numeric_limits<double>::infinity();

enum class UpdateMode { synchronous, asynchronous };

std::string to_string(UpdateMode m);
UpdateMode parse_update_mode(const std::string& s);

struct AbmConfig {
    double rationality = 2.0;
    // Weight a city keeps on its own state, as a multiple of its own share
    // C_i / max(n_i, 1). Zero gives the strict dissimilar-neighbours-only model.
    double self_weight = 1.0;
    // When set, neighbours sharing i's state add their share C_j / n_j to i's
    // own state (the influence sum runs over every neighbour). When clear, only
    // dissimilar neighbours exert influence.
    bool same_state_support = true;
    UpdateMode update_mode = UpdateMode::synchronous;
    std::size_t burn_in = 2000;
    std::size_t measure_window = 2000;
    std::uint64_t seed = 1;
    std::size_t record_interval = 10;
};

void validate(const AbmConfig& cfg);

/// Canonical JSON of the config; its FNV-1a hash stamps run outputs.
std::string config_json(const AbmConfig& cfg);
AbmConfig config_from_json(const std::string& text);

using citynet::CounterRng;

struct Influence {
    State state;
    double weight;
};

/// Number of neighbours whose state differs from city `i`'s.
std::size_t dissimilar_neighbors(const SpatialGraph& g, std::span<const State> states,
                                 std::size_t i);

/// Share of capacity sent to each dissimilar neighbour; 0 when there are none.
double influence_share(double capacity, std::size_t dissimilar);

/// Influence on city `i`, one entry per candidate state sorted by state. Each
/// dissimilar neighbour j adds its share C_j / n_j to its state; with
/// `same_state_support`, same-state neighbours add theirs to i's state too
/// (zero for neighbours with n_j = 0). When `self_weight` > 0, i's own state
/// also gets self_weight * C_i / n_i. Empty when no neighbour differs, so
/// the city keeps its state. Capacities are populations.
std::vector<Influence> influence_field(const SpatialGraph& g, std::span<const State> states,
                                       std::size_t i, double self_weight,
                                       bool same_state_support = true);

/// P(q) proportional to h_q^r. r = 0 is uniform over candidates, r = kArgmax
/// puts all mass on the strongest state (lowest state on ties). Empty when
/// every weight is zero.
std::vector<double> adoption_probabilities(std::span<const Influence> field, double rationality);

/// Samples the next state with `u` uniform in [0, 1). Keeps `current` when
/// the field is empty or all zero.
State adopt_state(std::span<const Influence> field, State current, double rationality, double u);

/// One update of all cities. `iteration` selects the random streams.
std::vector<State> step(const SpatialGraph& g, std::span<const State> states,
                        const AbmConfig& cfg, std::uint64_t iteration);

/// Newman modularity of the partition into equal-state groups; 0 when the
/// graph has no links.
double modularity(const SpatialGraph& g, std::span<const State> states);

struct AbmRun {
    AbmConfig config;
    std::vector<CityId> city_ids;
    std::vector<std::size_t> recorded_steps;
    std::vector<std::vector<State>> states;  // one vector per recorded step
    std::vector<double> modularity_series;   // one value per recorded step
    std::vector<std::size_t> flip_counts;    // per city, measure window only
    std::vector<double> flip_rate;           // flip_counts / measure_window
};

/// Runs burn_in + measure_window iterations from the all-distinct start,
/// recording states and modularity every record_interval steps (and at the
/// last step).
AbmRun run(const SpatialGraph& g, const AbmConfig& cfg);

struct TorusGraph {
    SpatialGraph graph;
    std::vector<std::array<double, 2>> positions;
    double box = 1.0;
};

/// n points uniform in a wrapped square of side `box`, linked when their
/// toroidal distance is <= radius. Populations are uniform in
/// [pop_lo, pop_hi]; flows follow the gravity law on toroidal distance.
TorusGraph toroidal_geometric_graph(std::size_t n, double radius, double box, std::uint64_t seed,
                                    double pop_lo = 1e4, double pop_hi = 1e6);

struct FlipReport {
    std::vector<std::array<double, 2>> pairs; // (flip_rate, betweenness) per city
    std::optional<double> spearman;
    std::array<double, 10> decile_mean_flip{}; // by ascending betweenness
};

/// Spearman rank correlation with average ranks; none when either side is
/// constant.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

FlipReport flip_betweenness_report(const AbmRun& run, std::span<const double> betweenness);

/// `city_id,flip_rate,degree,betweenness`, preceded by seed/config-hash comments.
void write_run_csv(std::ostream& out, const AbmRun& run, const SpatialGraph& g,
                   std::span<const double> betweenness);
/// `step,modularity`, preceded by seed/config-hash comments.
void write_modularity_csv(std::ostream& out, const AbmRun& run);

} // namespace citynet::abm
