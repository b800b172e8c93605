#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "citynet/graph.hpp"

namespace citynet {

/// fractional: each pair spreads one unit of credit over its shortest paths.
/// raw: every shortest path through v counts 1.
enum class CountMode { fractional, raw };

std::string to_string(CountMode m);
CountMode parse_count_mode(const std::string& s);

struct CentralityConfig {
    double theta = 0.5;
    double tie_tolerance = 1e-9; // relative
    CountMode count_mode = CountMode::fractional;
};

void validate(const CentralityConfig& cfg);

struct CityCentrality {
    CityId id = 0;
    std::size_t degree = 0;
    double betweenness = 0.0;
    double strategic = 0.0;
};

/// Path cost of a link: flow^(-theta). Throws ValidationError if flow <= 0.
double edge_weight(double flow, double theta);

/// Unnormalized betweenness over unordered pairs, indexed like g.cities().
/// Pairs in different components contribute nothing. The result does not
/// depend on thread count: every component is processed in fixed blocks of
/// sources whose partial sums are reduced in block order.
std::vector<double> betweenness_all(const SpatialGraph& g, const CentralityConfig& cfg);

std::vector<std::size_t> degree_all(const SpatialGraph& g);

/// B / D, with 0 for isolated nodes.
double strategic_centrality(double betweenness, std::size_t degree);
std::vector<double> strategic_all(std::span<const std::size_t> degree,
                                  std::span<const double> betweenness);

std::vector<CityCentrality> compute_centrality(const SpatialGraph& g, const CentralityConfig& cfg);

/// `city_id,degree,betweenness,strategic` sorted by id, preceded by a
/// `# theta=... tie_tolerance=... count_mode=... pairs=unordered` line.
void write_centrality_csv(std::ostream& out, std::span<const CityCentrality> rows,
                          const CentralityConfig& cfg);
std::vector<CityCentrality> read_centrality_csv(const std::filesystem::path& path);

} // namespace citynet
