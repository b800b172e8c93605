// Full-scale timing: synthetic 7322-city graph build plus betweenness.

#include <algorithm>
#include <chrono>
#include <iostream>

#include <omp.h>

#include "CLI11.hpp"

#include "citynet/centrality.hpp"
#include "citynet/fixture.hpp"
#include "citynet/graph.hpp"

using namespace citynet;

int main(int argc, char** argv) {
    CLI::App app{"citynet_bench"};
    std::size_t n = 7322, clusters = 90;
    // 800 km spread joins the clusters into one giant component
    double spread = 800.0, theta = 0.5;
    std::uint64_t seed = 11;
    app.add_option("--cities", n)->capture_default_str();
    app.add_option("--clusters", clusters)->capture_default_str();
    app.add_option("--spread-km", spread)->capture_default_str();
    app.add_option("--theta", theta)->capture_default_str();
    app.add_option("--seed", seed)->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    using clock = std::chrono::steady_clock;
    auto secs = [](clock::time_point a, clock::time_point b) {
        return std::chrono::duration<double>(b - a).count();
    };

    const auto cities = synthesize_cities(n, clusters, seed, spread);
    const auto t0 = clock::now();
    GraphConfig gcfg;
    gcfg.colocated = ColocatedPolicy::merge;
    const auto g = build_graph(cities, gcfg);
    const auto t1 = clock::now();
    CentralityConfig ccfg;
    ccfg.theta = theta;
    const auto b = betweenness_all(g, ccfg);
    const auto t2 = clock::now();

    std::size_t largest = 0;
    const auto comps = connected_components(g);
    for (const auto& c : comps) largest = std::max(largest, c.size());

    double total = 0.0;
    for (double v : b) total += v;
    std::cout << "threads " << omp_get_max_threads() << "\n"
              << "cities " << g.size() << " edges " << g.edges().size() << "\n"
              << "components " << comps.size() << " largest " << largest << "\n"
              << "build_s " << secs(t0, t1) << "\n"
              << "betweenness_s " << secs(t1, t2) << "\n"
              << "total_s " << secs(t0, t2) << "\n"
              << "sum_b " << total << "\n";
    return 0;
}
