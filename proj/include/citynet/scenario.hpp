#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "citynet/centrality.hpp"
#include "citynet/graph.hpp"
#include "citynet/ingest.hpp"
#include "citynet/mutation.hpp"
#include "citynet/zones.hpp"

namespace citynet {

struct AnalysisConfig {
    CentralityConfig centrality;
    ZoneConfig zones;
    double fit_a = 4.0;
    double fit_b = -9.0;
    ThresholdConfig thresholds;
    OutlierConfig outliers;
};

/// Everything served for one graph snapshot.
struct Metrics {
    GraphPtr graph;
    std::vector<CityCentrality> cities;   // indexed like graph->cities()
    std::vector<std::size_t> city_attacks; // events assigned to each city
    std::vector<ZoneMetrics> zones;        // one per city (or top-N), sorted by centre
    RiskFit fit;
    std::size_t components_recomputed = 0;
    std::size_t components_reused = 0;
};

/// Betweenness of `g`, reusing `old_b` (indexed like `old_g`) for every
/// component whose members and internal links are unchanged and recomputing
/// the rest. Bitwise identical to betweenness_all(g, cfg) when `old_b` was
/// produced by betweenness_all(old_g, cfg).
std::vector<double> betweenness_incremental(const SpatialGraph& g, const CentralityConfig& cfg,
                                            const SpatialGraph& old_g,
                                            std::span<const double> old_b,
                                            std::size_t* recomputed = nullptr,
                                            std::size_t* reused = nullptr);

/// Centrality, event assignment and zones for `g`. With `previous` computed
/// under the same config, unchanged components are reused.
Metrics compute_metrics(GraphPtr g, std::span<const ConflictEvent> events,
                        const AnalysisConfig& cfg, const Metrics* previous = nullptr);

nlohmann::json metrics_json(const Metrics& m);
nlohmann::json risk_json(const Metrics& m, const AnalysisConfig& cfg);
/// RFC 7946 FeatureCollection of city points. A is the number of events
/// assigned to the city, A* the prediction for the zone centred on it, and
/// `vulnerable` whether that zone is a vulnerability outlier.
nlohmann::json geojson(const Metrics& m, const AnalysisConfig& cfg);
/// Per-city and per-zone deltas (other - base) over the union of ids.
nlohmann::json diff_json(const Metrics& base, const Metrics& other, const AnalysisConfig& cfg);

class NotFoundError : public Error {
public:
    explicit NotFoundError(const std::string& message) : Error("not_found", message) {}
};

/// Scenario overlays on one base graph. Each scenario owns a mutation log and
/// the graph it materializes; metrics are recomputed in the background, one
/// recompute at a time per scenario, and are only handed out when they match
/// the latest log.
class ScenarioStore {
public:
    ScenarioStore(SpatialGraph base, std::vector<ConflictEvent> events, AnalysisConfig cfg,
                  std::optional<std::filesystem::path> log_dir = std::nullopt);
    ~ScenarioStore();

    ScenarioStore(const ScenarioStore&) = delete;
    ScenarioStore& operator=(const ScenarioStore&) = delete;

    /// New scenario from the base graph or from the current log of `from`,
    /// followed by `mutations`. Throws NotFoundError / MutationError.
    std::string create(const std::optional<std::string>& from = std::nullopt,
                       std::span<const Mutation> mutations = {});

    /// Appends a batch atomically (all or nothing), marks metrics stale and
    /// schedules a recompute. Returns the new log version.
    std::uint64_t submit(const std::string& id, std::span<const Mutation> mutations);

    /// Latest metrics, or null while a recompute is pending.
    std::shared_ptr<const Metrics> metrics(const std::string& id) const;

    /// Blocks until metrics are fresh or the timeout expires.
    std::shared_ptr<const Metrics> wait_fresh(const std::string& id,
                                              std::chrono::milliseconds timeout) const;

    struct Status {
        std::uint64_t version = 0;
        std::size_t log_size = 0;
        bool stale = false;
        std::string error; // last recompute failure, if any
    };
    Status status(const std::string& id) const;
    std::vector<Mutation> log(const std::string& id) const;
    std::vector<std::string> ids() const;

    const AnalysisConfig& config() const noexcept { return cfg_; }
    std::shared_ptr<const Metrics> base_metrics() const noexcept { return base_metrics_; }

private:
    struct Scenario {
        mutable std::mutex mu;
        mutable std::condition_variable cv;
        std::vector<Mutation> log;
        GraphPtr graph;
        std::uint64_t version = 0;
        std::shared_ptr<const Metrics> metrics;
        std::uint64_t metrics_version = 0;
        std::string error;
        bool running = false;
        std::thread worker;
    };

    std::shared_ptr<Scenario> find(const std::string& id) const;
    void schedule(Scenario& s); // caller holds s.mu
    void work(Scenario& s);
    void persist(const std::string& id, const Scenario& s) const; // caller holds s.mu

    GraphPtr base_;
    std::vector<ConflictEvent> events_;
    AnalysisConfig cfg_;
    std::optional<std::filesystem::path> log_dir_;
    std::shared_ptr<const Metrics> base_metrics_;

    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Scenario>> scenarios_;
    std::uint64_t next_id_ = 1;
};

} // namespace citynet
