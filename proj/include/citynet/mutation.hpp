#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "citynet/error.hpp"
#include "citynet/graph.hpp"

namespace citynet {

enum class MutationOp { fragment, merge, add_edge, remove_edge, add_city };

std::string to_string(MutationOp op);

/// One graph edit. The grammar is shared by the CLI (--mutations file) and
/// the HTTP service:
///   {"op":"fragment","city":7,"k":2}
///   {"op":"merge","cities":[3,4]}
///   {"op":"add_edge","a":1,"b":9}
///   {"op":"remove_edge","a":1,"b":9}
///   {"op":"add_city","city":{"id":..,"name":..,"country":..,"province":..,
///                            "lat":..,"lon":..,"population":..}}
struct Mutation {
    MutationOp op = MutationOp::fragment;
    CityId city = 0;             // fragment
    int k = 2;                   // fragment
    std::vector<CityId> cities;  // merge
    CityId a = 0;                // add_edge / remove_edge
    CityId b = 0;
    City new_city;               // add_city
};

struct FieldError {
    std::string field;
    std::string reason;
};

/// Rejected mutation with per-field reasons. `index` is the position of the
/// offending mutation in the submitted batch.
class MutationError : public Error {
public:
    MutationError(std::size_t index, std::vector<FieldError> fields);

    std::size_t index() const noexcept { return index_; }
    const std::vector<FieldError>& fields() const noexcept { return fields_; }
    nlohmann::json to_json() const;

private:
    std::size_t index_;
    std::vector<FieldError> fields_;
};

Mutation mutation_from_json(const nlohmann::json& j, std::size_t index = 0);
nlohmann::json to_json(const Mutation& m);

/// Accepts either a JSON array of mutations or {"mutations": [...]}.
std::vector<Mutation> parse_mutations(const nlohmann::json& j);
std::vector<Mutation> parse_mutations_text(const std::string& text);
nlohmann::json to_json(std::span<const Mutation> log);

/// Applies one mutation. Fragment and merge follow the fragmentation rules;
/// add_edge links two existing cities at their great-circle distance with the
/// graph's flow model; add_city links the new city to every city within the
/// radius (both populations at least min_population).
SpatialGraph apply_mutation(const SpatialGraph& g, const Mutation& m, std::size_t index = 0);
SpatialGraph apply_mutations(const SpatialGraph& g, std::span<const Mutation> log);

} // namespace citynet
