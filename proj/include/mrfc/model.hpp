#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "mrfc/errors.hpp"

namespace mrfc {

enum class VarRole { feature, label };

struct VariableSpec {
    int id = 0;
    std::string name;
    int cardinality = 2;
    VarRole role = VarRole::feature;

    friend bool operator==(const VariableSpec&, const VariableSpec&) = default;
};

// Undirected edge, stored with u < v.
struct Edge {
    int u = 0;
    int v = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline Edge make_edge(int a, int b) {
    return a < b ? Edge{a, b} : Edge{b, a};
}

struct GraphStructure {
    std::vector<VariableSpec> variables;
    std::vector<Edge> edges;  // sorted ascending, no duplicates

    // Throws Error if ids are not contiguous, cardinalities < 2 (a clamped
    // single-state feature still gets cardinality 2), there is not exactly
    // one label variable, or edges are malformed.
    void validate() const;

    int label_id() const;
    std::size_t num_variables() const { return variables.size(); }

    friend bool operator==(const GraphStructure&, const GraphStructure&) = default;
};

// Log-space potential tables: phi = exp(theta).
struct LogLinearParams {
    std::vector<std::vector<double>> unary;     // [var][state]
    std::vector<std::vector<double>> pairwise;  // [edge][state_u * card_v + state_v]

    friend bool operator==(const LogLinearParams&, const LogLinearParams&) = default;
};

LogLinearParams zero_params(const GraphStructure& structure);

using Assignment = std::vector<int>;

// Immutable after construction; safe to share read-only across workers.
class MarkovNetwork {
public:
    MarkovNetwork(GraphStructure structure, LogLinearParams params);

    static MarkovNetwork zeros(GraphStructure structure);

    const GraphStructure& structure() const { return structure_; }
    const LogLinearParams& params() const { return params_; }
    std::size_t num_variables() const { return structure_.variables.size(); }
    int cardinality(int v) const { return structure_.variables[static_cast<std::size_t>(v)].cardinality; }
    int label_id() const { return structure_.label_id(); }

    struct NeighborRef {
        int neighbor;
        int edge;
    };
    const std::vector<std::vector<NeighborRef>>& adjacency() const { return adjacency_; }

    // theta of edge `e` at (state of this-side variable `var`, state of the
    // other endpoint). Resolves table orientation from the edge endpoints.
    double edge_theta(int e, int var, int var_state, int other_state) const {
        const Edge& ed = structure_.edges[static_cast<std::size_t>(e)];
        int cv = cardinality(ed.v);
        if (ed.u == var) {
            return params_.pairwise[static_cast<std::size_t>(e)]
                                   [static_cast<std::size_t>(var_state * cv + other_state)];
        }
        return params_.pairwise[static_cast<std::size_t>(e)]
                               [static_cast<std::size_t>(other_state * cv + var_state)];
    }

private:
    GraphStructure structure_;
    LogLinearParams params_;
    std::vector<std::vector<NeighborRef>> adjacency_;
};

inline constexpr std::uint64_t kDefaultExactLimit = std::uint64_t{1} << 20;

// Number of joint states, capped at `cap` + 1 to avoid overflow.
std::uint64_t joint_state_count(const GraphStructure& structure, std::uint64_t cap);

// Unnormalized log score: sum of unary and pairwise theta entries selected
// by the assignment. Throws InvalidAssignmentError on shape/state mismatch.
double log_score(const MarkovNetwork& network, const Assignment& a);

// ln Z by full enumeration via streaming log-sum-exp.
// Throws TooLargeError beyond `state_limit`.
double log_partition_exact(const MarkovNetwork& network,
                           std::uint64_t state_limit = kDefaultExactLimit);
double partition_function_exact(const MarkovNetwork& network,
                                std::uint64_t state_limit = kDefaultExactLimit);

double joint_probability(const MarkovNetwork& network, const Assignment& a,
                         std::uint64_t state_limit = kDefaultExactLimit);

// Self-describing text document (format_version, variables, edges, unary,
// pairwise) with parameters rendered to 17 significant digits so the
// round-trip is value-exact. Deterministic byte output.
std::string serialize_model(const MarkovNetwork& network);
MarkovNetwork deserialize_model(const std::string& text);

}  // namespace mrfc
