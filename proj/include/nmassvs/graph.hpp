#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "nmassvs/network.hpp"

namespace nmassvs {

using NodePair = std::pair<std::size_t, std::size_t>;  // first < second

struct GraphEdge {
    NodePair nodes;
    std::size_t multiplicity = 0;        // studies comparing the pair directly
    std::vector<std::size_t> designs;    // indices into ComparisonGraph::designs()
};

/// Treatments as nodes; an edge for every pair compared inside at least one study
/// (a k-arm study contributes all of its k(k-1)/2 pairs).
class ComparisonGraph {
public:
    static ComparisonGraph from_network(const EvidenceNetwork& network);
    ComparisonGraph(std::size_t node_count, std::vector<NodePair> pairs);

    std::size_t node_count() const { return node_count_; }
    const std::vector<GraphEdge>& edges() const { return edges_; }
    const std::vector<std::vector<std::size_t>>& designs() const { return designs_; }
    const std::vector<std::size_t>& neighbors(std::size_t node) const { return adjacency_.at(node); }
    /// Position of the edge in edges(), or npos.
    std::size_t edge_index(NodePair pair) const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    ComparisonGraph() = default;
    void finalize();

    std::size_t node_count_ = 0;
    std::vector<GraphEdge> edges_;
    std::vector<std::vector<std::size_t>> designs_;
    std::vector<std::vector<std::size_t>> adjacency_;
};

/// Edges whose removal disconnects the (simple) graph.
std::vector<NodePair> find_bridges(const ComparisonGraph& graph);

struct Loop {
    std::vector<std::size_t> nodes;   // simple cycle; the first node is not repeated
    NodePair distinguishing_edge;     // the non-tree edge closing it
};

struct LoopSet {
    std::vector<Loop> loops;
};

/// Fundamental cycle basis of a breadth-first spanning tree rooted at `root`,
/// neighbors visited in canonical order. Loops are ordered by their closing edge.
LoopSet independent_loops(const ComparisonGraph& graph, std::size_t root = 0);

enum class PlacementMethod { LuAdes, DesignByTreatment, Jackson };

std::string to_string(PlacementMethod method);
PlacementMethod placement_from_string(const std::string& name);

struct InconsistencyFactor {
    enum class Kind { Loop, Design };
    Kind kind = Kind::Loop;
    NodePair comparison{};             // Loop: the functional parameter; Design: the design contrast
    std::vector<std::size_t> loop;     // Loop only
    std::vector<std::size_t> design;   // Design only
    std::string label;
};

struct InconsistencySpec {
    PlacementMethod method = PlacementMethod::LuAdes;
    std::vector<InconsistencyFactor> factors;
    Eigen::MatrixXd Z;  // N x p, entries in {-1, 0, 1}
    std::vector<std::string> notes;

    std::size_t p() const { return factors.size(); }
    std::vector<std::string> labels() const;
};

InconsistencySpec place_lu_ades(const EvidenceNetwork& network);
InconsistencySpec place_design_by_treatment(const EvidenceNetwork& network);
InconsistencySpec place_jackson(const EvidenceNetwork& network);
InconsistencySpec place(const EvidenceNetwork& network, PlacementMethod method);

/// Z with a header of factor labels.
std::string spec_to_csv(const InconsistencySpec& spec);

} // namespace nmassvs
