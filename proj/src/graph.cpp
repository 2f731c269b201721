#include "nmassvs/graph.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>

#include "nmassvs/design.hpp"

namespace nmassvs {

namespace {

NodePair ordered(std::size_t a, std::size_t b) { return {std::min(a, b), std::max(a, b)}; }

std::string join_ids(const EvidenceNetwork& net, const std::vector<std::size_t>& nodes) {
    std::string out;
    for (auto n : nodes) out += (out.empty() ? "" : "-") + net.name(n);
    return out;
}

std::string pair_label(const EvidenceNetwork& net, NodePair p) {
    return net.name(p.first) + "-" + net.name(p.second);
}

Eigen::MatrixXd append_column(const Eigen::MatrixXd& m, const Eigen::VectorXd& col) {
    Eigen::MatrixXd out(m.rows(), m.cols() + 1);
    out << m, col;
    return out;
}

/// Accumulates Z columns, keeping only those that raise the rank of [X | Z].
class RankFilter {
public:
    explicit RankFilter(Eigen::MatrixXd X) : current_(std::move(X)), rank_(matrix_rank(current_)) {}

    bool try_add(const Eigen::VectorXd& col) {
        if (col.isZero()) return false;
        Eigen::MatrixXd next = append_column(current_, col);
        const auto r = matrix_rank(next);
        if (r <= rank_) return false;
        current_ = std::move(next);
        rank_ = r;
        columns_.push_back(col);
        return true;
    }

    Eigen::MatrixXd Z(Eigen::Index rows) const {
        Eigen::MatrixXd z(rows, static_cast<Eigen::Index>(columns_.size()));
        for (std::size_t j = 0; j < columns_.size(); ++j) z.col(static_cast<Eigen::Index>(j)) = columns_[j];
        return z;
    }

private:
    Eigen::MatrixXd current_;
    Eigen::Index rank_;
    std::vector<Eigen::VectorXd> columns_;
};

Eigen::VectorXd pair_column(const EvidenceNetwork& net, NodePair pair) {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.contrast_count()));
    Eigen::Index row = 0;
    for (const auto& s : net.studies())
        for (const auto& c : s.contrasts) {
            if (c.t1 == pair.first && c.t2 == pair.second) col(row) = 1.0;
            else if (c.t1 == pair.second && c.t2 == pair.first) col(row) = -1.0;
            ++row;
        }
    return col;
}

bool has_multi_arm(const EvidenceNetwork& net) {
    return std::any_of(net.studies().begin(), net.studies().end(), [](const Study& s) { return s.multi_arm(); });
}

/// Tracks the span of treatment-difference vectors e_j - e_i.
class ContrastSpan {
public:
    explicit ContrastSpan(std::size_t T) : T_(T), basis_(static_cast<Eigen::Index>(T), 0) {}

    bool contains(NodePair p) const {
        if (basis_.cols() == 0) return false;
        return matrix_rank(append_column(basis_, vec(p))) == basis_.cols();
    }
    void add(NodePair p) {
        if (!contains(p)) basis_ = append_column(basis_, vec(p));
    }

private:
    Eigen::VectorXd vec(NodePair p) const {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(T_));
        v(static_cast<Eigen::Index>(p.second)) += 1.0;
        v(static_cast<Eigen::Index>(p.first)) -= 1.0;
        return v;
    }
    std::size_t T_;
    Eigen::MatrixXd basis_;
};

} // namespace

// ---------------------------------------------------------------------------
// ComparisonGraph
// ---------------------------------------------------------------------------

ComparisonGraph ComparisonGraph::from_network(const EvidenceNetwork& network) {
    ComparisonGraph g;
    g.node_count_ = network.treatment_count();
    std::set<std::vector<std::size_t>> design_set;
    for (const auto& s : network.studies()) design_set.insert(s.design);
    g.designs_.assign(design_set.begin(), design_set.end());

    std::map<NodePair, GraphEdge> edges;
    for (const auto& s : network.studies()) {
        const auto d = static_cast<std::size_t>(
            std::lower_bound(g.designs_.begin(), g.designs_.end(), s.design) - g.designs_.begin());
        for (std::size_t i = 0; i < s.design.size(); ++i)
            for (std::size_t j = i + 1; j < s.design.size(); ++j) {
                auto& e = edges[{s.design[i], s.design[j]}];
                e.nodes = {s.design[i], s.design[j]};
                ++e.multiplicity;
                if (std::find(e.designs.begin(), e.designs.end(), d) == e.designs.end()) e.designs.push_back(d);
            }
    }
    for (auto& [k, e] : edges) {
        std::sort(e.designs.begin(), e.designs.end());
        g.edges_.push_back(std::move(e));
    }
    g.finalize();
    return g;
}

ComparisonGraph::ComparisonGraph(std::size_t node_count, std::vector<NodePair> pairs) : node_count_(node_count) {
    std::map<NodePair, GraphEdge> edges;
    std::set<std::vector<std::size_t>> design_set;
    for (auto [a, b] : pairs) {
        if (a == b || a >= node_count || b >= node_count) throw std::invalid_argument("invalid edge");
        design_set.insert({std::min(a, b), std::max(a, b)});
    }
    designs_.assign(design_set.begin(), design_set.end());
    for (auto [a, b] : pairs) {
        const auto p = ordered(a, b);
        auto& e = edges[p];
        e.nodes = p;
        ++e.multiplicity;
        const auto d = static_cast<std::size_t>(
            std::lower_bound(designs_.begin(), designs_.end(), std::vector<std::size_t>{p.first, p.second}) -
            designs_.begin());
        if (e.designs.empty()) e.designs.push_back(d);
    }
    for (auto& [k, e] : edges) edges_.push_back(std::move(e));
    finalize();
}

void ComparisonGraph::finalize() {
    adjacency_.assign(node_count_, {});
    for (const auto& e : edges_) {
        adjacency_[e.nodes.first].push_back(e.nodes.second);
        adjacency_[e.nodes.second].push_back(e.nodes.first);
    }
    for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());
}

std::size_t ComparisonGraph::edge_index(NodePair pair) const {
    pair = ordered(pair.first, pair.second);
    const auto it = std::lower_bound(edges_.begin(), edges_.end(), pair,
                                     [](const GraphEdge& e, const NodePair& p) { return e.nodes < p; });
    if (it == edges_.end() || it->nodes != pair) return npos;
    return static_cast<std::size_t>(it - edges_.begin());
}

// ---------------------------------------------------------------------------
// Structure
// ---------------------------------------------------------------------------

std::vector<NodePair> find_bridges(const ComparisonGraph& graph) {
    const auto n = graph.node_count();
    std::vector<std::size_t> disc(n, 0), low(n, 0);
    std::size_t timer = 0;
    std::vector<NodePair> bridges;

    std::function<void(std::size_t, std::size_t)> dfs = [&](std::size_t u, std::size_t parent) {
        disc[u] = low[u] = ++timer;
        for (auto v : graph.neighbors(u)) {
            if (v == parent) continue;  // simple graph: one edge per pair
            if (disc[v]) {
                low[u] = std::min(low[u], disc[v]);
            } else {
                dfs(v, u);
                low[u] = std::min(low[u], low[v]);
                if (low[v] > disc[u]) bridges.push_back(ordered(u, v));
            }
        }
    };
    for (std::size_t u = 0; u < n; ++u)
        if (!disc[u]) dfs(u, ComparisonGraph::npos);
    std::sort(bridges.begin(), bridges.end());
    return bridges;
}

LoopSet independent_loops(const ComparisonGraph& graph, std::size_t root) {
    const auto n = graph.node_count();
    LoopSet out;
    if (root >= n) return out;

    constexpr auto none = ComparisonGraph::npos;
    std::vector<std::size_t> parent(n, none), depth(n, 0);
    std::vector<bool> seen(n, false);
    std::deque<std::size_t> queue{root};
    seen[root] = true;
    while (!queue.empty()) {
        const auto u = queue.front();
        queue.pop_front();
        for (auto v : graph.neighbors(u)) {
            if (seen[v]) continue;
            seen[v] = true;
            parent[v] = u;
            depth[v] = depth[u] + 1;
            queue.push_back(v);
        }
    }

    for (const auto& e : graph.edges()) {
        const auto [a, b] = e.nodes;
        if (!seen[a] || !seen[b]) continue;
        if (parent[a] == b || parent[b] == a) continue;  // tree edge

        std::vector<std::size_t> up_a{a}, up_b{b};
        auto x = a, y = b;
        while (depth[x] > depth[y]) up_a.push_back(x = parent[x]);
        while (depth[y] > depth[x]) up_b.push_back(y = parent[y]);
        while (x != y) {
            up_a.push_back(x = parent[x]);
            up_b.push_back(y = parent[y]);
        }
        // up_a ends at the common ancestor; walk down to b.
        Loop loop;
        loop.nodes = up_a;
        for (auto it = up_b.rbegin() + 1; it != up_b.rend(); ++it) loop.nodes.push_back(*it);
        loop.distinguishing_edge = e.nodes;
        out.loops.push_back(std::move(loop));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Placement
// ---------------------------------------------------------------------------

std::string to_string(PlacementMethod method) {
    switch (method) {
        case PlacementMethod::LuAdes: return "lu-ades";
        case PlacementMethod::DesignByTreatment: return "dbt";
        case PlacementMethod::Jackson: return "jackson";
    }
    return "unknown";
}

PlacementMethod placement_from_string(const std::string& name) {
    if (name == "lu-ades") return PlacementMethod::LuAdes;
    if (name == "dbt") return PlacementMethod::DesignByTreatment;
    if (name == "jackson") return PlacementMethod::Jackson;
    throw std::invalid_argument("unknown placement method '" + name + "' (lu-ades|dbt|jackson)");
}

std::vector<std::string> InconsistencySpec::labels() const {
    std::vector<std::string> out;
    for (const auto& f : factors) out.push_back(f.label);
    return out;
}

InconsistencySpec place_lu_ades(const EvidenceNetwork& network) {
    const auto graph = ComparisonGraph::from_network(network);
    const auto bridges = find_bridges(graph);
    const std::set<NodePair> bridge_set(bridges.begin(), bridges.end());

    // Comparisons seen only inside one multi-arm design are consistent by construction.
    auto candidate = [&](NodePair p) {
        if (bridge_set.count(p)) return false;
        const auto& e = graph.edges().at(graph.edge_index(p));
        return !(e.designs.size() == 1 && graph.designs()[e.designs.front()].size() > 2);
    };

    InconsistencySpec spec;
    spec.method = PlacementMethod::LuAdes;
    RankFilter filter(build_X(network));
    std::set<NodePair> chosen;

    for (const auto& loop : independent_loops(graph, 0).loops) {
        std::vector<NodePair> loop_edges;
        for (std::size_t i = 0; i < loop.nodes.size(); ++i)
            loop_edges.push_back(ordered(loop.nodes[i], loop.nodes[(i + 1) % loop.nodes.size()]));
        std::sort(loop_edges.begin(), loop_edges.end());
        std::vector<NodePair> order{loop.distinguishing_edge};
        for (const auto& e : loop_edges)
            if (e != loop.distinguishing_edge) order.push_back(e);

        bool placed = false;
        for (const auto& e : order) {
            if (!candidate(e) || chosen.count(e)) continue;
            if (!filter.try_add(pair_column(network, e))) continue;
            chosen.insert(e);
            InconsistencyFactor f;
            f.kind = InconsistencyFactor::Kind::Loop;
            f.comparison = e;
            f.loop = loop.nodes;
            f.label = "loop:" + join_ids(network, loop.nodes) + "@" + pair_label(network, e);
            spec.factors.push_back(std::move(f));
            placed = true;
            break;
        }
        if (!placed)
            spec.notes.push_back("loop " + join_ids(network, loop.nodes) +
                                 " has no identifiable comparison left after multi-arm exclusions");
    }
    spec.Z = filter.Z(static_cast<Eigen::Index>(network.contrast_count()));
    return spec;
}

InconsistencySpec place_design_by_treatment(const EvidenceNetwork& network) {
    if (!has_multi_arm(network)) {
        auto spec = place_lu_ades(network);
        spec.method = PlacementMethod::DesignByTreatment;
        spec.notes.push_back("two-arm studies only: design-by-treatment factors coincide with the Lu-Ades placement");
        return spec;
    }

    const auto graph = ComparisonGraph::from_network(network);
    InconsistencySpec spec;
    spec.method = PlacementMethod::DesignByTreatment;
    RankFilter filter(build_X(network));
    ContrastSpan span(network.treatment_count());

    for (const auto& design : graph.designs()) {
        const auto base = design.front();
        for (std::size_t k = 1; k < design.size(); ++k) {
            const NodePair contrast{base, design[k]};
            if (!span.contains(contrast)) {
                span.add(contrast);  // first evidence on this direction: baseline
                continue;
            }
            Eigen::VectorXd col = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(network.contrast_count()));
            Eigen::Index row = 0;
            for (const auto& s : network.studies())
                for (const auto& c : s.contrasts) {
                    if (s.design == design)
                        col(row) = static_cast<double>(c.t2 == design[k]) - static_cast<double>(c.t1 == design[k]);
                    ++row;
                }
            if (!filter.try_add(col)) continue;
            InconsistencyFactor f;
            f.kind = InconsistencyFactor::Kind::Design;
            f.comparison = contrast;
            f.design = design;
            f.label = "design:" + join_ids(network, design) + "@" + pair_label(network, contrast);
            spec.factors.push_back(std::move(f));
        }
    }
    spec.Z = filter.Z(static_cast<Eigen::Index>(network.contrast_count()));
    return spec;
}

InconsistencySpec place_jackson(const EvidenceNetwork& network) {
    if (!has_multi_arm(network))
        throw std::invalid_argument(
            "design-level placement needs multi-arm studies; with two-arm studies only it equals the "
            "design-by-treatment placement (use method dbt)");

    const auto graph = ComparisonGraph::from_network(network);
    InconsistencySpec spec;
    spec.method = PlacementMethod::Jackson;
    spec.notes.push_back("design-level placement: one shared factor per design whose evidence is duplicated by "
                         "earlier designs (interpretation; factors are fixed effects)");
    RankFilter filter(build_X(network));
    ContrastSpan span(network.treatment_count());

    for (const auto& design : graph.designs()) {
        bool duplicated = false;
        for (std::size_t k = 1; k < design.size(); ++k) duplicated |= span.contains({design.front(), design[k]});
        for (std::size_t k = 1; k < design.size(); ++k) span.add({design.front(), design[k]});
        if (!duplicated) continue;

        Eigen::VectorXd col = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(network.contrast_count()));
        Eigen::Index row = 0;
        for (const auto& s : network.studies())
            for (std::size_t k = 0; k < s.contrasts.size(); ++k, ++row)
                if (s.design == design) col(row) = 1.0;
        if (!filter.try_add(col)) continue;
        InconsistencyFactor f;
        f.kind = InconsistencyFactor::Kind::Design;
        f.comparison = {design[0], design[1]};
        f.design = design;
        f.label = "design:" + join_ids(network, design);
        spec.factors.push_back(std::move(f));
    }
    spec.Z = filter.Z(static_cast<Eigen::Index>(network.contrast_count()));
    return spec;
}

InconsistencySpec place(const EvidenceNetwork& network, PlacementMethod method) {
    switch (method) {
        case PlacementMethod::LuAdes: return place_lu_ades(network);
        case PlacementMethod::DesignByTreatment: return place_design_by_treatment(network);
        case PlacementMethod::Jackson: return place_jackson(network);
    }
    throw std::invalid_argument("unknown placement method");
}

std::string spec_to_csv(const InconsistencySpec& spec) { return matrix_to_csv(spec.Z, spec.labels()); }

} // namespace nmassvs
