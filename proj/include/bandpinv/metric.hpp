#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace bandpinv {

/// Nodes are caller-chosen positive integer labels.
using NodeId = int;

/// Which metric axiom a violation report refers to.
enum class MetricAxiom { nonnegativity, identity, symmetry, triangle };

struct MetricViolation {
    MetricAxiom axiom;
    NodeId i = 0, j = 0, k = 0; ///< witness nodes; k only used for triangle
    std::string detail;
};

struct ValidateOptions {
    double zero_tol = 1e-12;          ///< |d| below this counts as zero
    std::size_t max_nodes = 5000;     ///< hard cap on |V|
    std::size_t exact_triangle_below = 300; ///< all-triples check under this size
    std::size_t sample_triples = 2'000'000; ///< triples drawn above the threshold
    std::uint64_t sample_seed = 0x9e3779b97f4a7c15ull;
};

/**
 * Finite metric space: a list of node labels plus the full pairwise
 * distance table (row/column order = node order). Construct through
 * make_metric_space / graph_geodesic / line_metric so the axioms have
 * been checked.
 */
class MetricSpace {
public:
    MetricSpace(std::vector<NodeId> nodes, Eigen::MatrixXd dist)
        : nodes_(std::move(nodes)), dist_(std::move(dist)) {
        index_.reserve(nodes_.size());
        for (std::size_t p = 0; p < nodes_.size(); ++p)
            index_.emplace(nodes_[p], p);
    }

    std::size_t size() const { return nodes_.size(); }
    const std::vector<NodeId>& nodes() const { return nodes_; }
    const Eigen::MatrixXd& table() const { return dist_; }

    bool contains(NodeId v) const { return index_.count(v) != 0; }

    std::size_t index_of(NodeId v) const {
        auto it = index_.find(v);
        if (it == index_.end())
            throw std::invalid_argument("MetricSpace: unknown node " + std::to_string(v));
        return it->second;
    }

    double distance(NodeId i, NodeId j) const {
        return dist_(static_cast<Eigen::Index>(index_of(i)), static_cast<Eigen::Index>(index_of(j)));
    }

    double distance_by_index(std::size_t p, std::size_t q) const {
        return dist_(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
    }

    double diameter() const { return dist_.size() == 0 ? 0.0 : dist_.maxCoeff(); }

private:
    std::vector<NodeId> nodes_;
    Eigen::MatrixXd dist_;
    std::unordered_map<NodeId, std::size_t> index_;
};

namespace detail {

inline void check_table_shape(const std::vector<NodeId>& nodes, const Eigen::MatrixXd& dist,
                              const ValidateOptions& opt) {
    if (nodes.empty())
        throw std::invalid_argument("metric: node list is empty");
    if (nodes.size() > opt.max_nodes)
        throw std::invalid_argument("metric: node count " + std::to_string(nodes.size()) +
                                    " exceeds cap " + std::to_string(opt.max_nodes));
    for (NodeId v : nodes)
        if (v <= 0)
            throw std::invalid_argument("metric: node labels must be positive integers");
    {
        std::vector<NodeId> sorted = nodes;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("metric: duplicate node label");
    }
    const auto n = static_cast<Eigen::Index>(nodes.size());
    if (dist.rows() != n || dist.cols() != n)
        throw std::invalid_argument("metric: distance table is not |V| x |V|");
    if (!dist.allFinite())
        throw std::invalid_argument("metric: distance table has non-finite entries");
}

} // namespace detail

/**
 * Check the four metric axioms on a candidate table and return every
 * violation found (empty result = valid). Malformed input (wrong shape,
 * non-finite entries, bad labels) throws instead of reporting.
 *
 * The triangle inequality is checked over all triples for small spaces
 * and over a seeded random sample of triples above
 * ValidateOptions::exact_triangle_below.
 */
inline std::vector<MetricViolation> validate_metric(const std::vector<NodeId>& nodes,
                                                    const Eigen::MatrixXd& dist,
                                                    const ValidateOptions& opt = {}) {
    detail::check_table_shape(nodes, dist, opt);
    const std::size_t n = nodes.size();
    std::vector<MetricViolation> out;
    auto add = [&](MetricAxiom ax, std::size_t i, std::size_t j, std::size_t k, std::string d) {
        MetricViolation v;
        v.axiom = ax;
        v.i = nodes[i];
        v.j = nodes[j];
        v.k = k < n ? nodes[k] : 0;
        v.detail = std::move(d);
        out.push_back(std::move(v));
    };

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double dij = dist(i, j);
            if (dij < -opt.zero_tol)
                add(MetricAxiom::nonnegativity, i, j, n, "negative distance " + std::to_string(dij));
            if (i == j && std::abs(dij) > opt.zero_tol)
                add(MetricAxiom::identity, i, j, n, "nonzero self-distance " + std::to_string(dij));
            if (i != j && std::abs(dij) <= opt.zero_tol)
                add(MetricAxiom::identity, i, j, n, "zero distance between distinct nodes");
            if (j > i && std::abs(dij - dist(j, i)) > opt.zero_tol)
                add(MetricAxiom::symmetry, i, j, n,
                    "d(i,j)=" + std::to_string(dij) + " vs d(j,i)=" + std::to_string(dist(j, i)));
        }
    }

    auto check_triple = [&](std::size_t i, std::size_t j, std::size_t k) {
        const double lhs = dist(i, k);
        const double rhs = dist(i, j) + dist(j, k);
        if (lhs > rhs + opt.zero_tol)
            add(MetricAxiom::triangle, i, j, k,
                "d(i,k)=" + std::to_string(lhs) + " > d(i,j)+d(j,k)=" + std::to_string(rhs));
    };

    if (n < opt.exact_triangle_below) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = 0; k < n; ++k)
                    if (i != j && j != k && i != k) check_triple(i, j, k);
    } else {
        std::mt19937_64 rng(opt.sample_seed ^ (static_cast<std::uint64_t>(n) << 17));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (std::size_t s = 0; s < opt.sample_triples; ++s) {
            const std::size_t i = pick(rng), j = pick(rng), k = pick(rng);
            if (i != j && j != k && i != k) check_triple(i, j, k);
        }
    }
    return out;
}

/// Validate and wrap; throws std::invalid_argument describing the first
/// violation if the table is not a metric.
inline MetricSpace make_metric_space(std::vector<NodeId> nodes, Eigen::MatrixXd dist,
                                     const ValidateOptions& opt = {}) {
    const auto violations = validate_metric(nodes, dist, opt);
    if (!violations.empty()) {
        const auto& v = violations.front();
        std::ostringstream os;
        os << "metric axioms violated (" << violations.size() << " findings); first: ";
        switch (v.axiom) {
            case MetricAxiom::nonnegativity: os << "nonnegativity"; break;
            case MetricAxiom::identity: os << "identity"; break;
            case MetricAxiom::symmetry: os << "symmetry"; break;
            case MetricAxiom::triangle: os << "triangle"; break;
        }
        os << " at (" << v.i << "," << v.j;
        if (v.axiom == MetricAxiom::triangle) os << "," << v.k;
        os << "): " << v.detail;
        throw std::invalid_argument(os.str());
    }
    return MetricSpace(std::move(nodes), std::move(dist));
}

/// Undirected graph on positive-integer node labels.
struct Graph {
    std::vector<NodeId> nodes;
    std::vector<std::pair<NodeId, NodeId>> edges;
};

/**
 * Geodesic (hop-count) metric of a connected undirected graph.
 * Throws naming an unreachable pair if the graph is disconnected.
 */
inline MetricSpace graph_geodesic(const Graph& g, const ValidateOptions& opt = {}) {
    const std::size_t n = g.nodes.size();
    if (n == 0) throw std::invalid_argument("graph_geodesic: empty node list");
    if (n > opt.max_nodes)
        throw std::invalid_argument("graph_geodesic: node count exceeds cap");
    std::unordered_map<NodeId, std::size_t> idx;
    idx.reserve(n);
    for (std::size_t p = 0; p < n; ++p) {
        if (g.nodes[p] <= 0)
            throw std::invalid_argument("graph_geodesic: node labels must be positive integers");
        if (!idx.emplace(g.nodes[p], p).second)
            throw std::invalid_argument("graph_geodesic: duplicate node label");
    }
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& [u, v] : g.edges) {
        auto iu = idx.find(u), iv = idx.find(v);
        if (iu == idx.end() || iv == idx.end())
            throw std::invalid_argument("graph_geodesic: edge endpoint not in node list");
        if (iu->second == iv->second) continue; // ignore self-loops
        adj[iu->second].push_back(iv->second);
        adj[iv->second].push_back(iu->second);
    }

    Eigen::MatrixXd dist(n, n);
    std::vector<Eigen::Index> hop(n);
    for (std::size_t src = 0; src < n; ++src) {
        std::fill(hop.begin(), hop.end(), Eigen::Index{-1});
        hop[src] = 0;
        std::deque<std::size_t> queue{src};
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop_front();
            for (std::size_t v : adj[u])
                if (hop[v] < 0) {
                    hop[v] = hop[u] + 1;
                    queue.push_back(v);
                }
        }
        for (std::size_t v = 0; v < n; ++v) {
            if (hop[v] < 0)
                throw std::invalid_argument("graph_geodesic: graph disconnected, nodes " +
                                            std::to_string(g.nodes[src]) + " and " +
                                            std::to_string(g.nodes[v]) + " unreachable");
            dist(static_cast<Eigen::Index>(src), static_cast<Eigen::Index>(v)) =
                static_cast<double>(hop[v]);
        }
    }
    return MetricSpace(g.nodes, std::move(dist));
}

/**
 * Metric induced by real coordinates on a line: node p (labelled p+1)
 * sits at points[p], d = |x_i - x_j|. Coordinates must be strictly
 * increasing; the metric axioms then hold by construction.
 */
inline MetricSpace line_metric(const std::vector<double>& points, const ValidateOptions& opt = {}) {
    const std::size_t n = points.size();
    if (n == 0) throw std::invalid_argument("line_metric: empty coordinate list");
    if (n > opt.max_nodes)
        throw std::invalid_argument("line_metric: node count exceeds cap");
    for (double x : points)
        if (!std::isfinite(x)) throw std::invalid_argument("line_metric: non-finite coordinate");
    for (std::size_t i = 1; i < n; ++i)
        if (points[i] <= points[i - 1] + opt.zero_tol)
            throw std::invalid_argument("line_metric: coordinates must be strictly increasing (position " +
                                        std::to_string(i) + ")");
    std::vector<NodeId> nodes(n);
    Eigen::MatrixXd dist(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        nodes[i] = static_cast<NodeId>(i + 1);
        for (std::size_t j = 0; j < n; ++j)
            dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                std::abs(points[i] - points[j]);
    }
    return MetricSpace(std::move(nodes), std::move(dist));
}

/// min over pairs of d(v1, v2); both sets must be nonempty subsets of the space.
inline double set_distance(const MetricSpace& space, const std::vector<NodeId>& V1,
                           const std::vector<NodeId>& V2) {
    if (V1.empty() || V2.empty())
        throw std::invalid_argument("set_distance: empty node set");
    double best = std::numeric_limits<double>::infinity();
    for (NodeId a : V1) {
        const std::size_t p = space.index_of(a);
        for (NodeId b : V2)
            best = std::min(best, space.distance_by_index(p, space.index_of(b)));
    }
    return best;
}

} // namespace bandpinv
