#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pmod/geometry.hpp"

namespace pmod {

using VertexId = int;

struct Edge {
    VertexId src = 0;
    VertexId dst = 0;
    double length_m = 0.0;
    double weight_s = 0.0;  // expected traversal time
};

struct TripRecord {
    std::int64_t pickup_time = 0;   // epoch seconds
    std::int64_t dropoff_time = 0;  // epoch seconds, > pickup_time
    Point2 pickup;
    Point2 dropoff;
};

// Strongly connected weighted directed road network with planar vertex
// coordinates (meters). Immutable after construction. Single-source
// shortest-path results are computed lazily and cached; queries are safe
// from multiple threads.
class RoadGraph {
public:
    RoadGraph() = default;  // empty graph; spatial queries throw

    // Vertex v's position is positions[v]; ids are dense 0..V-1.
    // Throws std::invalid_argument on duplicate edges, non-positive
    // lengths/weights, out-of-range endpoints, or if the graph is not
    // strongly connected (the message names an unreachable pair).
    RoadGraph(std::vector<Point2> positions, std::vector<Edge> edges);

    RoadGraph(RoadGraph&&) noexcept = default;
    RoadGraph& operator=(RoadGraph&&) noexcept = default;
    RoadGraph(const RoadGraph&) = delete;
    RoadGraph& operator=(const RoadGraph&) = delete;

    std::size_t vertex_count() const { return positions_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    bool empty() const { return positions_.empty(); }
    const Point2& position(VertexId v) const { return positions_[static_cast<std::size_t>(v)]; }
    const std::vector<Point2>& positions() const { return positions_; }
    const std::vector<Edge>& edges() const { return edges_; }
    std::span<const Edge> out_edges(VertexId v) const;

    // Vertex minimizing Euclidean distance to p; ties break to the
    // smallest id. Throws std::runtime_error on an empty graph.
    VertexId nearest_vertex(const Point2& p) const;

    // Travel times (seconds) from `source` to every vertex / from every
    // vertex to `target`. Cached per endpoint; the returned reference
    // stays valid for the graph's lifetime.
    const std::vector<double>& times_from(VertexId source) const;
    const std::vector<double>& times_to(VertexId target) const;

    // Minimum-travel-time cost f(i, j); f(i, i) = 0.
    double shortest_time_cost(VertexId i, VertexId j) const;

    // Minimum total-length path from i to j as a vertex sequence. Among
    // equal-length paths, returns the lexicographically smallest sequence.
    std::vector<VertexId> shortest_length_path(VertexId i, VertexId j) const;

private:
    std::vector<Point2> positions_;
    std::vector<Edge> edges_;     // sorted by (src, dst)
    std::vector<int> out_begin_;  // CSR offsets into edges_
    std::vector<Edge> in_edges_;  // same edges sorted by (dst, src)
    std::vector<int> in_begin_;

    struct Caches {
        std::mutex mutex;
        std::unordered_map<VertexId, std::unique_ptr<const std::vector<double>>> from, to;
    };
    mutable std::unique_ptr<Caches> caches_ = std::make_unique<Caches>();

    std::vector<double> dijkstra(VertexId source, bool reverse, bool by_length) const;
    const std::vector<double>& cached_dijkstra(
        VertexId v, std::unordered_map<VertexId, std::unique_ptr<const std::vector<double>>>& cache,
        bool reverse) const;
    void check_vertex(VertexId v, const char* what) const;
};

// All vertices l with planar-Laplace density P_L(x_l | x_k, eps) > p_min,
// with their raw densities, sorted by descending density (ties: smaller
// id first). Throws std::runtime_error when no vertex qualifies.
std::vector<std::pair<VertexId, double>> relevant_nodes(const RoadGraph& g, VertexId k, double eps,
                                                        double p_min);

struct WeightEstimateOptions {
    double default_speed_mps = 5.0;  // weight for edges no trip covered
    double snap_radius_m = 500.0;    // trips snapping farther than this are skipped
};

struct WeightEstimateResult {
    RoadGraph graph;
    std::size_t trips_used = 0;
    std::size_t trips_skipped = 0;
    std::size_t edges_observed = 0;
    bool all_defaults = false;  // no trip contributed to any edge weight
};

// Re-estimates every edge weight from trip records: each trip is snapped
// to its nearest vertices, routed along the length-shortest path, and its
// duration apportioned to the path's edges proportionally to edge length.
// An edge's weight is the mean of its apportioned times; edges never
// traversed get length / default_speed.
WeightEstimateResult estimate_edge_weights(const RoadGraph& g, std::span<const TripRecord> trips,
                                           const WeightEstimateOptions& opt = {});

}  // namespace pmod
