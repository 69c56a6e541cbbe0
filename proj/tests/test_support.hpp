#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "pmod/rng.hpp"
#include "pmod/road_graph.hpp"

namespace pmod::test {

// n-by-m grid with unit spacing `spacing_m` and uniform edge weights
// spacing/speed; every street is bidirectional.
inline RoadGraph grid_graph(int rows, int cols, double spacing_m = 100.0, double speed_mps = 10.0) {
    std::vector<Point2> positions;
    positions.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) positions.push_back({c * spacing_m, r * spacing_m});
    std::vector<Edge> edges;
    const double w = spacing_m / speed_mps;
    const auto id = [cols](int r, int c) { return r * cols + c; };
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (c + 1 < cols) {
                edges.push_back({id(r, c), id(r, c + 1), spacing_m, w});
                edges.push_back({id(r, c + 1), id(r, c), spacing_m, w});
            }
            if (r + 1 < rows) {
                edges.push_back({id(r, c), id(r + 1, c), spacing_m, w});
                edges.push_back({id(r + 1, c), id(r, c), spacing_m, w});
            }
        }
    return RoadGraph(std::move(positions), std::move(edges));
}

// Random strongly connected graph: a bidirectional spanning chain plus
// random extra arcs, with random positive lengths/weights.
inline RoadGraph random_graph(int n, int extra_edges, Rng& rng) {
    std::vector<Point2> positions;
    positions.reserve(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v)
        positions.push_back({rng.uniform(0.0, 1000.0), rng.uniform(0.0, 1000.0)});
    std::vector<Edge> edges;
    const auto add = [&](int a, int b) {
        for (const Edge& e : edges)
            if (e.src == a && e.dst == b) return;
        edges.push_back({a, b, rng.uniform(10.0, 200.0), rng.uniform(5.0, 60.0)});
    };
    for (int v = 0; v + 1 < n; ++v) {
        add(v, v + 1);
        add(v + 1, v);
    }
    for (int k = 0; k < extra_edges; ++k) {
        const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        const int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        if (a != b) add(a, b);
    }
    return RoadGraph(std::move(positions), std::move(edges));
}

// Bellman-Ford single source over either weight, as an independent oracle
// for the Dijkstra-based costs.
inline std::vector<double> bellman_ford(const RoadGraph& g, VertexId source, bool by_length = false) {
    std::vector<double> dist(g.vertex_count(), std::numeric_limits<double>::infinity());
    dist[static_cast<std::size_t>(source)] = 0.0;
    for (std::size_t pass = 0; pass + 1 < g.vertex_count() + 1; ++pass) {
        bool changed = false;
        for (const Edge& e : g.edges()) {
            const double cand = dist[static_cast<std::size_t>(e.src)] + (by_length ? e.length_m : e.weight_s);
            if (cand < dist[static_cast<std::size_t>(e.dst)]) {
                dist[static_cast<std::size_t>(e.dst)] = cand;
                changed = true;
            }
        }
        if (!changed) break;
    }
    return dist;
}

}  // namespace pmod::test
