#include "pmod/road_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <unordered_set>

namespace pmod {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> csr_offsets(const std::vector<Edge>& sorted, bool by_dst, std::size_t n) {
    std::vector<int> begin(n + 1, 0);
    for (const Edge& e : sorted) ++begin[static_cast<std::size_t>(by_dst ? e.dst : e.src) + 1];
    for (std::size_t v = 1; v <= n; ++v) begin[v] += begin[v - 1];
    return begin;
}

}  // namespace

RoadGraph::RoadGraph(std::vector<Point2> positions, std::vector<Edge> edges)
    : positions_(std::move(positions)), edges_(std::move(edges)) {
    if (positions_.empty()) throw std::invalid_argument("road graph needs at least one vertex");
    const auto n = static_cast<int>(positions_.size());
    for (const Edge& e : edges_) {
        if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n)
            throw std::invalid_argument("edge endpoint out of range: " + std::to_string(e.src) +
                                        "->" + std::to_string(e.dst));
        if (e.src == e.dst)
            throw std::invalid_argument("self-loop edge at vertex " + std::to_string(e.src));
        if (!(e.length_m > 0.0) || !(e.weight_s > 0.0))
            throw std::invalid_argument("edge " + std::to_string(e.src) + "->" +
                                        std::to_string(e.dst) +
                                        " must have positive length and weight");
    }
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    for (std::size_t k = 1; k < edges_.size(); ++k)
        if (edges_[k].src == edges_[k - 1].src && edges_[k].dst == edges_[k - 1].dst)
            throw std::invalid_argument("duplicate edge " + std::to_string(edges_[k].src) + "->" +
                                        std::to_string(edges_[k].dst));
    out_begin_ = csr_offsets(edges_, false, positions_.size());
    in_edges_ = edges_;
    std::sort(in_edges_.begin(), in_edges_.end(), [](const Edge& a, const Edge& b) {
        return a.dst != b.dst ? a.dst < b.dst : a.src < b.src;
    });
    in_begin_ = csr_offsets(in_edges_, true, positions_.size());

    // Strong connectivity: every vertex reachable from 0, and 0 from every
    // vertex. Report a witness pair on failure.
    for (bool reverse : {false, true}) {
        const std::vector<double>& d = dijkstra(0, reverse, false);
        for (int v = 0; v < n; ++v)
            if (d[static_cast<std::size_t>(v)] == kInf)
                throw std::invalid_argument(
                    "graph is not strongly connected: no path " +
                    (reverse ? std::to_string(v) + " -> 0" : "0 -> " + std::to_string(v)));
    }
}

std::span<const Edge> RoadGraph::out_edges(VertexId v) const {
    check_vertex(v, "out_edges");
    const auto b = static_cast<std::size_t>(out_begin_[static_cast<std::size_t>(v)]);
    const auto e = static_cast<std::size_t>(out_begin_[static_cast<std::size_t>(v) + 1]);
    return {edges_.data() + b, e - b};
}

VertexId RoadGraph::nearest_vertex(const Point2& p) const {
    if (positions_.empty()) throw std::runtime_error("nearest_vertex on empty graph");
    VertexId best = 0;
    double best_d = distance(positions_[0], p);
    for (std::size_t v = 1; v < positions_.size(); ++v) {
        const double d = distance(positions_[v], p);
        if (d < best_d) {
            best_d = d;
            best = static_cast<VertexId>(v);
        }
    }
    return best;
}

std::vector<double> RoadGraph::dijkstra(VertexId source, bool reverse, bool by_length) const {
    const std::vector<Edge>& es = reverse ? in_edges_ : edges_;
    const std::vector<int>& begin = reverse ? in_begin_ : out_begin_;
    std::vector<double> dist(positions_.size(), kInf);
    dist[static_cast<std::size_t>(source)] = 0.0;
    using Item = std::pair<double, VertexId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    queue.emplace(0.0, source);
    while (!queue.empty()) {
        const auto [d, u] = queue.top();
        queue.pop();
        if (d > dist[static_cast<std::size_t>(u)]) continue;  // stale entry
        const auto lo = static_cast<std::size_t>(begin[static_cast<std::size_t>(u)]);
        const auto hi = static_cast<std::size_t>(begin[static_cast<std::size_t>(u) + 1]);
        for (std::size_t k = lo; k < hi; ++k) {
            const Edge& e = es[k];
            const VertexId v = reverse ? e.src : e.dst;
            const double nd = d + (by_length ? e.length_m : e.weight_s);
            if (nd < dist[static_cast<std::size_t>(v)]) {
                dist[static_cast<std::size_t>(v)] = nd;
                queue.emplace(nd, v);
            }
        }
    }
    return dist;
}

const std::vector<double>& RoadGraph::cached_dijkstra(
    VertexId v, std::unordered_map<VertexId, std::unique_ptr<const std::vector<double>>>& cache,
    bool reverse) const {
    {
        std::lock_guard lock(caches_->mutex);
        auto it = cache.find(v);
        if (it != cache.end()) return *it->second;
    }
    // Compute outside the lock so concurrent sources proceed in parallel;
    // first writer wins.
    auto fresh = std::make_unique<const std::vector<double>>(dijkstra(v, reverse, false));
    std::lock_guard lock(caches_->mutex);
    auto [it, inserted] = cache.try_emplace(v, std::move(fresh));
    return *it->second;
}

const std::vector<double>& RoadGraph::times_from(VertexId source) const {
    check_vertex(source, "times_from");
    return cached_dijkstra(source, caches_->from, false);
}

const std::vector<double>& RoadGraph::times_to(VertexId target) const {
    check_vertex(target, "times_to");
    return cached_dijkstra(target, caches_->to, true);
}

double RoadGraph::shortest_time_cost(VertexId i, VertexId j) const {
    check_vertex(j, "shortest_time_cost");
    return times_from(i)[static_cast<std::size_t>(j)];
}

std::vector<VertexId> RoadGraph::shortest_length_path(VertexId i, VertexId j) const {
    check_vertex(i, "shortest_length_path");
    check_vertex(j, "shortest_length_path");
    if (i == j) return {i};
    // Length-to-target from a reverse Dijkstra, then walk forward taking the
    // smallest next vertex that stays on a length-optimal path. This yields
    // the lexicographically smallest optimal sequence.
    const std::vector<double> to_j = dijkstra(j, true, true);
    if (to_j[static_cast<std::size_t>(i)] == kInf)
        throw std::runtime_error("no path between vertices");  // unreachable on validated graphs
    std::vector<VertexId> path{i};
    VertexId cur = i;
    while (cur != j) {
        const double remaining = to_j[static_cast<std::size_t>(cur)];
        VertexId next = -1;
        for (const Edge& e : out_edges(cur)) {
            const double via = e.length_m + to_j[static_cast<std::size_t>(e.dst)];
            const double tol = 1e-9 * std::max(1.0, remaining);
            if (std::abs(via - remaining) <= tol && (next == -1 || e.dst < next)) next = e.dst;
        }
        if (next == -1) throw std::logic_error("shortest_length_path lost the optimal path");
        path.push_back(next);
        cur = next;
    }
    return path;
}

void RoadGraph::check_vertex(VertexId v, const char* what) const {
    if (v < 0 || static_cast<std::size_t>(v) >= positions_.size())
        throw std::invalid_argument(std::string(what) + ": vertex " + std::to_string(v) +
                                    " out of range");
}

std::vector<std::pair<VertexId, double>> relevant_nodes(const RoadGraph& g, VertexId k, double eps,
                                                        double p_min) {
    if (!(eps > 0.0)) throw std::invalid_argument("relevant_nodes: eps must be > 0");
    if (p_min < 0.0) throw std::invalid_argument("relevant_nodes: p_min must be >= 0");
    const Point2 center = g.position(k);
    const double peak = eps * eps / (2.0 * std::numbers::pi);
    std::vector<std::pair<VertexId, double>> out;
    for (std::size_t v = 0; v < g.vertex_count(); ++v) {
        const double density = peak * std::exp(-eps * distance(center, g.position(static_cast<VertexId>(v))));
        if (density > p_min) out.emplace_back(static_cast<VertexId>(v), density);
    }
    if (out.empty())
        throw std::runtime_error("relevant_nodes: no vertex has density above p_min=" +
                                 std::to_string(p_min) + "; lower p_min");
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    return out;
}

WeightEstimateResult estimate_edge_weights(const RoadGraph& g, std::span<const TripRecord> trips,
                                           const WeightEstimateOptions& opt) {
    if (!(opt.default_speed_mps > 0.0))
        throw std::invalid_argument("estimate_edge_weights: default speed must be > 0");
    std::unordered_map<std::uint64_t, std::size_t> edge_index;
    edge_index.reserve(g.edge_count());
    const auto key = [&](VertexId s, VertexId d) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s)) << 32) |
               static_cast<std::uint32_t>(d);
    };
    for (std::size_t k = 0; k < g.edges().size(); ++k)
        edge_index.emplace(key(g.edges()[k].src, g.edges()[k].dst), k);

    std::vector<double> time_sum(g.edge_count(), 0.0);
    std::vector<std::size_t> trip_count(g.edge_count(), 0);
    WeightEstimateResult result{RoadGraph{}, 0, 0, 0, false};

    for (const TripRecord& trip : trips) {
        if (trip.dropoff_time <= trip.pickup_time) {
            ++result.trips_skipped;
            continue;
        }
        const VertexId a = g.nearest_vertex(trip.pickup);
        const VertexId b = g.nearest_vertex(trip.dropoff);
        if (a == b || distance(g.position(a), trip.pickup) > opt.snap_radius_m ||
            distance(g.position(b), trip.dropoff) > opt.snap_radius_m) {
            ++result.trips_skipped;
            continue;
        }
        const std::vector<VertexId> path = g.shortest_length_path(a, b);
        double total_len = 0.0;
        for (std::size_t s = 0; s + 1 < path.size(); ++s)
            total_len += g.edges()[edge_index.at(key(path[s], path[s + 1]))].length_m;
        const double duration = static_cast<double>(trip.dropoff_time - trip.pickup_time);
        for (std::size_t s = 0; s + 1 < path.size(); ++s) {
            const std::size_t e = edge_index.at(key(path[s], path[s + 1]));
            time_sum[e] += duration * g.edges()[e].length_m / total_len;
            ++trip_count[e];
        }
        ++result.trips_used;
    }

    std::vector<Edge> new_edges = g.edges();
    for (std::size_t e = 0; e < new_edges.size(); ++e) {
        if (trip_count[e] > 0) {
            new_edges[e].weight_s = time_sum[e] / static_cast<double>(trip_count[e]);
            ++result.edges_observed;
        } else {
            new_edges[e].weight_s = new_edges[e].length_m / opt.default_speed_mps;
        }
    }
    result.all_defaults = result.trips_used == 0;
    result.graph = RoadGraph(g.positions(), std::move(new_edges));
    return result;
}

}  // namespace pmod
