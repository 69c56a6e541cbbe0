#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmod/continuous_sim.hpp"
#include "pmod/rng.hpp"
#include "pmod/road_graph.hpp"

namespace pmod {

struct TripParseResult {
    std::vector<TripRecord> trips;  // sorted by pickup time
    std::size_t skipped = 0;        // malformed or invalid rows
};

// Reads `pickup_time,dropoff_time,pickup_x,pickup_y,dropoff_x,dropoff_y`
// CSV (integer epoch seconds, planar meters). Malformed rows are counted
// and skipped; an unreadable file or a wrong header throws with context.
TripParseResult parse_trips(const std::string& path);

// n-by-m grid city: bidirectional edges of the given spacing, weights
// spacing/speed. Strongly connected by construction.
RoadGraph synthetic_grid_city(int rows, int cols, double spacing_m, double speed_mps);

// Normalized empirical distribution over vertices; deterministic inverse-CDF
// sampling.
class EmpiricalLocationSampler {
public:
    static EmpiricalLocationSampler from_weights(std::vector<std::pair<VertexId, double>> weights);

    VertexId sample(Rng& rng) const;
    const std::vector<std::pair<VertexId, double>>& entries() const { return entries_; }

private:
    std::vector<std::pair<VertexId, double>> entries_;  // (vertex, normalized weight)
    std::vector<double> cdf_;
};

enum class TripEndpoint { pickup, dropoff };

// Histogram of trip endpoints over nearest vertices, normalized.
EmpiricalLocationSampler build_sampler(std::span<const TripRecord> trips, const RoadGraph& g,
                                       TripEndpoint endpoint);

// Graph file I/O: nodes.csv (id,x,y) and edges.csv (src,dst,length[,weight]).
// Missing weights default to length / default_speed.
RoadGraph read_graph_csv(const std::string& nodes_path, const std::string& edges_path,
                         double default_speed_mps = 5.0);
void write_graph_csv(const RoadGraph& g, const std::string& nodes_path,
                     const std::string& edges_path);

// Demand trace from trip records: request at the recorded pickup time, from
// the snapped pickup vertex to the snapped dropoff vertex. Trips whose
// endpoints snap to the same vertex or beyond the radius are skipped.
std::vector<PassengerRequest> demand_from_trips(std::span<const TripRecord> trips,
                                                const RoadGraph& g, double snap_radius_m = 500.0);

// Deterministic JSON writer: keys emitted in insertion order, floats fixed
// to 6 decimals, so identical inputs serialize byte-identically.
class JsonWriter {
public:
    void begin_object();
    void end_object();
    void begin_array(const std::string& key);
    void begin_object(const std::string& key);
    void end_array();
    void field(const std::string& key, const std::string& value);
    void field(const std::string& key, double value);
    void field(const std::string& key, std::int64_t value);
    void field(const std::string& key, std::uint64_t value);
    void null_field(const std::string& key);
    void element(double value);
    void element(std::int64_t value);
    std::string str() const { return out_; }

private:
    void comma();
    void indent();
    std::string out_;
    int depth_ = 0;
    bool need_comma_ = false;
};

// Writes <prefix>_summary.json and <prefix>_passengers.csv (and
// <prefix>_events.csv when events are given). Byte-stable for identical
// inputs. The manifest map is echoed into the JSON.
void write_results(const Metrics& metrics, const SimConfig& config,
                   const std::map<std::string, std::string>& manifest,
                   const std::string& path_prefix, const std::vector<SimEvent>* events = nullptr);

}  // namespace pmod
