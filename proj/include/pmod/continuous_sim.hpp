#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmod/assignment.hpp"
#include "pmod/planar_laplace.hpp"
#include "pmod/rng.hpp"
#include "pmod/road_graph.hpp"

namespace pmod {

enum class DispatchMode { non_private, private_non_redundant, private_redundant };

const char* dispatch_mode_name(DispatchMode mode);

struct SimConfig {
    double batch_seconds = 20.0;
    double max_wait_seconds = 1200.0;
    double fleet_multiplier = 1.56;  // total fleet per concurrently occupied vehicle
    int fleet_cap = 6000;
    double eps = 0.02;  // 1/meters; ignored in non-private mode
    double p_min = 1e-6;
    DispatchMode mode = DispatchMode::private_non_redundant;
    int d_max = 4;
    double reserve_fraction = 1.0;  // vehicles kept unassigned per forecast request
    std::uint64_t seed = 0;
    double occupancy_window_s = 1800.0;  // rolling window for the fleet-size signal
    double forecast_window_s = 1800.0;   // moving average window for choose_D
    bool collect_events = false;
};

struct PassengerRequest {
    int id = 0;
    std::int64_t request_time_ms = 0;
    VertexId pickup = 0;
    VertexId dropoff = 0;              // revealed only to the assigned vehicle
    std::int64_t ride_duration_ms = 0; // trace value if known, else 0 (estimated)
};

enum class VehicleStatus { idle, en_route, fake_trip };

struct VehicleState {
    int id = 0;
    VertexId true_vertex = 0;   // physical location (previous true drop-off)
    Point2 reported_point;      // what the operator sees
    VertexId reported_vertex = 0;  // nearest-vertex projection of reported_point
    std::int64_t reported_available_ms = 0;
    std::int64_t truly_available_ms = 0;
    VehicleStatus status = VehicleStatus::idle;
    std::optional<VertexPosterior> posterior;  // cached for the current reported_point
};

// The only vehicle view the planner ever receives: reported state, no true
// fields.
struct ReportedVehicle {
    int id = 0;
    Point2 reported_point;
    VertexId reported_vertex = 0;
    std::int64_t reported_available_ms = 0;
};

struct PassengerOutcome {
    int passenger_id = 0;
    std::int64_t request_time_ms = 0;
    std::int64_t pickup_time_ms = 0;
    double waiting_s = 0.0;
    DispatchMode mode = DispatchMode::non_private;
    // Decomposition: waiting = batch latency + late departure + approach.
    double batch_latency_s = 0.0;  // request to assignment batch
    double late_depart_s = 0.0;    // assigned vehicle still truly busy
    double approach_s = 0.0;       // true travel to the pickup
};

struct MetricsSummary {
    std::optional<double> mean, stddev, median, p25, p75;
};

struct Metrics {
    std::size_t total_requests = 0;
    std::size_t served = 0;
    std::size_t dropped = 0;
    std::size_t pending_at_end = 0;
    std::vector<PassengerOutcome> outcomes;  // one per served passenger
    double histogram_bin_s = 30.0;
    std::vector<std::int64_t> histogram;  // waiting-time counts per bin
    // Availability-report gap (reported - true), over every completed ride.
    double report_gap_mean_s = 0.0;
    double report_gap_stderr_s = 0.0;
    std::size_t report_count = 0;

    double drop_rate() const;
    std::vector<double> waiting_values() const;
    MetricsSummary summary() const;
};

struct SimEvent {
    std::int64_t time_ms = 0;
    std::string type;  // "assign", "report_available"
    int vehicle = -1;
    int passenger = -1;
    double x = 0.0, y = 0.0;
};

struct SimResult {
    Metrics metrics;
    std::vector<SimEvent> events;
};

struct RideReport {
    Point2 reported_dropoff;
    double t_reported_s = 0.0;  // reported-origin -> pickup -> reported-dropoff projection
    double t_true_s = 0.0;      // true-origin -> pickup -> true dropoff
};

// Computes the ride a vehicle announces: a fresh obfuscated drop-off and
// the travel time consistent with its reported origin, alongside the true
// travel time. Does not mutate the vehicle.
RideReport reported_ride(const VehicleState& v, VertexId pickup, VertexId true_dropoff,
                         const PlanarLaplace& m, const RoadGraph& g, Rng& rng);

// Applies a ride to the vehicle: availability per report, true motion from
// the true availability point onwards.
void apply_ride(VehicleState& v, const RideReport& report, VertexId destination,
                std::int64_t assignment_ms, const RoadGraph& g, VehicleStatus new_status);

struct RendezvousLeg {
    VertexId destination = 0;  // true drop-off for the winner, fake destination otherwise
    double t_reported_s = 0.0;
    double t_true_s = 0.0;
};

struct RendezvousOutcome {
    std::size_t winner = 0;    // index into the vehicle span
    Point2 reported_dropoff;   // shared by every vehicle
    std::vector<RendezvousLeg> legs;  // parallel to the vehicle span
};

// Redundantly assigned vehicles agree on a pickup: the one with the
// earliest true arrival (travel time plus any leftover busy time; ties:
// lowest id) carries the passenger; the others drive through the pickup to
// the vertex nearest the shared obfuscated drop-off. Everyone reports the
// same drop-off point on its own schedule.
RendezvousOutcome redundant_rendezvous(std::span<VehicleState* const> vehicles, VertexId pickup,
                                       VertexId true_dropoff, const PlanarLaplace& m,
                                       const RoadGraph& g, Rng& rng, std::int64_t assignment_ms = 0);

// D = clamp(floor((available - reserve) / max(pending, 1)), 1, d_max) with
// reserve = ceil(reserve_fraction * forecast_next).
int choose_D(int available, int pending, double forecast_next, int d_max, double reserve_fraction);

struct SimState {
    const RoadGraph* graph = nullptr;
    DispatchMode mode = DispatchMode::non_private;
    double eps = 0.02;
    std::int64_t now_ms = 0;
    std::vector<VehicleState> vehicles;
    int next_vehicle_id = 0;
    int pending_removals = 0;  // shrink requests deferred for lack of idle vehicles
};

struct FleetResizeResult {
    int added = 0;
    int removed = 0;
    int deferred = 0;
};

// Grows the fleet with idle vehicles placed at dropoff-distributed vertices
// or shrinks it by removing idle vehicles uniformly at random; en-route
// vehicles are never removed (excess shrink is deferred).
FleetResizeResult fleet_resize(SimState& state, int target_total,
                               const std::function<VertexId(Rng&)>& dropoff_sampler, Rng& rng);

// Poisson demand over uniformly random distinct vertex pairs, sorted by
// request time; ride durations are shortest-path estimates.
std::vector<PassengerRequest> synthetic_demand(const RoadGraph& g, double rate_per_s, double hours,
                                               Rng& rng);

// Same demand with a two-peak day profile (morning and evening rush over a
// low overnight floor), generated by thinning. `mean_rate_per_s` is the
// average over the horizon; the instantaneous rate swings roughly 5x
// between floor and peak.
std::vector<PassengerRequest> synthetic_demand_diurnal(const RoadGraph& g, double mean_rate_per_s,
                                                       double hours, Rng& rng);

// Runs the batched continuous dispatch protocol over the demand trace.
// Deterministic given config.seed.
SimResult run(const SimConfig& config, const RoadGraph& g, std::vector<PassengerRequest> demand);

}  // namespace pmod
