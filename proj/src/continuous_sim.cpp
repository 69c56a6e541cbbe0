#include "pmod/continuous_sim.hpp"
#include <cstdlib>
#include <cstdio>

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <stdexcept>

namespace pmod {

namespace {

std::int64_t to_ms(double seconds) { return std::llround(seconds * 1000.0); }

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if (a % b != 0 && ((a < 0) != (b < 0))) --q;
    return q;
}

double mean_of(const std::deque<int>& window) {
    if (window.empty()) return 0.0;
    double total = 0.0;
    for (const int x : window) total += x;
    return total / static_cast<double>(window.size());
}

}  // namespace

const char* dispatch_mode_name(DispatchMode mode) {
    switch (mode) {
        case DispatchMode::non_private: return "non-private";
        case DispatchMode::private_non_redundant: return "private";
        case DispatchMode::private_redundant: return "private-redundant";
    }
    return "unknown";
}

double Metrics::drop_rate() const {
    return total_requests == 0 ? 0.0 : static_cast<double>(dropped) / static_cast<double>(total_requests);
}

std::vector<double> Metrics::waiting_values() const {
    std::vector<double> values;
    values.reserve(outcomes.size());
    for (const PassengerOutcome& o : outcomes) values.push_back(o.waiting_s);
    return values;
}

MetricsSummary Metrics::summary() const {
    MetricsSummary s;
    std::vector<double> w = waiting_values();
    if (w.empty()) return s;
    std::sort(w.begin(), w.end());
    double total = 0.0;
    for (const double x : w) total += x;
    const double mean = total / static_cast<double>(w.size());
    s.mean = mean;
    double ss = 0.0;
    for (const double x : w) ss += (x - mean) * (x - mean);
    s.stddev = w.size() > 1 ? std::sqrt(ss / static_cast<double>(w.size() - 1)) : 0.0;
    const auto quantile = [&w](double q) {
        const double pos = q * static_cast<double>(w.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, w.size() - 1);
        return w[lo] + (pos - static_cast<double>(lo)) * (w[hi] - w[lo]);
    };
    s.p25 = quantile(0.25);
    s.median = quantile(0.5);
    s.p75 = quantile(0.75);
    return s;
}

RideReport reported_ride(const VehicleState& v, VertexId pickup, VertexId true_dropoff,
                         const PlanarLaplace& m, const RoadGraph& g, Rng& rng) {
    RideReport report;
    report.reported_dropoff = m.sample(g.position(true_dropoff), rng);
    const VertexId reported_dest = g.nearest_vertex(report.reported_dropoff);
    report.t_reported_s = g.shortest_time_cost(v.reported_vertex, pickup) +
                          g.shortest_time_cost(pickup, reported_dest);
    report.t_true_s =
        g.shortest_time_cost(v.true_vertex, pickup) + g.shortest_time_cost(pickup, true_dropoff);
    return report;
}

void apply_ride(VehicleState& v, const RideReport& report, VertexId destination,
                std::int64_t assignment_ms, const RoadGraph& g, VehicleStatus new_status) {
    v.truly_available_ms = std::max(assignment_ms, v.truly_available_ms) + to_ms(report.t_true_s);
    v.reported_available_ms = assignment_ms + to_ms(report.t_reported_s);
    v.true_vertex = destination;
    v.reported_point = report.reported_dropoff;
    v.reported_vertex = g.nearest_vertex(report.reported_dropoff);
    v.status = new_status;
    v.posterior.reset();
}

RendezvousOutcome redundant_rendezvous(std::span<VehicleState* const> vehicles, VertexId pickup,
                                       VertexId true_dropoff, const PlanarLaplace& m,
                                       const RoadGraph& g, Rng& rng, std::int64_t assignment_ms) {
    if (vehicles.empty()) throw std::invalid_argument("redundant_rendezvous: no vehicles");
    RendezvousOutcome out;
    // The truly closest vehicle picks up, where "closest" means earliest
    // true pickup arrival: a crew member still finishing its previous ride
    // departs late, which the vehicles know when they agree. Ties go to the
    // lowest id.
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < vehicles.size(); ++k) {
        const double lateness =
            static_cast<double>(std::max<std::int64_t>(0, vehicles[k]->truly_available_ms -
                                                              assignment_ms)) /
            1000.0;
        const double t = lateness + g.shortest_time_cost(vehicles[k]->true_vertex, pickup);
        if (t < best || (t == best && vehicles[k]->id < vehicles[out.winner]->id)) {
            best = t;
            out.winner = k;
        }
    }
    // One shared obfuscated drop-off, computed by the pickup vehicle.
    out.reported_dropoff = m.sample(g.position(true_dropoff), rng);
    const VertexId reported_dest = g.nearest_vertex(out.reported_dropoff);
    out.legs.resize(vehicles.size());
    for (std::size_t k = 0; k < vehicles.size(); ++k) {
        RendezvousLeg& leg = out.legs[k];
        leg.destination = k == out.winner ? true_dropoff : reported_dest;
        leg.t_true_s = g.shortest_time_cost(vehicles[k]->true_vertex, pickup) +
                       g.shortest_time_cost(pickup, leg.destination);
        leg.t_reported_s = g.shortest_time_cost(vehicles[k]->reported_vertex, pickup) +
                           g.shortest_time_cost(pickup, reported_dest);
    }
    return out;
}

int choose_D(int available, int pending, double forecast_next, int d_max, double reserve_fraction) {
    if (available < 0 || pending < 0) throw std::invalid_argument("choose_D: negative counts");
    const double reserve = std::ceil(reserve_fraction * std::max(0.0, forecast_next));
    const double raw = std::floor((static_cast<double>(available) - reserve) /
                                  static_cast<double>(std::max(pending, 1)));
    return std::clamp(static_cast<int>(raw), 1, std::max(1, d_max));
}

FleetResizeResult fleet_resize(SimState& state, int target_total,
                               const std::function<VertexId(Rng&)>& dropoff_sampler, Rng& rng) {
    FleetResizeResult result;
    const RoadGraph& g = *state.graph;
    target_total = std::max(target_total, 0);
    const int current = static_cast<int>(state.vehicles.size());
    if (current < target_total) {
        for (int k = current; k < target_total; ++k) {
            VehicleState v;
            v.id = state.next_vehicle_id++;
            v.true_vertex = dropoff_sampler(rng);
            if (state.mode == DispatchMode::non_private) {
                v.reported_point = g.position(v.true_vertex);
                v.reported_vertex = v.true_vertex;
            } else {
                const PlanarLaplace m(state.eps);
                v.reported_point = m.sample(g.position(v.true_vertex), rng);
                v.reported_vertex = g.nearest_vertex(v.reported_point);
            }
            v.reported_available_ms = state.now_ms;
            v.truly_available_ms = state.now_ms;
            v.status = VehicleStatus::idle;
            state.vehicles.push_back(std::move(v));
            ++result.added;
        }
    } else if (current > target_total) {
        const int need = current - target_total;
        std::vector<std::size_t> removable;
        for (std::size_t k = 0; k < state.vehicles.size(); ++k) {
            const VehicleState& v = state.vehicles[k];
            if (v.truly_available_ms <= state.now_ms && v.reported_available_ms <= state.now_ms)
                removable.push_back(k);
        }
        const int take = std::min<int>(need, static_cast<int>(removable.size()));
        std::vector<char> condemned(state.vehicles.size(), 0);
        for (int k = 0; k < take; ++k) {
            const std::size_t pick = static_cast<std::size_t>(rng.below(removable.size()));
            condemned[removable[pick]] = 1;
            removable[pick] = removable.back();
            removable.pop_back();
        }
        std::size_t write = 0;
        for (std::size_t k = 0; k < state.vehicles.size(); ++k) {
            if (condemned[k]) continue;
            if (write != k) state.vehicles[write] = std::move(state.vehicles[k]);
            ++write;
        }
        state.vehicles.resize(write);
        result.removed = take;
        result.deferred = need - take;
        state.pending_removals = result.deferred;
    }
    return result;
}

namespace {

std::vector<PassengerRequest> poisson_demand(const RoadGraph& g, double peak_rate, double horizon_s,
                                             const std::function<double(double)>& rate_at,
                                             Rng& rng) {
    std::vector<PassengerRequest> demand;
    double t = 0.0;
    int id = 0;
    while (true) {
        t += rng.exponential(peak_rate);
        if (t >= horizon_s) break;
        if (rng.uniform() > rate_at(t) / peak_rate) continue;  // thinning
        PassengerRequest req;
        req.id = id++;
        req.request_time_ms = to_ms(t);
        req.pickup = static_cast<VertexId>(rng.below(g.vertex_count()));
        do {
            req.dropoff = static_cast<VertexId>(rng.below(g.vertex_count()));
        } while (req.dropoff == req.pickup);
        req.ride_duration_ms = to_ms(g.shortest_time_cost(req.pickup, req.dropoff));
        demand.push_back(req);
    }
    return demand;
}

}  // namespace

std::vector<PassengerRequest> synthetic_demand(const RoadGraph& g, double rate_per_s, double hours,
                                               Rng& rng) {
    if (!(rate_per_s > 0.0) || !(hours > 0.0))
        throw std::invalid_argument("synthetic_demand: rate and hours must be > 0");
    return poisson_demand(
        g, rate_per_s, hours * 3600.0, [rate_per_s](double) { return rate_per_s; }, rng);
}

std::vector<PassengerRequest> synthetic_demand_diurnal(const RoadGraph& g, double mean_rate_per_s,
                                                       double hours, Rng& rng) {
    if (!(mean_rate_per_s > 0.0) || !(hours > 0.0))
        throw std::invalid_argument("synthetic_demand_diurnal: rate and hours must be > 0");
    // Gaussian bumps at 8:30 and 18:00 over a 0.25x floor; the shape
    // integrates to ~1x the mean rate over a 24 h horizon.
    const auto rate_at = [mean_rate_per_s](double t) {
        const double h = std::fmod(t / 3600.0, 24.0);
        const double morning = std::exp(-0.5 * std::pow((h - 8.5) / 1.5, 2.0));
        const double evening = std::exp(-0.5 * std::pow((h - 18.0) / 2.0, 2.0));
        return mean_rate_per_s * (0.25 + 1.9 * morning + 2.1 * evening);
    };
    return poisson_demand(g, mean_rate_per_s * 2.4, hours * 3600.0, rate_at, rng);
}

SimResult run(const SimConfig& config, const RoadGraph& g, std::vector<PassengerRequest> demand) {
    if (!(config.batch_seconds > 0.0) || !(config.max_wait_seconds > 0.0) ||
        !(config.fleet_multiplier > 0.0) || config.fleet_cap < 1 || config.d_max < 1 ||
        config.reserve_fraction < 0.0)
        throw std::invalid_argument("run: invalid simulation config");
    if (config.mode != DispatchMode::non_private && !(config.eps > 0.0))
        throw std::invalid_argument("run: eps must be > 0 in private modes");

    SimResult result;
    Metrics& metrics = result.metrics;
    metrics.total_requests = demand.size();
    metrics.histogram_bin_s = 30.0;
    metrics.histogram.assign(
        static_cast<std::size_t>(std::ceil(config.max_wait_seconds / metrics.histogram_bin_s)) + 2,
        0);
    if (demand.empty()) return result;

    std::sort(demand.begin(), demand.end(), [](const PassengerRequest& a, const PassengerRequest& b) {
        return a.request_time_ms != b.request_time_ms ? a.request_time_ms < b.request_time_ms
                                                      : a.id < b.id;
    });

    const std::int64_t batch_ms = to_ms(config.batch_seconds);
    const std::int64_t max_wait_ms = to_ms(config.max_wait_seconds);
    const std::int64_t t0 = floor_div(demand.front().request_time_ms, batch_ms) * batch_ms;
    const std::int64_t t_cap =
        demand.back().request_time_ms + 2 * max_wait_ms + 2 * batch_ms;
    const std::size_t n_batches =
        static_cast<std::size_t>((t_cap - t0) / batch_ms) + 2;

    // Fleet-size signal: concurrent rides in the demand trace, smoothed over
    // the rolling occupancy window, scaled by the fleet multiplier, capped.
    std::vector<double> occupancy(n_batches + 1, 0.0);
    for (const PassengerRequest& req : demand) {
        const std::int64_t duration =
            req.ride_duration_ms > 0
                ? req.ride_duration_ms
                : to_ms(g.shortest_time_cost(req.pickup, req.dropoff));
        const auto b0 = static_cast<std::size_t>(
            std::clamp<std::int64_t>((req.request_time_ms - t0) / batch_ms, 0,
                                     static_cast<std::int64_t>(n_batches) - 1));
        const auto b1 = static_cast<std::size_t>(std::clamp<std::int64_t>(
            (req.request_time_ms + duration - t0) / batch_ms + 1, static_cast<std::int64_t>(b0) + 1,
            static_cast<std::int64_t>(n_batches)));
        occupancy[b0] += 1.0;
        occupancy[b1] -= 1.0;
    }
    for (std::size_t k = 1; k < occupancy.size(); ++k) occupancy[k] += occupancy[k - 1];
    const int half_window = std::max(
        1, static_cast<int>(std::llround(config.occupancy_window_s / config.batch_seconds / 2.0)));
    std::vector<int> fleet_target(n_batches, 0);
    {
        // Centered box smoothing via a prefix sum.
        std::vector<double> prefix(n_batches + 1, 0.0);
        for (std::size_t k = 0; k < n_batches; ++k) prefix[k + 1] = prefix[k] + occupancy[k];
        for (std::size_t k = 0; k < n_batches; ++k) {
            const std::size_t lo = k >= static_cast<std::size_t>(half_window) ? k - static_cast<std::size_t>(half_window) : 0;
            const std::size_t hi = std::min(n_batches - 1, k + static_cast<std::size_t>(half_window));
            const double smoothed =
                (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
            int target = static_cast<int>(std::llround(config.fleet_multiplier * smoothed));
            // Any demand in the window warrants at least one vehicle;
            // rounding must not starve desk-scale scenarios.
            if (smoothed > 0.0) target = std::max(target, 1);
            fleet_target[k] = std::min(config.fleet_cap, target);
        }
    }

    // Empirical drop-off distribution of the demand trace, for placing
    // newly added vehicles.
    std::vector<double> dropoff_cdf;
    std::vector<VertexId> dropoff_support;
    {
        std::vector<double> counts(g.vertex_count(), 0.0);
        for (const PassengerRequest& req : demand) counts[static_cast<std::size_t>(req.dropoff)] += 1.0;
        double cum = 0.0;
        for (std::size_t v = 0; v < counts.size(); ++v) {
            if (counts[v] == 0.0) continue;
            cum += counts[v];
            dropoff_support.push_back(static_cast<VertexId>(v));
            dropoff_cdf.push_back(cum);
        }
        for (double& x : dropoff_cdf) x /= cum;
    }
    const auto dropoff_sampler = [&](Rng& rng) {
        const double u = rng.uniform();
        const auto it = std::lower_bound(dropoff_cdf.begin(), dropoff_cdf.end(), u);
        const std::size_t idx = std::min(static_cast<std::size_t>(it - dropoff_cdf.begin()),
                                         dropoff_support.size() - 1);
        return dropoff_support[idx];
    };

    Rng root(config.seed);
    Rng fleet_rng = root.spawn(1);
    Rng noise_rng = root.spawn(2);
    const PlanarLaplace mechanism(config.mode == DispatchMode::non_private ? 1.0 : config.eps);
    const bool is_private = config.mode != DispatchMode::non_private;

    SimState state;
    state.graph = &g;
    state.mode = config.mode;
    state.eps = config.eps;

    std::vector<PassengerRequest> pending;
    std::size_t next_request = 0;
    std::deque<int> arrivals_window;
    const std::size_t forecast_batches = static_cast<std::size_t>(
        std::max(1.0, std::round(config.forecast_window_s / config.batch_seconds)));

    double gap_sum = 0.0, gap_sq_sum = 0.0;
    std::size_t gap_count = 0;
    const auto record_report = [&](const VehicleState& v, int passenger) {
        const double gap_s =
            static_cast<double>(v.reported_available_ms - v.truly_available_ms) / 1000.0;
        gap_sum += gap_s;
        gap_sq_sum += gap_s * gap_s;
        ++gap_count;
        if (config.collect_events)
            result.events.push_back({v.reported_available_ms, "report_available", v.id, passenger,
                                     v.reported_point.x, v.reported_point.y});
    };

    // Planner inputs are assembled strictly from ReportedVehicle views;
    // true vehicle fields never cross this boundary.
    for (std::size_t batch = 0; batch < n_batches; ++batch) {
        const std::int64_t now = t0 + static_cast<std::int64_t>(batch) * batch_ms;
        state.now_ms = now;
        if (next_request >= demand.size() && pending.empty()) break;

        int ingested = 0;
        while (next_request < demand.size() && demand[next_request].request_time_ms < now) {
            pending.push_back(demand[next_request++]);
            ++ingested;
        }
        arrivals_window.push_back(ingested);
        if (arrivals_window.size() > forecast_batches) arrivals_window.pop_front();

        // Expire requests that waited past the cap.
        std::erase_if(pending, [&](const PassengerRequest& req) {
            if (now - req.request_time_ms > max_wait_ms) {
                ++metrics.dropped;
                return true;
            }
            return false;
        });

        fleet_resize(state, fleet_target[std::min(batch, n_batches - 1)], dropoff_sampler,
                     fleet_rng);

        for (VehicleState& v : state.vehicles)
            if (v.status != VehicleStatus::idle && v.truly_available_ms <= now &&
                v.reported_available_ms <= now)
                v.status = VehicleStatus::idle;

        if (pending.empty()) continue;

        std::vector<std::size_t> available;  // indices into state.vehicles
        std::vector<ReportedVehicle> reported;
        for (std::size_t k = 0; k < state.vehicles.size(); ++k) {
            const VehicleState& v = state.vehicles[k];
            if (v.reported_available_ms <= now) {
                available.push_back(k);
                reported.push_back({v.id, v.reported_point, v.reported_vertex, v.reported_available_ms});
            }
        }
        if (std::getenv("PMOD_DEBUG") && batch % 120 == 0) {
            std::size_t truly_idle = 0;
            for (const VehicleState& v : state.vehicles)
                if (v.truly_available_ms <= now) ++truly_idle;
            double pool_disp = 0.0;
            std::set<VertexId> unique_true;
            for (const std::size_t k : available) {
                pool_disp += distance(state.vehicles[k].reported_point,
                                      g.position(state.vehicles[k].true_vertex));
                unique_true.insert(state.vehicles[k].true_vertex);
            }
            std::fprintf(stderr,
                         "batch %zu fleet=%zu reported_avail=%zu truly_idle=%zu pending=%zu "
                         "pool_disp=%.0f unique_frac=%.2f\n",
                         batch, state.vehicles.size(), available.size(), truly_idle, pending.size(),
                         available.empty() ? 0.0 : pool_disp / static_cast<double>(available.size()),
                         available.empty() ? 1.0
                                           : static_cast<double>(unique_true.size()) /
                                                 static_cast<double>(available.size()));
        }
        if (available.empty()) continue;

        const int n_vehicles = static_cast<int>(available.size());
        const int n_requests = static_cast<int>(pending.size());
        std::vector<VertexId> pickups;
        pickups.reserve(pending.size());
        for (const PassengerRequest& req : pending) pickups.push_back(req.pickup);

        // Per-passenger assigned vehicle lists (indices into `available`).
        std::vector<std::vector<int>> assigned(pending.size());
        if (!is_private) {
            std::vector<VertexId> origins;
            origins.reserve(reported.size());
            for (const ReportedVehicle& v : reported) origins.push_back(v.reported_vertex);
            const Assignment a = hungarian(cost_matrix_true(g, origins, pickups));
            for (const auto& [i, j] : a.pairs) assigned[static_cast<std::size_t>(j)].push_back(i);
        } else {
            std::vector<VertexPosterior> posteriors;
            posteriors.reserve(available.size());
            for (const std::size_t k : available) {
                VehicleState& v = state.vehicles[k];
                if (!v.posterior || v.posterior->entries.empty())
                    v.posterior =
                        posterior_with_fallback(g, mechanism, v.reported_point, config.p_min);
                posteriors.push_back(*v.posterior);
            }
            if (config.mode == DispatchMode::private_redundant && n_vehicles >= n_requests) {
                const int d = choose_D(n_vehicles, n_requests, mean_of(arrivals_window),
                                       config.d_max, config.reserve_fraction);
                const RedundantPlan plan = redundant_assign(g, posteriors, pickups, d);
                // Keep assignment-round order: the round-1 vehicle leads.
                for (std::size_t j = 0; j < plan.assigned_vehicles.size(); ++j)
                    assigned[j] = plan.assigned_vehicles[j];
            } else {
                const CostMatrix expected = cost_matrix_expected(g, posteriors, pickups);
                const Assignment a = solve_batch(expected);
                for (const auto& [i, j] : a.pairs) assigned[static_cast<std::size_t>(j)].push_back(i);
                if (std::getenv("PMOD_DEBUG") && batch % 30 == 0) {
                    double apparent = 0.0, realized = 0.0;
                    for (const auto& [i, j] : a.pairs) {
                        apparent += expected.at(i, j);
                        realized += g.shortest_time_cost(
                            state.vehicles[available[static_cast<std::size_t>(i)]].true_vertex,
                            pickups[static_cast<std::size_t>(j)]);
                    }
                    std::fprintf(stderr, "  matches=%zu apparent=%.0f realized=%.0f\n",
                                 a.pairs.size(), apparent / a.pairs.size(),
                                 realized / a.pairs.size());
                    for (const auto& [i, j] : a.pairs) {
                        const VehicleState& v = state.vehicles[available[static_cast<std::size_t>(i)]];
                        const double real =
                            g.shortest_time_cost(v.true_vertex, pickups[static_cast<std::size_t>(j)]);
                        if (real - expected.at(i, j) > 300.0)
                            std::fprintf(stderr,
                                         "    BAD id=%d exp=%.0f real=%.0f true_v=%d rep=(%.0f,%.0f) "
                                         "rep_avail=%lld truly_avail=%lld now=%lld support=%zu\n",
                                         v.id, expected.at(i, j), real, v.true_vertex,
                                         v.reported_point.x, v.reported_point.y,
                                         static_cast<long long>(v.reported_available_ms),
                                         static_cast<long long>(v.truly_available_ms),
                                         static_cast<long long>(now),
                                         v.posterior ? v.posterior->entries.size() : 0);
                    }
                }
            }
        }

        // Execute rides passenger by passenger.
        std::vector<char> served(pending.size(), 0);
        for (std::size_t j = 0; j < pending.size(); ++j) {
            if (assigned[j].empty()) continue;
            const PassengerRequest& req = pending[j];
            std::vector<VehicleState*> crew;
            crew.reserve(assigned[j].size());
            for (const int i : assigned[j])
                crew.push_back(&state.vehicles[available[static_cast<std::size_t>(i)]]);

            std::size_t winner_k = 0;
            if (is_private) {
                const RendezvousOutcome rendezvous =
                    redundant_rendezvous(crew, req.pickup, req.dropoff, mechanism, g, noise_rng, now);
                winner_k = rendezvous.winner;
                if (std::getenv("PMOD_DEBUG") && crew.size() > 1) {
                    static double gain_sum = 0.0;
                    static long crews = 0;
                    gain_sum += g.shortest_time_cost(crew[0]->true_vertex, req.pickup) -
                                g.shortest_time_cost(crew[winner_k]->true_vertex, req.pickup);
                    if (++crews % 2000 == 0)
                        std::fprintf(stderr, "  crews=%ld mean_rendezvous_gain=%.2f\n", crews,
                                     gain_sum / static_cast<double>(crews));
                }
                const std::int64_t winner_depart =
                    std::max(now, crew[winner_k]->truly_available_ms);
                const double approach = g.shortest_time_cost(crew[winner_k]->true_vertex, req.pickup);
                const std::int64_t pickup_ms = winner_depart + to_ms(approach);
                metrics.outcomes.push_back(
                    {req.id, req.request_time_ms, pickup_ms,
                     static_cast<double>(pickup_ms - req.request_time_ms) / 1000.0, config.mode,
                     static_cast<double>(now - req.request_time_ms) / 1000.0,
                     static_cast<double>(winner_depart - now) / 1000.0, approach});
                for (std::size_t k = 0; k < crew.size(); ++k) {
                    const RendezvousLeg& leg = rendezvous.legs[k];
                    const RideReport report{rendezvous.reported_dropoff, leg.t_reported_s,
                                            leg.t_true_s};
                    if (config.collect_events)
                        result.events.push_back({now, "assign", crew[k]->id, req.id,
                                                 g.position(req.pickup).x, g.position(req.pickup).y});
                    apply_ride(*crew[k], report, leg.destination, now, g,
                               k == winner_k ? VehicleStatus::en_route : VehicleStatus::fake_trip);
                    record_report(*crew[k], req.id);
                }
            } else {
                VehicleState& v = *crew[0];
                const std::int64_t depart = std::max(now, v.truly_available_ms);
                const double t_approach = g.shortest_time_cost(v.true_vertex, req.pickup);
                const double t_ride = g.shortest_time_cost(req.pickup, req.dropoff);
                const std::int64_t pickup_ms = depart + to_ms(t_approach);
                metrics.outcomes.push_back(
                    {req.id, req.request_time_ms, pickup_ms,
                     static_cast<double>(pickup_ms - req.request_time_ms) / 1000.0, config.mode,
                     static_cast<double>(now - req.request_time_ms) / 1000.0,
                     static_cast<double>(depart - now) / 1000.0, t_approach});
                const RideReport report{g.position(req.dropoff), t_approach + t_ride,
                                        t_approach + t_ride};
                if (config.collect_events)
                    result.events.push_back({now, "assign", v.id, req.id, g.position(req.pickup).x,
                                             g.position(req.pickup).y});
                // In the non-private mode reports are truthful, including the
                // extra delay when the vehicle was still finishing a ride.
                apply_ride(v, report, req.dropoff, now, g, VehicleStatus::en_route);
                v.reported_available_ms = v.truly_available_ms;
                record_report(v, req.id);
            }
            served[j] = 1;
            ++metrics.served;
            const double waiting = metrics.outcomes.back().waiting_s;
            const std::size_t bin =
                std::min(metrics.histogram.size() - 1,
                         static_cast<std::size_t>(waiting / metrics.histogram_bin_s));
            ++metrics.histogram[bin];
        }
        std::size_t write = 0;
        for (std::size_t j = 0; j < pending.size(); ++j)
            if (!served[j]) pending[write++] = pending[j];
        pending.resize(write);
    }

    metrics.pending_at_end = pending.size();
    metrics.report_count = gap_count;
    if (gap_count > 0) {
        metrics.report_gap_mean_s = gap_sum / static_cast<double>(gap_count);
        if (gap_count > 1) {
            const double var = (gap_sq_sum - gap_sum * gap_sum / static_cast<double>(gap_count)) /
                               static_cast<double>(gap_count - 1);
            metrics.report_gap_stderr_s =
                std::sqrt(std::max(0.0, var) / static_cast<double>(gap_count));
        }
    }
    if (config.collect_events)
        std::stable_sort(result.events.begin(), result.events.end(),
                         [](const SimEvent& a, const SimEvent& b) { return a.time_ms < b.time_ms; });
    return result;
}

}  // namespace pmod
