#include <CLI11.hpp>

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pmod/assignment.hpp"
#include "pmod/continuous_sim.hpp"
#include "pmod/data_io.hpp"
#include "pmod/planar_laplace.hpp"
#include "pmod/rng.hpp"
#include "pmod/road_graph.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fixed6(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

// FNV-1a over the file bytes, for the manifest.
std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "missing";
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char chunk[4096];
    while (in.read(chunk, sizeof chunk) || in.gcount() > 0) {
        for (std::streamsize k = 0; k < in.gcount(); ++k) {
            hash ^= static_cast<unsigned char>(chunk[k]);
            hash *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(std::stod(item));
    return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(std::stoi(item));
    return out;
}

std::string manifest_json(const std::map<std::string, std::string>& manifest) {
    std::string out = "{";
    bool first = true;
    for (const auto& [key, value] : manifest) {
        if (!first) out += ",";
        first = false;
        out += "\"" + key + "\":\"" + value + "\"";
    }
    return out + "}";
}

pmod::RoadGraph load_graph(const std::string& nodes, const std::string& edges,
                           double default_speed) {
    return pmod::read_graph_csv(nodes, edges, default_speed);
}

int worker_count() {
    if (const char* env = std::getenv("PMOD_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

struct GraphArgs {
    std::string nodes, edges;
    double default_speed = 5.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--nodes", nodes, "nodes.csv path (id,x,y)")->required();
        cmd->add_option("--edges", edges, "edges.csv path (src,dst,length[,weight])")->required();
        cmd->add_option("--default-speed", default_speed,
                        "speed (m/s) for edges without a weight column");
    }
};

int cmd_build_graph(const std::string& grid_spec, const std::string& nodes_in,
                    const std::string& edges_in, const std::string& trips_path,
                    double default_speed, double snap_radius, const std::string& out_nodes,
                    const std::string& out_edges) {
    pmod::RoadGraph graph;
    if (!grid_spec.empty()) {
        const std::vector<double> parts = parse_double_list(grid_spec);
        if (parts.size() != 4)
            throw CLI::ValidationError("--grid expects rows,cols,spacing,speed");
        graph = pmod::synthetic_grid_city(static_cast<int>(parts[0]), static_cast<int>(parts[1]),
                                          parts[2], parts[3]);
    } else if (!nodes_in.empty() && !edges_in.empty()) {
        graph = load_graph(nodes_in, edges_in, default_speed);
    } else {
        throw CLI::ValidationError("need either --grid or --nodes/--edges");
    }

    if (!trips_path.empty()) {
        const pmod::TripParseResult trips = pmod::parse_trips(trips_path);
        pmod::WeightEstimateOptions opt;
        opt.default_speed_mps = default_speed;
        opt.snap_radius_m = snap_radius;
        pmod::WeightEstimateResult estimate = pmod::estimate_edge_weights(graph, trips.trips, opt);
        std::cerr << "estimated weights from " << estimate.trips_used << " trips ("
                  << estimate.trips_skipped << " skipped, " << estimate.edges_observed << "/"
                  << graph.edge_count() << " edges observed)\n";
        if (estimate.all_defaults)
            std::cerr << "warning: no usable trips; all weights defaulted to length/speed\n";
        graph = std::move(estimate.graph);
    }

    pmod::write_graph_csv(graph, out_nodes, out_edges);
    std::cout << "wrote " << graph.vertex_count() << " vertices, " << graph.edge_count()
              << " edges\n";
    return 0;
}

int cmd_sample(double eps, const std::string& center_spec, int count, std::uint64_t seed,
               const std::string& nodes, const std::string& edges, double default_speed,
               const std::string& out_path) {
    const std::vector<double> c = parse_double_list(center_spec);
    if (c.size() != 2) throw CLI::ValidationError("--center expects x,y");
    const pmod::PlanarLaplace mechanism(eps);
    pmod::Rng rng(seed);
    std::optional<pmod::RoadGraph> graph;
    if (!nodes.empty() && !edges.empty()) graph = load_graph(nodes, edges, default_speed);

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw std::runtime_error("cannot write " + out_path);
        out = &file;
    }
    *out << (graph ? "x,y,projected_vertex\n" : "x,y\n");
    for (int k = 0; k < count; ++k) {
        const pmod::Point2 p = mechanism.sample({c[0], c[1]}, rng);
        *out << fixed6(p.x) << ',' << fixed6(p.y);
        if (graph) *out << ',' << graph->nearest_vertex(p);
        *out << '\n';
    }
    return 0;
}

struct AssignReport {
    std::vector<std::pair<int, int>> pairs;
    std::vector<double> expected_s;
    std::vector<double> realized_s;
    double mean_expected = 0.0;
    double mean_realized = 0.0;
};

int cmd_assign(const GraphArgs& graph_args, const std::string& vehicles_spec, int random_vehicles,
               const std::string& passengers_spec, int random_passengers, double eps, double p_min,
               int redundancy, const std::string& mode, std::uint64_t seed,
               const std::string& out_path) {
    const pmod::RoadGraph graph = load_graph(graph_args.nodes, graph_args.edges, graph_args.default_speed);
    pmod::Rng rng(seed);
    pmod::Rng placement = rng.spawn(1);
    pmod::Rng noise = rng.spawn(2);

    std::vector<pmod::VertexId> vehicles, passengers;
    if (!vehicles_spec.empty())
        for (const int v : parse_int_list(vehicles_spec)) vehicles.push_back(v);
    else
        for (int k = 0; k < random_vehicles; ++k)
            vehicles.push_back(static_cast<pmod::VertexId>(placement.below(graph.vertex_count())));
    if (!passengers_spec.empty())
        for (const int v : parse_int_list(passengers_spec)) passengers.push_back(v);
    else
        for (int k = 0; k < random_passengers; ++k)
            passengers.push_back(static_cast<pmod::VertexId>(placement.below(graph.vertex_count())));
    if (vehicles.empty() || passengers.empty())
        throw CLI::ValidationError("need vehicles and passengers (explicit lists or --random-*)");
    for (const pmod::VertexId v : vehicles)
        if (v < 0 || static_cast<std::size_t>(v) >= graph.vertex_count())
            throw std::runtime_error("vehicle vertex " + std::to_string(v) + " out of range");
    for (const pmod::VertexId v : passengers)
        if (v < 0 || static_cast<std::size_t>(v) >= graph.vertex_count())
            throw std::runtime_error("passenger vertex " + std::to_string(v) + " out of range");

    const pmod::CostMatrix truth = pmod::cost_matrix_true(graph, vehicles, passengers);
    AssignReport report;

    if (mode == "optimal") {
        const pmod::Assignment a = pmod::hungarian(truth);
        for (const auto& [i, j] : a.pairs) {
            report.pairs.emplace_back(i, j);
            report.expected_s.push_back(truth.at(i, j));
            report.realized_s.push_back(truth.at(i, j));
        }
    } else {
        const pmod::PlanarLaplace mechanism(eps);
        std::vector<pmod::VertexPosterior> posteriors;
        for (const pmod::VertexId v : vehicles) {
            const pmod::Point2 reported = mechanism.sample(graph.position(v), noise);
            posteriors.push_back(pmod::posterior_with_fallback(graph, mechanism, reported, p_min));
        }
        if (mode == "private") {
            const pmod::CostMatrix expected = pmod::cost_matrix_expected(graph, posteriors, passengers);
            const pmod::Assignment a = pmod::solve_batch(expected);
            for (const auto& [i, j] : a.pairs) {
                report.pairs.emplace_back(i, j);
                report.expected_s.push_back(expected.at(i, j));
                report.realized_s.push_back(truth.at(i, j));
            }
        } else if (mode == "private-redundant") {
            const pmod::RedundantPlan plan =
                pmod::redundant_assign(graph, posteriors, passengers, redundancy);
            for (std::size_t j = 0; j < passengers.size(); ++j) {
                double best = std::numeric_limits<double>::infinity();
                for (const int i : plan.assigned_vehicles[j]) {
                    report.pairs.emplace_back(i, static_cast<int>(j));
                    best = std::min(best, truth.at(i, static_cast<int>(j)));
                }
                report.expected_s.push_back(plan.expected_waiting_s[j]);
                report.realized_s.push_back(best);
            }
        } else {
            throw CLI::ValidationError("--mode must be optimal, private or private-redundant");
        }
    }

    for (const double e : report.expected_s) report.mean_expected += e;
    for (const double r : report.realized_s) report.mean_realized += r;
    report.mean_expected /= static_cast<double>(report.expected_s.size());
    report.mean_realized /= static_cast<double>(report.realized_s.size());

    std::cout << "pairs (vehicle -> passenger):\n";
    for (const auto& [i, j] : report.pairs) std::cout << "  " << i << " -> " << j << "\n";
    std::cout << "mean expected waiting: " << fixed6(report.mean_expected) << " s\n";
    std::cout << "mean realized waiting: " << fixed6(report.mean_realized) << " s\n";

    if (!out_path.empty()) {
        pmod::JsonWriter json;
        json.begin_object();
        std::map<std::string, std::string> manifest{
            {"subcommand", "assign"},
            {"mode", mode},
            {"eps", fixed6(eps)},
            {"p_min", fixed6(p_min)},
            {"redundancy", std::to_string(redundancy)},
            {"seed", std::to_string(seed)},
            {"nodes_digest", file_digest(graph_args.nodes)},
            {"edges_digest", file_digest(graph_args.edges)},
            {"tool_version", kVersion},
        };
        json.begin_object("manifest");
        for (const auto& [k, v] : manifest) json.field(k, v);
        json.end_object();
        json.field("mean_expected_s", report.mean_expected);
        json.field("mean_realized_s", report.mean_realized);
        json.begin_array("pairs");
        for (const auto& [i, j] : report.pairs) {
            json.begin_object();
            json.field("vehicle", static_cast<std::int64_t>(i));
            json.field("passenger", static_cast<std::int64_t>(j));
            json.end_object();
        }
        json.end_array();
        json.end_object();
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        out << json.str() << "\n";
    }
    return 0;
}

pmod::DispatchMode parse_mode(const std::string& mode) {
    if (mode == "non-private") return pmod::DispatchMode::non_private;
    if (mode == "private") return pmod::DispatchMode::private_non_redundant;
    if (mode == "private-redundant") return pmod::DispatchMode::private_redundant;
    throw CLI::ValidationError("--mode must be non-private, private or private-redundant");
}

int cmd_simulate(const GraphArgs& graph_args, const std::string& demand_path,
                 const std::string& synthetic_spec, const pmod::SimConfig& base_config,
                 const std::string& mode, double max_wait_minutes, const std::string& out_prefix,
                 bool events) {
    const pmod::RoadGraph graph = load_graph(graph_args.nodes, graph_args.edges, graph_args.default_speed);
    pmod::SimConfig config = base_config;
    config.mode = parse_mode(mode);
    config.max_wait_seconds = max_wait_minutes * 60.0;
    config.collect_events = events;

    std::vector<pmod::PassengerRequest> demand;
    std::string demand_digest = "synthetic";
    if (!demand_path.empty()) {
        const pmod::TripParseResult trips = pmod::parse_trips(demand_path);
        demand = pmod::demand_from_trips(trips.trips, graph);
        demand_digest = file_digest(demand_path);
    } else if (!synthetic_spec.empty()) {
        const std::vector<std::string> parts = [&] {
            std::vector<std::string> out;
            std::stringstream in(synthetic_spec);
            std::string item;
            while (std::getline(in, item, ',')) out.push_back(item);
            return out;
        }();
        if (parts.size() < 2 || parts.size() > 3)
            throw CLI::ValidationError("--synthetic-demand expects rate,hours[,diurnal]");
        pmod::Rng demand_rng = pmod::Rng(config.seed).spawn(99);
        const double rate = std::stod(parts[0]);
        const double hours = std::stod(parts[1]);
        if (parts.size() == 3 && parts[2] == "diurnal")
            demand = pmod::synthetic_demand_diurnal(graph, rate, hours, demand_rng);
        else
            demand = pmod::synthetic_demand(graph, rate, hours, demand_rng);
    } else {
        throw CLI::ValidationError("need --demand or --synthetic-demand");
    }

    const pmod::SimResult result = pmod::run(config, graph, std::move(demand));

    const std::map<std::string, std::string> manifest{
        {"subcommand", "simulate"},
        {"mode", mode},
        {"batch_seconds", fixed6(config.batch_seconds)},
        {"max_wait_seconds", fixed6(config.max_wait_seconds)},
        {"fleet_multiplier", fixed6(config.fleet_multiplier)},
        {"fleet_cap", std::to_string(config.fleet_cap)},
        {"eps", fixed6(config.eps)},
        {"p_min", fixed6(config.p_min)},
        {"d_max", std::to_string(config.d_max)},
        {"reserve_fraction", fixed6(config.reserve_fraction)},
        {"seed", std::to_string(config.seed)},
        {"demand", demand_path.empty() ? synthetic_spec : demand_path},
        {"demand_digest", demand_digest},
        {"nodes_digest", file_digest(graph_args.nodes)},
        {"edges_digest", file_digest(graph_args.edges)},
        {"tool_version", kVersion},
    };
    pmod::write_results(result.metrics, config, manifest, out_prefix,
                        events ? &result.events : nullptr);

    const pmod::MetricsSummary s = result.metrics.summary();
    std::cout << "served " << result.metrics.served << "/" << result.metrics.total_requests
              << " requests, drop rate " << fixed6(result.metrics.drop_rate()) << "\n";
    if (s.mean)
        std::cout << "mean waiting " << fixed6(*s.mean) << " s (median " << fixed6(*s.median)
                  << ", p25 " << fixed6(*s.p25) << ", p75 " << fixed6(*s.p75) << ")\n";
    std::cout << "wrote " << out_prefix << "_summary.json, " << out_prefix << "_passengers.csv"
              << (events ? std::string(", ") + out_prefix + "_events.csv" : "") << "\n";
    return 0;
}

int cmd_sweep(const GraphArgs& graph_args, const std::string& epsilons_spec,
              const std::string& redundancies_spec, int vehicles, int passengers, int repetitions,
              double p_min, std::uint64_t seed, const std::string& out_path) {
    const pmod::RoadGraph graph = load_graph(graph_args.nodes, graph_args.edges, graph_args.default_speed);
    const std::vector<double> epsilons = parse_double_list(epsilons_spec);
    const std::vector<int> redundancies = parse_int_list(redundancies_spec);
    if (epsilons.empty() || redundancies.empty())
        throw CLI::ValidationError("--epsilons and --D must be non-empty");
    if (vehicles < 1 || passengers < 1 || vehicles < passengers)
        throw CLI::ValidationError("need --vehicles >= --passengers >= 1");

    struct Cell {
        double mean_wait = 0.0;
        double mean_optimal = 0.0;
    };
    std::vector<Cell> cells(epsilons.size() * redundancies.size());

    // Each repetition owns a stream derived from (seed, index); the worker
    // pool never affects the numbers.
    const pmod::Rng root(seed);
    const auto run_cell = [&](std::size_t e_idx, std::size_t d_idx) {
        const double eps = epsilons[e_idx];
        const int redundancy = redundancies[d_idx];
        const pmod::PlanarLaplace mechanism(eps);
        double total = 0.0, total_optimal = 0.0;
        for (int rep = 0; rep < repetitions; ++rep) {
            pmod::Rng rng = root.spawn((e_idx * redundancies.size() + d_idx) * 10'000 +
                                       static_cast<std::uint64_t>(rep));
            std::vector<pmod::VertexId> vehicle_vertices, passenger_vertices;
            std::vector<pmod::VertexPosterior> posteriors;
            for (int k = 0; k < vehicles; ++k) {
                const auto v = static_cast<pmod::VertexId>(rng.below(graph.vertex_count()));
                vehicle_vertices.push_back(v);
                posteriors.push_back(pmod::posterior_with_fallback(
                    graph, mechanism, mechanism.sample(graph.position(v), rng), p_min));
            }
            for (int k = 0; k < passengers; ++k)
                passenger_vertices.push_back(
                    static_cast<pmod::VertexId>(rng.below(graph.vertex_count())));

            const pmod::CostMatrix truth =
                pmod::cost_matrix_true(graph, vehicle_vertices, passenger_vertices);
            const pmod::Assignment optimal = pmod::hungarian(truth);
            total_optimal += pmod::assignment_cost(truth, optimal) / passengers;

            const pmod::RedundantPlan plan =
                pmod::redundant_assign(graph, posteriors, passenger_vertices, redundancy);
            double realized = 0.0;
            for (std::size_t j = 0; j < passenger_vertices.size(); ++j) {
                double best = std::numeric_limits<double>::infinity();
                for (const int i : plan.assigned_vehicles[j])
                    best = std::min(best, truth.at(i, static_cast<int>(j)));
                realized += best;
            }
            total += realized / passengers;
        }
        cells[e_idx * redundancies.size() + d_idx] = {total / repetitions,
                                                      total_optimal / repetitions};
    };

    std::vector<std::pair<std::size_t, std::size_t>> work;
    for (std::size_t e = 0; e < epsilons.size(); ++e)
        for (std::size_t d = 0; d < redundancies.size(); ++d) work.emplace_back(e, d);
    std::atomic<std::size_t> next{0};
    const int workers = std::min<int>(worker_count(), static_cast<int>(work.size()));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t k = next.fetch_add(1); k < work.size(); k = next.fetch_add(1))
                run_cell(work[k].first, work[k].second);
        });
    for (std::thread& t : pool) t.join();

    const std::map<std::string, std::string> manifest{
        {"subcommand", "sweep"},
        {"epsilons", epsilons_spec},
        {"D", redundancies_spec},
        {"vehicles", std::to_string(vehicles)},
        {"passengers", std::to_string(passengers)},
        {"repetitions", std::to_string(repetitions)},
        {"p_min", fixed6(p_min)},
        {"seed", std::to_string(seed)},
        {"nodes_digest", file_digest(graph_args.nodes)},
        {"edges_digest", file_digest(graph_args.edges)},
        {"tool_version", kVersion},
    };

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw std::runtime_error("cannot write " + out_path);
        out = &file;
    }
    *out << "# manifest " << manifest_json(manifest) << "\n";
    *out << "epsilon,D,mean_wait_s,mean_optimal_s,pct_increase\n";
    for (std::size_t e = 0; e < epsilons.size(); ++e)
        for (std::size_t d = 0; d < redundancies.size(); ++d) {
            const Cell& cell = cells[e * redundancies.size() + d];
            *out << fixed6(epsilons[e]) << ',' << redundancies[d] << ',' << fixed6(cell.mean_wait)
                 << ',' << fixed6(cell.mean_optimal) << ','
                 << fixed6(100.0 * (cell.mean_wait - cell.mean_optimal) / cell.mean_optimal)
                 << '\n';
        }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"privacy-preserving vehicle-to-passenger dispatch"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // build-graph
    auto* build = app.add_subcommand("build-graph", "build and validate a road graph");
    std::string grid_spec, nodes_in, edges_in, trips_path, out_nodes = "nodes.csv",
                                                           out_edges = "edges.csv";
    double build_default_speed = 5.0, snap_radius = 500.0;
    build->add_option("--grid", grid_spec, "rows,cols,spacing_m,speed_mps");
    build->add_option("--nodes", nodes_in, "input nodes.csv");
    build->add_option("--edges", edges_in, "input edges.csv");
    build->add_option("--trips", trips_path, "trips.csv to estimate edge weights from");
    build->add_option("--default-speed", build_default_speed, "fallback speed (m/s)");
    build->add_option("--snap-radius", snap_radius, "trip snap radius (m)");
    build->add_option("--out-nodes", out_nodes, "output nodes.csv");
    build->add_option("--out-edges", out_edges, "output edges.csv");

    // sample
    auto* sample = app.add_subcommand("sample", "draw planar-Laplace noise samples");
    double sample_eps = 0.02;
    std::string center_spec = "0,0", sample_out;
    int sample_count = 100;
    std::uint64_t sample_seed = 0;
    GraphArgs sample_graph;
    sample->add_option("--epsilon", sample_eps, "inverse scale (1/m)")->required();
    sample->add_option("--center", center_spec, "center point x,y (m)");
    sample->add_option("--count", sample_count, "number of samples");
    sample->add_option("--seed", sample_seed, "rng seed");
    sample->add_option("--nodes", sample_graph.nodes, "nodes.csv for vertex projection");
    sample->add_option("--edges", sample_graph.edges, "edges.csv for vertex projection");
    sample->add_option("--out", sample_out, "output CSV (default stdout)");

    // assign
    auto* assign = app.add_subcommand("assign", "one batch assignment experiment");
    GraphArgs assign_graph;
    assign_graph.attach(assign);
    std::string vehicles_spec, passengers_spec, assign_mode = "optimal", assign_out;
    int random_vehicles = 0, random_passengers = 0, redundancy = 1;
    double assign_eps = 0.02, assign_pmin = 1e-6;
    std::uint64_t assign_seed = 0;
    assign->add_option("--vehicles", vehicles_spec, "vehicle vertex ids, comma separated");
    assign->add_option("--random-vehicles", random_vehicles, "sample this many vehicle vertices");
    assign->add_option("--passengers", passengers_spec, "passenger vertex ids, comma separated");
    assign->add_option("--random-passengers", random_passengers,
                       "sample this many passenger vertices");
    assign->add_option("--epsilon", assign_eps, "inverse scale (1/m)");
    assign->add_option("--pmin", assign_pmin, "posterior pruning threshold");
    assign->add_option("--redundancy", redundancy, "vehicles per passenger (D)");
    assign->add_option("--mode", assign_mode, "optimal | private | private-redundant");
    assign->add_option("--seed", assign_seed, "rng seed");
    assign->add_option("--out", assign_out, "write a JSON report here");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "continuous day-long dispatch simulation");
    GraphArgs sim_graph;
    sim_graph.attach(simulate);
    std::string demand_path, synthetic_spec, sim_mode = "private", out_prefix = "sim";
    pmod::SimConfig sim_config;
    double max_wait_minutes = 20.0;
    bool sim_events = false;
    simulate->add_option("--demand", demand_path, "trips.csv demand trace");
    simulate->add_option("--synthetic-demand", synthetic_spec, "rate_per_s,hours[,diurnal]");
    simulate->add_option("--mode", sim_mode, "non-private | private | private-redundant");
    simulate->add_option("--batch-seconds", sim_config.batch_seconds, "batch window (s)");
    simulate->add_option("--max-wait-minutes", max_wait_minutes, "drop threshold (min)");
    simulate->add_option("--fleet-multiplier", sim_config.fleet_multiplier,
                         "fleet per concurrently occupied vehicle");
    simulate->add_option("--fleet-cap", sim_config.fleet_cap, "maximum fleet size");
    simulate->add_option("--epsilon", sim_config.eps, "inverse scale (1/m)");
    simulate->add_option("--pmin", sim_config.p_min, "posterior pruning threshold");
    simulate->add_option("--d-max", sim_config.d_max, "redundancy cap per passenger");
    simulate->add_option("--reserve-fraction", sim_config.reserve_fraction,
                         "idle reserve per forecast request when choosing D");
    simulate->add_option("--seed", sim_config.seed, "rng seed");
    simulate->add_option("--out", out_prefix, "output path prefix");
    simulate->add_flag("--events", sim_events, "also write the event log CSV");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "waiting time vs epsilon and redundancy");
    GraphArgs sweep_graph;
    sweep_graph.attach(sweep);
    std::string epsilons_spec = "0.005,0.01,0.02,0.05,0.1", redundancies_spec = "1,2,3,4",
                sweep_out;
    int sweep_vehicles = 200, sweep_passengers = 100, repetitions = 10;
    double sweep_pmin = 1e-6;
    std::uint64_t sweep_seed = 0;
    sweep->add_option("--epsilons", epsilons_spec, "comma-separated epsilon grid");
    sweep->add_option("--D", redundancies_spec, "comma-separated redundancy grid");
    sweep->add_option("--vehicles", sweep_vehicles, "vehicles per instance");
    sweep->add_option("--passengers", sweep_passengers, "passengers per instance");
    sweep->add_option("--reps", repetitions, "repetitions per cell");
    sweep->add_option("--pmin", sweep_pmin, "posterior pruning threshold");
    sweep->add_option("--seed", sweep_seed, "rng seed");
    sweep->add_option("--out", sweep_out, "output CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // exits 0
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // usage error
    }

    try {
        if (build->parsed())
            return cmd_build_graph(grid_spec, nodes_in, edges_in, trips_path, build_default_speed,
                                   snap_radius, out_nodes, out_edges);
        if (sample->parsed())
            return cmd_sample(sample_eps, center_spec, sample_count, sample_seed,
                              sample_graph.nodes, sample_graph.edges, sample_graph.default_speed,
                              sample_out);
        if (assign->parsed())
            return cmd_assign(assign_graph, vehicles_spec, random_vehicles, passengers_spec,
                              random_passengers, assign_eps, assign_pmin, redundancy, assign_mode,
                              assign_seed, assign_out);
        if (simulate->parsed())
            return cmd_simulate(sim_graph, demand_path, synthetic_spec, sim_config, sim_mode,
                                max_wait_minutes, out_prefix, sim_events);
        if (sweep->parsed())
            return cmd_sweep(sweep_graph, epsilons_spec, redundancies_spec, sweep_vehicles,
                             sweep_passengers, repetitions, sweep_pmin, sweep_seed, sweep_out);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
