#include "pmod/data_io.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pmod {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    errno = 0;
    out = std::strtod(s.c_str(), &end);
    return errno == 0 && end == s.c_str() + s.size() && std::isfinite(out);
}

bool parse_i64(const std::string& s, std::int64_t& out) {
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

std::string fixed6(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return in;
}

void expect_header(const std::string& got, const std::string& want, const std::string& path) {
    if (trim(got) != want)
        throw std::runtime_error(path + ": expected header '" + want + "', got '" + trim(got) + "'");
}

}  // namespace

TripParseResult parse_trips(const std::string& path) {
    std::ifstream in = open_or_throw(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header");
    expect_header(line, "pickup_time,dropoff_time,pickup_x,pickup_y,dropoff_x,dropoff_y", path);
    TripParseResult result;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const std::vector<std::string> f = split_csv(line);
        TripRecord trip;
        if (f.size() != 6 || !parse_i64(f[0], trip.pickup_time) ||
            !parse_i64(f[1], trip.dropoff_time) || !parse_double(f[2], trip.pickup.x) ||
            !parse_double(f[3], trip.pickup.y) || !parse_double(f[4], trip.dropoff.x) ||
            !parse_double(f[5], trip.dropoff.y) || trip.dropoff_time <= trip.pickup_time) {
            ++result.skipped;
            continue;
        }
        result.trips.push_back(trip);
    }
    std::stable_sort(result.trips.begin(), result.trips.end(),
                     [](const TripRecord& a, const TripRecord& b) {
                         return a.pickup_time < b.pickup_time;
                     });
    return result;
}

RoadGraph synthetic_grid_city(int rows, int cols, double spacing_m, double speed_mps) {
    if (rows < 2 || cols < 2)
        throw std::invalid_argument("synthetic_grid_city: grid must be at least 2x2");
    if (!(spacing_m > 0.0) || !(speed_mps > 0.0))
        throw std::invalid_argument("synthetic_grid_city: spacing and speed must be > 0");
    std::vector<Point2> positions;
    positions.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            positions.push_back({static_cast<double>(c) * spacing_m, static_cast<double>(r) * spacing_m});
    std::vector<Edge> edges;
    const double weight = spacing_m / speed_mps;
    const auto id = [cols](int r, int c) { return r * cols + c; };
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (c + 1 < cols) {
                edges.push_back({id(r, c), id(r, c + 1), spacing_m, weight});
                edges.push_back({id(r, c + 1), id(r, c), spacing_m, weight});
            }
            if (r + 1 < rows) {
                edges.push_back({id(r, c), id(r + 1, c), spacing_m, weight});
                edges.push_back({id(r + 1, c), id(r, c), spacing_m, weight});
            }
        }
    return RoadGraph(std::move(positions), std::move(edges));
}

EmpiricalLocationSampler EmpiricalLocationSampler::from_weights(
    std::vector<std::pair<VertexId, double>> weights) {
    EmpiricalLocationSampler sampler;
    double total = 0.0;
    for (const auto& [v, w] : weights) {
        if (w < 0.0) throw std::invalid_argument("sampler weights must be >= 0");
        total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("sampler needs positive total weight");
    std::sort(weights.begin(), weights.end());
    double cum = 0.0;
    for (const auto& [v, w] : weights) {
        if (w == 0.0) continue;
        cum += w / total;
        sampler.entries_.emplace_back(v, w / total);
        sampler.cdf_.push_back(cum);
    }
    sampler.cdf_.back() = 1.0;
    return sampler;
}

VertexId EmpiricalLocationSampler::sample(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    const std::size_t idx =
        std::min(static_cast<std::size_t>(it - cdf_.begin()), entries_.size() - 1);
    return entries_[idx].first;
}

EmpiricalLocationSampler build_sampler(std::span<const TripRecord> trips, const RoadGraph& g,
                                       TripEndpoint endpoint) {
    if (trips.empty()) throw std::invalid_argument("build_sampler: no trips");
    std::vector<double> counts(g.vertex_count(), 0.0);
    for (const TripRecord& trip : trips) {
        const Point2& p = endpoint == TripEndpoint::pickup ? trip.pickup : trip.dropoff;
        counts[static_cast<std::size_t>(g.nearest_vertex(p))] += 1.0;
    }
    std::vector<std::pair<VertexId, double>> weights;
    for (std::size_t v = 0; v < counts.size(); ++v)
        if (counts[v] > 0.0) weights.emplace_back(static_cast<VertexId>(v), counts[v]);
    return EmpiricalLocationSampler::from_weights(std::move(weights));
}

RoadGraph read_graph_csv(const std::string& nodes_path, const std::string& edges_path,
                         double default_speed_mps) {
    std::ifstream nodes_in = open_or_throw(nodes_path);
    std::string line;
    if (!std::getline(nodes_in, line)) throw std::runtime_error(nodes_path + ": missing header");
    expect_header(line, "id,x,y", nodes_path);
    std::vector<std::pair<std::int64_t, Point2>> raw_nodes;
    std::size_t row = 1;
    while (std::getline(nodes_in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const std::vector<std::string> f = split_csv(line);
        std::int64_t id = 0;
        Point2 p;
        if (f.size() != 3 || !parse_i64(f[0], id) || !parse_double(f[1], p.x) ||
            !parse_double(f[2], p.y))
            throw std::runtime_error(nodes_path + ": malformed row " + std::to_string(row));
        raw_nodes.emplace_back(id, p);
    }
    std::sort(raw_nodes.begin(), raw_nodes.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Point2> positions;
    positions.reserve(raw_nodes.size());
    for (std::size_t k = 0; k < raw_nodes.size(); ++k) {
        if (raw_nodes[k].first != static_cast<std::int64_t>(k))
            throw std::runtime_error(nodes_path + ": vertex ids must be dense 0..V-1");
        positions.push_back(raw_nodes[k].second);
    }

    std::ifstream edges_in = open_or_throw(edges_path);
    if (!std::getline(edges_in, line)) throw std::runtime_error(edges_path + ": missing header");
    const std::string header = trim(line);
    bool has_weight = false;
    if (header == "src,dst,length,weight")
        has_weight = true;
    else if (header != "src,dst,length")
        throw std::runtime_error(edges_path + ": expected header 'src,dst,length[,weight]', got '" +
                                 header + "'");
    std::vector<Edge> edges;
    row = 1;
    while (std::getline(edges_in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const std::vector<std::string> f = split_csv(line);
        Edge e;
        std::int64_t src = 0, dst = 0;
        const std::size_t want = has_weight ? 4 : 3;
        if (f.size() != want || !parse_i64(f[0], src) || !parse_i64(f[1], dst) ||
            !parse_double(f[2], e.length_m))
            throw std::runtime_error(edges_path + ": malformed row " + std::to_string(row));
        if (has_weight && !parse_double(f[3], e.weight_s))
            throw std::runtime_error(edges_path + ": malformed row " + std::to_string(row));
        e.src = static_cast<VertexId>(src);
        e.dst = static_cast<VertexId>(dst);
        if (!has_weight) e.weight_s = e.length_m / default_speed_mps;
        edges.push_back(e);
    }
    return RoadGraph(std::move(positions), std::move(edges));
}

void write_graph_csv(const RoadGraph& g, const std::string& nodes_path,
                     const std::string& edges_path) {
    std::ofstream nodes(nodes_path);
    if (!nodes) throw std::runtime_error("cannot write " + nodes_path);
    nodes << "id,x,y\n";
    for (std::size_t v = 0; v < g.vertex_count(); ++v)
        nodes << v << ',' << fixed6(g.position(static_cast<VertexId>(v)).x) << ','
              << fixed6(g.position(static_cast<VertexId>(v)).y) << '\n';
    std::ofstream edges(edges_path);
    if (!edges) throw std::runtime_error("cannot write " + edges_path);
    edges << "src,dst,length,weight\n";
    for (const Edge& e : g.edges())
        edges << e.src << ',' << e.dst << ',' << fixed6(e.length_m) << ',' << fixed6(e.weight_s)
              << '\n';
}

std::vector<PassengerRequest> demand_from_trips(std::span<const TripRecord> trips,
                                                const RoadGraph& g, double snap_radius_m) {
    std::vector<PassengerRequest> demand;
    int id = 0;
    for (const TripRecord& trip : trips) {
        const VertexId a = g.nearest_vertex(trip.pickup);
        const VertexId b = g.nearest_vertex(trip.dropoff);
        if (a == b || distance(g.position(a), trip.pickup) > snap_radius_m ||
            distance(g.position(b), trip.dropoff) > snap_radius_m)
            continue;
        PassengerRequest req;
        req.id = id++;
        req.request_time_ms = trip.pickup_time * 1000;
        req.pickup = a;
        req.dropoff = b;
        req.ride_duration_ms = (trip.dropoff_time - trip.pickup_time) * 1000;
        demand.push_back(req);
    }
    std::stable_sort(demand.begin(), demand.end(),
                     [](const PassengerRequest& a, const PassengerRequest& b) {
                         return a.request_time_ms < b.request_time_ms;
                     });
    return demand;
}

void JsonWriter::comma() {
    if (need_comma_) out_ += ",";
    out_ += "\n";
    need_comma_ = false;
}

void JsonWriter::indent() {
    for (int k = 0; k < depth_; ++k) out_ += "  ";
}

void JsonWriter::begin_object() {
    comma();
    indent();
    out_ += "{";
    ++depth_;
}

void JsonWriter::begin_object(const std::string& key) {
    comma();
    indent();
    out_ += "\"" + key + "\": {";
    ++depth_;
}

void JsonWriter::end_object() {
    out_ += "\n";
    --depth_;
    indent();
    out_ += "}";
    need_comma_ = true;
}

void JsonWriter::begin_array(const std::string& key) {
    comma();
    indent();
    out_ += "\"" + key + "\": [";
    ++depth_;
}

void JsonWriter::end_array() {
    out_ += "\n";
    --depth_;
    indent();
    out_ += "]";
    need_comma_ = true;
}

void JsonWriter::field(const std::string& key, const std::string& value) {
    comma();
    indent();
    std::string escaped;
    for (const char c : value) {
        if (c == '"' || c == '\\') escaped += '\\';
        escaped += c;
    }
    out_ += "\"" + key + "\": \"" + escaped + "\"";
    need_comma_ = true;
}

void JsonWriter::field(const std::string& key, double value) {
    comma();
    indent();
    out_ += "\"" + key + "\": " + fixed6(value);
    need_comma_ = true;
}

void JsonWriter::field(const std::string& key, std::int64_t value) {
    comma();
    indent();
    out_ += "\"" + key + "\": " + std::to_string(value);
    need_comma_ = true;
}

void JsonWriter::field(const std::string& key, std::uint64_t value) {
    comma();
    indent();
    out_ += "\"" + key + "\": " + std::to_string(value);
    need_comma_ = true;
}

void JsonWriter::null_field(const std::string& key) {
    comma();
    indent();
    out_ += "\"" + key + "\": null";
    need_comma_ = true;
}

void JsonWriter::element(double value) {
    comma();
    indent();
    out_ += fixed6(value);
    need_comma_ = true;
}

void JsonWriter::element(std::int64_t value) {
    comma();
    indent();
    out_ += std::to_string(value);
    need_comma_ = true;
}

void write_results(const Metrics& metrics, const SimConfig& config,
                   const std::map<std::string, std::string>& manifest,
                   const std::string& path_prefix, const std::vector<SimEvent>* events) {
    JsonWriter json;
    json.begin_object();
    json.begin_object("manifest");
    for (const auto& [key, value] : manifest) json.field(key, value);
    json.end_object();
    json.begin_object("config");
    json.field("batch_seconds", config.batch_seconds);
    json.field("d_max", static_cast<std::int64_t>(config.d_max));
    json.field("eps", config.eps);
    json.field("fleet_cap", static_cast<std::int64_t>(config.fleet_cap));
    json.field("fleet_multiplier", config.fleet_multiplier);
    json.field("max_wait_seconds", config.max_wait_seconds);
    json.field("mode", std::string(dispatch_mode_name(config.mode)));
    json.field("p_min", config.p_min);
    json.field("reserve_fraction", config.reserve_fraction);
    json.field("seed", static_cast<std::uint64_t>(config.seed));
    json.end_object();
    json.begin_object("metrics");
    json.field("total_requests", static_cast<std::int64_t>(metrics.total_requests));
    json.field("served", static_cast<std::int64_t>(metrics.served));
    json.field("dropped", static_cast<std::int64_t>(metrics.dropped));
    json.field("pending_at_end", static_cast<std::int64_t>(metrics.pending_at_end));
    json.field("drop_rate", metrics.drop_rate());
    const MetricsSummary s = metrics.summary();
    const auto opt_field = [&](const char* key, const std::optional<double>& v) {
        if (v)
            json.field(key, *v);
        else
            json.null_field(key);
    };
    opt_field("waiting_mean_s", s.mean);
    opt_field("waiting_stddev_s", s.stddev);
    opt_field("waiting_median_s", s.median);
    opt_field("waiting_p25_s", s.p25);
    opt_field("waiting_p75_s", s.p75);
    json.field("report_gap_mean_s", metrics.report_gap_mean_s);
    json.field("report_gap_stderr_s", metrics.report_gap_stderr_s);
    json.field("report_count", static_cast<std::int64_t>(metrics.report_count));
    json.field("histogram_bin_s", metrics.histogram_bin_s);
    json.begin_array("histogram");
    for (const std::int64_t count : metrics.histogram) json.element(count);
    json.end_array();
    json.end_object();
    json.end_object();

    std::ofstream summary(path_prefix + "_summary.json");
    if (!summary) throw std::runtime_error("cannot write " + path_prefix + "_summary.json");
    summary << json.str() << "\n";

    std::ofstream csv(path_prefix + "_passengers.csv");
    if (!csv) throw std::runtime_error("cannot write " + path_prefix + "_passengers.csv");
    csv << "passenger_id,request_time,pickup_time,waiting_s,mode\n";
    for (const PassengerOutcome& o : metrics.outcomes)
        csv << o.passenger_id << ',' << fixed6(static_cast<double>(o.request_time_ms) / 1000.0)
            << ',' << fixed6(static_cast<double>(o.pickup_time_ms) / 1000.0) << ','
            << fixed6(o.waiting_s) << ',' << dispatch_mode_name(o.mode) << '\n';

    if (events != nullptr) {
        std::ofstream log(path_prefix + "_events.csv");
        if (!log) throw std::runtime_error("cannot write " + path_prefix + "_events.csv");
        log << "time,event,vehicle_id,passenger_id,x,y\n";
        for (const SimEvent& e : *events)
            log << fixed6(static_cast<double>(e.time_ms) / 1000.0) << ',' << e.type << ','
                << e.vehicle << ',' << e.passenger << ',' << fixed6(e.x) << ',' << fixed6(e.y)
                << '\n';
    }
}

}  // namespace pmod
