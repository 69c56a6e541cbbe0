#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pmod/assignment.hpp"
#include "pmod/data_io.hpp"

using namespace pmod;

namespace {

std::string cli_path() {
    const char* env = std::getenv("PMOD_CLI");
    REQUIRE_MESSAGE(env != nullptr, "PMOD_CLI must point at the pmod binary");
    return env;
}

struct CommandResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

CommandResult run_cli(const std::string& args) {
    const std::string command = cli_path() + " " + args + " 2>&1";
    std::array<char, 1024> chunk{};
    CommandResult result;
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (fgets(chunk.data(), chunk.size(), pipe) != nullptr) result.output += chunk.data();
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("pmod_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static inline int counter = 0;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

TEST_CASE("help exits 0, unknown flags exit 2") {
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("simulate --help").exit_code == 0);
    CHECK(run_cli("--definitely-not-a-flag").exit_code == 2);
    CHECK(run_cli("assign --nodes a --edges b --no-such-option 1").exit_code == 2);
    CHECK(run_cli("").exit_code == 2);  // missing subcommand
}

TEST_CASE("build-graph writes a valid grid") {
    TempDir dir;
    const CommandResult r = run_cli("build-graph --grid 5,5,100,10 --out-nodes " +
                                    dir.file("nodes.csv") + " --out-edges " + dir.file("edges.csv"));
    CHECK(r.exit_code == 0);
    const RoadGraph g = read_graph_csv(dir.file("nodes.csv"), dir.file("edges.csv"));
    CHECK(g.vertex_count() == 25);
    CHECK(g.edge_count() == 80);
}

TEST_CASE("build-graph rejects a disconnected graph with a diagnostic") {
    TempDir dir;
    {
        std::ofstream nodes(dir.file("n.csv"));
        nodes << "id,x,y\n0,0,0\n1,100,0\n2,200,0\n";
        std::ofstream edges(dir.file("e.csv"));
        edges << "src,dst,length,weight\n0,1,100,10\n1,0,100,10\n1,2,100,10\n";
    }
    const CommandResult r = run_cli("build-graph --nodes " + dir.file("n.csv") + " --edges " +
                                    dir.file("e.csv") + " --out-nodes " + dir.file("on.csv") +
                                    " --out-edges " + dir.file("oe.csv"));
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("not strongly connected") != std::string::npos);
    CHECK(r.output.find("2") != std::string::npos);  // names the unreachable vertex
}

TEST_CASE("build-graph estimates weights from trips like the library") {
    TempDir dir;
    run_cli("build-graph --grid 3,3,100,10 --out-nodes " + dir.file("n.csv") + " --out-edges " +
            dir.file("e.csv"));
    {
        std::ofstream trips(dir.file("t.csv"));
        trips << "pickup_time,dropoff_time,pickup_x,pickup_y,dropoff_x,dropoff_y\n";
        trips << "0,50,0,0,200,0\n";    // 0 -> 2 in 50 s
        trips << "100,160,0,0,0,200\n"; // 0 -> 6 in 60 s
    }
    const CommandResult r = run_cli("build-graph --nodes " + dir.file("n.csv") + " --edges " +
                                    dir.file("e.csv") + " --trips " + dir.file("t.csv") +
                                    " --out-nodes " + dir.file("wn.csv") + " --out-edges " +
                                    dir.file("we.csv"));
    CHECK(r.exit_code == 0);
    const RoadGraph base = read_graph_csv(dir.file("n.csv"), dir.file("e.csv"));
    const TripParseResult trips = parse_trips(dir.file("t.csv"));
    const WeightEstimateResult oracle = estimate_edge_weights(base, trips.trips);
    const RoadGraph cli_graph = read_graph_csv(dir.file("wn.csv"), dir.file("we.csv"));
    REQUIRE(cli_graph.edge_count() == oracle.graph.edge_count());
    for (std::size_t e = 0; e < cli_graph.edge_count(); ++e)
        CHECK(cli_graph.edges()[e].weight_s ==
              doctest::Approx(oracle.graph.edges()[e].weight_s).epsilon(1e-6));
}

TEST_CASE("assign with vanishing noise matches the optimal pair set") {
    TempDir dir;
    run_cli("build-graph --grid 6,6,100,10 --out-nodes " + dir.file("n.csv") + " --out-edges " +
            dir.file("e.csv"));
    const std::string common = " --nodes " + dir.file("n.csv") + " --edges " + dir.file("e.csv") +
                               " --vehicles 0,7,14,21,35 --passengers 5,18,30 --seed 9";
    const CommandResult optimal = run_cli("assign --mode optimal" + common);
    const CommandResult private_run = run_cli("assign --mode private --epsilon 1e9" + common);
    REQUIRE(optimal.exit_code == 0);
    REQUIRE(private_run.exit_code == 0);
    const auto pairs_of = [](const std::string& output) {
        std::vector<std::string> pairs;
        std::stringstream in(output);
        std::string line;
        while (std::getline(in, line))
            if (line.find("->") != std::string::npos) pairs.push_back(line);
        return pairs;
    };
    CHECK(pairs_of(optimal.output) == pairs_of(private_run.output));
}

TEST_CASE("assign honors explicit redundancy like the library oracle") {
    TempDir dir;
    run_cli("build-graph --grid 3,3,100,10 --out-nodes " + dir.file("n.csv") + " --out-edges " +
            dir.file("e.csv"));
    const CommandResult r = run_cli("assign --mode private-redundant --redundancy 2 --epsilon 0.02"
                                    " --pmin 0 --seed 4 --random-vehicles 4 --random-passengers 2"
                                    " --nodes " +
                                    dir.file("n.csv") + " --edges " + dir.file("e.csv") + " --out " +
                                    dir.file("plan.json"));
    REQUIRE(r.exit_code == 0);
    const std::string json = read_file(dir.file("plan.json"));
    // 4 vehicles over 2 passengers at D=2: every vehicle is assigned.
    CHECK(std::count(json.begin(), json.end(), '>') == 0);
    std::size_t pairs = 0;
    for (std::size_t pos = json.find("\"vehicle\""); pos != std::string::npos;
         pos = json.find("\"vehicle\"", pos + 1))
        ++pairs;
    CHECK(pairs == 4);

    SUBCASE("invalid vertex ids error out") {
        const CommandResult bad = run_cli("assign --mode optimal --vehicles 999 --passengers 1 "
                                          "--nodes " +
                                          dir.file("n.csv") + " --edges " + dir.file("e.csv"));
        CHECK(bad.exit_code == 1);
        CHECK(bad.output.find("out of range") != std::string::npos);
    }
}

TEST_CASE("simulate writes results and reruns byte-identically") {
    TempDir dir;
    run_cli("build-graph --grid 8,8,120,6 --out-nodes " + dir.file("n.csv") + " --out-edges " +
            dir.file("e.csv"));
    const std::string common = "simulate --nodes " + dir.file("n.csv") + " --edges " +
                               dir.file("e.csv") +
                               " --synthetic-demand 0.05,0.5 --mode private --epsilon 0.02"
                               " --seed 31 --events --out ";
    const CommandResult a = run_cli(common + dir.file("a"));
    const CommandResult b = run_cli(common + dir.file("b"));
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    CHECK(!read_file(dir.file("a_summary.json")).empty());
    CHECK(read_file(dir.file("a_summary.json")) == read_file(dir.file("b_summary.json")));
    CHECK(read_file(dir.file("a_passengers.csv")) == read_file(dir.file("b_passengers.csv")));
    CHECK(read_file(dir.file("a_events.csv")) == read_file(dir.file("b_events.csv")));
}

TEST_CASE("simulate accepts a trips demand trace") {
    TempDir dir;
    run_cli("build-graph --grid 5,5,100,10 --out-nodes " + dir.file("n.csv") + " --out-edges " +
            dir.file("e.csv"));
    {
        std::ofstream trips(dir.file("t.csv"));
        trips << "pickup_time,dropoff_time,pickup_x,pickup_y,dropoff_x,dropoff_y\n";
        for (int k = 0; k < 20; ++k)
            trips << 100 + 30 * k << ',' << 200 + 30 * k << ',' << 100 * (k % 5) << ",0,"
                  << 100 * (k % 4) << ",400\n";
    }
    const CommandResult r = run_cli("simulate --nodes " + dir.file("n.csv") + " --edges " +
                                    dir.file("e.csv") + " --demand " + dir.file("t.csv") +
                                    " --mode non-private --seed 3 --out " + dir.file("sim"));
    REQUIRE(r.exit_code == 0);
    const std::string json = read_file(dir.file("sim_summary.json"));
    CHECK(json.find("\"total_requests\": 20") != std::string::npos);
}

TEST_CASE("sweep emits a plot-ready table with a manifest") {
    TempDir dir;
    run_cli("build-graph --grid 6,6,100,10 --out-nodes " + dir.file("n.csv") + " --out-edges " +
            dir.file("e.csv"));
    const CommandResult r = run_cli("sweep --nodes " + dir.file("n.csv") + " --edges " +
                                    dir.file("e.csv") +
                                    " --epsilons 0.02,1.0 --D 1,2 --vehicles 8 --passengers 4"
                                    " --reps 3 --seed 11 --out " +
                                    dir.file("sweep.csv"));
    REQUIRE(r.exit_code == 0);
    const std::string table = read_file(dir.file("sweep.csv"));
    CHECK(table.find("# manifest {") != std::string::npos);
    CHECK(table.find("epsilon,D,mean_wait_s,mean_optimal_s,pct_increase") != std::string::npos);
    // 2 epsilons x 2 redundancies = 4 data rows
    CHECK(std::count(table.begin(), table.end(), '\n') == 6);

    // The eps -> infinity-ish column approaches the optimal waiting time.
    std::stringstream in(table);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    double inc_eps_tiny = -1.0, inc_eps_huge = -1.0;
    while (std::getline(in, line)) {
        std::stringstream row(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (fields[0].substr(0, 4) == "0.02" && fields[1] == "1") inc_eps_tiny = std::stod(fields[4]);
        if (fields[0].substr(0, 4) == "1.00" && fields[1] == "1") inc_eps_huge = std::stod(fields[4]);
    }
    REQUIRE(inc_eps_tiny >= 0.0);
    REQUIRE(inc_eps_huge >= -1e-9);
    CHECK(inc_eps_huge <= inc_eps_tiny + 1e-9);
    CHECK(inc_eps_huge <= 1.0);  // percent
}
