#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "pmod/planar_laplace.hpp"
#include "pmod/road_graph.hpp"

namespace pmod {

// Vehicle-by-passenger cost matrix, seconds. An infinite entry marks a
// forbidden pairing; the solver never places it in a matching.
class CostMatrix {
public:
    static constexpr double forbidden = std::numeric_limits<double>::infinity();

    CostMatrix(int rows, int cols, double fill = 0.0);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double& at(int i, int j) { return cells_[index(i, j)]; }
    double at(int i, int j) const { return cells_[index(i, j)]; }

private:
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(j); }
    int rows_;
    int cols_;
    std::vector<double> cells_;
};

enum class AssignmentMode { non_redundant, redundant };

struct Assignment {
    std::vector<std::pair<int, int>> pairs;  // (vehicle, passenger), sorted
    AssignmentMode mode = AssignmentMode::non_redundant;
};

bool operator==(const Assignment& a, const Assignment& b);

// Minimum-cost bipartite matching of size min(rows, cols). Rectangular
// matrices are handled natively (equivalent to square padding with a
// dominating sentinel whose matches are discarded). Among cost-optimal
// matchings, returns the one whose sorted pair list is lexicographically
// smallest. Throws std::runtime_error when no finite-cost complete
// matching exists, std::invalid_argument on negative or NaN entries.
Assignment hungarian(const CostMatrix& c);

// Sum of matched entries, in row order.
double assignment_cost(const CostMatrix& c, const Assignment& a);

// True costs c_ij = f(v_i, p_j).
CostMatrix cost_matrix_true(const RoadGraph& g, std::span<const VertexId> vehicle_vertices,
                            std::span<const VertexId> passenger_vertices);

// Expected costs under obfuscation: c~_ij = sum_k posterior_i(k) f(k, p_j).
CostMatrix cost_matrix_expected(const RoadGraph& g, std::span<const VertexPosterior> posteriors,
                                std::span<const VertexId> passenger_vertices);
CostMatrix cost_matrix_expected(const RoadGraph& g, std::span<const Point2> reported_points,
                                std::span<const VertexId> passenger_vertices, double eps,
                                double p_min);

// Batch assignment on expected costs (same mechanics as hungarian; named
// for the objective it minimizes).
Assignment solve_batch(const CostMatrix& expected_costs);

// Distribution of the current minimum waiting time of a passenger's
// assigned vehicles, kept exact over the discrete support of shortest-path
// times. survival(k) = P(min > support(k)).
class SurvivalFunction {
public:
    SurvivalFunction() = default;  // "no vehicle yet": min is +infinity
    SurvivalFunction(std::vector<double> support, std::vector<double> survival);

    bool empty() const { return support_.empty(); }
    const std::vector<double>& support() const { return support_; }
    const std::vector<double>& survival() const { return survival_; }
    double expected_value() const;

    static SurvivalFunction from_outcomes(std::vector<std::pair<double, double>> value_prob);

private:
    std::vector<double> support_;
    std::vector<double> survival_;
};

// E[min(W_current, W_i)] where W_current is described by `sf` and W_i takes
// value time_to_passenger[k] with probability posterior_i(k); the two are
// independent. Also returns the survival function of the new minimum. An
// empty `sf` means no vehicle is assigned yet, so the result is E[W_i].
std::pair<double, SurvivalFunction> expected_min_waiting(const SurvivalFunction& sf,
                                                         const VertexPosterior& posterior,
                                                         std::span<const double> time_to_passenger);

// Exact E[min] over the joint node tuple by full enumeration; reference
// oracle for expected_min_waiting. Throws std::runtime_error when the
// product of support sizes exceeds tuple_cap.
double expected_min_oracle(std::span<const VertexPosterior> posteriors,
                           std::span<const double> time_to_passenger,
                           std::uint64_t tuple_cap = 10'000'000);

// Result of the iterative redundant assignment: the union of all rounds'
// pairs plus the per-passenger vehicle sets and the expected minimum
// waiting times the algorithm computed for its own decisions.
struct RedundantPlan {
    Assignment assignment;
    std::vector<std::vector<int>> assigned_vehicles;  // Z_j, per passenger
    std::vector<double> expected_waiting_s;           // E[min over Z_j], per passenger
    int redundancy = 1;                               // requested D
    int rounds_completed = 0;
    double p_min = 0.0;

    double total_expected_waiting() const;
};

// Iterative Hungarian assignment under obfuscation: round 1 assigns every
// passenger one vehicle by expected cost; rounds 2..D add one more vehicle
// per passenger minimizing the expected minimum waiting, stopping early
// when fewer than M unassigned vehicles remain. Requires N >= M.
RedundantPlan redundant_assign(const RoadGraph& g, std::span<const VertexPosterior> posteriors,
                               std::span<const VertexId> passenger_vertices, int redundancy);
RedundantPlan redundant_assign(const RoadGraph& g, std::span<const Point2> reported_points,
                               std::span<const VertexId> passenger_vertices, int redundancy,
                               double eps, double p_min);

}  // namespace pmod
