#include "pmod/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace pmod {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest-augmenting-path LSAP solver (Jonker-Volgenant style) for
// n rows <= m cols; every row gets matched. Forbidden entries arrive as a
// large finite sentinel so the dual updates stay well conditioned.
struct LsapResult {
    std::vector<int> col_of_row;
    std::vector<int> row_of_col;
    std::vector<double> u, v;  // optimal duals
};

LsapResult lsap_solve(int n, int m, const std::function<double(int, int)>& a) {
    LsapResult res;
    res.u.assign(static_cast<std::size_t>(n), 0.0);
    res.v.assign(static_cast<std::size_t>(m) + 1, 0.0);
    res.row_of_col.assign(static_cast<std::size_t>(m) + 1, -1);  // col m is the virtual start column
    std::vector<int> way(static_cast<std::size_t>(m) + 1, -1);
    std::vector<double> minv(static_cast<std::size_t>(m));
    std::vector<char> used(static_cast<std::size_t>(m) + 1);
    for (int i = 0; i < n; ++i) {
        res.row_of_col[static_cast<std::size_t>(m)] = i;
        int j0 = m;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), char{0});
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = res.row_of_col[static_cast<std::size_t>(j0)];
            int j1 = -1;
            double delta = kInf;
            for (int j = 0; j < m; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = a(i0, j) - res.u[static_cast<std::size_t>(i0)] - res.v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    res.u[static_cast<std::size_t>(res.row_of_col[static_cast<std::size_t>(j)])] += delta;
                    res.v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (res.row_of_col[static_cast<std::size_t>(j0)] != -1);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            res.row_of_col[static_cast<std::size_t>(j0)] = res.row_of_col[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != m);
    }
    res.row_of_col.pop_back();  // drop the virtual column
    res.col_of_row.assign(static_cast<std::size_t>(n), -1);
    for (int j = 0; j < m; ++j)
        if (res.row_of_col[static_cast<std::size_t>(j)] != -1)
            res.col_of_row[static_cast<std::size_t>(res.row_of_col[static_cast<std::size_t>(j)])] = j;
    return res;
}

// Matched cost summed in fixed (row-ascending) order, so equal matchings
// always compare bit-identically.
double matching_cost(int n, const std::vector<int>& col_of_row,
                     const std::function<double(int, int)>& cost) {
    double total = 0.0;
    for (int r = 0; r < n; ++r) total += cost(r, col_of_row[static_cast<std::size_t>(r)]);
    return total;
}

// Moves the incumbent matching to one containing (row, col) using only
// tight (zero-reduced-cost) edges, keeping fixed pairs intact and leaving
// excluded columns untouched. Returns false when impossible.
bool rematch_with_pair(int n, int row, int col, std::vector<int>& col_of_row,
                       std::vector<int>& row_of_col, const std::vector<char>& fixed_col,
                       const std::vector<char>& excluded_col,
                       const std::function<bool(int, int)>& tight) {
    if (col_of_row[static_cast<std::size_t>(row)] == col) return true;
    const int old_col = col_of_row[static_cast<std::size_t>(row)];
    const int displaced = row_of_col[static_cast<std::size_t>(col)];
    col_of_row[static_cast<std::size_t>(row)] = col;
    row_of_col[static_cast<std::size_t>(col)] = row;
    if (old_col != -1) row_of_col[static_cast<std::size_t>(old_col)] = -1;
    if (displaced == -1) return true;
    // Re-seat the displaced row via an alternating path over tight edges.
    const int m = static_cast<int>(row_of_col.size());
    std::vector<char> visited(static_cast<std::size_t>(m), 0);
    visited[static_cast<std::size_t>(col)] = 1;
    std::function<bool(int)> augment = [&](int r) -> bool {
        for (int j = 0; j < m; ++j) {
            if (visited[static_cast<std::size_t>(j)] || fixed_col[static_cast<std::size_t>(j)] ||
                excluded_col[static_cast<std::size_t>(j)] || !tight(r, j))
                continue;
            visited[static_cast<std::size_t>(j)] = 1;
            const int occupant = row_of_col[static_cast<std::size_t>(j)];
            if (occupant == -1 || augment(occupant)) {
                col_of_row[static_cast<std::size_t>(r)] = j;
                row_of_col[static_cast<std::size_t>(j)] = r;
                return true;
            }
        }
        return false;
    };
    (void)n;
    return augment(displaced);
}

}  // namespace

CostMatrix::CostMatrix(int rows, int cols, double fill) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("CostMatrix dimensions must be >= 1");
    cells_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill);
}

bool operator==(const Assignment& a, const Assignment& b) {
    return a.mode == b.mode && a.pairs == b.pairs;
}

Assignment hungarian(const CostMatrix& c) {
    const int rows = c.rows(), cols = c.cols();
    double max_finite = 0.0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            const double x = c.at(i, j);
            if (std::isnan(x) || x < 0.0)
                throw std::invalid_argument("cost matrix entries must be >= 0 or +inf");
            if (std::isfinite(x)) max_finite = std::max(max_finite, x);
        }

    // Solve with the smaller side as rows; remember the orientation so pair
    // ordering below stays in (vehicle, passenger) terms.
    const bool transposed = rows > cols;
    const int n = transposed ? cols : rows;
    const int m = transposed ? rows : cols;
    const auto orig = [&](int r, int j) { return transposed ? c.at(j, r) : c.at(r, j); };
    const double big = (max_finite + 1.0) * (static_cast<double>(n) + 1.0);
    const auto solver_cost = [&](int r, int j) {
        const double x = orig(r, j);
        return std::isfinite(x) ? x : big;
    };

    LsapResult sol = lsap_solve(n, m, solver_cost);
    for (int r = 0; r < n; ++r)
        if (!std::isfinite(orig(r, sol.col_of_row[static_cast<std::size_t>(r)])))
            throw std::runtime_error("no finite-cost complete matching exists");

    // Canonicalize to the lexicographically smallest optimal pair set.
    // Optimal matchings live on tight edges of the optimal duals; decide
    // vehicles in ascending order, validating each candidate swap against
    // the optimal value.
    const double tol = 1e-9 * (1.0 + max_finite);
    const auto tight = [&](int r, int j) {
        const double x = orig(r, j);
        if (!std::isfinite(x)) return false;
        return std::abs(x - sol.u[static_cast<std::size_t>(r)] - sol.v[static_cast<std::size_t>(j)]) <= tol;
    };
    const double optimum = matching_cost(n, sol.col_of_row, orig);
    const double cost_tol = 1e-9 * (1.0 + std::abs(optimum));
    std::vector<char> fixed_col(static_cast<std::size_t>(m), 0);
    std::vector<char> fixed_row(static_cast<std::size_t>(n), 0);
    std::vector<char> excluded_col(static_cast<std::size_t>(m), 0);

    // Exact fallback when a tight-edge witness came back suboptimal (only
    // possible with unmatched columns): re-solve with (r, j) and the fixed
    // pairs pinned, and accept the candidate iff the optimum is preserved.
    const auto forced_solve = [&](int r, int j) -> bool {
        std::vector<int> free_rows, open_cols;
        for (int rr = 0; rr < n; ++rr)
            if (rr != r && !fixed_row[static_cast<std::size_t>(rr)]) free_rows.push_back(rr);
        for (int jj = 0; jj < m; ++jj)
            if (jj != j && !fixed_col[static_cast<std::size_t>(jj)] &&
                !excluded_col[static_cast<std::size_t>(jj)])
                open_cols.push_back(jj);
        if (free_rows.size() > open_cols.size()) return false;
        std::vector<int> col_of_row(static_cast<std::size_t>(n), -1);
        for (int rr = 0; rr < n; ++rr)
            if (fixed_row[static_cast<std::size_t>(rr)])
                col_of_row[static_cast<std::size_t>(rr)] = sol.col_of_row[static_cast<std::size_t>(rr)];
        col_of_row[static_cast<std::size_t>(r)] = j;
        if (!free_rows.empty()) {
            const auto sub_cost = [&](int a, int b) {
                return solver_cost(free_rows[static_cast<std::size_t>(a)], open_cols[static_cast<std::size_t>(b)]);
            };
            LsapResult sub = lsap_solve(static_cast<int>(free_rows.size()),
                                        static_cast<int>(open_cols.size()), sub_cost);
            for (std::size_t a = 0; a < free_rows.size(); ++a) {
                const int jj = open_cols[static_cast<std::size_t>(sub.col_of_row[a])];
                if (!std::isfinite(orig(free_rows[a], jj))) return false;
                col_of_row[static_cast<std::size_t>(free_rows[a])] = jj;
            }
        }
        if (std::abs(matching_cost(n, col_of_row, orig) - optimum) > cost_tol) return false;
        sol.col_of_row = std::move(col_of_row);
        sol.row_of_col.assign(static_cast<std::size_t>(m), -1);
        for (int rr = 0; rr < n; ++rr)
            sol.row_of_col[static_cast<std::size_t>(sol.col_of_row[static_cast<std::size_t>(rr)])] = rr;
        return true;
    };

    const auto try_fix = [&](int r, int j) -> bool {
        std::vector<int> cand_col_of_row = sol.col_of_row;
        std::vector<int> cand_row_of_col = sol.row_of_col;
        if (!rematch_with_pair(n, r, j, cand_col_of_row, cand_row_of_col, fixed_col, excluded_col,
                               tight))
            return false;  // no tight matching holds (r, j), so no optimal one does
        if (std::abs(matching_cost(n, cand_col_of_row, orig) - optimum) > cost_tol)
            return forced_solve(r, j);
        sol.col_of_row = std::move(cand_col_of_row);
        sol.row_of_col = std::move(cand_row_of_col);
        return true;
    };

    if (!transposed) {
        // Vehicles are rows; each is matched. Pick the smallest workable
        // passenger for each vehicle in turn.
        for (int r = 0; r < n; ++r) {
            for (int j = 0; j < m; ++j) {
                if (fixed_col[static_cast<std::size_t>(j)] || !tight(r, j)) continue;
                if (try_fix(r, j)) {
                    fixed_col[static_cast<std::size_t>(j)] = 1;
                    fixed_row[static_cast<std::size_t>(r)] = 1;
                    break;
                }
            }
        }
    } else {
        // Vehicles are columns and may stay unmatched. Matching a vehicle
        // beats leaving it idle in lexicographic order, so try passengers
        // in ascending order and exclude the vehicle if none works.
        for (int vcol = 0; vcol < m; ++vcol) {
            bool fixed = false;
            for (int r = 0; r < n && !fixed; ++r) {
                if (fixed_row[static_cast<std::size_t>(r)] || !tight(r, vcol)) continue;
                if (try_fix(r, vcol)) {
                    fixed_row[static_cast<std::size_t>(r)] = 1;
                    fixed_col[static_cast<std::size_t>(vcol)] = 1;
                    fixed = true;
                }
            }
            if (!fixed) excluded_col[static_cast<std::size_t>(vcol)] = 1;
        }
    }

    Assignment out;
    out.mode = AssignmentMode::non_redundant;
    out.pairs.reserve(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) {
        const int j = sol.col_of_row[static_cast<std::size_t>(r)];
        out.pairs.emplace_back(transposed ? j : r, transposed ? r : j);
    }
    std::sort(out.pairs.begin(), out.pairs.end());
    return out;
}

double assignment_cost(const CostMatrix& c, const Assignment& a) {
    double total = 0.0;
    for (const auto& [i, j] : a.pairs) total += c.at(i, j);
    return total;
}

CostMatrix cost_matrix_true(const RoadGraph& g, std::span<const VertexId> vehicle_vertices,
                            std::span<const VertexId> passenger_vertices) {
    CostMatrix c(static_cast<int>(vehicle_vertices.size()), static_cast<int>(passenger_vertices.size()));
    for (std::size_t j = 0; j < passenger_vertices.size(); ++j) {
        const std::vector<double>& to_j = g.times_to(passenger_vertices[j]);
        for (std::size_t i = 0; i < vehicle_vertices.size(); ++i)
            c.at(static_cast<int>(i), static_cast<int>(j)) = to_j[static_cast<std::size_t>(vehicle_vertices[i])];
    }
    return c;
}

CostMatrix cost_matrix_expected(const RoadGraph& g, std::span<const VertexPosterior> posteriors,
                                std::span<const VertexId> passenger_vertices) {
    CostMatrix c(static_cast<int>(posteriors.size()), static_cast<int>(passenger_vertices.size()));
    for (std::size_t j = 0; j < passenger_vertices.size(); ++j) {
        const std::vector<double>& to_j = g.times_to(passenger_vertices[j]);
        for (std::size_t i = 0; i < posteriors.size(); ++i) {
            double expected = 0.0;
            for (const PosteriorEntry& e : posteriors[i].entries)
                expected += e.probability * to_j[static_cast<std::size_t>(e.vertex)];
            c.at(static_cast<int>(i), static_cast<int>(j)) = expected;
        }
    }
    return c;
}

CostMatrix cost_matrix_expected(const RoadGraph& g, std::span<const Point2> reported_points,
                                std::span<const VertexId> passenger_vertices, double eps,
                                double p_min) {
    const PlanarLaplace mechanism(eps);
    std::vector<VertexPosterior> posteriors;
    posteriors.reserve(reported_points.size());
    for (const Point2& p : reported_points)
        posteriors.push_back(posterior_over_vertices(g, mechanism, p, p_min));
    return cost_matrix_expected(g, posteriors, passenger_vertices);
}

Assignment solve_batch(const CostMatrix& expected_costs) { return hungarian(expected_costs); }

SurvivalFunction::SurvivalFunction(std::vector<double> support, std::vector<double> survival)
    : support_(std::move(support)), survival_(std::move(survival)) {
    if (support_.size() != survival_.size())
        throw std::invalid_argument("SurvivalFunction: support/survival size mismatch");
}

SurvivalFunction SurvivalFunction::from_outcomes(std::vector<std::pair<double, double>> value_prob) {
    std::sort(value_prob.begin(), value_prob.end());
    std::vector<double> support, survival;
    double remaining = 1.0;
    for (std::size_t k = 0; k < value_prob.size();) {
        const double value = value_prob[k].first;
        if (!std::isfinite(value)) throw std::invalid_argument("waiting times must be finite");
        double mass = 0.0;
        while (k < value_prob.size() && value_prob[k].first == value) mass += value_prob[k++].second;
        remaining -= mass;
        support.push_back(value);
        survival.push_back(std::max(0.0, remaining));
    }
    return SurvivalFunction(std::move(support), std::move(survival));
}

double SurvivalFunction::expected_value() const {
    double expected = 0.0, prev_survival = 1.0;
    for (std::size_t k = 0; k < support_.size(); ++k) {
        expected += support_[k] * (prev_survival - survival_[k]);
        prev_survival = survival_[k];
    }
    return expected;
}

std::pair<double, SurvivalFunction> expected_min_waiting(const SurvivalFunction& sf,
                                                         const VertexPosterior& posterior,
                                                         std::span<const double> time_to_passenger) {
    std::vector<std::pair<double, double>> outcomes;
    outcomes.reserve(posterior.entries.size());
    for (const PosteriorEntry& e : posterior.entries)
        outcomes.emplace_back(time_to_passenger[static_cast<std::size_t>(e.vertex)], e.probability);
    SurvivalFunction fresh = SurvivalFunction::from_outcomes(std::move(outcomes));
    if (sf.empty()) {
        const double expected = fresh.expected_value();
        return {expected, std::move(fresh)};
    }

    // Merge the two supports; P(min >= t) factorizes by independence.
    std::vector<double> merged;
    merged.reserve(sf.support().size() + fresh.support().size());
    std::merge(sf.support().begin(), sf.support().end(), fresh.support().begin(),
               fresh.support().end(), std::back_inserter(merged));
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());

    // P(X >= t) for each merged point: the survival just below t.
    const auto at_least = [](const SurvivalFunction& x, const std::vector<double>& ts) {
        std::vector<double> q(ts.size(), 1.0);
        std::size_t idx = 0;
        for (std::size_t k = 0; k < ts.size(); ++k) {
            while (idx < x.support().size() && x.support()[idx] < ts[k]) ++idx;
            q[k] = idx == 0 ? 1.0 : x.survival()[idx - 1];
        }
        return q;
    };
    const std::vector<double> qa = at_least(sf, merged);
    const std::vector<double> qb = at_least(fresh, merged);

    double expected = 0.0;
    std::vector<double> support, survival;
    support.reserve(merged.size());
    survival.reserve(merged.size());
    for (std::size_t k = 0; k < merged.size(); ++k) {
        const double q_here = qa[k] * qb[k];
        const double q_next = k + 1 < merged.size() ? qa[k + 1] * qb[k + 1] : 0.0;
        const double mass = q_here - q_next;
        expected += merged[k] * mass;
        if (mass > 0.0) {
            support.push_back(merged[k]);
            survival.push_back(q_next);
        }
    }
    return {expected, SurvivalFunction(std::move(support), std::move(survival))};
}

double expected_min_oracle(std::span<const VertexPosterior> posteriors,
                           std::span<const double> time_to_passenger, std::uint64_t tuple_cap) {
    if (posteriors.empty()) throw std::invalid_argument("expected_min_oracle: no posteriors");
    std::uint64_t tuples = 1;
    for (const VertexPosterior& p : posteriors) {
        if (p.entries.empty()) throw std::invalid_argument("expected_min_oracle: empty posterior");
        if (tuples > tuple_cap / p.entries.size())
            throw std::runtime_error("expected_min_oracle: tuple count exceeds cap");
        tuples *= p.entries.size();
    }
    std::vector<std::size_t> odometer(posteriors.size(), 0);
    double expected = 0.0;
    for (std::uint64_t t = 0; t < tuples; ++t) {
        double prob = 1.0;
        double min_time = kInf;
        for (std::size_t v = 0; v < posteriors.size(); ++v) {
            const PosteriorEntry& e = posteriors[v].entries[odometer[v]];
            prob *= e.probability;
            min_time = std::min(min_time, time_to_passenger[static_cast<std::size_t>(e.vertex)]);
        }
        expected += prob * min_time;
        for (std::size_t v = 0; v < odometer.size(); ++v) {
            if (++odometer[v] < posteriors[v].entries.size()) break;
            odometer[v] = 0;
        }
    }
    return expected;
}

double RedundantPlan::total_expected_waiting() const {
    double total = 0.0;
    for (const double w : expected_waiting_s) total += w;
    return total;
}

RedundantPlan redundant_assign(const RoadGraph& g, std::span<const VertexPosterior> posteriors,
                               std::span<const VertexId> passenger_vertices, int redundancy) {
    const int n = static_cast<int>(posteriors.size());
    const int m = static_cast<int>(passenger_vertices.size());
    if (redundancy < 1) throw std::invalid_argument("redundant_assign: redundancy must be >= 1");
    if (n < m)
        throw std::runtime_error("redundant_assign: needs at least one vehicle per passenger");

    RedundantPlan plan;
    plan.redundancy = redundancy;
    plan.assigned_vehicles.resize(static_cast<std::size_t>(m));
    plan.expected_waiting_s.assign(static_cast<std::size_t>(m), 0.0);
    std::vector<SurvivalFunction> min_waiting(static_cast<std::size_t>(m));
    std::vector<char> assigned(static_cast<std::size_t>(n), 0);

    const auto correlated_with_crew = [&](int i, int j) {
        for (const int z : plan.assigned_vehicles[static_cast<std::size_t>(j)])
            if (posteriors[static_cast<std::size_t>(i)].center ==
                posteriors[static_cast<std::size_t>(z)].center)
                return true;
        return false;
    };

    const auto merge_round = [&](const Assignment& round_pairs) {
        for (const auto& [i, j] : round_pairs.pairs) {
            assigned[static_cast<std::size_t>(i)] = 1;
            plan.assignment.pairs.emplace_back(i, j);
            if (correlated_with_crew(i, j)) {
                // Same reported point as an existing crew member: the true
                // position coincides, the minimum cannot change.
                plan.assigned_vehicles[static_cast<std::size_t>(j)].push_back(i);
                continue;
            }
            plan.assigned_vehicles[static_cast<std::size_t>(j)].push_back(i);
            auto [expected, updated] =
                expected_min_waiting(min_waiting[static_cast<std::size_t>(j)],
                                     posteriors[static_cast<std::size_t>(i)],
                                     g.times_to(passenger_vertices[static_cast<std::size_t>(j)]));
            plan.expected_waiting_s[static_cast<std::size_t>(j)] = expected;
            min_waiting[static_cast<std::size_t>(j)] = std::move(updated);
        }
    };

    merge_round(hungarian(cost_matrix_expected(g, posteriors, passenger_vertices)));
    plan.rounds_completed = 1;

    for (int round = 2; round <= redundancy; ++round) {
        if (n < m * round) break;
        CostMatrix costs(n, m);
        for (int j = 0; j < m; ++j) {
            const std::vector<double>& to_j = g.times_to(passenger_vertices[static_cast<std::size_t>(j)]);
            for (int i = 0; i < n; ++i) {
                if (assigned[static_cast<std::size_t>(i)]) {
                    costs.at(i, j) = CostMatrix::forbidden;
                    continue;
                }
                // A candidate that reported the same point as an existing
                // crew member is not an independent draw; its true position
                // coincides, so it cannot improve the minimum.
                costs.at(i, j) =
                    correlated_with_crew(i, j)
                        ? plan.expected_waiting_s[static_cast<std::size_t>(j)]
                        : expected_min_waiting(min_waiting[static_cast<std::size_t>(j)],
                                               posteriors[static_cast<std::size_t>(i)], to_j)
                              .first;
            }
        }
        merge_round(hungarian(costs));
        ++plan.rounds_completed;
    }

    std::sort(plan.assignment.pairs.begin(), plan.assignment.pairs.end());
    plan.assignment.mode =
        plan.rounds_completed > 1 ? AssignmentMode::redundant : AssignmentMode::non_redundant;
    return plan;
}

RedundantPlan redundant_assign(const RoadGraph& g, std::span<const Point2> reported_points,
                               std::span<const VertexId> passenger_vertices, int redundancy,
                               double eps, double p_min) {
    const PlanarLaplace mechanism(eps);
    std::vector<VertexPosterior> posteriors;
    posteriors.reserve(reported_points.size());
    for (const Point2& p : reported_points)
        posteriors.push_back(posterior_over_vertices(g, mechanism, p, p_min));
    RedundantPlan plan = redundant_assign(g, posteriors, passenger_vertices, redundancy);
    plan.p_min = p_min;
    return plan;
}

}  // namespace pmod
