#pragma once

#include <utility>
#include <vector>

#include "pmod/geometry.hpp"
#include "pmod/rng.hpp"
#include "pmod/road_graph.hpp"

namespace pmod {

// Lambert W, lower branch W_-1 on [-1/e, 0). Halley iteration to 1e-12
// relative tolerance.
double lambert_w_lower(double z);

// Planar Laplace mechanism with inverse scale eps (units 1/meter): density
// (eps^2 / 2pi) * exp(-eps * r). Provides the geo-indistinguishability
// guarantee |ln P(z|x) - ln P(z|x')| <= eps * ||x - x'||.
class PlanarLaplace {
public:
    explicit PlanarLaplace(double eps);

    double eps() const { return eps_; }

    // Density at `query` for a mechanism centered at `center`, in 1/m^2.
    double pdf(const Point2& center, const Point2& query) const;

    // P(radius <= r) of the radial law: 1 - (1 + eps r) e^(-eps r).
    double radial_cdf(double r) const;

    // Exact inverse-CDF draw: uniform angle, radius via the Lambert-W
    // lower branch. Deterministic given the rng state.
    Point2 sample(const Point2& center, Rng& rng) const;

private:
    double eps_;
};

// |ln(pdf(x, z) / pdf(x_alt, z))|. Bounded by eps * ||x - x_alt|| for
// every triple (the geo-indistinguishability premise).
double leakage(const PlanarLaplace& m, const Point2& x, const Point2& x_alt, const Point2& z);

// A noisy position for vertex v: the raw reported point (what leaves the
// vehicle) and its nearest-vertex projection.
std::pair<Point2, VertexId> obfuscate_vertex(const RoadGraph& g, const PlanarLaplace& m, VertexId v,
                                             Rng& rng);

struct PosteriorEntry {
    VertexId vertex;
    double probability;
};

// Normalized weights over the graph vertices that could have produced a
// reported point: probability(k) proportional to P_L(reported | x_k, eps),
// restricted to vertices with raw density > p_min.
struct VertexPosterior {
    std::vector<PosteriorEntry> entries;  // sorted by vertex id, probabilities sum to 1
    double eps = 0.0;
    Point2 center;  // the reported point
};

// Throws std::runtime_error when no vertex clears p_min.
VertexPosterior posterior_over_vertices(const RoadGraph& g, const PlanarLaplace& m,
                                        const Point2& reported, double p_min);

// Same, but a reported point so remote that pruning empties the support
// falls back to the full (p_min = 0) posterior instead of throwing. Heavy
// Laplace tails make such points routine in long simulations.
VertexPosterior posterior_with_fallback(const RoadGraph& g, const PlanarLaplace& m,
                                        const Point2& reported, double p_min);

}  // namespace pmod
