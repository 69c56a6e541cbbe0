#include "pmod/planar_laplace.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pmod {

double lambert_w_lower(double z) {
    constexpr double inv_e = 1.0 / std::numbers::e;
    if (z < -inv_e - 1e-15 || z >= 0.0)
        throw std::domain_error("lambert_w_lower: z outside [-1/e, 0)");
    // Initial guess: series around the branch point for z near -1/e,
    // asymptotic log form near 0-.
    double w;
    if (z < -0.25) {
        const double radicand = std::max(0.0, 2.0 * (1.0 + std::numbers::e * z));
        const double p = -std::sqrt(radicand);
        w = -1.0 + p - p * p / 3.0 + 11.0 * p * p * p / 72.0;
        // Halley's denominator vanishes at the branch point; the series is
        // already accurate to O(p^4) there.
        if (radicand < 1e-10) return w;
    } else {
        const double l1 = std::log(-z);
        const double l2 = std::log(-l1);
        w = l1 - l2 + l2 / l1;
    }
    for (int it = 0; it < 64; ++it) {
        const double ew = std::exp(w);
        const double f = w * ew - z;
        const double fp = ew * (w + 1.0);
        const double fpp = ew * (w + 2.0);
        const double step = f / (fp - 0.5 * f * fpp / fp);  // Halley
        w -= step;
        if (std::abs(step) <= 1e-12 * std::max(1.0, std::abs(w))) break;
    }
    return w;
}

PlanarLaplace::PlanarLaplace(double eps) : eps_(eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("PlanarLaplace: eps must be > 0");
}

double PlanarLaplace::pdf(const Point2& center, const Point2& query) const {
    return eps_ * eps_ / (2.0 * std::numbers::pi) * std::exp(-eps_ * distance(center, query));
}

double PlanarLaplace::radial_cdf(double r) const {
    if (r <= 0.0) return 0.0;
    return 1.0 - (1.0 + eps_ * r) * std::exp(-eps_ * r);
}

Point2 PlanarLaplace::sample(const Point2& center, Rng& rng) const {
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double u = rng.uniform();
    // Invert C(r) = 1 - (1 + eps r) e^(-eps r): r = -(W_-1((u-1)/e) + 1)/eps.
    const double r = u == 0.0 ? 0.0 : -(lambert_w_lower((u - 1.0) / std::numbers::e) + 1.0) / eps_;
    return {center.x + r * std::cos(theta), center.y + r * std::sin(theta)};
}

double leakage(const PlanarLaplace& m, const Point2& x, const Point2& x_alt, const Point2& z) {
    // ln(pdf(x,z)/pdf(x_alt,z)) collapses to eps * (||z-x_alt|| - ||z-x||);
    // evaluate that form directly instead of exponentiating and taking logs.
    return m.eps() * std::abs(distance(z, x_alt) - distance(z, x));
}

std::pair<Point2, VertexId> obfuscate_vertex(const RoadGraph& g, const PlanarLaplace& m, VertexId v,
                                             Rng& rng) {
    const Point2 reported = m.sample(g.position(v), rng);
    return {reported, g.nearest_vertex(reported)};
}

VertexPosterior posterior_over_vertices(const RoadGraph& g, const PlanarLaplace& m,
                                        const Point2& reported, double p_min) {
    if (p_min < 0.0) throw std::invalid_argument("posterior_over_vertices: p_min must be >= 0");
    VertexPosterior posterior;
    posterior.eps = m.eps();
    posterior.center = reported;
    double total = 0.0;
    for (std::size_t v = 0; v < g.vertex_count(); ++v) {
        const double density = m.pdf(g.position(static_cast<VertexId>(v)), reported);
        if (density > p_min) {
            posterior.entries.push_back({static_cast<VertexId>(v), density});
            total += density;
        }
    }
    if (posterior.entries.empty())
        throw std::runtime_error(
            "posterior_over_vertices: empty support, every vertex density <= p_min");
    for (PosteriorEntry& e : posterior.entries) e.probability /= total;
    return posterior;
}

VertexPosterior posterior_with_fallback(const RoadGraph& g, const PlanarLaplace& m,
                                        const Point2& reported, double p_min) {
    try {
        return posterior_over_vertices(g, m, reported, p_min);
    } catch (const std::runtime_error&) {
        return posterior_over_vertices(g, m, reported, 0.0);
    }
}

}  // namespace pmod
