#pragma once

#include <cmath>

namespace pmod {

// Planar point in meters. Callers pre-project geographic coordinates
// (e.g. a local equirectangular projection) before building a graph.
struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

inline Point2 operator+(const Point2& a, const Point2& b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(const Point2& a, const Point2& b) { return {a.x - b.x, a.y - b.y}; }
inline bool operator==(const Point2& a, const Point2& b) { return a.x == b.x && a.y == b.y; }

inline double distance(const Point2& a, const Point2& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace pmod
