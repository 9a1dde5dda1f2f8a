#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace racestack::track
{

using Point2 = Eigen::Vector2d;
using Polyline = std::vector<Point2>;

inline double cross(const Point2& a, const Point2& b) noexcept { return a.x() * b.y() - a.y() * b.x(); }

/// Left-hand unit normal of a direction.
inline Point2 left_normal(const Point2& dir) noexcept
{
    const Point2 t = dir.normalized();
    return {-t.y(), t.x()};
}

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) noexcept
{
    a = std::remainder(a, 2.0 * std::numbers::pi);
    if (a <= -std::numbers::pi)
    {
        a += 2.0 * std::numbers::pi;
    }
    return a;
}

/// Signed curvature of the circle through three points (Menger curvature).
inline double menger_curvature(const Point2& a, const Point2& b, const Point2& c) noexcept
{
    const double ab = (b - a).norm();
    const double bc = (c - b).norm();
    const double ca = (a - c).norm();
    const double denom = ab * bc * ca;
    if (denom <= 0.0)
    {
        return 0.0;
    }
    return 2.0 * cross(b - a, c - b) / denom;
}

/// Per-vertex curvature. Open polylines copy the neighbouring value at both ends.
std::vector<double> discrete_curvature(std::span<const Point2> pts, bool closed);

/// Sum of squared discrete curvature over the vertices where it is defined.
double curvature_objective(std::span<const Point2> pts, bool closed);

/// Cumulative chord length; closed polylines also get the closing segment as the last entry.
std::vector<double> cumulative_length(std::span<const Point2> pts, bool closed);

/// Resamples to `count` points evenly spaced in arc length (closed: the ring,
/// excluding the repeated endpoint).
Polyline resample(std::span<const Point2> pts, bool closed, std::size_t count);

} // namespace racestack::track
