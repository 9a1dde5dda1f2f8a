#include "racestack/track/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace racestack::track
{

std::vector<double> discrete_curvature(std::span<const Point2> pts, bool closed)
{
    const std::size_t n = pts.size();
    std::vector<double> k(n, 0.0);
    if (n < 3)
    {
        return k;
    }
    if (closed)
    {
        for (std::size_t i = 0; i < n; ++i)
        {
            k[i] = menger_curvature(pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
        }
        return k;
    }
    for (std::size_t i = 1; i + 1 < n; ++i)
    {
        k[i] = menger_curvature(pts[i - 1], pts[i], pts[i + 1]);
    }
    k.front() = k[1];
    k.back() = k[n - 2];
    return k;
}

double curvature_objective(std::span<const Point2> pts, bool closed)
{
    const std::size_t n = pts.size();
    if (n < 3)
    {
        return 0.0;
    }
    const auto k = discrete_curvature(pts, closed);
    double sum = 0.0;
    const std::size_t first = closed ? 0 : 1;
    const std::size_t last = closed ? n : n - 1;
    for (std::size_t i = first; i < last; ++i)
    {
        sum += k[i] * k[i];
    }
    return sum;
}

std::vector<double> cumulative_length(std::span<const Point2> pts, bool closed)
{
    std::vector<double> s(pts.size() + (closed ? 1 : 0), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i)
    {
        s[i] = s[i - 1] + (pts[i] - pts[i - 1]).norm();
    }
    if (closed && !pts.empty())
    {
        s.back() = s[pts.size() - 1] + (pts.front() - pts.back()).norm();
    }
    return s;
}

Polyline resample(std::span<const Point2> pts, bool closed, std::size_t count)
{
    if (pts.size() < 2 || count < 2)
    {
        throw std::invalid_argument("resample needs at least two points");
    }
    const auto s = cumulative_length(pts, closed);
    const double total = s.back();
    Polyline out;
    out.reserve(count);
    const double step = closed ? total / static_cast<double>(count) : total / static_cast<double>(count - 1);
    std::size_t seg = 0;
    const std::size_t nseg = closed ? pts.size() : pts.size() - 1;
    for (std::size_t i = 0; i < count; ++i)
    {
        const double target = std::min(step * static_cast<double>(i), total);
        while (seg + 1 < nseg && s[seg + 1] < target)
        {
            ++seg;
        }
        const Point2& a = pts[seg];
        const Point2& b = pts[(seg + 1) % pts.size()];
        const double len = s[seg + 1] - s[seg];
        const double u = len > 0.0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
        out.push_back(a + u * (b - a));
    }
    return out;
}

} // namespace racestack::track
