#include "racestack/track/velocity_profile.hpp"

#include "racestack/errors.hpp"

#include <algorithm>
#include <cmath>

namespace racestack::track
{

void VelocityProfileParams::validate() const
{
    if (!(a_lat_max > 0.0 && a_lon_accel_max > 0.0 && a_lon_brake_max > 0.0 && v_cap > 0.0))
    {
        throw ConfigError("velocity profile limits must be strictly positive");
    }
}

std::vector<double> velocity_profile_from_curvature(std::span<const double> curvature, std::span<const double> ds,
                                                    bool closed, const VelocityProfileParams& p)
{
    p.validate();
    const std::size_t n = curvature.size();
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        v[i] = std::min(p.v_cap, std::sqrt(p.a_lat_max / std::max(std::abs(curvature[i]), 1e-9)));
    }
    if (n < 2)
    {
        return v;
    }
    // Start both passes at the slowest point so the wrap is consistent on closed paths.
    const std::size_t start = closed ? static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin()) : 0;
    const std::size_t steps = closed ? n : n - 1;
    for (std::size_t k = 0; k < steps; ++k)
    {
        const std::size_t i = (start + k) % n;
        const std::size_t j = (i + 1) % n;
        v[j] = std::min(v[j], std::sqrt(v[i] * v[i] + 2.0 * p.a_lon_accel_max * ds[i]));
    }
    const std::size_t bstart = closed ? start : n - 1;
    for (std::size_t k = 0; k < steps; ++k)
    {
        const std::size_t j = (bstart + n - k) % n;
        const std::size_t i = (j + n - 1) % n;
        v[i] = std::min(v[i], std::sqrt(v[j] * v[j] + 2.0 * p.a_lon_brake_max * ds[i]));
    }
    return v;
}

std::vector<double> compute_velocity_profile(std::span<const Point2> path, bool closed, const VelocityProfileParams& p)
{
    if (path.size() < 3)
    {
        throw GeometryError("velocity profile needs at least three points", static_cast<long>(path.size()));
    }
    const auto k = discrete_curvature(path, closed);
    std::vector<double> ds(path.size(), 0.0);
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
    {
        ds[i] = (path[i + 1] - path[i]).norm();
    }
    if (closed)
    {
        ds.back() = (path.front() - path.back()).norm();
    }
    return velocity_profile_from_curvature(k, ds, closed, p);
}

} // namespace racestack::track
