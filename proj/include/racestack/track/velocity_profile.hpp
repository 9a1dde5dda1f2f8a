#pragma once

#include "racestack/track/geometry.hpp"

#include <vector>

namespace racestack::track
{

struct VelocityProfileParams
{
    double a_lat_max = 18.0;      // m/s^2
    double a_lon_accel_max = 6.0; // m/s^2
    double a_lon_brake_max = 10.0;
    double v_cap = 60.0; // m/s

    void validate() const;
};

/// Curvature-limited speed with forward (traction) and backward (braking) passes.
/// Closed paths wrap around the lap.
std::vector<double> compute_velocity_profile(std::span<const Point2> path, bool closed,
                                             const VelocityProfileParams& p = {});

/// Same passes over precomputed curvature and segment lengths (ds[i] joins i and i+1).
std::vector<double> velocity_profile_from_curvature(std::span<const double> curvature, std::span<const double> ds,
                                                    bool closed, const VelocityProfileParams& p);

} // namespace racestack::track
