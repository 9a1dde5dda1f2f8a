#pragma once

#include "racestack/track/boundaries.hpp"

namespace racestack::track
{

/// Four-corner speedway: two long straights, two short chutes, quarter-circle turns,
/// counter-clockwise. Station 0 is the middle of the front straight heading east.
struct OvalParams
{
    double straight = 1006.0; // m
    double chute = 201.0;     // m
    double turn_radius = 256.0;
    double width = 15.0;
    double bank_deg = 9.2; // turn banking magnitude, outside edge up
    double bank_ramp = 50.0;
    BoundaryOptions boundary;
};

TrackBoundaries make_oval(const OvalParams& p = {});

/// Analytic centerline length of the oval.
double oval_length(const OvalParams& p);

} // namespace racestack::track
