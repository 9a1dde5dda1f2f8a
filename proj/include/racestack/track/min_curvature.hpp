#pragma once

#include "racestack/track/boundaries.hpp"

#include <vector>

namespace racestack::track
{

struct MinCurvatureOptions
{
    double margin = 1.5;      // m kept from each edge
    int max_iterations = 200; // Gauss-Newton steps
    double kkt_tol = 1e-8;
    double rel_tol = 1e-5; // stop when an iteration improves the objective by less than this fraction
};

struct MinCurvatureResult
{
    Polyline path;
    std::vector<double> offsets; // along the centerline normal, positive to the left
    double objective = 0.0;      // sum of squared discrete curvature
    double centerline_objective = 0.0;
    int iterations = 0;
};

/// Lateral-offset minimum-curvature path. Each Gauss-Newton step linearizes the discrete
/// curvature in the offsets and solves a box-constrained QP.
/// Throws ConstraintError when the margin leaves no room at some station and
/// OptimizationError when the QP does not reach the KKT tolerance.
MinCurvatureResult optimize_min_curvature(const TrackBoundaries& b, const MinCurvatureOptions& options = {});

} // namespace racestack::track
