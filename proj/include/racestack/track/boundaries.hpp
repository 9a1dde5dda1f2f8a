#pragma once

#include "racestack/track/geometry.hpp"

#include <filesystem>
#include <vector>

namespace racestack::track
{

/// Bank angle per centerline station. The angle is the roll of the track surface
/// about the direction of travel (positive raises the left edge), piecewise linear
/// between stations.
struct BankingMap
{
    std::vector<double> station; // m, strictly increasing
    std::vector<double> bank;    // rad

    bool empty() const noexcept { return station.empty(); }
    /// `length` is the lap length used to wrap closed tracks; open tracks clamp.
    double at(double s, double length, bool closed) const;
};

/// Left/right track edges with one-to-one station correspondence. Closed tracks
/// store each ring once, without repeating the first point.
struct TrackBoundaries
{
    Polyline left;
    Polyline right;
    BankingMap banking;
    bool closed = false;

    std::size_t size() const noexcept { return left.size(); }
};

struct Centerline
{
    Polyline points;
    Polyline normals;          // unit, pointing to the left edge
    std::vector<double> half_left;  // distance to the left edge along the normal
    std::vector<double> half_right; // distance to the right edge along the normal
    std::vector<double> station;    // cumulative length, size() + closed
    std::vector<double> bank;       // per point, rad
    bool closed = false;

    double length() const { return station.back(); }
};

enum class BoundaryFormat
{
    Kml,
    Csv,
};

struct BoundaryOptions
{
    double spacing = 2.0;       // m between resampled stations
    double vehicle_width = 2.0; // m, minimum signed width
};

inline constexpr std::size_t kMinBoundaryPoints = 16;

/// Reads KML (two LineStrings, lon/lat) or CSV (`x_left,y_left,x_right,y_right[,bank]`),
/// converts to the local ENU frame (first point is the origin for KML), resamples and
/// validates. Throws ParseError or GeometryError.
TrackBoundaries load_boundaries(const std::filesystem::path& path, BoundaryFormat format,
                                const BoundaryOptions& options = {});

/// Resamples raw edges to uniform station spacing and validates. Rings whose first and
/// last points coincide (1e-6 m) are treated as closed.
TrackBoundaries make_boundaries(const Polyline& left, const Polyline& right, const BankingMap& banking,
                                const BoundaryOptions& options = {});

/// Throws GeometryError with the first station whose signed width is not above `vehicle_width`.
void validate_boundaries(const TrackBoundaries& b, double vehicle_width);

/// Signed width (left minus right along the centerline normal) per station.
std::vector<double> signed_widths(const TrackBoundaries& b);

Centerline make_centerline(const TrackBoundaries& b);

/// Twiced moving average (2S - S*S) of both edges. `window` must be odd; 1 is the
/// identity. Throws GeometryError if any width moves by more than 5%.
TrackBoundaries smooth_boundaries(const TrackBoundaries& b, int window);

/// Geodetic (WGS-84, degrees, metres) to local East-North-Up about an origin.
Point2 geodetic_to_enu(double lat_deg, double lon_deg, double alt, double lat0_deg, double lon0_deg, double alt0);

} // namespace racestack::track
