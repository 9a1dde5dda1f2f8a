#pragma once

#include "racestack/track/boundaries.hpp"
#include "racestack/track/min_curvature.hpp"
#include "racestack/track/velocity_profile.hpp"

#include <array>
#include <filesystem>
#include <vector>

namespace racestack::track
{

struct RacelineSamples
{
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> v_ref;
    std::vector<double> bank; // empty or one per sample
    bool closed = false;

    std::size_t size() const noexcept { return x.size(); }
};

struct RacelinePoint
{
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
    double curvature = 0.0;
    double bank = 0.0;
    double v_ref = 0.0;
};

/// Quintic segment in the local parameter u = s - s0, u in [0, h].
struct QuinticSegment
{
    double s0 = 0.0;
    double h = 0.0;
    std::array<double, 6> cx{};
    std::array<double, 6> cy{};
};

class Raceline
{
public:
    Raceline() = default;

    RacelinePoint eval(double s) const;
    Point2 position(double s) const;
    Point2 first_derivative(double s) const;
    Point2 second_derivative(double s) const;

    /// Wraps (closed) or clamps (open) into [0, length].
    double normalize(double s) const;

    double length() const noexcept { return m_length; }
    bool closed() const noexcept { return m_samples.closed; }
    bool empty() const noexcept { return m_segments.empty(); }
    const RacelineSamples& samples() const noexcept { return m_samples; }
    const std::vector<double>& stations() const noexcept { return m_stations; }
    const std::vector<QuinticSegment>& segments() const noexcept { return m_segments; }

    double v_ref_at(double s) const;
    double bank_at(double s) const;

private:
    friend Raceline fit_quintic_spline(const RacelineSamples& samples);

    std::size_t segment_index(double s) const;
    double sample_interp(const std::vector<double>& values, double s) const;

    RacelineSamples m_samples;
    std::vector<double> m_stations; // knot stations, one per sample, starting at 0
    std::vector<QuinticSegment> m_segments;
    double m_length = 0.0;
};

inline constexpr std::size_t kMinSplineSamples = 6;

/// C2 quintic interpolation of the samples. Knot derivatives come from a natural
/// (open) or periodic (closed) cubic spline; stations are chord length, refined
/// once by integrating arc length. Throws FormatError on too few or invalid samples
/// and GeometryError on duplicate stations.
Raceline fit_quintic_spline(const RacelineSamples& samples);

/// Numeric arc length of the spline between two parameters (Gauss-Legendre).
double spline_arc_length(const Raceline& r, double s0, double s1);

/// Throws FormatError if sizes differ, values are not finite or any v_ref <= 0.
void validate_samples(const RacelineSamples& s);

/// CSV `x,y,v_ref` plus `<path>.json` sidecar holding `closed` and `bank`.
void save_raceline(const std::filesystem::path& path, const RacelineSamples& samples);

/// Reads the CSV and the sidecar when present. Without a sidecar the line is closed
/// when the end gap is under three median sample spacings.
RacelineSamples load_raceline(const std::filesystem::path& path);

struct RacelineOptions
{
    int smoothing_window = 5;
    MinCurvatureOptions optimizer;
    VelocityProfileParams velocity;
};

/// Smoothing, minimum-curvature optimization and velocity profile in one pass.
RacelineSamples generate_raceline(const TrackBoundaries& b, const RacelineOptions& options = {});

} // namespace racestack::track
