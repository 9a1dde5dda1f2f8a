#pragma once

#include "racestack/analysis/records.hpp"
#include "racestack/telemetry/chunk_log.hpp"
#include "racestack/track/raceline.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace racestack::analysis
{

struct LapMetrics
{
    int lap = 0;
    double t_start = 0.0;
    double t_end = 0.0;
    double lap_time = 0.0;
    double mean_speed = 0.0;
    double cross_track_min = 0.0;
    double cross_track_max = 0.0;
    double cross_track_rms = 0.0;
    double heading_error_min = 0.0;
    double heading_error_max = 0.0;
    double heading_error_rms = 0.0;
    double velocity_error_mean = 0.0;
    double velocity_error_max = 0.0; // largest magnitude
    double v_cap_max = 0.0;
    std::size_t samples = 0;

    double max_abs_cross_track() const noexcept { return std::max(-cross_track_min, cross_track_max); }
};

/// Per-sample tracking errors recomputed from the estimated states against the logged raceline.
struct TrackingSample
{
    double t = 0.0;
    double s = 0.0;
    double cross_track = 0.0;   // positive: left of the line
    double heading_error = 0.0; // positive: vehicle heading left of the tangent
    double speed = 0.0;
};

std::vector<TrackingSample> tracking_errors(const RunData& d);

/// Complete laps between consecutive start-finish crossings.
std::vector<LapMetrics> compute_lap_metrics(const RunData& d);

/// Mean controller velocity error over autonomy cycles on straights (|curvature| below the
/// threshold at the planner's station), restricted to [t0, t1).
struct StraightError
{
    double mean = 0.0;
    std::size_t samples = 0;
};
StraightError straight_velocity_error(const RunData& d, double t0, double t1, double curvature_threshold = 1e-3);

struct DynamicsSample
{
    double t = 0.0;
    double a_lon = 0.0;
    double a_lat = 0.0;
    double v = 0.0;
    double sigma_f = 0.0;
    double sigma_r = 0.0;
    double f_yf = 0.0;
};

struct VehicleGeometry
{
    double mass = 750.0;
    double l_f = 1.30;
    double l_r = 1.6718;
    double steering_ratio = 15.0;
};

VehicleGeometry geometry_from_header(const std::string& header_json);

/// One sample per estimator output: body-frame IMU accelerations, slip angles from the
/// estimated body velocity and yaw rate with the measured road-wheel angle, and the
/// steady-state front axle share of the lateral force.
DynamicsSample dynamics_sample(double t, const plant::ImuSample& imu, const estimation::EstimatedState& s,
                               double road_wheel_angle, const VehicleGeometry& g);
std::vector<DynamicsSample> compute_dynamics(const RunData& d);

/// Least-squares slope of F_yf against sigma_f through the origin, over samples faster
/// than `min_speed`.
std::optional<double> fit_cornering_stiffness(const std::vector<DynamicsSample>& samples, double min_speed = 5.0);

/// Positions in log order of the crash signature events; absent events are empty.
struct CrashTrace
{
    std::optional<double> t_counter_stale;
    std::optional<double> t_emergency;  // low-level transition
    std::optional<double> t_verdict;    // supervisor EMERGENCY_STOP
    std::string verdict_cause;
    std::optional<double> t_throttle_zero;
    std::optional<double> t_brake_max;
    std::optional<double> t_rpm_zero;
    bool exited = false; // any later plant sample outside EMERGENCY
    bool in_order = false;
};
CrashTrace analyze_crash(const RunData& d, double max_brake = 1800.0);

struct LogGaps
{
    std::size_t chunks = 0;
    std::vector<std::uint32_t> missing;
    std::vector<std::uint32_t> incomplete;
    bool gap_free() const noexcept { return missing.empty() && incomplete.empty(); }
};

/// Reads a run from a directory (or one chunk file) and decodes it. Gaps are reported,
/// not fatal.
RunData load_run(const std::filesystem::path& where, const std::string& run_id, LogGaps* gaps = nullptr);

/// Run ids found in a directory, or the id of a chunk file.
std::vector<std::string> find_runs(const std::filesystem::path& where);

struct RunAnalysis
{
    std::vector<LapMetrics> laps;
    StraightError straight;
    double max_abs_cross_track = 0.0; // whole run
    std::vector<safety::Verdict> verdicts;
    std::size_t states = 0;
    std::optional<CrashTrace> crash; // present when the low level went to EMERGENCY
};

RunAnalysis analyze(const RunData& d);

nlohmann::ordered_json to_json(const LapMetrics& m);
nlohmann::ordered_json to_json(const RunAnalysis& a, const LogGaps* gaps = nullptr);
std::string laps_csv(const std::vector<LapMetrics>& laps);
std::string dynamics_csv(const std::vector<DynamicsSample>& samples);

} // namespace racestack::analysis
