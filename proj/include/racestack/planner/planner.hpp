#pragma once

#include "racestack/estimation/types.hpp"
#include "racestack/runtime/scheduler.hpp"
#include "racestack/track/raceline.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace racestack::planner
{

inline constexpr double kYellowCap = 35.763; // 80 mph

enum class TrackFlag : std::int8_t
{
    Green = 0,
    Yellow = 1,
    Red = 2,
    Checkered = 3,
};

enum class VehicleFlag : std::int8_t
{
    None = 0,
    Black = 1,
    Orange = 2,
};

const char* to_string(TrackFlag f) noexcept;
const char* to_string(VehicleFlag f) noexcept;

struct FlagState
{
    VehicleFlag veh_flag = VehicleFlag::None;
    TrackFlag track_flag = TrackFlag::Green;
    double v_max_remote = 0.0;
    int active_raceline = 0;
    double last_remote_stamp = -1e9;
};

struct PlannerConfig
{
    double rate = 50.0;
    double path_step = 0.05;
    double path_duration = 2.5;
    double localization_timeout = 0.2;
    double remote_timeout = 5.0;
    double a_stop = 10.0;
    double switch_cross_track = 2.0;
    int newton_max_iterations = 20;
    double fallback_window = 200.0;

    /// Throws ConfigError.
    void validate() const;
    int steps() const;
};

struct PathPoint
{
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
    double v = 0.0;
    double t = 0.0;
    double s = 0.0;
};

enum class PathStatus : std::int8_t
{
    Nominal = 0,
    Capped = 1,
    Stopping = 2,
};

struct LocalPath
{
    estimation::EstimatedState current_state;
    std::vector<PathPoint> points; // vehicle frame
    PathStatus status = PathStatus::Nominal;
    double s_star = 0.0;
    double v_cap = 0.0;
    int raceline = 0;
    double cross_track = 0.0;   // signed, positive when the vehicle is left of the line
    double heading_error = 0.0; // positive when the vehicle heading is left of the tangent
    double stamp = 0.0;
};

struct NearestResult
{
    double s = 0.0;
    int iterations = 0;
    bool fell_back = false;
};

/// Local minimum of |spline(s) - p|^2 reached by damped Newton from s_warm; grid
/// search over +-window when Newton does not converge.
NearestResult nearest_point(const track::Raceline& r, const track::Point2& p, double s_warm, int max_iterations = 20,
                            double window = 200.0);

/// Global nearest point by a coarse scan of the whole line, refined by Newton.
double nearest_point_global(const track::Raceline& r, const track::Point2& p);

/// Signed lateral offset of p from the line at station s (positive to the left).
double cross_track_error(const track::Raceline& r, const track::Point2& p, double s);

/// Points in the global frame. v_cap <= 0 ramps down from v_start at a_stop.
std::vector<PathPoint> build_path(const track::Raceline& r, double s_star, double v_cap, double v_start,
                                  const PlannerConfig& cfg);

/// min(remote, flag caps); zero when the remote link or localization is stale.
double resolve_caps(const FlagState& flags, double now, double localization_stamp, const PlannerConfig& cfg);

std::vector<PathPoint> global_to_local(const std::vector<PathPoint>& path, double x, double y, double yaw);

/// Stateful planner cycle: warm-started localization on the active line, caps,
/// stop ramp and raceline switching.
class Planner
{
public:
    Planner(PlannerConfig cfg, std::vector<track::Raceline> lines, runtime::FaultReporter faults = {});

    LocalPath step(const estimation::EstimatedState& est, const FlagState& flags, double now, bool stop_forced);

    int active_raceline() const noexcept { return m_active; }
    std::optional<double> s_star() const noexcept { return m_s; }
    const PlannerConfig& config() const noexcept { return m_cfg; }
    const track::Raceline& line(int i) const { return m_lines.at(static_cast<std::size_t>(i)); }
    std::size_t line_count() const noexcept { return m_lines.size(); }

private:
    void fault(const std::string& msg) const;

    PlannerConfig m_cfg;
    std::vector<track::Raceline> m_lines;
    runtime::FaultReporter m_faults;
    int m_active = 0;
    std::optional<double> m_s;
    std::optional<double> m_ramp_v;
    double m_last_time = 0.0;
};

} // namespace racestack::planner
