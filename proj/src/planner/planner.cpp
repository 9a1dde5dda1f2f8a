#include "racestack/planner/planner.hpp"

#include "racestack/errors.hpp"
#include "racestack/track/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace racestack::planner
{

namespace
{

double distance2(const track::Raceline& r, const track::Point2& p, double s)
{
    return (r.position(s) - p).squaredNorm();
}

struct NewtonOutcome
{
    double s;
    int iterations;
    bool converged;
};

NewtonOutcome newton(const track::Raceline& r, const track::Point2& p, double s, int max_iterations)
{
    const double L = r.length();
    s = r.normalize(s);
    for (int it = 0; it < max_iterations; ++it)
    {
        const track::Point2 e = r.position(s) - p;
        const track::Point2 d1 = r.first_derivative(s);
        const track::Point2 d2 = r.second_derivative(s);
        const double D = e.squaredNorm();
        const double g = 2.0 * e.dot(d1);
        if (std::abs(g) < 1e-8 * (1.0 + D))
            return {s, it, true};
        if (!r.closed() && ((s <= 0.0 && g > 0.0) || (s >= L && g < 0.0)))
            return {s, it, true}; // minimum sits on an end point
        const double h = 2.0 * (e.dot(d2) + d1.squaredNorm());
        double step = h > 1e-12 ? -g / h : -g / (2.0 * std::max(d1.squaredNorm(), 1e-12));
        step = std::clamp(step, -10.0, 10.0);
        double s_next = r.normalize(s + step);
        int halvings = 0;
        while (distance2(r, p, s_next) > D + 1e-12 * (1.0 + D) && halvings < 40)
        {
            step *= 0.5;
            s_next = r.normalize(s + step);
            ++halvings;
        }
        s = s_next;
    }
    const track::Point2 e = r.position(s) - p;
    const double g = 2.0 * e.dot(r.first_derivative(s));
    return {s, max_iterations, std::abs(g) < 1e-8 * (1.0 + e.squaredNorm())};
}

} // namespace

const char* to_string(TrackFlag f) noexcept
{
    switch (f)
    {
    case TrackFlag::Green: return "green";
    case TrackFlag::Yellow: return "yellow";
    case TrackFlag::Red: return "red";
    case TrackFlag::Checkered: return "checkered";
    }
    return "?";
}

const char* to_string(VehicleFlag f) noexcept
{
    switch (f)
    {
    case VehicleFlag::None: return "none";
    case VehicleFlag::Black: return "black";
    case VehicleFlag::Orange: return "orange";
    }
    return "?";
}

void PlannerConfig::validate() const
{
    if (!(rate > 0.0 && path_step > 0.0 && path_duration > 0.0 && localization_timeout > 0.0 && remote_timeout > 0.0 &&
          a_stop > 0.0 && switch_cross_track > 0.0 && newton_max_iterations > 0 && fallback_window > 0.0))
        throw ConfigError("planner: all parameters must be positive");
    const double n = path_duration / path_step;
    if (std::abs(n - std::round(n)) > 1e-9 * n)
        throw ConfigError("planner: path_duration must be an integer multiple of path_step");
}

int PlannerConfig::steps() const
{
    return static_cast<int>(std::lround(path_duration / path_step));
}

NearestResult nearest_point(const track::Raceline& r, const track::Point2& p, double s_warm, int max_iterations,
                            double window)
{
    const auto first = newton(r, p, s_warm, max_iterations);
    if (first.converged)
        return {first.s, first.iterations, false};

    const double step = 0.5;
    const int n = static_cast<int>(std::ceil(2.0 * window / step));
    double best_s = r.normalize(s_warm), best_d = distance2(r, p, best_s);
    for (int i = 0; i <= n; ++i)
    {
        const double s = r.normalize(s_warm - window + i * step);
        const double d = distance2(r, p, s);
        if (d < best_d)
        {
            best_d = d;
            best_s = s;
        }
    }
    const auto refined = newton(r, p, best_s, max_iterations);
    const double s = refined.converged || distance2(r, p, refined.s) < best_d ? refined.s : best_s;
    return {s, first.iterations + refined.iterations, true};
}

double nearest_point_global(const track::Raceline& r, const track::Point2& p)
{
    const double L = r.length();
    const int n = std::max(100, static_cast<int>(std::ceil(L)));
    double best_s = 0.0, best_d = distance2(r, p, 0.0);
    for (int i = 1; i <= n; ++i)
    {
        const double s = L * i / n;
        const double d = distance2(r, p, r.normalize(s));
        if (d < best_d)
        {
            best_d = d;
            best_s = s;
        }
    }
    const auto res = newton(r, p, best_s, 50);
    return distance2(r, p, res.s) <= best_d ? res.s : r.normalize(best_s);
}

double cross_track_error(const track::Raceline& r, const track::Point2& p, double s)
{
    const track::Point2 t = r.first_derivative(s).normalized();
    return track::cross(t, p - r.position(s));
}

std::vector<PathPoint> build_path(const track::Raceline& r, double s_star, double v_cap, double v_start,
                                  const PlannerConfig& cfg)
{
    const int n = cfg.steps();
    std::vector<PathPoint> out;
    out.reserve(static_cast<std::size_t>(n) + 1);
    double s = r.normalize(s_star);
    for (int k = 0; k <= n; ++k)
    {
        const auto pt = r.eval(s);
        double v;
        if (v_cap <= 0.0)
            v = std::min(pt.v_ref, std::max(0.0, v_start - cfg.a_stop * cfg.path_step * (k + 1)));
        else
            v = std::min(pt.v_ref, v_cap);
        out.push_back({pt.x, pt.y, pt.heading, v, k * cfg.path_step, s});
        s = r.normalize(s + v * cfg.path_step);
    }
    return out;
}

double resolve_caps(const FlagState& flags, double now, double localization_stamp, const PlannerConfig& cfg)
{
    if (now - flags.last_remote_stamp > cfg.remote_timeout)
        return 0.0;
    if (now - localization_stamp > cfg.localization_timeout)
        return 0.0;
    double cap = flags.v_max_remote;
    if (flags.track_flag == TrackFlag::Yellow)
        cap = std::min(cap, kYellowCap);
    if (flags.track_flag == TrackFlag::Red || flags.veh_flag == VehicleFlag::Black)
        cap = 0.0;
    return std::isfinite(cap) ? std::max(0.0, cap) : 0.0;
}

std::vector<PathPoint> global_to_local(const std::vector<PathPoint>& path, double x, double y, double yaw)
{
    const double c = std::cos(yaw), s = std::sin(yaw);
    std::vector<PathPoint> out = path;
    for (auto& p : out)
    {
        const double dx = p.x - x, dy = p.y - y;
        p.x = c * dx + s * dy;
        p.y = -s * dx + c * dy;
        p.heading = track::wrap_angle(p.heading - yaw);
    }
    return out;
}

Planner::Planner(PlannerConfig cfg, std::vector<track::Raceline> lines, runtime::FaultReporter faults)
    : m_cfg(cfg), m_lines(std::move(lines)), m_faults(std::move(faults))
{
    m_cfg.validate();
    if (m_lines.empty())
        throw ConfigError("planner: at least one raceline is required");
}

void Planner::fault(const std::string& msg) const
{
    if (m_faults)
        m_faults("planner", msg);
}

LocalPath Planner::step(const estimation::EstimatedState& est, const FlagState& flags, double now, bool stop_forced)
{
    LocalPath out;
    out.current_state = est;
    out.stamp = now;
    out.status = PathStatus::Stopping;
    const double dt = m_s ? now - m_last_time : 0.0;
    m_last_time = now;
    if (!est.position.allFinite() || !est.rpy.allFinite())
    {
        fault("non-finite pose");
        return out;
    }
    const track::Point2 p = est.position.head<2>();

    if (flags.active_raceline != m_active)
    {
        if (flags.active_raceline < 0 || static_cast<std::size_t>(flags.active_raceline) >= m_lines.size())
        {
            fault("raceline index " + std::to_string(flags.active_raceline) + " out of range");
        }
        else
        {
            const auto& next = line(flags.active_raceline);
            const double s_next = nearest_point_global(next, p);
            if (std::abs(cross_track_error(next, p, s_next)) < m_cfg.switch_cross_track)
            {
                m_active = flags.active_raceline;
                m_s = s_next;
            }
        }
    }
    const auto& r = line(m_active);
    if (!m_s)
    {
        m_s = nearest_point_global(r, p);
    }
    else
    {
        const auto np = nearest_point(r, p, *m_s, m_cfg.newton_max_iterations, m_cfg.fallback_window);
        if (np.fell_back)
            fault("nearest point fell back to grid search");
        m_s = np.s;
    }

    double cap = resolve_caps(flags, now, est.stamp, m_cfg);
    if (stop_forced)
        cap = 0.0;
    double v_start = 0.0;
    if (cap <= 0.0)
    {
        m_ramp_v = m_ramp_v ? std::max(0.0, *m_ramp_v - m_cfg.a_stop * dt) : est.speed();
        v_start = *m_ramp_v;
        out.status = PathStatus::Stopping;
        out.v_cap = v_start;
    }
    else
    {
        m_ramp_v.reset();
        out.status = cap < r.v_ref_at(*m_s) ? PathStatus::Capped : PathStatus::Nominal;
        out.v_cap = cap;
    }
    const auto global = build_path(r, *m_s, cap, v_start, m_cfg);
    const double yaw = est.rpy.z();
    out.points = global_to_local(global, p.x(), p.y(), yaw);
    out.s_star = *m_s;
    out.raceline = m_active;
    out.cross_track = cross_track_error(r, p, *m_s);
    out.heading_error = track::wrap_angle(yaw - r.eval(*m_s).heading);
    return out;
}

} // namespace racestack::planner
