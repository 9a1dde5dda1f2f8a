#include "racestack/control/controller.hpp"

#include "racestack/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace racestack::control
{

namespace
{

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

} // namespace

double Pid::update(double error, double dt)
{
    m_integral = std::clamp(m_integral + error * dt, -m_g.i_max, m_g.i_max);
    const double raw = (error - m_prev_error) / dt;
    m_derivative += dt / (m_g.d_tau + dt) * (raw - m_derivative);
    m_prev_error = error;
    return m_g.kp * error + m_g.ki * m_integral + m_g.kd * m_derivative;
}

void Pid::reset()
{
    m_integral = 0.0;
    m_prev_error = 0.0;
    m_derivative = 0.0;
}

void ControlParams::validate() const
{
    if (!(rate > 0.0 && trajectory_timeout > 0.0 && joystick_timeout > 0.0 && lateral_error_threshold > 0.0))
        throw ConfigError("controller: rates and timeouts must be positive");
    if (!(throttle_deadband > 0.0 && brake_deadband > 0.0))
        throw ConfigError("controller: deadbands must be positive");
    if (!(ld_min > 0.0 && ld_min <= ld_max && k_lookahead >= 0.0))
        throw ConfigError("controller: lookahead requires 0 < Ld_min <= Ld_max");
    if (!(wheelbase > 0.0 && steering_ratio > 0.0 && max_steering > 0.0 && steering_gain > 0.0))
        throw ConfigError("controller: steering geometry must be positive");
    for (const auto* g : {&throttle, &brake})
    {
        if (!(g->kp >= 0.0 && g->ki >= 0.0 && g->kd >= 0.0 && g->i_max >= 0.0 && g->cmd_max > 0.0 && g->d_tau >= 0.0))
            throw ConfigError("controller: PID gains must be non-negative with positive cmd_max");
    }
    for (std::size_t i = 0; i < 5; ++i)
    {
        if (i > 0 && (gears.up[i] < gears.up[i - 1] || gears.down[i] < gears.down[i - 1]))
            throw ConfigError("controller: gear table must be monotone");
    }
    if (!(gears.hold >= 0.0))
        throw ConfigError("controller: gear hold must be non-negative");
}

const char* to_string(CommandSource s) noexcept
{
    switch (s)
    {
    case CommandSource::Autonomy: return "AUTONOMY";
    case CommandSource::Joystick: return "JOYSTICK";
    case CommandSource::Failsafe: return "FAILSAFE";
    }
    return "?";
}

int gear_logic(double rpm, int gear, const GearTable& table)
{
    gear = std::clamp(gear, 1, 6);
    if (gear < 6 && rpm > table.up[static_cast<std::size_t>(gear - 1)])
        return gear + 1;
    if (gear > 1 && rpm < table.down[static_cast<std::size_t>(gear - 2)])
        return gear - 1;
    return gear;
}

int GearShifter::update(double rpm, int actual_gear, double now)
{
    if (m_last_shift <= -1e9)
    {
        m_cmd = std::clamp(actual_gear, 1, 6);
        m_last_shift = -1e8;
    }
    if (m_cmd != actual_gear || now - m_last_shift < m_table.hold)
        return m_cmd;
    const int next = gear_logic(rpm, actual_gear, m_table);
    if (next != actual_gear)
    {
        m_cmd = next;
        m_last_shift = now;
    }
    return m_cmd;
}

double adaptive_lookahead(double v_car, const ControlParams& p)
{
    return std::min(p.ld_min + p.k_lookahead * std::max(v_car, 0.0), p.ld_max);
}

std::optional<LookaheadPoint> find_lookahead(const std::vector<planner::PathPoint>& points, double ld)
{
    if (points.empty())
        return std::nullopt;
    const auto dist = [](const planner::PathPoint& p) { return std::hypot(p.x, p.y); };
    if (dist(points.front()) >= ld)
        return LookaheadPoint{points.front().x, points.front().y, false};
    for (std::size_t i = 0; i + 1 < points.size(); ++i)
    {
        const auto& a = points[i];
        const auto& b = points[i + 1];
        if (dist(b) < ld)
            continue;
        // |a + t (b - a)| = ld on t in [0, 1]
        const double dx = b.x - a.x, dy = b.y - a.y;
        const double A = dx * dx + dy * dy;
        const double B = 2.0 * (a.x * dx + a.y * dy);
        const double C = a.x * a.x + a.y * a.y - ld * ld;
        double t = 1.0;
        if (A > 0.0)
            t = std::clamp((-B + std::sqrt(std::max(B * B - 4.0 * A * C, 0.0))) / (2.0 * A), 0.0, 1.0);
        return LookaheadPoint{a.x + t * dx, a.y + t * dy, false};
    }
    return LookaheadPoint{points.back().x, points.back().y, true};
}

PurePursuit pure_pursuit_point(double x, double y, double ld, const ControlParams& p)
{
    PurePursuit out;
    out.point = {x, y, false};
    out.lookahead_distance = ld;
    out.lookahead_angle = std::atan2(y, x);
    const double max_road = p.max_steering / p.steering_ratio / kRadToDeg;
    const double delta = std::atan(2.0 * p.wheelbase * std::sin(out.lookahead_angle) / ld);
    out.road_wheel = std::clamp(p.steering_gain * delta, -max_road, max_road);
    out.steering_deg = std::clamp(out.road_wheel * kRadToDeg * p.steering_ratio, -p.max_steering, p.max_steering);
    return out;
}

std::optional<PurePursuit> pure_pursuit(const std::vector<planner::PathPoint>& points, double v_car,
                                        const ControlParams& p)
{
    const double ld = adaptive_lookahead(v_car, p);
    const auto pt = find_lookahead(points, ld);
    if (!pt)
        return std::nullopt;
    auto out = pure_pursuit_point(pt->x, pt->y, ld, p);
    out.point.short_path = pt->short_path;
    return out;
}

Controller::Controller(ControlParams p, runtime::FaultReporter faults)
    : m_p(p), m_faults(std::move(faults)), m_throttle(p.throttle), m_brake(p.brake), m_shifter(p.gears),
      m_dt(1.0 / p.rate)
{
    m_p.validate();
}

void Controller::fault(const std::string& msg) const
{
    if (m_faults)
        m_faults("controller", msg);
}

LongitudinalCommand Controller::longitudinal(double v_ref, double v_car, double dt)
{
    const double dv = v_ref - v_car;
    LongitudinalCommand out;
    if (dv > m_p.throttle_deadband)
    {
        if (m_mode != Mode::Throttle)
            m_throttle.reset();
        m_mode = Mode::Throttle;
        out.throttle = std::clamp(m_throttle.update(dv, dt), 0.0, m_p.throttle.cmd_max);
    }
    else if (dv < -m_p.brake_deadband)
    {
        if (m_mode != Mode::Brake)
            m_brake.reset();
        m_mode = Mode::Brake;
        out.brake = std::clamp(m_brake.update(-dv, dt), 0.0, m_p.brake.cmd_max);
    }
    else
    {
        m_mode = Mode::Coast;
    }
    return out;
}

ControllerOutput Controller::failsafe(double now)
{
    ControllerOutput out;
    out.throttle = 0.0;
    out.brake = m_p.brake.cmd_max;
    out.steering = m_last_steering;
    out.gear = m_shifter.command();
    out.source = CommandSource::Failsafe;
    out.stamp = now;
    m_mode = Mode::Coast;
    return out;
}

ControllerOutput Controller::step(const ControllerInputs& in)
{
    ControllerOutput out;
    const bool path_fresh = in.path && in.now - in.path->stamp <= m_p.trajectory_timeout &&
                            in.path->points.size() > m_p.reference_index;
    const bool state_fresh = in.state && in.now - in.state->stamp <= m_p.trajectory_timeout &&
                             in.state->status != estimation::EstimatorStatus::Failed;
    const bool joystick = in.joystick.enabled && in.now - in.joystick.stamp <= m_p.joystick_timeout;

    const int gear = m_shifter.update(in.engine_rpm, in.gear, in.now);

    if (!path_fresh || !state_fresh)
    {
        out = failsafe(in.now);
    }
    else if (joystick)
    {
        out.throttle = 0.0;
        out.brake = std::clamp(in.joystick.brake, 0.0, m_p.brake.cmd_max);
        out.steering = std::clamp(in.joystick.steering, -m_p.max_steering, m_p.max_steering);
        out.gear = gear;
        out.source = CommandSource::Joystick;
        out.v_ref = in.joystick.target_velocity;
        m_mode = Mode::Coast;
    }
    else
    {
        const auto& path = *in.path;
        const double v_car = in.state->velocity.x();
        out.v_ref = path.points[m_p.reference_index].v;
        const auto lon = longitudinal(out.v_ref, v_car, m_dt);
        out.throttle = lon.throttle;
        out.brake = lon.brake;
        out.gear = gear;
        const auto pp = pure_pursuit(path.points, v_car, m_p);
        if (pp)
        {
            if (pp->point.short_path)
                fault("path shorter than lookahead distance");
            out.steering = pp->steering_deg;
            out.lookahead_distance = pp->lookahead_distance;
            out.lookahead_angle = pp->lookahead_angle;
        }
        out.source = CommandSource::Autonomy;
        out.heading_error = path.heading_error;
        out.cross_track = path.cross_track;
    }
    if (in.state)
        out.velocity_error = out.v_ref - in.state->velocity.x();
    out.stamp = in.now;
    out.rolling_counter = ++m_counter;
    m_last_steering = out.steering;
    return out;
}

} // namespace racestack::control
