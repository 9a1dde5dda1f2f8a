#include "racestack/telemetry/link.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace racestack::telemetry
{

namespace
{

template <class T>
T saturate(double v)
{
    if (!std::isfinite(v))
        return 0;
    const double r = std::round(v);
    return static_cast<T>(std::clamp(r, static_cast<double>(std::numeric_limits<T>::min()),
                                     static_cast<double>(std::numeric_limits<T>::max())));
}

} // namespace

bool BasestationLink::apply(const BasestationFrame& f, double now)
{
    if (m_state.last_stamp && !(f.stamp > *m_state.last_stamp))
    {
        ++m_ignored;
        return false;
    }
    m_state.last_stamp = f.stamp;
    auto& flags = m_state.flags;
    flags.v_max_remote = std::isfinite(f.v_max) ? std::max(0.0f, f.v_max) : 0.0;
    flags.active_raceline = f.raceline_index;
    flags.veh_flag = static_cast<planner::VehicleFlag>(f.veh_flag);
    flags.track_flag = static_cast<planner::TrackFlag>(f.track_flag);
    flags.last_remote_stamp = now;
    auto& j = m_state.joystick;
    j.enabled = f.enable_joystick_control;
    j.brake = f.brake_amount;
    j.steering = f.steering_cmd;
    j.target_velocity = f.target_velocity;
    j.stamp = now;
    m_state.enable_engine = f.enable_engine;
    m_state.enable_driving = f.enable_driving;
    m_state.throttle_lockout = f.throttle_lockout;
    return true;
}

int BasestationLink::poll(DatagramChannel& channel, double now)
{
    int accepted = 0;
    while (auto d = channel.receive())
    {
        if (auto f = m_decoder.basestation(*d))
            accepted += apply(*f, now) ? 1 : 0;
    }
    return accepted;
}

DashboardFrame make_dashboard(const DashboardInputs& in)
{
    DashboardFrame f;
    f.stamp = FrameStamp::from_seconds(in.time);
    if (in.command)
    {
        const auto& c = *in.command;
        f.cmd_gear = saturate<std::int8_t>(c.gear);
        f.cmd_throttle = saturate<std::int8_t>(c.throttle);
        f.cmd_brake = saturate<std::int16_t>(c.brake);
        f.cmd_steering_degree = saturate<std::int16_t>(c.steering);
        f.heading_error = static_cast<float>(c.heading_error);
        f.cross_track_error = static_cast<float>(c.cross_track);
        f.velocity_error = static_cast<float>(c.velocity_error);
        f.target_velocity_mps = static_cast<float>(c.v_ref);
        f.purepursuit_lookahead_distance = static_cast<float>(c.lookahead_distance);
        f.purepursuit_lookahead_angle_rad = static_cast<float>(c.lookahead_angle);
    }
    if (in.plant)
    {
        const auto& p = *in.plant;
        f.actual_gear = saturate<std::int8_t>(p.gear);
        f.actual_throttle = saturate<std::int8_t>(p.throttle_actual);
        f.actual_brake_front = saturate<std::int16_t>(p.brake_pressure_front);
        f.actual_brake_rear = saturate<std::int16_t>(p.brake_pressure_rear);
        f.actual_steering_degree = saturate<std::int16_t>(p.steering_actual);
        f.engine_speed_rpm = static_cast<float>(p.engine_rpm);
        f.vehicle_speed_kmph = static_cast<float>(p.speed() * 3.6);
    }
    if (in.state)
    {
        const auto& s = *in.state;
        f.actual_velocity_mps = static_cast<float>(s.speed());
        f.position_x = static_cast<float>(s.position.x());
        f.position_y = static_cast<float>(s.position.y());
        f.position_z = static_cast<float>(s.position.z());
        f.position_r = static_cast<float>(s.rpy.x());
        f.position_p = static_cast<float>(s.rpy.y());
        f.position_yaw = static_cast<float>(s.rpy.z());
        f.velocity_x = static_cast<float>(s.velocity.x());
        f.velocity_y = static_cast<float>(s.velocity.y());
        f.velocity_z = static_cast<float>(s.velocity.z());
        f.trust = static_cast<float>(s.trust);
        f.status = static_cast<std::int8_t>(s.status);
    }
    return f;
}

} // namespace racestack::telemetry
