#include "racestack/plant/vehicle.hpp"

#include "racestack/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace racestack::plant
{

namespace
{

constexpr double kDeg = std::numbers::pi / 180.0;

double wrap(double a)
{
    a = std::remainder(a, 2.0 * std::numbers::pi);
    return a <= -std::numbers::pi ? a + 2.0 * std::numbers::pi : a;
}

bool finite_state(const PlantState& s)
{
    return std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.yaw) && std::isfinite(s.v_x) &&
           std::isfinite(s.v_y) && std::isfinite(s.yaw_rate) && std::isfinite(s.engine_rpm);
}

} // namespace

double Actuator::step(double target, double dt, double now)
{
    double tau = m_tau;
    if (m_fault && now >= m_fault->t0)
    {
        if (m_fault->mode == ActuatorFaultMode::Stuck)
        {
            if (!m_stuck_at)
            {
                m_stuck_at = m_value;
            }
            m_value = *m_stuck_at;
            return m_value;
        }
        tau *= m_fault->lag_factor;
    }
    double delta = (target - m_value) * (1.0 - std::exp(-dt / tau));
    const double limit = m_rate * dt;
    delta = std::clamp(delta, -limit, limit);
    m_value += delta;
    return m_value;
}

double Actuator::slew(double target, double dt, double now)
{
    if (m_fault && now >= m_fault->t0 && m_fault->mode == ActuatorFaultMode::Stuck)
        return step(target, dt, now);
    const double limit = m_rate * dt;
    m_value += std::clamp(target - m_value, -limit, limit);
    return m_value;
}

Vehicle::Vehicle(VehicleParams params, PlantState initial)
    : m_params(std::move(params)), m_state(initial),
      m_throttle(m_params.throttle_tau, m_params.throttle_rate),
      m_brake_front(m_params.brake_tau, m_params.brake_rate), m_brake_rear(m_params.brake_tau, m_params.brake_rate),
      m_steering(m_params.steering_tau, m_params.steering_rate)
{
    m_params.validate();
    m_steering.set(m_state.steering_actual);
    m_brake_front.set(m_state.brake_pressure_front);
    m_brake_rear.set(m_state.brake_pressure_rear);
    m_throttle.set(m_state.throttle_actual);
    m_state.road_wheel_angle = m_state.steering_actual / m_params.steering_ratio * kDeg;
    m_state.gear = std::clamp(m_state.gear, 1, 6);
    m_cmd.gear = m_state.gear;
    m_last_advance = m_state.time;
}

void Vehicle::add_actuator_fault(const ActuatorFault& f)
{
    switch (f.channel)
    {
    case ActuatorChannel::Steering: m_steering.set_fault(f); break;
    case ActuatorChannel::Brake:
        m_brake_front.set_fault(f);
        m_brake_rear.set_fault(f);
        break;
    case ActuatorChannel::Throttle: m_throttle.set_fault(f); break;
    }
}

ActuationTestResult Vehicle::run_actuation_test()
{
    ActuationTestResult res;
    if (m_state.lowlevel != LowLevelState::Uninit)
    {
        res.failed_channel = ActuatorChannel::Steering;
        return res;
    }
    m_state.lowlevel = LowLevelState::ActTest;
    // Exercised on copies so the test leaves no residue in the vehicle.
    Actuator steer = m_steering;
    Actuator brake = m_brake_front;
    const double dt = 0.001;
    double t = m_state.time;
    auto hold = [&](Actuator& a, double target, double duration) {
        for (double e = 0.0; e < duration - 1e-12; e += dt)
        {
            t += dt;
            a.step(target, dt, t);
        }
        return a.value();
    };
    for (double target : {10.0, -10.0, 0.0})
    {
        if (std::abs(hold(steer, target, 0.4) - target) > 1.0)
        {
            res.failed_channel = ActuatorChannel::Steering;
            break;
        }
    }
    if (!res.failed_channel)
    {
        if (hold(brake, 1000.0, 0.2) < 950.0 || hold(brake, 0.0, 0.2) > 50.0)
        {
            res.failed_channel = ActuatorChannel::Brake;
        }
    }
    res.passed = !res.failed_channel.has_value();
    if (res.passed)
    {
        m_state.lowlevel = LowLevelState::EngineOn;
        m_state.engine_rpm = m_params.idle_rpm;
        m_last_advance = m_state.time;
    }
    else
    {
        m_state.lowlevel = LowLevelState::Uninit;
    }
    return res;
}

void Vehicle::enable_driving(double now)
{
    if (m_state.lowlevel == LowLevelState::EngineOn)
    {
        m_state.lowlevel = LowLevelState::Driving;
    }
}

void Vehicle::request_supervised_stop()
{
    if (m_state.lowlevel == LowLevelState::Driving)
    {
        m_state.lowlevel = LowLevelState::SupervisedStop;
    }
}

void Vehicle::trigger_emergency(const std::string& cause)
{
    if (m_state.lowlevel == LowLevelState::Emergency)
    {
        return;
    }
    m_state.lowlevel = LowLevelState::Emergency;
    m_emergency_cause = cause;
    m_latched_steering = m_cmd.steering;
    // Fuel cut: no lag on the throttle echo.
    m_throttle.set(0.0);
    m_state.throttle_actual = 0.0;
}

CommandVerdict Vehicle::receive(const ActuationCommand& cmd, double now)
{
    const auto ll = m_state.lowlevel;
    if (ll == LowLevelState::Uninit || ll == LowLevelState::ActTest || ll == LowLevelState::Emergency)
    {
        return CommandVerdict::Ignored;
    }
    if (m_counter_seen)
    {
        const int delta = (static_cast<int>(cmd.rolling_counter) - static_cast<int>(m_state.last_counter) + 256) % 256;
        if (delta < 1 || delta > 127)
        {
            return CommandVerdict::Stale;
        }
    }
    m_counter_seen = true;
    m_last_advance = now;
    m_cmd = cmd;
    m_cmd.throttle = std::clamp(cmd.throttle, 0.0, m_params.max_throttle);
    m_cmd.brake = std::clamp(cmd.brake, 0.0, m_params.max_brake);
    m_cmd.steering = std::clamp(cmd.steering, -m_params.max_steering, m_params.max_steering);
    m_cmd.gear = std::clamp(cmd.gear, 1, 6);
    m_state.last_counter = cmd.rolling_counter;
    return CommandVerdict::Accepted;
}

double Vehicle::engine_torque(double rpm) const
{
    const auto& r = m_params.torque_rpm;
    const auto& t = m_params.torque_nm;
    if (rpm <= r.front())
        return t.front();
    if (rpm >= r.back())
        return t.back();
    std::size_t i = 1;
    while (r[i] < rpm)
        ++i;
    const double u = (rpm - r[i - 1]) / (r[i] - r[i - 1]);
    return t[i - 1] + u * (t[i] - t[i - 1]);
}

const PlantState& Vehicle::step(double dt)
{
    if (m_faulted || !(dt > 0.0))
    {
        return m_state;
    }
    const auto ll = m_state.lowlevel;
    if ((ll == LowLevelState::EngineOn || ll == LowLevelState::Driving || ll == LowLevelState::SupervisedStop) &&
        m_state.time - m_last_advance > m_params.watchdog_window + 1e-9)
    {
        trigger_emergency("rolling counter stale");
    }
    const int n = std::max(1, static_cast<int>(std::ceil(dt / 0.002 - 1e-9)));
    for (int i = 0; i < n && !m_faulted; ++i)
    {
        substep(dt / n);
    }
    return m_state;
}

void Vehicle::update_gear()
{
    if (m_shift_target)
    {
        if (m_state.time - m_shift_started >= m_params.shift_time - 1e-9)
        {
            m_state.gear = *m_shift_target;
            m_shift_target.reset();
        }
        else
        {
            return;
        }
    }
    if (m_state.lowlevel != LowLevelState::Driving || m_cmd.gear == m_state.gear)
    {
        return;
    }
    m_shift_target = m_state.gear + (m_cmd.gear > m_state.gear ? 1 : -1);
    m_shift_started = m_state.time;
}

void Vehicle::update_actuators(double dt)
{
    double thr = 0.0, brk = 0.0, steer = 0.0;
    switch (m_state.lowlevel)
    {
    case LowLevelState::Uninit:
    case LowLevelState::ActTest: break;
    case LowLevelState::EngineOn:
        brk = m_cmd.brake;
        steer = m_cmd.steering;
        break;
    case LowLevelState::Driving:
        thr = m_cmd.throttle;
        brk = m_cmd.brake;
        steer = m_cmd.steering;
        break;
    case LowLevelState::SupervisedStop:
        brk = std::max(m_cmd.brake, 800.0);
        steer = m_cmd.steering;
        break;
    case LowLevelState::Emergency:
        brk = m_params.max_brake;
        steer = m_latched_steering;
        break;
    }
    const double now = m_state.time;
    m_state.throttle_actual = m_state.lowlevel == LowLevelState::Emergency ? 0.0 : m_throttle.step(thr, dt, now);
    if (m_state.lowlevel == LowLevelState::Emergency)
    {
        // the ECU dumps full pressure at the pump's slew limit
        m_state.brake_pressure_front = m_brake_front.slew(brk, dt, now);
        m_state.brake_pressure_rear = m_brake_rear.slew(brk, dt, now);
    }
    else
    {
        m_state.brake_pressure_front = m_brake_front.step(brk, dt, now);
        m_state.brake_pressure_rear = m_brake_rear.step(brk, dt, now);
    }
    m_state.steering_actual = m_steering.step(steer, dt, now);
    m_state.road_wheel_angle = std::clamp(m_state.steering_actual / m_params.steering_ratio * kDeg,
                                          -m_params.max_road_wheel(), m_params.max_road_wheel());
}

void Vehicle::substep(double dt)
{
    const PlantState before = m_state;
    const auto& p = m_params;
    update_gear();
    update_actuators(dt);

    PlantState& s = m_state;
    s.roll = m_bank ? m_bank(s.x, s.y) : 0.0;
    const double G = p.gear_ratios[static_cast<std::size_t>(s.gear - 1)];
    const bool running = s.lowlevel == LowLevelState::EngineOn || s.lowlevel == LowLevelState::Driving ||
                         s.lowlevel == LowLevelState::SupervisedStop;
    if (s.lowlevel == LowLevelState::Emergency)
    {
        s.engine_rpm = std::max(0.0, s.engine_rpm - p.rpm_decay * dt);
    }
    else if (running)
    {
        s.engine_rpm = std::clamp(s.v_x * G, p.idle_rpm, p.redline_rpm);
    }
    else
    {
        s.engine_rpm = 0.0;
    }

    double f_drive = 0.0;
    if (running && s.v_x * G < p.redline_rpm)
    {
        f_drive = s.throttle_actual / 100.0 * engine_torque(s.engine_rpm) * G * 2.0 * std::numbers::pi / 60.0 *
                  p.driveline_efficiency;
    }
    const double f_brake = p.brake_gain * (p.brake_front_share * s.brake_pressure_front +
                                           (1.0 - p.brake_front_share) * s.brake_pressure_rear);
    const double f_resist = p.drag_coeff * s.v_x * s.v_x + (s.v_x > 1e-3 ? p.rolling_resistance : 0.0);
    double f_x = f_drive - f_brake - f_resist;
    if (s.v_x <= 1e-3 && f_x <= 0.0)
    {
        f_x = 0.0; // static friction holds the car
    }

    const double delta = s.road_wheel_angle;
    const double L = p.wheelbase;
    if (s.v_x < p.kinematic_speed)
    {
        s.v_x = std::max(0.0, s.v_x + f_x / p.mass * dt);
        s.yaw_rate = s.v_x * std::tan(delta) / L;
        const double beta = std::atan(p.l_r * std::tan(delta) / L);
        s.v_y = s.v_x * std::tan(beta);
        s.a_x = f_x / p.mass;
        s.a_y = s.v_x * s.yaw_rate;
    }
    else
    {
        const double sigma_f = delta - std::atan2(s.v_y + p.l_f * s.yaw_rate, s.v_x);
        const double sigma_r = -std::atan2(s.v_y - p.l_r * s.yaw_rate, s.v_x);
        const double fyf = p.c_f * sigma_f;
        const double fyr = p.c_r * sigma_r;
        s.a_x = (f_x - fyf * std::sin(delta)) / p.mass;
        s.a_y = (fyf * std::cos(delta) + fyr) / p.mass - p.gravity * std::sin(s.roll);
        const double r_dot = (p.l_f * fyf * std::cos(delta) - p.l_r * fyr) / p.yaw_inertia;
        // Body-frame velocity turns with the car; apply that part as an exact rotation.
        const double th = s.yaw_rate * dt;
        const double vx = std::cos(th) * s.v_x + std::sin(th) * s.v_y;
        const double vy = -std::sin(th) * s.v_x + std::cos(th) * s.v_y;
        s.v_x = std::max(0.0, vx + s.a_x * dt);
        s.v_y = vy + s.a_y * dt;
        s.yaw_rate += r_dot * dt;
    }
    const double yaw_mid = s.yaw + 0.5 * s.yaw_rate * dt;
    s.x += (s.v_x * std::cos(yaw_mid) - s.v_y * std::sin(yaw_mid)) * dt;
    s.y += (s.v_x * std::sin(yaw_mid) + s.v_y * std::cos(yaw_mid)) * dt;
    s.yaw = wrap(s.yaw + s.yaw_rate * dt);
    s.time += dt;
    if (!finite_state(s))
    {
        m_state = before;
        m_faulted = true;
    }
}

ActuationCommand CommandLink::transmit(ActuationCommand cmd, double now)
{
    if (m_faults.counter_frozen_at(now) && m_last_sent)
    {
        cmd.rolling_counter = *m_last_sent;
    }
    m_last_sent = cmd.rolling_counter;
    return cmd;
}

} // namespace racestack::plant
