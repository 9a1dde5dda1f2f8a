#include "racestack/plant/types.hpp"

#include "racestack/errors.hpp"

#include <cmath>

namespace racestack::plant
{

double VehicleParams::max_road_wheel() const noexcept
{
    return max_steering / steering_ratio * 3.14159265358979323846 / 180.0;
}

double VehicleParams::understeer_gradient() const noexcept
{
    return mass / wheelbase * (l_r / c_f - l_f / c_r);
}

void VehicleParams::validate() const
{
    if (std::abs(l_f + l_r - wheelbase) > 1e-9)
    {
        throw ConfigError("l_f + l_r must equal the wheelbase");
    }
    const double positive[] = {wheelbase, steering_ratio, max_steering, max_throttle, max_brake, mass, l_f, l_r,
                               yaw_inertia, c_f, c_r, shift_time, brake_gain, brake_tau, steering_tau,
                               throttle_tau, watchdog_window, idle_rpm};
    for (double v : positive)
    {
        if (!(v > 0.0))
        {
            throw ConfigError("vehicle parameters must be positive");
        }
    }
    for (std::size_t i = 1; i < torque_rpm.size(); ++i)
    {
        if (!(torque_rpm[i] > torque_rpm[i - 1]))
        {
            throw ConfigError("torque map rpm must increase");
        }
    }
    if (torque_rpm.front() > idle_rpm || torque_rpm.back() < redline_rpm)
    {
        throw ConfigError("torque map must cover idle to redline");
    }
}

double PlantState::speed() const noexcept { return std::hypot(v_x, v_y); }

const char* to_string(LowLevelState s) noexcept
{
    switch (s)
    {
    case LowLevelState::Uninit: return "UNINIT";
    case LowLevelState::ActTest: return "ACT_TEST";
    case LowLevelState::EngineOn: return "ENGINE_ON";
    case LowLevelState::Driving: return "DRIVING";
    case LowLevelState::SupervisedStop: return "SUPERVISED_STOP";
    case LowLevelState::Emergency: return "EMERGENCY";
    }
    return "?";
}

const char* to_string(RtkStatus s) noexcept
{
    switch (s)
    {
    case RtkStatus::Fixed: return "RTK_FIXED";
    case RtkStatus::Float: return "RTK_FLOAT";
    case RtkStatus::Single: return "SINGLE";
    case RtkStatus::None: return "NONE";
    }
    return "?";
}

} // namespace racestack::plant
