#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>

namespace racestack::plant
{

struct VehicleParams
{
    double wheelbase = 2.9718;    // m
    double steering_ratio = 15.0; // hand-wheel : road-wheel
    double max_steering = 230.0;  // deg, hand-wheel
    double max_throttle = 55.0;   // %
    double max_brake = 1800.0;    // kPa
    double mass = 750.0;          // kg
    double l_f = 1.30;            // m
    double l_r = 1.6718;          // m
    double yaw_inertia = 1200.0;  // kg m^2
    double c_f = 1.2e5;           // N/rad
    double c_r = 1.2e5;           // N/rad
    double drag_coeff = 0.8;      // N s^2/m^2
    double rolling_resistance = 110.0; // N
    double driveline_efficiency = 0.9;
    /// Engine rpm per m/s of vehicle speed in each gear.
    std::array<double, 6> gear_ratios{249.0, 207.0, 173.0, 144.0, 120.0, 100.0};
    std::array<double, 6> torque_rpm{1000.0, 2500.0, 4000.0, 5500.0, 6500.0, 7500.0};
    std::array<double, 6> torque_nm{250.0, 450.0, 600.0, 620.0, 580.0, 450.0};
    double idle_rpm = 1000.0;
    double redline_rpm = 7500.0;
    double shift_time = 0.5;            // s
    double brake_gain = 6.25;           // N per kPa
    double brake_front_share = 0.6;
    double brake_tau = 0.004;           // s
    double brake_rate = 250000.0;       // kPa/s
    double steering_tau = 0.05;         // s
    double steering_rate = 400.0;       // deg/s, hand-wheel
    double throttle_tau = 0.03;         // s
    double throttle_rate = 500.0;       // %/s
    double rpm_decay = 3000.0;          // rpm/s after fuel cut
    double watchdog_window = 0.1;       // s
    double kinematic_speed = 2.0;       // m/s, kinematic model below this speed
    double gravity = 9.81;

    double max_road_wheel() const noexcept;
    double understeer_gradient() const noexcept;
    /// Throws ConfigError when an invariant does not hold.
    void validate() const;
};

enum class LowLevelState : std::uint8_t
{
    Uninit = 0,
    ActTest = 1,
    EngineOn = 2,
    Driving = 3,
    SupervisedStop = 4,
    Emergency = 5,
};

const char* to_string(LowLevelState s) noexcept;

struct ActuationCommand
{
    double throttle = 0.0; // %
    double brake = 0.0;    // kPa
    double steering = 0.0; // deg, hand-wheel
    int gear = 1;
    std::uint8_t rolling_counter = 0;
};

struct PlantState
{
    double x = 0.0;
    double y = 0.0;
    double yaw = 0.0;
    double v_x = 0.0;
    double v_y = 0.0;
    double yaw_rate = 0.0;
    double roll = 0.0; // track bank under the car
    double engine_rpm = 0.0;
    int gear = 1;
    double road_wheel_angle = 0.0; // rad
    double steering_actual = 0.0;  // deg, hand-wheel
    double brake_pressure_front = 0.0;
    double brake_pressure_rear = 0.0;
    double throttle_actual = 0.0; // %
    double a_x = 0.0;             // body-frame acceleration in the road plane
    double a_y = 0.0;
    LowLevelState lowlevel = LowLevelState::Uninit;
    std::uint8_t last_counter = 0;
    double time = 0.0;

    double speed() const noexcept;
};

enum class RtkStatus : std::int8_t
{
    Fixed = 0,
    Float = 1,
    Single = 2,
    None = 3,
};

const char* to_string(RtkStatus s) noexcept;

struct GnssFix
{
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    double heading = 0.0;
    Eigen::Vector3d variance = Eigen::Vector3d::Ones();
    double heading_variance = 1.0;
    RtkStatus status = RtkStatus::None;
    double stamp = 0.0;
};

struct ImuSample
{
    Eigen::Vector3d gyro = Eigen::Vector3d::Zero();  // rad/s, body
    Eigen::Vector3d accel = Eigen::Vector3d::Zero(); // specific force, m/s^2, body
    double stamp = 0.0;
};

} // namespace racestack::plant
