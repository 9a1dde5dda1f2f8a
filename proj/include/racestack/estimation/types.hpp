#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace racestack::estimation
{

enum class EstimatorStatus : std::int8_t
{
    Ok = 0,
    DeadReckoning = 1,
    Reinitializing = 2,
    Failed = 3,
};

const char* to_string(EstimatorStatus s) noexcept;

/// Filter output. Velocity and angular velocity are in the body frame
/// (x forward, y left, z up); position and rpy are ENU.
struct EstimatedState
{
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d rpy = Eigen::Vector3d::Zero();
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
    Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();
    double slip_angle_front = 0.0;
    double slip_angle_rear = 0.0;
    double trust = 0.0;
    EstimatorStatus status = EstimatorStatus::Reinitializing;
    double stamp = 0.0;

    double speed() const noexcept { return velocity.head<2>().norm(); }
};

} // namespace racestack::estimation
