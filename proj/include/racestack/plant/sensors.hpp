#pragma once

#include "racestack/plant/faults.hpp"
#include "racestack/plant/types.hpp"
#include "racestack/runtime/rng.hpp"

#include <optional>

namespace racestack::plant
{

struct SensorConfig
{
    bool noise = true;
    std::array<double, 4> position_sigma{0.02, 0.2, 1.5, 10.0}; // m, by RtkStatus
    std::array<double, 4> heading_sigma{0.2, 0.5, 2.0, 10.0};   // deg, by RtkStatus
    double height_sigma_factor = 2.0;
    double gyro_sigma = 0.001;       // rad/s per sample
    double gyro_bias = 0.0005;       // rad/s, constant on z
    double accel_bias = 0.05;        // m/s^2 on x and y
    double vibration_sigma = 0.8;    // m/s^2, stationary std of the band-limited part
    double vibration_corner = 20.0;  // Hz
    double imu_period = 0.008;       // s
};

/// GNSS and IMU emulation on top of the ground-truth state.
class SensorSuite
{
public:
    SensorSuite(SensorConfig cfg, const runtime::RngFactory& rng, FaultSchedule faults = {});

    /// Absent during an injected dropout.
    std::optional<GnssFix> sample_gnss(const PlantState& s, double now);
    ImuSample sample_imu(const PlantState& s, double roll_rate, double now);

    const SensorConfig& config() const noexcept { return m_cfg; }

private:
    SensorConfig m_cfg;
    FaultSchedule m_faults;
    runtime::RngStream m_gnss;
    runtime::RngStream m_heading;
    runtime::RngStream m_gyro;
    runtime::RngStream m_vib;
    Eigen::Vector3d m_vib_state = Eigen::Vector3d::Zero();
    std::size_t m_outlier_next = 0;
};

} // namespace racestack::plant
