#include "racestack/plant/sensors.hpp"

#include <cmath>
#include <numbers>

namespace racestack::plant
{

namespace
{

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kGravity = 9.81;

} // namespace

SensorSuite::SensorSuite(SensorConfig cfg, const runtime::RngFactory& rng, FaultSchedule faults)
    : m_cfg(cfg), m_faults(std::move(faults)), m_gnss(rng.stream("gnss.position")),
      m_heading(rng.stream("gnss.heading")), m_gyro(rng.stream("imu.gyro")), m_vib(rng.stream("imu.vibration"))
{
}

std::optional<GnssFix> SensorSuite::sample_gnss(const PlantState& s, double now)
{
    if (m_faults.dropout_at(now))
    {
        return std::nullopt;
    }
    GnssFix fix;
    fix.stamp = now;
    fix.status = static_cast<RtkStatus>(m_faults.degraded_status_at(now).value_or(0));
    const auto idx = static_cast<std::size_t>(fix.status);
    const double sigma = m_cfg.position_sigma[idx];
    const double sigma_z = sigma * m_cfg.height_sigma_factor;
    const double sigma_h = m_cfg.heading_sigma[idx] * kDeg;
    fix.position = {s.x, s.y, 0.0};
    fix.heading = s.yaw;
    if (m_cfg.noise)
    {
        fix.position += Eigen::Vector3d(m_gnss.gaussian(sigma), m_gnss.gaussian(sigma), m_gnss.gaussian(sigma_z));
        fix.heading += m_heading.gaussian(sigma_h);
    }
    fix.heading = std::remainder(fix.heading, 2.0 * std::numbers::pi);
    fix.variance = {sigma * sigma, sigma * sigma, sigma_z * sigma_z};
    fix.heading_variance = sigma_h * sigma_h;
    while (m_outlier_next < m_faults.gnss_outlier.size() && m_faults.gnss_outlier[m_outlier_next].t <= now)
    {
        const auto& o = m_faults.gnss_outlier[m_outlier_next++];
        fix.position.x() += o.dx;
        fix.position.y() += o.dy;
    }
    return fix;
}

ImuSample SensorSuite::sample_imu(const PlantState& s, double roll_rate, double now)
{
    ImuSample imu;
    imu.stamp = now;
    const double sr = std::sin(s.roll), cr = std::cos(s.roll);
    imu.gyro = {roll_rate, s.yaw_rate * sr, s.yaw_rate * cr};
    imu.accel = {s.a_x, s.a_y + kGravity * sr, kGravity * cr};
    if (m_cfg.noise)
    {
        imu.gyro += Eigen::Vector3d(m_gyro.gaussian(m_cfg.gyro_sigma), m_gyro.gaussian(m_cfg.gyro_sigma),
                                    m_gyro.gaussian(m_cfg.gyro_sigma));
        imu.gyro.z() += m_cfg.gyro_bias;
        // Band-limited vibration: first-order filtered white noise with unit-preserving gain.
        const double a = std::exp(-2.0 * std::numbers::pi * m_cfg.vibration_corner * m_cfg.imu_period);
        const double b = std::sqrt(1.0 - a * a) * m_cfg.vibration_sigma;
        for (int k = 0; k < 3; ++k)
        {
            m_vib_state(k) = a * m_vib_state(k) + b * m_vib.gaussian();
        }
        imu.accel += m_vib_state + Eigen::Vector3d(m_cfg.accel_bias, m_cfg.accel_bias, 0.0);
    }
    return imu;
}

} // namespace racestack::plant
