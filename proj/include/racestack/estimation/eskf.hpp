#pragma once

#include "racestack/estimation/types.hpp"
#include "racestack/plant/types.hpp"

#include <Eigen/Core>

#include <array>
#include <optional>

namespace racestack::estimation
{

struct EskfConfig
{
    double gyro_noise = 0.005;        // rad/s/sqrt(Hz)
    double gyro_bias_walk = 1e-5;     // rad/s^2/sqrt(Hz)
    double velocity_walk = 1.0;       // m/s^2/sqrt(Hz), unmodeled acceleration
    double position_walk = 0.01;      // m/sqrt(s)
    std::array<double, 4> variance_threshold{0.01, 0.25, 4.0, 0.0}; // m^2 by RtkStatus
    double height_sigma = 10.0;       // m, floor on the vertical measurement noise
    double imq_c = 3.0;
    bool robust = true;               // IMQ weighting on/off (off only for comparison runs)
    double motion_slack = 1.0;        // m
    double t_dr = 0.5;                // s
    double t_reinit = 2.0;            // s
    double jump_k = 2.0;
    double jump_slack = 0.5;          // m
    double gnss_period = 0.05;        // s, the dt in the re-init jump bound
    double trust_alpha = 0.2;         // EMA weight per fix
    double bank_sigma = 0.1 * 3.14159265358979323846 / 180.0; // rad
    double lane_bound = 5.0;          // m, banking is only trusted this close to the line
    double l_f = 1.30;
    double l_r = 1.6718;
};

enum class EskfMode
{
    Tracking,
    DeadReckoning,
    Reinit,
};

struct GateReport
{
    bool variance_ok = false;
    bool rtk_ok = false;
    bool motion_prior_ok = false;
    double mahalanobis = 0.0;
    double imq_weight = 1.0;

    bool accepted() const noexcept { return variance_ok && rtk_ok && motion_prior_ok; }
};

/// w = (1 + m^2/c^2)^(-1/2) for a squared Mahalanobis distance m^2.
double imq_weight(double m2, double c);

/// Same weight from a residual and its innovation covariance; empty when the
/// covariance is singular.
std::optional<double> imq_weight(const Eigen::VectorXd& residual, const Eigen::MatrixXd& innovation_cov, double c);

/// Error-state filter over position, velocity, roll/pitch/yaw and gyro bias.
/// Velocity is carried in ENU and turned with the yaw rate between fixes; it is
/// corrected by finite differences of accepted fixes.
class Eskf
{
public:
    using Matrix12 = Eigen::Matrix<double, 12, 12>;

    explicit Eskf(EskfConfig cfg = {});

    /// Propagates to imu.stamp + dt using the sample's rates. Returns false (no change)
    /// for non-finite samples or dt outside (0, 0.02].
    bool predict(const plant::ImuSample& imu, double dt);

    GateReport gate(const plant::GnssFix& fix) const;

    /// Gates and fuses one fix. Returns the gate report; rejected fixes leave the state untouched.
    GateReport update_gnss(const plant::GnssFix& fix);

    /// Mode and trust bookkeeping at time `now`.
    EskfMode check_deadreckoning(double now);

    /// Roll (and optionally pitch) pseudo-measurement from track banking.
    /// No-op when the vehicle is farther than lane_bound from the line.
    bool correct_banking(double bank, double cross_track, std::optional<double> grade = std::nullopt);

    void set_road_wheel_angle(double delta) noexcept { m_road_wheel = delta; }

    EstimatedState output(double now) const;

    bool initialized() const noexcept { return m_init_stage >= 2; }
    EskfMode mode() const noexcept { return m_mode; }
    bool failed() const noexcept { return m_failed; }
    double trust() const noexcept;
    double time() const noexcept { return m_time; }
    const Matrix12& covariance() const noexcept { return m_P; }
    const Eigen::Vector3d& position() const noexcept { return m_p; }
    const Eigen::Vector3d& velocity_world() const noexcept { return m_v; }
    const Eigen::Vector3d& rpy() const noexcept { return m_rpy; }
    const Eigen::Vector3d& gyro_bias() const noexcept { return m_bg; }
    double last_fix_time() const noexcept { return m_last_fix_time; }
    const EskfConfig& config() const noexcept { return m_cfg; }

    /// Test hooks.
    void set_state(const Eigen::Vector3d& p, const Eigen::Vector3d& v, const Eigen::Vector3d& rpy, double now);
    void set_covariance(const Matrix12& P) { m_P = P; }

private:
    template <int M>
    void kalman_update(const Eigen::Matrix<double, M, 1>& residual, const Eigen::Matrix<double, M, 12>& H,
                       const Eigen::Matrix<double, M, M>& R);
    void inject(const Eigen::Matrix<double, 12, 1>& dx);
    void initialize_from(const plant::GnssFix& fix);

    EskfConfig m_cfg;
    Eigen::Vector3d m_p = Eigen::Vector3d::Zero();
    Eigen::Vector3d m_v = Eigen::Vector3d::Zero();
    Eigen::Vector3d m_rpy = Eigen::Vector3d::Zero();
    Eigen::Vector3d m_bg = Eigen::Vector3d::Zero();
    Eigen::Vector3d m_omega = Eigen::Vector3d::Zero(); // bias-corrected body rates
    double m_yaw_rate = 0.0;
    Matrix12 m_P = Matrix12::Identity();
    double m_time = 0.0;
    double m_last_fix_time = 0.0;
    std::optional<plant::GnssFix> m_last_fix;
    int m_init_stage = 0;
    EskfMode m_mode = EskfMode::Reinit;
    bool m_failed = false;
    double m_gate_ema = 0.0;
    double m_decay = 0.0;
    double m_road_wheel = 0.0;
};

} // namespace racestack::estimation
