#include "racestack/estimation/eskf.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace racestack::estimation
{

namespace
{

constexpr int kP = 0, kV = 3, kTh = 6, kBg = 9;

double wrap(double a)
{
    return std::remainder(a, 2.0 * 3.14159265358979323846);
}

Eigen::Matrix3d euler_rate_matrix(double roll, double pitch)
{
    const double sr = std::sin(roll), cr = std::cos(roll);
    const double cp = std::cos(pitch), tp = std::tan(pitch);
    Eigen::Matrix3d E;
    E << 1.0, sr * tp, cr * tp,
         0.0, cr, -sr,
         0.0, sr / cp, cr / cp;
    return E;
}

Eigen::Vector2d rotate(const Eigen::Vector2d& v, double a)
{
    const double c = std::cos(a), s = std::sin(a);
    return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

bool finite(const Eigen::Vector3d& v)
{
    return v.allFinite();
}

} // namespace

const char* to_string(EstimatorStatus s) noexcept
{
    switch (s)
    {
    case EstimatorStatus::Ok: return "OK";
    case EstimatorStatus::DeadReckoning: return "DEAD_RECKONING";
    case EstimatorStatus::Reinitializing: return "REINIT";
    case EstimatorStatus::Failed: return "FAILED";
    }
    return "?";
}

double imq_weight(double m2, double c)
{
    return 1.0 / std::sqrt(1.0 + std::max(m2, 0.0) / (c * c));
}

std::optional<double> imq_weight(const Eigen::VectorXd& residual, const Eigen::MatrixXd& innovation_cov, double c)
{
    Eigen::LDLT<Eigen::MatrixXd> ldlt(innovation_cov);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array().abs() < 1e-300).any())
        return std::nullopt;
    const double m2 = residual.dot(ldlt.solve(residual));
    if (!std::isfinite(m2))
        return std::nullopt;
    return imq_weight(m2, c);
}

Eskf::Eskf(EskfConfig cfg) : m_cfg(cfg)
{
}

void Eskf::set_state(const Eigen::Vector3d& p, const Eigen::Vector3d& v, const Eigen::Vector3d& rpy, double now)
{
    m_p = p;
    m_v = v;
    m_rpy = rpy;
    m_time = now;
    m_last_fix_time = now;
    m_last_fix.reset();
    m_init_stage = 2;
    m_mode = EskfMode::Tracking;
    m_gate_ema = 1.0;
    m_decay = 1.0;
    m_P = Matrix12::Identity() * 1e-4;
}

bool Eskf::predict(const plant::ImuSample& imu, double dt)
{
    if (!(dt > 0.0 && dt <= 0.02) || !finite(imu.gyro) || !finite(imu.accel))
        return false;
    m_time = imu.stamp + dt;
    if (m_init_stage == 0)
        return true;

    const Eigen::Vector3d omega = imu.gyro - m_bg;
    const Eigen::Matrix3d E = euler_rate_matrix(m_rpy.x(), m_rpy.y());
    const Eigen::Vector3d rates = E * omega;
    m_omega = omega;
    m_yaw_rate = rates.z();

    const Eigen::Vector2d vh_old = m_v.head<2>();
    const double dpsi = rates.z() * dt;
    const Eigen::Vector2d vh_new = rotate(vh_old, dpsi);

    m_rpy += rates * dt;
    m_rpy.x() = wrap(m_rpy.x());
    m_rpy.z() = wrap(m_rpy.z());
    m_p.head<2>() += 0.5 * (vh_old + vh_new) * dt;
    m_p.z() += m_v.z() * dt;
    m_v.head<2>() = vh_new;

    Matrix12 F = Matrix12::Identity();
    F.block<3, 3>(kP, kV) = Eigen::Matrix3d::Identity() * dt;
    const double c = std::cos(dpsi), s = std::sin(dpsi);
    F.block<2, 2>(kV, kV) << c, -s, s, c;
    const Eigen::Vector2d dv_dpsi(-vh_new.y(), vh_new.x());
    F.block<2, 3>(kV, kBg) = -dt * dv_dpsi * E.row(2);
    F.block<3, 3>(kTh, kBg) = -E * dt;

    Matrix12 Q = Matrix12::Zero();
    const double qp = m_cfg.position_walk * m_cfg.position_walk * dt;
    const double qv = m_cfg.velocity_walk * m_cfg.velocity_walk * dt;
    const double qg = m_cfg.gyro_noise * m_cfg.gyro_noise * dt;
    const double qb = m_cfg.gyro_bias_walk * m_cfg.gyro_bias_walk * dt;
    for (int i = 0; i < 3; ++i)
    {
        Q(kP + i, kP + i) = qp;
        Q(kV + i, kV + i) = i < 2 ? qv : 0.1 * qv;
        Q(kTh + i, kTh + i) = qg;
        Q(kBg + i, kBg + i) = qb;
    }
    m_P = F * m_P * F.transpose() + Q;
    m_P = 0.5 * (m_P + m_P.transpose()).eval();
    return true;
}

template <int M>
void Eskf::kalman_update(const Eigen::Matrix<double, M, 1>& residual, const Eigen::Matrix<double, M, 12>& H,
                         const Eigen::Matrix<double, M, M>& R)
{
    const Eigen::Matrix<double, M, M> S = H * m_P * H.transpose() + R;
    Eigen::LDLT<Eigen::Matrix<double, M, M>> ldlt(S);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        return;
    const Eigen::Matrix<double, 12, M> K = ldlt.solve(H * m_P).transpose();
    const Matrix12 IKH = Matrix12::Identity() - K * H;
    m_P = IKH * m_P * IKH.transpose() + K * R * K.transpose();
    m_P = 0.5 * (m_P + m_P.transpose()).eval();
    inject(K * residual);
}

void Eskf::inject(const Eigen::Matrix<double, 12, 1>& dx)
{
    m_p += dx.segment<3>(kP);
    m_v += dx.segment<3>(kV);
    m_rpy += dx.segment<3>(kTh);
    m_rpy.x() = wrap(m_rpy.x());
    m_rpy.z() = wrap(m_rpy.z());
    m_bg += dx.segment<3>(kBg);
}

GateReport Eskf::gate(const plant::GnssFix& fix) const
{
    GateReport g;
    const auto idx = static_cast<std::size_t>(fix.status);
    g.variance_ok = fix.status != plant::RtkStatus::None && idx < m_cfg.variance_threshold.size() &&
                    finite(fix.position) && finite(fix.variance) && fix.variance.x() > 0.0 && fix.variance.y() > 0.0 &&
                    fix.variance.x() <= m_cfg.variance_threshold[idx] &&
                    fix.variance.y() <= m_cfg.variance_threshold[idx];
    g.rtk_ok = fix.status == plant::RtkStatus::Fixed || fix.status == plant::RtkStatus::Float;

    if (!initialized())
    {
        g.motion_prior_ok = true;
        return g;
    }
    const Eigen::Vector2d r = fix.position.head<2>() - m_p.head<2>();
    const double speed = m_v.head<2>().norm();
    if (m_mode == EskfMode::Reinit)
    {
        g.motion_prior_ok = r.norm() <= m_cfg.jump_k * speed * m_cfg.gnss_period + m_cfg.jump_slack;
    }
    else
    {
        const double dt = std::max(0.0, fix.stamp - m_last_fix_time);
        g.motion_prior_ok = r.norm() <= speed * dt + m_cfg.motion_slack;
    }
    if (g.variance_ok)
    {
        Eigen::Matrix2d S = m_P.block<2, 2>(kP, kP);
        S(0, 0) += fix.variance.x();
        S(1, 1) += fix.variance.y();
        const auto w = imq_weight(Eigen::VectorXd(r), Eigen::MatrixXd(S), m_cfg.imq_c);
        const double m2 = r.dot(S.ldlt().solve(r));
        g.mahalanobis = std::sqrt(std::max(m2, 0.0));
        g.imq_weight = m_cfg.robust && w ? *w : 1.0;
    }
    return g;
}

void Eskf::initialize_from(const plant::GnssFix& fix)
{
    if (m_init_stage == 0)
    {
        m_p = fix.position;
        m_rpy = {0.0, 0.0, fix.heading};
        m_v.setZero();
        m_bg.setZero();
        m_P.setZero();
        m_P.block<3, 3>(kP, kP) = fix.variance.asDiagonal();
        m_P.block<3, 3>(kV, kV) = Eigen::Matrix3d::Identity() * 100.0;
        m_P(kTh, kTh) = m_P(kTh + 1, kTh + 1) = 0.05 * 0.05;
        m_P(kTh + 2, kTh + 2) = std::max(fix.heading_variance, 1e-8);
        m_P.block<3, 3>(kBg, kBg) = Eigen::Matrix3d::Identity() * 1e-6;
        m_init_stage = 1;
    }
    else
    {
        const double dt = fix.stamp - m_last_fix->stamp;
        if (dt <= 0.0)
            return;
        const Eigen::Vector3d v = (fix.position - m_last_fix->position) / dt;
        m_v = {v.x(), v.y(), 0.0};
        m_v.head<2>() = rotate(m_v.head<2>(), 0.5 * m_yaw_rate * dt);
        m_p = fix.position;
        m_P.block<6, 12>(kP, 0).setZero();
        m_P.block<12, 6>(0, kP).setZero();
        m_P.block<3, 3>(kP, kP) = fix.variance.asDiagonal();
        const Eigen::Vector3d vv = (fix.variance + m_last_fix->variance) / (dt * dt);
        m_P.block<3, 3>(kV, kV) = vv.asDiagonal();
        m_P(kV + 2, kV + 2) = 1.0;
        m_init_stage = 2;
        m_mode = EskfMode::Tracking;
        m_gate_ema = 1.0;
        m_decay = 1.0;
    }
    m_last_fix = fix;
    m_last_fix_time = fix.stamp;
}

GateReport Eskf::update_gnss(const plant::GnssFix& fix)
{
    if (m_failed)
        return gate(fix);
    if (!initialized())
    {
        GateReport g = gate(fix);
        if (g.variance_ok && g.rtk_ok)
            initialize_from(fix);
        return g;
    }
    check_deadreckoning(fix.stamp);
    const GateReport g = gate(fix);

    if (m_mode == EskfMode::Reinit)
    {
        if (!g.variance_ok || !g.rtk_ok)
            return g;
        if (!g.motion_prior_ok)
        {
            m_failed = true;
            return g;
        }
        m_p = fix.position;
        m_P.block<3, 12>(kP, 0).setZero();
        m_P.block<12, 3>(0, kP).setZero();
        m_P.block<3, 3>(kP, kP) = fix.variance.asDiagonal();
        m_last_fix = fix;
        m_last_fix_time = fix.stamp;
        m_mode = EskfMode::Tracking;
        m_decay = 1.0;
        m_gate_ema = m_cfg.trust_alpha;
        return g;
    }

    m_gate_ema = (1.0 - m_cfg.trust_alpha) * m_gate_ema + m_cfg.trust_alpha * (g.accepted() ? 1.0 : 0.0);
    if (!g.accepted())
        return g;

    const double w2 = g.imq_weight * g.imq_weight;
    {
        Eigen::Matrix<double, 3, 12> H = Eigen::Matrix<double, 3, 12>::Zero();
        H.block<3, 3>(0, kP).setIdentity();
        Eigen::Matrix3d R = Eigen::Matrix3d::Zero();
        R(0, 0) = fix.variance.x() / w2;
        R(1, 1) = fix.variance.y() / w2;
        R(2, 2) = std::max(fix.variance.z(), m_cfg.height_sigma * m_cfg.height_sigma) / w2;
        kalman_update<3>(fix.position - m_p, H, R);
    }
    if (std::isfinite(fix.heading) && fix.heading_variance > 0.0)
    {
        Eigen::Matrix<double, 1, 12> H = Eigen::Matrix<double, 1, 12>::Zero();
        H(0, kTh + 2) = 1.0;
        Eigen::Matrix<double, 1, 1> r;
        r(0) = wrap(fix.heading - m_rpy.z());
        const double s = m_P(kTh + 2, kTh + 2) + fix.heading_variance;
        const double w = m_cfg.robust ? imq_weight(r(0) * r(0) / s, m_cfg.imq_c) : 1.0;
        Eigen::Matrix<double, 1, 1> R;
        R(0) = fix.heading_variance / (w * w);
        kalman_update<1>(r, H, R);
    }
    if (m_last_fix)
    {
        const double dt = fix.stamp - m_last_fix->stamp;
        if (dt > 1e-3 && dt <= 0.5)
        {
            Eigen::Vector2d vfd = (fix.position - m_last_fix->position).head<2>() / dt;
            vfd = rotate(vfd, 0.5 * m_yaw_rate * dt);
            Eigen::Matrix<double, 2, 12> H = Eigen::Matrix<double, 2, 12>::Zero();
            H.block<2, 2>(0, kV).setIdentity();
            Eigen::Matrix2d R = Eigen::Matrix2d::Zero();
            R(0, 0) = (fix.variance.x() + m_last_fix->variance.x()) / (dt * dt);
            R(1, 1) = (fix.variance.y() + m_last_fix->variance.y()) / (dt * dt);
            const Eigen::Vector2d r = vfd - m_v.head<2>();
            double w = 1.0;
            if (m_cfg.robust)
            {
                const Eigen::Matrix2d S = m_P.block<2, 2>(kV, kV) + R;
                w = imq_weight(r.dot(S.ldlt().solve(r)), m_cfg.imq_c);
            }
            kalman_update<2>(r, H, R / (w * w));
        }
    }
    m_last_fix = fix;
    m_last_fix_time = fix.stamp;
    m_mode = EskfMode::Tracking;
    m_decay = 1.0;
    return g;
}

EskfMode Eskf::check_deadreckoning(double now)
{
    if (!initialized())
        return m_mode;
    const double since = now - m_last_fix_time;
    if (m_mode == EskfMode::Reinit || since > m_cfg.t_reinit)
    {
        m_mode = EskfMode::Reinit;
        m_decay = 0.0;
    }
    else if (since > m_cfg.t_dr)
    {
        m_mode = EskfMode::DeadReckoning;
        m_decay = 1.0 - (since - m_cfg.t_dr) / (m_cfg.t_reinit - m_cfg.t_dr);
    }
    else
    {
        m_mode = EskfMode::Tracking;
        m_decay = 1.0;
    }
    return m_mode;
}

bool Eskf::correct_banking(double bank, double cross_track, std::optional<double> grade)
{
    if (!initialized() || !std::isfinite(bank) || !(std::abs(cross_track) <= m_cfg.lane_bound))
        return false;
    const double r2 = m_cfg.bank_sigma * m_cfg.bank_sigma;
    Eigen::Matrix<double, 1, 12> H = Eigen::Matrix<double, 1, 12>::Zero();
    Eigen::Matrix<double, 1, 1> r, R;
    R(0) = r2;
    H(0, kTh) = 1.0;
    r(0) = wrap(bank - m_rpy.x());
    kalman_update<1>(r, H, R);
    if (grade && std::isfinite(*grade))
    {
        H.setZero();
        H(0, kTh + 1) = 1.0;
        r(0) = *grade - m_rpy.y();
        kalman_update<1>(r, H, R);
    }
    return true;
}

double Eskf::trust() const noexcept
{
    if (!initialized() || m_failed)
        return 0.0;
    return std::clamp(m_gate_ema * m_decay, 0.0, 1.0);
}

EstimatedState Eskf::output(double now) const
{
    EstimatedState out;
    out.stamp = now;
    out.position = m_p;
    out.rpy = m_rpy;
    const double yaw = m_rpy.z();
    const double c = std::cos(yaw), s = std::sin(yaw);
    out.velocity = {c * m_v.x() + s * m_v.y(), -s * m_v.x() + c * m_v.y(), m_v.z()};
    out.angular_velocity = m_omega;
    const double vx = out.velocity.x(), vy = out.velocity.y();
    if (vx > 1.0)
    {
        const double r = m_omega.z();
        out.slip_angle_front = m_road_wheel - std::atan2(vy + m_cfg.l_f * r, vx);
        out.slip_angle_rear = -std::atan2(vy - m_cfg.l_r * r, vx);
    }
    out.trust = trust();
    if (m_failed)
        out.status = EstimatorStatus::Failed;
    else if (!initialized())
        out.status = EstimatorStatus::Reinitializing;
    else
    {
        switch (m_mode)
        {
        case EskfMode::Tracking: out.status = EstimatorStatus::Ok; break;
        case EskfMode::DeadReckoning: out.status = EstimatorStatus::DeadReckoning; break;
        case EskfMode::Reinit: out.status = EstimatorStatus::Reinitializing; break;
        }
    }
    return out;
}

} // namespace racestack::estimation
