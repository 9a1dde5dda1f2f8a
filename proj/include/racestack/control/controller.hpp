#pragma once

#include "racestack/estimation/types.hpp"
#include "racestack/planner/planner.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace racestack::control
{

struct PidGains
{
    double kp = 0.0;
    double ki = 0.0;
    double kd = 0.0;
    double i_max = 0.0;
    double cmd_max = 0.0;
    double d_tau = 0.05; // derivative low-pass time constant, s
};

/// PID on a scalar error. The integral is clamped to +-i_max, the derivative is
/// low-passed, and a fresh controller treats the previous error as zero.
class Pid
{
public:
    explicit Pid(PidGains g = {}) : m_g(g) {}

    /// Raw output (unclamped); callers clamp to [0, cmd_max].
    double update(double error, double dt);
    void reset();

    double integral() const noexcept { return m_integral; }
    double derivative() const noexcept { return m_derivative; }
    const PidGains& gains() const noexcept { return m_g; }

private:
    PidGains m_g;
    double m_integral = 0.0;
    double m_prev_error = 0.0;
    double m_derivative = 0.0;
};

struct GearTable
{
    std::array<double, 5> up{4000.0, 4200.0, 4300.0, 4400.0, 4500.0};   // from gears 1..5
    std::array<double, 5> down{2000.0, 2100.0, 2200.0, 2300.0, 2400.0}; // from gears 2..6
    double hold = 0.5; // s
};

struct ControlParams
{
    double rate = 50.0;
    double lateral_error_threshold = 3.5;
    double trajectory_timeout = 0.2;
    double joystick_timeout = 5.0;
    double throttle_deadband = 0.2; // m/s
    double brake_deadband = 0.4;    // m/s
    PidGains throttle{17.0, 16.0, 1.1, 0.5, 55.0};
    PidGains brake{300.0, 0.0, 2.0, 15.0, 1800.0};
    double k_lookahead = 0.63;
    double ld_min = 15.0;
    double ld_max = 27.0;
    double steering_gain = 1.0;
    double wheelbase = 2.9718;
    double steering_ratio = 15.0;
    double max_steering = 230.0; // hand-wheel degrees
    std::size_t reference_index = 2;
    GearTable gears;

    /// Throws ConfigError.
    void validate() const;
};

enum class CommandSource : std::int8_t
{
    Autonomy = 0,
    Joystick = 1,
    Failsafe = 2,
};

const char* to_string(CommandSource s) noexcept;

struct LongitudinalCommand
{
    double throttle = 0.0;
    double brake = 0.0;
};

/// Single-shift decision without hold logic.
int gear_logic(double rpm, int gear, const GearTable& table = {});

/// Gear logic with the shift hold: no new request until the previous one has been
/// honoured and `hold` seconds have passed.
class GearShifter
{
public:
    explicit GearShifter(GearTable table = {}) : m_table(table) {}

    int update(double rpm, int actual_gear, double now);
    int command() const noexcept { return m_cmd; }
    void reset(int gear) noexcept { m_cmd = gear; m_last_shift = -1e9; }

private:
    GearTable m_table;
    int m_cmd = 1;
    double m_last_shift = -1e9;
};

double adaptive_lookahead(double v_car, const ControlParams& p = {});

struct LookaheadPoint
{
    double x = 0.0;
    double y = 0.0;
    bool short_path = false; // path never reached Ld; last point used
};

/// First crossing of the Ld circle, interpolated on the crossing segment.
std::optional<LookaheadPoint> find_lookahead(const std::vector<planner::PathPoint>& points, double ld);

struct PurePursuit
{
    double steering_deg = 0.0;   // hand-wheel
    double road_wheel = 0.0;     // rad
    double lookahead_distance = 0.0;
    double lookahead_angle = 0.0; // rad
    LookaheadPoint point;
};

/// Steering toward a lookahead point (vehicle frame).
PurePursuit pure_pursuit_point(double x, double y, double ld, const ControlParams& p = {});

/// Pure pursuit on a vehicle-frame path at the adaptive lookahead for v_car.
std::optional<PurePursuit> pure_pursuit(const std::vector<planner::PathPoint>& points, double v_car,
                                        const ControlParams& p = {});

struct JoystickCommand
{
    bool enabled = false;
    double brake = 0.0;    // kPa
    double steering = 0.0; // hand-wheel degrees
    double target_velocity = 0.0;
    double stamp = -1e9;
};

struct ControllerInputs
{
    const planner::LocalPath* path = nullptr;
    const estimation::EstimatedState* state = nullptr;
    JoystickCommand joystick;
    double engine_rpm = 0.0;
    int gear = 1;
    double now = 0.0;
};

struct ControllerOutput
{
    double throttle = 0.0;
    double brake = 0.0;
    double steering = 0.0; // hand-wheel degrees
    int gear = 1;
    CommandSource source = CommandSource::Failsafe;
    std::uint8_t rolling_counter = 0;

    double v_ref = 0.0;
    double velocity_error = 0.0;
    double lookahead_distance = 0.0;
    double lookahead_angle = 0.0;
    double heading_error = 0.0;
    double cross_track = 0.0;
    double stamp = 0.0;
};

class Controller
{
public:
    explicit Controller(ControlParams p = {}, runtime::FaultReporter faults = {});

    /// One control cycle. Priority: dependency timeout, joystick override, autonomy.
    ControllerOutput step(const ControllerInputs& in);

    /// Throttle/brake from the velocity error; updates the PIDs.
    LongitudinalCommand longitudinal(double v_ref, double v_car, double dt);

    const ControlParams& params() const noexcept { return m_p; }
    const Pid& throttle_pid() const noexcept { return m_throttle; }
    const Pid& brake_pid() const noexcept { return m_brake; }

private:
    enum class Mode
    {
        Coast,
        Throttle,
        Brake,
    };

    ControllerOutput failsafe(double now);
    void fault(const std::string& msg) const;

    ControlParams m_p;
    runtime::FaultReporter m_faults;
    Pid m_throttle;
    Pid m_brake;
    Mode m_mode = Mode::Coast;
    GearShifter m_shifter;
    double m_last_steering = 0.0;
    std::uint8_t m_counter = 0;
    double m_dt;
};

} // namespace racestack::control
