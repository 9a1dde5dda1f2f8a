#pragma once

#include "racestack/plant/faults.hpp"
#include "racestack/plant/types.hpp"

#include <functional>
#include <optional>
#include <string>

namespace racestack::plant
{

enum class CommandVerdict
{
    Accepted,
    Stale,
    Ignored, // state does not take commands
};

struct ActuationTestResult
{
    bool passed = false;
    std::optional<ActuatorChannel> failed_channel;
};

/// First-order lag with a rate limit. Faults freeze the echo or slow it down.
class Actuator
{
public:
    Actuator() = default;
    Actuator(double tau, double rate) : m_tau(tau), m_rate(rate) {}

    double step(double target, double dt, double now);
    /// Rate limit only, no lag. Faults still apply.
    double slew(double target, double dt, double now);
    void set(double value) noexcept { m_value = value; }
    double value() const noexcept { return m_value; }
    void set_fault(const ActuatorFault& f) { m_fault = f; }

private:
    double m_tau = 0.05;
    double m_rate = 1e9;
    double m_value = 0.0;
    std::optional<ActuatorFault> m_fault;
    std::optional<double> m_stuck_at;
};

/// Ground-truth vehicle: dynamic bicycle with linear tires, drivetrain, actuators and
/// the low-level state machine with its rolling-counter watchdog.
class Vehicle
{
public:
    using BankLookup = std::function<double(double x, double y)>;

    explicit Vehicle(VehicleParams params = {}, PlantState initial = {});

    /// Sweeps steering +-10 deg and pulses the brake; on success the state becomes ENGINE_ON.
    ActuationTestResult run_actuation_test();

    void enable_driving(double now);
    /// Commanded from the supervisor once a controlled stop reaches standstill.
    void request_supervised_stop();
    void trigger_emergency(const std::string& cause);

    /// Accepts the command when the rolling counter advanced by 1..127 (mod 256).
    CommandVerdict receive(const ActuationCommand& cmd, double now);

    /// Advances by dt (split into <= 2 ms substeps). Runs the watchdog first.
    const PlantState& step(double dt);

    const PlantState& state() const noexcept { return m_state; }
    const VehicleParams& params() const noexcept { return m_params; }
    const ActuationCommand& active_command() const noexcept { return m_cmd; }
    bool faulted() const noexcept { return m_faulted; }
    const std::string& emergency_cause() const noexcept { return m_emergency_cause; }
    double last_counter_advance() const noexcept { return m_last_advance; }

    void set_bank_lookup(BankLookup f) { m_bank = std::move(f); }
    void add_actuator_fault(const ActuatorFault& f);
    /// Gear value in effect and the pending target, if a shift is running.
    std::optional<int> pending_gear() const noexcept { return m_shift_target; }

    /// Engine torque map lookup (N m), linear between map points.
    double engine_torque(double rpm) const;

private:
    void substep(double dt);
    void update_actuators(double dt);
    void update_gear();

    VehicleParams m_params;
    PlantState m_state;
    ActuationCommand m_cmd;
    Actuator m_throttle;
    Actuator m_brake_front;
    Actuator m_brake_rear;
    Actuator m_steering;
    BankLookup m_bank;
    double m_last_advance = 0.0;
    bool m_counter_seen = false;
    double m_latched_steering = 0.0;
    std::optional<int> m_shift_target;
    double m_shift_started = 0.0;
    bool m_faulted = false;
    std::string m_emergency_cause;
};

} // namespace racestack::plant

namespace racestack::plant
{

/// Controller-to-vehicle link. While a counter freeze is injected it keeps resending
/// the last counter value, which is what a stalled middleware looks like to the ECU.
class CommandLink
{
public:
    explicit CommandLink(FaultSchedule faults = {}) : m_faults(std::move(faults)) {}

    ActuationCommand transmit(ActuationCommand cmd, double now);

private:
    FaultSchedule m_faults;
    std::optional<std::uint8_t> m_last_sent;
};

} // namespace racestack::plant
