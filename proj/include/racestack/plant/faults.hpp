#pragma once

#include <optional>
#include <string>
#include <vector>

namespace racestack::plant
{

enum class ActuatorChannel
{
    Steering,
    Brake,
    Throttle,
};

enum class ActuatorFaultMode
{
    Stuck, // echo frozen at its value when the fault starts
    Lag,   // time constant multiplied by `lag_factor`
};

const char* to_string(ActuatorChannel c) noexcept;
ActuatorChannel parse_channel(const std::string& s);
ActuatorFaultMode parse_fault_mode(const std::string& s);

struct ActuatorFault
{
    ActuatorChannel channel = ActuatorChannel::Steering;
    ActuatorFaultMode mode = ActuatorFaultMode::Stuck;
    double t0 = 0.0;
    double lag_factor = 40.0;
};

struct TimeWindow
{
    double t0 = 0.0;
    double t1 = 0.0;
    bool contains(double t) const noexcept { return t >= t0 && t < t1; }
};

struct RtkDegrade
{
    TimeWindow window;
    int status = 1; // RtkStatus value
};

struct GnssOutlier
{
    double t = 0.0;
    double dx = 0.0;
    double dy = 0.0;
};

struct TaskStall
{
    std::string task;
    TimeWindow window;
};

/// Injected faults for one run. Times are seconds of simulated time.
struct FaultSchedule
{
    std::vector<TimeWindow> rtk_dropout;
    std::vector<RtkDegrade> rtk_degrade;
    std::vector<TimeWindow> counter_freeze;
    std::vector<ActuatorFault> actuator;
    std::vector<GnssOutlier> gnss_outlier;
    std::vector<TaskStall> task_stall;

    bool dropout_at(double t) const noexcept;
    bool counter_frozen_at(double t) const noexcept;
    std::optional<int> degraded_status_at(double t) const noexcept;
    bool empty() const noexcept;
};

/// Parses one fault expression such as `rtk_dropout(10, 11)`, `counter_freeze(42.5, 0.3)`
/// or `actuator_fault(steering, stuck, 3)`. Throws ConfigError.
void parse_fault(const std::string& expr, FaultSchedule& into);

} // namespace racestack::plant
