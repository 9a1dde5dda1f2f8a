#pragma once

#include "racestack/runtime/bus.hpp"
#include "racestack/runtime/clock.hpp"

#include <functional>
#include <string>
#include <vector>

namespace racestack::runtime
{

inline constexpr const char* kFaultTopic = "/runtime/faults";

struct FaultEvent
{
    std::string source;
    std::string message;
};

/// Callback used by modules to report non-fatal faults onto the fault topic.
using FaultReporter = std::function<void(const std::string& source, const std::string& message)>;

struct TaskSpec
{
    std::string name;
    double period = 0.0; // seconds
    double phase = 0.0;  // seconds
    std::function<void(Tick)> callback;
};

struct Execution
{
    std::string task;
    Tick tick = 0;

    bool operator==(const Execution&) const = default;
};

/// Fixed-rate task scheduler over the virtual clock. A task with period P and phase
/// F fires at F + k*P for k >= 1. Tasks due at the same tick run in lexicographic
/// name order. Callback exceptions become fault events; the loop keeps going.
class Scheduler
{
public:
    Scheduler(SimClock& clock, Bus& bus);

    void add_task(TaskSpec spec);

    /// Lockstep execution up to `until` seconds; returns the execution trace.
    std::vector<Execution> advance(double until);

    /// Same as advance() without building a trace.
    void run_until(double until);
    void run_until_tick(Tick until);

    /// Wall-clock mode: identical task order, paced against the steady clock.
    /// `speed` > 1 runs faster than real time.
    void run_wallclock(double until, double speed = 1.0);

    /// The named task is skipped for ticks in [from, to). Models a stalled process.
    void suspend(const std::string& name, Tick from, Tick to);

    std::uint64_t executions(const std::string& name) const;

    void report_fault(const std::string& source, const std::string& message);
    FaultReporter fault_reporter();

    const SimClock& clock() const noexcept { return *m_clock; }

private:
    struct Task
    {
        TaskSpec spec;
        Tick period = 0;
        Tick next = 0;
        std::uint64_t executed = 0;
        std::vector<std::pair<Tick, Tick>> suspended;
    };

    void step_to(Tick until, std::vector<Execution>* trace, bool paced, double speed);

    SimClock* m_clock;
    Bus* m_bus;
    Publisher<FaultEvent> m_faults;
    std::vector<Task> m_tasks; // kept sorted by name
};

} // namespace racestack::runtime
