#include "racestack/runtime/scheduler.hpp"

#include "racestack/errors.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <limits>
#include <thread>

namespace racestack::runtime
{

Scheduler::Scheduler(SimClock& clock, Bus& bus)
    : m_clock(&clock), m_bus(&bus), m_faults(bus.advertise<FaultEvent>(kFaultTopic, "runtime", 64))
{
}

void Scheduler::add_task(TaskSpec spec)
{
    if (!(spec.period > 0.0))
    {
        throw ConfigError("task '" + spec.name + "' needs a positive period");
    }
    if (!spec.callback)
    {
        throw ConfigError("task '" + spec.name + "' has no callback");
    }
    auto pos = std::lower_bound(m_tasks.begin(), m_tasks.end(), spec.name,
                                [](const Task& t, const std::string& n) { return t.spec.name < n; });
    if (pos != m_tasks.end() && pos->spec.name == spec.name)
    {
        throw ConfigError("duplicate task name '" + spec.name + "'");
    }
    Task task;
    task.period = m_clock->ticks_exact(spec.period);
    const Tick phase = m_clock->ticks_exact(spec.phase);
    // First firing strictly after the current time.
    Tick next = phase + task.period;
    if (next <= m_clock->now())
    {
        const Tick behind = m_clock->now() - phase;
        next = phase + (behind / task.period + 1) * task.period;
    }
    task.next = next;
    task.spec = std::move(spec);
    m_tasks.insert(pos, std::move(task));
}

std::vector<Execution> Scheduler::advance(double until)
{
    std::vector<Execution> trace;
    step_to(m_clock->ticks_round(until), &trace, false, 1.0);
    return trace;
}

void Scheduler::run_until(double until)
{
    step_to(m_clock->ticks_round(until), nullptr, false, 1.0);
}

void Scheduler::run_until_tick(Tick until)
{
    step_to(until, nullptr, false, 1.0);
}

void Scheduler::run_wallclock(double until, double speed)
{
    if (!(speed > 0.0))
    {
        throw ConfigError("wall-clock speed factor must be positive");
    }
    step_to(m_clock->ticks_round(until), nullptr, true, speed);
}

void Scheduler::suspend(const std::string& name, Tick from, Tick to)
{
    for (auto& task : m_tasks)
    {
        if (task.spec.name == name)
        {
            task.suspended.emplace_back(from, to);
            return;
        }
    }
    throw ConfigError("cannot suspend unknown task '" + name + "'");
}

std::uint64_t Scheduler::executions(const std::string& name) const
{
    for (const auto& task : m_tasks)
    {
        if (task.spec.name == name)
        {
            return task.executed;
        }
    }
    throw ConfigError("unknown task '" + name + "'");
}

void Scheduler::report_fault(const std::string& source, const std::string& message)
{
    m_faults.publish(FaultEvent{source, message});
}

FaultReporter Scheduler::fault_reporter()
{
    return [this](const std::string& source, const std::string& message) { report_fault(source, message); };
}

void Scheduler::step_to(Tick until, std::vector<Execution>* trace, bool paced, double speed)
{
    if (until < m_clock->now())
    {
        throw ConfigError("cannot advance to a time in the past");
    }
    const auto wall_start = std::chrono::steady_clock::now();
    const Tick tick_start = m_clock->now();

    while (true)
    {
        Tick next = std::numeric_limits<Tick>::max();
        for (const auto& task : m_tasks)
        {
            next = std::min(next, task.next);
        }
        if (next > until)
        {
            break;
        }
        if (paced)
        {
            const double offset = m_clock->to_seconds(next - tick_start) / speed;
            std::this_thread::sleep_until(wall_start + std::chrono::duration<double>(offset));
        }
        m_clock->advance_to(next);
        for (auto& task : m_tasks)
        {
            if (task.next != next)
            {
                continue;
            }
            task.next += task.period;
            const bool stalled = std::any_of(task.suspended.begin(), task.suspended.end(),
                                             [next](const auto& w) { return next >= w.first && next < w.second; });
            if (stalled)
            {
                continue;
            }
            try
            {
                task.spec.callback(next);
            }
            catch (const std::exception& e)
            {
                report_fault(task.spec.name, e.what());
            }
            catch (...)
            {
                report_fault(task.spec.name, "unknown exception");
            }
            ++task.executed;
            if (trace != nullptr)
            {
                trace->push_back(Execution{task.spec.name, next});
            }
        }
    }
    m_clock->advance_to(until);
}

} // namespace racestack::runtime
