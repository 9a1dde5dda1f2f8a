#include "racestack/safety/supervisor.hpp"

#include "racestack/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace racestack::safety
{

const char* to_string(Action a) noexcept
{
    switch (a)
    {
    case Action::None: return "NONE";
    case Action::ControlledStop: return "CONTROLLED_STOP";
    case Action::EmergencyStop: return "EMERGENCY_STOP";
    }
    return "?";
}

const char* to_string(Channel c) noexcept
{
    switch (c)
    {
    case Channel::Steering: return "steering";
    case Channel::Brake: return "brake";
    case Channel::Throttle: return "throttle";
    }
    return "?";
}

Verdict dominant(const Verdict& a, const Verdict& b)
{
    return static_cast<int>(b.action) > static_cast<int>(a.action) ? b : a;
}

std::string to_json_line(const Verdict& v)
{
    nlohmann::ordered_json j;
    j["stamp"] = v.stamp;
    j["action"] = to_string(v.action);
    j["cause"] = v.cause;
    return j.dump();
}

Verdict verdict_from_json_line(const std::string& line)
{
    try
    {
        const auto j = nlohmann::json::parse(line);
        Verdict v;
        v.stamp = j.at("stamp").get<double>();
        v.cause = j.at("cause").get<std::string>();
        const auto a = j.at("action").get<std::string>();
        if (a == "NONE")
            v.action = Action::None;
        else if (a == "CONTROLLED_STOP")
            v.action = Action::ControlledStop;
        else if (a == "EMERGENCY_STOP")
            v.action = Action::EmergencyStop;
        else
            throw FormatError("unknown verdict action '" + a + "'");
        return v;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw FormatError(std::string("bad verdict line: ") + e.what());
    }
}

void HeartbeatRegistry::add(const std::string& module, double period, double timeout, Action criticality,
                            std::string cause, double start)
{
    if (!(period > 0.0) || !(timeout >= 2.0 * period))
        throw ConfigError("heartbeat '" + module + "': timeout must be at least twice the period");
    if (criticality == Action::None)
        throw ConfigError("heartbeat '" + module + "': criticality must be a stop action");
    m_entries[module] = Entry{period, timeout, criticality, cause.empty() ? module : std::move(cause), start};
}

void HeartbeatRegistry::beat(const std::string& module, double now)
{
    auto it = m_entries.find(module);
    if (it != m_entries.end())
        it->second.last = std::max(it->second.last, now);
}

Verdict HeartbeatRegistry::check(double now) const
{
    Verdict out;
    out.stamp = now;
    for (const auto& [name, e] : m_entries)
    {
        if (now - e.last > e.timeout)
            out = dominant(out, Verdict{e.criticality, e.cause, now});
    }
    return out;
}

std::optional<double> HeartbeatRegistry::last_beat(const std::string& module) const
{
    auto it = m_entries.find(module);
    if (it == m_entries.end())
        return std::nullopt;
    return it->second.last;
}

std::vector<std::string> HeartbeatRegistry::modules() const
{
    std::vector<std::string> out;
    for (const auto& [name, _] : m_entries)
        out.push_back(name);
    return out;
}

std::optional<Channel> EchoValidator::update(const ActuatorEcho& cmd, const ActuatorEcho& actual)
{
    m_history.push_back(cmd);
    while (static_cast<int>(m_history.size()) > m_tol.lag_cycles + 1)
        m_history.pop_front();

    std::optional<Channel> out;
    const auto check = [&](Channel c, double ActuatorEcho::*field, double tol) {
        double lo = 1e300, hi = -1e300;
        for (const auto& h : m_history)
        {
            lo = std::min(lo, h.*field);
            hi = std::max(hi, h.*field);
        }
        const double a = actual.*field;
        auto& streak = m_streak[static_cast<std::size_t>(c)];
        if (!std::isfinite(a) || a < lo - tol || a > hi + tol)
            ++streak;
        else
            streak = 0;
        if (streak >= m_tol.persistence && !out)
            out = c;
    };
    check(Channel::Steering, &ActuatorEcho::steering, m_tol.steering);
    check(Channel::Brake, &ActuatorEcho::brake, m_tol.brake);
    check(Channel::Throttle, &ActuatorEcho::throttle, m_tol.throttle);
    return out;
}

void EchoValidator::reset()
{
    m_history.clear();
    m_streak = {};
}

Verdict check_cross_track(double e_ct, double threshold, double now)
{
    if (!std::isfinite(e_ct))
        return {Action::EmergencyStop, "sensor health: non-finite cross-track error", now};
    if (std::abs(e_ct) > threshold)
        return {Action::ControlledStop, "cross-track error", now};
    return {Action::None, {}, now};
}

Directives orchestrate_stop(Action action, double speed, double stop_speed)
{
    Directives d;
    if (action == Action::ControlledStop)
    {
        d.force_planner_stop = true;
        d.plant_supervised_stop = speed < stop_speed;
    }
    else if (action == Action::EmergencyStop)
    {
        d.force_planner_stop = true;
        d.plant_emergency = true;
    }
    return d;
}

Supervisor::Supervisor(SupervisorConfig cfg) : m_cfg(cfg), m_echo(cfg.echo)
{
}

std::optional<Verdict> Supervisor::step(const SupervisorInputs& in)
{
    Verdict v = m_heartbeats.check(in.now);
    if (in.lowlevel_emergency)
        v = dominant({Action::EmergencyStop, "lowlevel: " + *in.lowlevel_emergency, in.now}, v);
    if (in.state)
    {
        const auto& s = *in.state;
        if (!s.position.allFinite() || !s.velocity.allFinite() || !s.rpy.allFinite())
            v = dominant(v, {Action::EmergencyStop, "sensor health: non-finite state", in.now});
        else if (s.status == estimation::EstimatorStatus::Failed)
            v = dominant(v, {Action::EmergencyStop, "localization", in.now});
    }
    if (in.cross_track)
        v = dominant(v, check_cross_track(*in.cross_track, m_cfg.lateral_error_threshold, in.now));
    if (in.command && in.actual)
    {
        if (const auto ch = m_echo.update(*in.command, *in.actual))
            v = dominant(v, {Action::ControlledStop, std::string("command echo mismatch: ") + to_string(*ch), in.now});
    }
    if (m_action == Action::ControlledStop && in.now - m_stop_since > m_cfg.escalation_time &&
        in.speed >= m_cfg.stop_speed)
        v = dominant(v, {Action::EmergencyStop, "controlled stop escalation", in.now});

    std::optional<Verdict> onset;
    if (static_cast<int>(v.action) > static_cast<int>(m_action))
    {
        if (v.action == Action::ControlledStop)
            m_stop_since = in.now;
        m_action = v.action;
        m_latched = v;
        onset = v;
    }
    m_directives = orchestrate_stop(m_action, in.speed, m_cfg.stop_speed);
    return onset;
}

} // namespace racestack::safety
