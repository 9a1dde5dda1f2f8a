#include "racestack/plant/faults.hpp"

#include "racestack/errors.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace racestack::plant
{

namespace
{

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos)
    {
        return {};
    }
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

double number(const std::string& s, const std::string& expr)
{
    double v = 0.0;
    const auto t = trim(s);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size())
    {
        throw ConfigError("fault '" + expr + "': '" + t + "' is not a number");
    }
    return v;
}

} // namespace

const char* to_string(ActuatorChannel c) noexcept
{
    switch (c)
    {
    case ActuatorChannel::Steering: return "steering";
    case ActuatorChannel::Brake: return "brake";
    case ActuatorChannel::Throttle: return "throttle";
    }
    return "?";
}

ActuatorChannel parse_channel(const std::string& s)
{
    if (s == "steering")
        return ActuatorChannel::Steering;
    if (s == "brake")
        return ActuatorChannel::Brake;
    if (s == "throttle")
        return ActuatorChannel::Throttle;
    throw ConfigError("unknown actuator channel '" + s + "'");
}

ActuatorFaultMode parse_fault_mode(const std::string& s)
{
    if (s == "stuck")
        return ActuatorFaultMode::Stuck;
    if (s == "lag")
        return ActuatorFaultMode::Lag;
    throw ConfigError("unknown actuator fault mode '" + s + "'");
}

bool FaultSchedule::dropout_at(double t) const noexcept
{
    return std::any_of(rtk_dropout.begin(), rtk_dropout.end(), [t](const TimeWindow& w) { return w.contains(t); });
}

bool FaultSchedule::counter_frozen_at(double t) const noexcept
{
    return std::any_of(counter_freeze.begin(), counter_freeze.end(),
                       [t](const TimeWindow& w) { return w.contains(t); });
}

std::optional<int> FaultSchedule::degraded_status_at(double t) const noexcept
{
    for (const auto& d : rtk_degrade)
    {
        if (d.window.contains(t))
        {
            return d.status;
        }
    }
    return std::nullopt;
}

bool FaultSchedule::empty() const noexcept
{
    return rtk_dropout.empty() && rtk_degrade.empty() && counter_freeze.empty() && actuator.empty() &&
           gnss_outlier.empty() && task_stall.empty();
}

void parse_fault(const std::string& expr, FaultSchedule& into)
{
    const auto open = expr.find('(');
    const auto close = expr.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open)
    {
        throw ConfigError("fault '" + expr + "' must look like name(args)");
    }
    const std::string name = trim(expr.substr(0, open));
    std::vector<std::string> args;
    {
        std::stringstream ss(expr.substr(open + 1, close - open - 1));
        std::string a;
        while (std::getline(ss, a, ','))
        {
            args.push_back(trim(a));
        }
    }
    auto need = [&](std::size_t lo, std::size_t hi) {
        if (args.size() < lo || args.size() > hi)
        {
            throw ConfigError("fault '" + expr + "' has the wrong number of arguments");
        }
    };
    if (name == "rtk_dropout")
    {
        need(2, 2);
        into.rtk_dropout.push_back({number(args[0], expr), number(args[1], expr)});
    }
    else if (name == "rtk_degrade")
    {
        need(3, 3);
        int status = 0;
        if (args[2] == "float")
            status = 1;
        else if (args[2] == "single")
            status = 2;
        else if (args[2] == "none")
            status = 3;
        else
            status = static_cast<int>(number(args[2], expr));
        into.rtk_degrade.push_back({{number(args[0], expr), number(args[1], expr)}, status});
    }
    else if (name == "counter_freeze")
    {
        need(2, 2);
        const double t0 = number(args[0], expr);
        into.counter_freeze.push_back({t0, t0 + number(args[1], expr)});
    }
    else if (name == "actuator_fault")
    {
        need(1, 3);
        ActuatorFault f;
        f.channel = parse_channel(args[0]);
        if (args.size() > 1)
            f.mode = parse_fault_mode(args[1]);
        if (args.size() > 2)
            f.t0 = number(args[2], expr);
        into.actuator.push_back(f);
    }
    else if (name == "gnss_outlier")
    {
        need(2, 3);
        into.gnss_outlier.push_back(
            {number(args[0], expr), number(args[1], expr), args.size() > 2 ? number(args[2], expr) : 0.0});
        std::sort(into.gnss_outlier.begin(), into.gnss_outlier.end(),
                  [](const GnssOutlier& a, const GnssOutlier& b) { return a.t < b.t; });
    }
    else if (name == "task_stall")
    {
        need(3, 3);
        const double t0 = number(args[1], expr);
        into.task_stall.push_back({args[0], {t0, t0 + number(args[2], expr)}});
    }
    else
    {
        throw ConfigError("unknown fault '" + name + "'");
    }
    for (const auto& w : into.rtk_dropout)
    {
        if (!(w.t1 > w.t0))
            throw ConfigError("fault '" + expr + "': empty window");
    }
}

} // namespace racestack::plant
