#pragma once

#include "racestack/estimation/types.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace racestack::safety
{

enum class Action : std::int8_t
{
    None = 0,
    ControlledStop = 1,
    EmergencyStop = 2,
};

const char* to_string(Action a) noexcept;

struct Verdict
{
    Action action = Action::None;
    std::string cause;
    double stamp = 0.0;
};

/// Keeps the more severe of two verdicts (the first one on ties).
Verdict dominant(const Verdict& a, const Verdict& b);

/// One JSON object per line: {"stamp":..,"action":"..","cause":".."}.
std::string to_json_line(const Verdict& v);
Verdict verdict_from_json_line(const std::string& line);

class HeartbeatRegistry
{
public:
    /// Throws ConfigError unless timeout >= 2 * period.
    void add(const std::string& module, double period, double timeout, Action criticality, std::string cause = {},
             double start = 0.0);
    void beat(const std::string& module, double now);
    Verdict check(double now) const;

    std::optional<double> last_beat(const std::string& module) const;
    std::vector<std::string> modules() const;

private:
    struct Entry
    {
        double period = 0.0;
        double timeout = 0.0;
        Action criticality = Action::ControlledStop;
        std::string cause;
        double last = 0.0;
    };
    std::map<std::string, Entry> m_entries;
};

struct EchoTolerance
{
    double steering = 3.0;  // deg
    double brake = 100.0;   // kPa
    double throttle = 5.0;  // %
    int lag_cycles = 10;    // commands this old still count as honoured
    int persistence = 10;   // consecutive cycles before a mismatch is reported
};

struct ActuatorEcho
{
    double steering = 0.0;
    double brake = 0.0;
    double throttle = 0.0;
};

enum class Channel
{
    Steering = 0,
    Brake = 1,
    Throttle = 2,
};

const char* to_string(Channel c) noexcept;

/// Compares actuator feedback against the band spanned by the recent commands,
/// widened by the tolerance. A channel mismatches after `persistence` consecutive
/// out-of-band samples.
class EchoValidator
{
public:
    explicit EchoValidator(EchoTolerance tol = {}) : m_tol(tol) {}

    std::optional<Channel> update(const ActuatorEcho& cmd, const ActuatorEcho& actual);
    int streak(Channel c) const { return m_streak[static_cast<std::size_t>(c)]; }
    void reset();

private:
    EchoTolerance m_tol;
    std::deque<ActuatorEcho> m_history;
    std::array<int, 3> m_streak{};
};

Verdict check_cross_track(double e_ct, double threshold, double now);

struct SupervisorConfig
{
    double rate = 50.0;
    double lateral_error_threshold = 3.5;
    double stop_speed = 0.5;      // m/s, controlled stop hands over to the plant below this
    double escalation_time = 10.0; // s
    EchoTolerance echo;
};

struct SupervisorInputs
{
    double now = 0.0;
    std::optional<estimation::EstimatedState> state;
    std::optional<double> cross_track;
    std::optional<ActuatorEcho> command;
    std::optional<ActuatorEcho> actual;
    double speed = 0.0;
    /// Cause reported by the low-level controller once it has entered EMERGENCY on its own.
    std::optional<std::string> lowlevel_emergency;
};

struct Directives
{
    bool force_planner_stop = false;
    bool plant_emergency = false;
    bool plant_supervised_stop = false;
};

Directives orchestrate_stop(Action action, double speed, double stop_speed);

/// Latching supervisor: the worst action seen so far is kept for the rest of the run.
class Supervisor
{
public:
    explicit Supervisor(SupervisorConfig cfg = {});

    HeartbeatRegistry& heartbeats() noexcept { return m_heartbeats; }

    /// One supervision cycle. Returns a verdict only at the onset of a new, more
    /// severe action.
    std::optional<Verdict> step(const SupervisorInputs& in);

    Action action() const noexcept { return m_action; }
    const Verdict& latched() const noexcept { return m_latched; }
    Directives directives() const noexcept { return m_directives; }

private:
    SupervisorConfig m_cfg;
    HeartbeatRegistry m_heartbeats;
    EchoValidator m_echo;
    Action m_action = Action::None;
    Verdict m_latched;
    double m_stop_since = 0.0;
    Directives m_directives;
};

} // namespace racestack::safety
