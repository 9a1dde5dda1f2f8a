#include "racestack/analysis/scenario.hpp"

#include "racestack/errors.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace racestack::analysis
{

namespace
{

/// Map section reader that remembers which keys were consumed.
class Section
{
public:
    Section(YAML::Node node, std::string path) : m_node(std::move(node)), m_path(std::move(path))
    {
        if (m_node && !m_node.IsNull() && !m_node.IsMap())
            throw ConfigError(where() + ": expected a mapping");
    }

    bool has(const std::string& key) const { return m_node && m_node.IsMap() && m_node[key]; }

    template <class T>
    void get(const std::string& key, T& out)
    {
        if (!has(key))
            return;
        m_used.insert(key);
        try
        {
            out = m_node[key].as<T>();
        }
        catch (const YAML::Exception&)
        {
            throw ConfigError(where(key) + ": bad value");
        }
    }

    YAML::Node raw(const std::string& key)
    {
        m_used.insert(key);
        return has(key) ? m_node[key] : YAML::Node();
    }

    Section child(const std::string& key) { return Section(raw(key), where(key)); }

    void finish() const
    {
        if (!m_node || !m_node.IsMap())
            return;
        for (const auto& kv : m_node)
        {
            const auto k = kv.first.as<std::string>();
            if (!m_used.count(k))
                throw ConfigError(where(k) + ": unknown key");
        }
    }

    std::string where(const std::string& key = {}) const
    {
        if (key.empty())
            return m_path.empty() ? "<root>" : m_path;
        return m_path.empty() ? key : m_path + "." + key;
    }

private:
    YAML::Node m_node;
    std::string m_path;
    std::set<std::string> m_used;
};

planner::TrackFlag parse_track_flag(const std::string& s, const std::string& where)
{
    if (s == "green")
        return planner::TrackFlag::Green;
    if (s == "yellow")
        return planner::TrackFlag::Yellow;
    if (s == "red")
        return planner::TrackFlag::Red;
    if (s == "checkered")
        return planner::TrackFlag::Checkered;
    throw ConfigError(where + ": unknown track flag '" + s + "'");
}

planner::VehicleFlag parse_vehicle_flag(const std::string& s, const std::string& where)
{
    if (s == "none")
        return planner::VehicleFlag::None;
    if (s == "black")
        return planner::VehicleFlag::Black;
    if (s == "orange")
        return planner::VehicleFlag::Orange;
    throw ConfigError(where + ": unknown vehicle flag '" + s + "'");
}

void read_pid(Section sec, control::PidGains& g)
{
    sec.get("kp", g.kp);
    sec.get("ki", g.ki);
    sec.get("kd", g.kd);
    sec.get("i_max", g.i_max);
    sec.get("cmd_max", g.cmd_max);
    sec.get("d_tau", g.d_tau);
    sec.finish();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

} // namespace

void Scenario::validate() const
{
    if (!(duration > 0.0))
        throw ConfigError("duration: must be positive");
    if (laps < 0)
        throw ConfigError("laps: must not be negative");
    if (!(base_tick > 0.0))
        throw ConfigError("base_tick: must be positive");
    if (track.kind != "oval" && track.kind != "boundaries")
        throw ConfigError("track.kind: expected oval or boundaries");
    if (track.kind == "boundaries" && track.boundaries.empty())
        throw ConfigError("track.file: required for boundaries tracks");
    if (start_before_line < 0.0)
        throw ConfigError("start.before_line: must not be negative");
    if (start_speed < 0.0)
        throw ConfigError("start.speed: must not be negative");
    if (basestation.lap_v_max.empty())
        throw ConfigError("basestation.lap_v_max: needs at least one entry");
    for (double v : basestation.lap_v_max)
    {
        if (!(v >= 0.0))
            throw ConfigError("basestation.lap_v_max: caps must be non-negative");
    }
    for (std::size_t i = 1; i < basestation.events.size(); ++i)
    {
        if (basestation.events[i].t < basestation.events[i - 1].t)
            throw ConfigError("basestation.events[" + std::to_string(i) + "].t: events must be time ordered");
    }
    if (log_budget < 1024)
        throw ConfigError("log.budget: must be at least 1024 bytes");
    vehicle.validate();
    planner.validate();
    controller.validate();
    raceline.velocity.validate();
}

Scenario parse_scenario(const std::string& yaml, const std::filesystem::path& base_dir)
{
    YAML::Node root;
    try
    {
        root = YAML::Load(yaml);
    }
    catch (const YAML::Exception& e)
    {
        throw ConfigError(std::string("scenario: YAML error: ") + e.what());
    }
    Scenario sc;
    Section top(root, "");
    top.get("name", sc.name);
    top.get("seed", sc.seed);
    top.get("duration", sc.duration);
    top.get("laps", sc.laps);
    top.get("base_tick", sc.base_tick);

    {
        auto t = top.child("track");
        t.get("kind", sc.track.kind);
        t.get("bank_deg", sc.track.oval.bank_deg);
        t.get("straight", sc.track.oval.straight);
        t.get("chute", sc.track.oval.chute);
        t.get("turn_radius", sc.track.oval.turn_radius);
        t.get("width", sc.track.oval.width);
        std::string file;
        t.get("file", file);
        if (!file.empty())
            sc.track.boundaries = resolve(base_dir, file);
        t.get("format", sc.track.format);
        t.finish();
    }
    {
        auto r = top.child("raceline");
        std::string file;
        r.get("file", file);
        if (!file.empty())
            sc.raceline_file = resolve(base_dir, file);
        r.get("smoothing_window", sc.raceline.smoothing_window);
        r.get("a_lat_max", sc.raceline.velocity.a_lat_max);
        r.get("a_lon_accel_max", sc.raceline.velocity.a_lon_accel_max);
        r.get("a_lon_brake_max", sc.raceline.velocity.a_lon_brake_max);
        r.get("v_cap", sc.raceline.velocity.v_cap);
        r.finish();
    }
    {
        auto s = top.child("start");
        s.get("before_line", sc.start_before_line);
        s.get("speed", sc.start_speed);
        s.finish();
    }
    {
        auto v = top.child("vehicle");
        auto& p = sc.vehicle;
        v.get("mass", p.mass);
        v.get("l_f", p.l_f);
        v.get("l_r", p.l_r);
        v.get("yaw_inertia", p.yaw_inertia);
        v.get("c_f", p.c_f);
        v.get("c_r", p.c_r);
        v.get("drag_coeff", p.drag_coeff);
        v.get("watchdog_window", p.watchdog_window);
        v.finish();
        p.wheelbase = p.l_f + p.l_r;
    }
    {
        auto s = top.child("sensors");
        s.get("noise", sc.sensors.noise);
        s.get("gyro_sigma", sc.sensors.gyro_sigma);
        s.get("vibration_sigma", sc.sensors.vibration_sigma);
        std::vector<double> sig;
        s.get("position_sigma", sig);
        if (!sig.empty())
        {
            if (sig.size() != 4)
                throw ConfigError("sensors.position_sigma: expected 4 values");
            std::copy(sig.begin(), sig.end(), sc.sensors.position_sigma.begin());
        }
        s.finish();
    }
    {
        auto e = top.child("estimator");
        e.get("robust", sc.estimator.robust);
        e.get("velocity_walk", sc.estimator.velocity_walk);
        e.get("imq_c", sc.estimator.imq_c);
        e.get("t_dr", sc.estimator.t_dr);
        e.get("t_reinit", sc.estimator.t_reinit);
        e.finish();
    }
    {
        auto p = top.child("planner");
        p.get("remote_timeout", sc.planner.remote_timeout);
        p.get("localization_timeout", sc.planner.localization_timeout);
        p.get("a_stop", sc.planner.a_stop);
        p.get("path_duration", sc.planner.path_duration);
        p.finish();
    }
    {
        auto c = top.child("controller");
        auto& p = sc.controller;
        c.get("k_lookahead", p.k_lookahead);
        c.get("ld_min", p.ld_min);
        c.get("ld_max", p.ld_max);
        c.get("steering_gain", p.steering_gain);
        c.get("throttle_deadband", p.throttle_deadband);
        c.get("brake_deadband", p.brake_deadband);
        c.get("trajectory_timeout", p.trajectory_timeout);
        if (c.has("throttle"))
            read_pid(c.child("throttle"), p.throttle);
        if (c.has("brake"))
            read_pid(c.child("brake"), p.brake);
        c.finish();
        p.wheelbase = sc.vehicle.wheelbase;
        p.steering_ratio = sc.vehicle.steering_ratio;
    }
    {
        auto s = top.child("supervisor");
        s.get("lateral_error_threshold", sc.supervisor.lateral_error_threshold);
        s.get("escalation_time", sc.supervisor.escalation_time);
        s.get("stop_speed", sc.supervisor.stop_speed);
        s.finish();
        sc.controller.lateral_error_threshold = sc.supervisor.lateral_error_threshold;
    }
    {
        auto b = top.child("basestation");
        b.get("lap_v_max", sc.basestation.lap_v_max);
        const auto events = b.raw("events");
        if (!events.IsNull() && !events.IsSequence())
            throw ConfigError("basestation.events: expected a list");
        for (std::size_t i = 0; events.IsSequence() && i < events.size(); ++i)
        {
            Section e(events[i], "basestation.events[" + std::to_string(i) + "]");
            BasestationEvent ev;
            if (!e.has("t"))
                throw ConfigError(e.where("t") + ": required");
            e.get("t", ev.t);
            double d = 0.0;
            bool flag = false;
            int idx = 0;
            std::string s;
            if (e.has("v_max"))
                e.get("v_max", d), ev.v_max = d;
            if (e.has("track_flag"))
                e.get("track_flag", s), ev.track_flag = parse_track_flag(s, e.where("track_flag"));
            if (e.has("veh_flag"))
                e.get("veh_flag", s), ev.veh_flag = parse_vehicle_flag(s, e.where("veh_flag"));
            if (e.has("raceline_index"))
                e.get("raceline_index", idx), ev.raceline_index = idx;
            if (e.has("joystick"))
                e.get("joystick", flag), ev.joystick = flag;
            if (e.has("brake"))
                e.get("brake", d), ev.brake = d;
            if (e.has("steering"))
                e.get("steering", d), ev.steering = d;
            if (e.has("target_velocity"))
                e.get("target_velocity", d), ev.target_velocity = d;
            if (e.has("silent"))
                e.get("silent", flag), ev.silent = flag;
            e.finish();
            sc.basestation.events.push_back(ev);
        }
        b.finish();
    }
    {
        const auto faults = top.raw("faults");
        if (!faults.IsNull() && !faults.IsSequence())
            throw ConfigError("faults: expected a list");
        for (std::size_t i = 0; faults.IsSequence() && i < faults.size(); ++i)
        {
            const auto expr = faults[i].as<std::string>();
            try
            {
                plant::parse_fault(expr, sc.faults);
            }
            catch (const ConfigError& e)
            {
                throw ConfigError("faults[" + std::to_string(i) + "]: " + e.what());
            }
            sc.fault_exprs.push_back(expr);
        }
    }
    {
        auto e = top.child("expect");
        e.get("emergency", sc.expect.emergency);
        e.get("cause", sc.expect.emergency_cause);
        e.get("controlled_stop", sc.expect.controlled_stop);
        e.finish();
    }
    {
        auto l = top.child("log");
        l.get("budget", sc.log_budget);
        l.finish();
    }
    top.finish();
    sc.validate();
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open scenario " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try
    {
        return parse_scenario(ss.str(), path.parent_path());
    }
    catch (const ConfigError& e)
    {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

} // namespace racestack::analysis
