#include "racestack/analysis/metrics.hpp"

#include "racestack/analysis/stack.hpp"
#include "racestack/errors.hpp"
#include "racestack/track/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace racestack::analysis
{

namespace
{

struct Accum
{
    double min = 0.0, max = 0.0, sq = 0.0;
    std::size_t n = 0;

    void add(double v)
    {
        if (n == 0)
            min = max = v;
        min = std::min(min, v);
        max = std::max(max, v);
        sq += v * v;
        ++n;
    }
    double rms() const { return n ? std::sqrt(sq / static_cast<double>(n)) : 0.0; }
};

track::Raceline line_of(const RunData& d)
{
    if (!d.has_raceline)
        throw FormatError("log has no raceline record");
    return track::fit_quintic_spline(d.raceline);
}

} // namespace

std::vector<TrackingSample> tracking_errors(const RunData& d)
{
    std::vector<TrackingSample> out;
    if (d.states.empty())
        return out;
    const auto r = line_of(d);
    std::optional<double> s_prev;
    out.reserve(d.states.size());
    for (const auto& rec : d.states)
    {
        const auto& st = rec.value;
        const track::Point2 p{st.position.x(), st.position.y()};
        const double s = s_prev ? planner::nearest_point(r, p, *s_prev).s : planner::nearest_point_global(r, p);
        s_prev = s;
        TrackingSample ts;
        ts.t = d.seconds(rec.tick);
        ts.s = s;
        ts.cross_track = planner::cross_track_error(r, p, s);
        ts.heading_error = track::wrap_angle(st.rpy.z() - r.eval(s).heading);
        ts.speed = st.speed();
        out.push_back(ts);
    }
    return out;
}

std::vector<LapMetrics> compute_lap_metrics(const RunData& d)
{
    std::vector<LapMetrics> laps;
    const auto samples = tracking_errors(d);
    if (samples.empty())
        return laps;
    const auto r = line_of(d);
    LapCounter counter(r.length());
    std::vector<std::size_t> crossings;
    for (std::size_t i = 0; i < samples.size(); ++i)
    {
        if (counter.update(samples[i].s))
            crossings.push_back(i);
    }
    for (std::size_t k = 0; k + 1 < crossings.size(); ++k)
    {
        LapMetrics m;
        m.lap = static_cast<int>(k);
        m.t_start = samples[crossings[k]].t;
        m.t_end = samples[crossings[k + 1]].t;
        m.lap_time = m.t_end - m.t_start;
        Accum ct, he;
        double speed_sum = 0.0;
        for (std::size_t i = crossings[k]; i < crossings[k + 1]; ++i)
        {
            ct.add(samples[i].cross_track);
            he.add(samples[i].heading_error);
            speed_sum += samples[i].speed;
        }
        m.samples = ct.n;
        m.mean_speed = speed_sum / static_cast<double>(ct.n);
        m.cross_track_min = ct.min;
        m.cross_track_max = ct.max;
        m.cross_track_rms = ct.rms();
        m.heading_error_min = he.min;
        m.heading_error_max = he.max;
        m.heading_error_rms = he.rms();
        double ve_sum = 0.0;
        std::size_t ve_n = 0;
        for (const auto& c : d.commands)
        {
            const double t = d.seconds(c.tick);
            if (t < m.t_start || t >= m.t_end || c.value.source != control::CommandSource::Autonomy)
                continue;
            ve_sum += c.value.velocity_error;
            m.velocity_error_max = std::max(m.velocity_error_max, std::abs(c.value.velocity_error));
            ++ve_n;
        }
        m.velocity_error_mean = ve_n ? ve_sum / static_cast<double>(ve_n) : 0.0;
        for (const auto& p : d.paths)
        {
            const double t = d.seconds(p.tick);
            if (t >= m.t_start && t < m.t_end)
                m.v_cap_max = std::max(m.v_cap_max, p.value.v_cap);
        }
        laps.push_back(m);
    }
    return laps;
}

StraightError straight_velocity_error(const RunData& d, double t0, double t1, double curvature_threshold)
{
    StraightError out;
    if (d.commands.empty() || d.paths.empty())
        return out;
    const auto r = line_of(d);
    std::map<runtime::Tick, double> s_at;
    for (const auto& p : d.paths)
        s_at[p.tick] = p.value.s_star;
    double sum = 0.0;
    for (const auto& c : d.commands)
    {
        const double t = d.seconds(c.tick);
        if (t < t0 || t >= t1 || c.value.source != control::CommandSource::Autonomy)
            continue;
        auto it = s_at.upper_bound(c.tick);
        if (it == s_at.begin())
            continue;
        --it;
        if (std::abs(r.eval(it->second).curvature) >= curvature_threshold)
            continue;
        sum += c.value.velocity_error;
        ++out.samples;
    }
    out.mean = out.samples ? sum / static_cast<double>(out.samples) : 0.0;
    return out;
}

VehicleGeometry geometry_from_header(const std::string& header_json)
{
    VehicleGeometry g;
    if (header_json.empty())
        return g;
    const auto j = nlohmann::json::parse(header_json);
    if (j.contains("vehicle"))
    {
        const auto& v = j["vehicle"];
        g.mass = v.value("mass", g.mass);
        g.l_f = v.value("l_f", g.l_f);
        g.l_r = v.value("l_r", g.l_r);
        g.steering_ratio = v.value("steering_ratio", g.steering_ratio);
    }
    return g;
}

DynamicsSample dynamics_sample(double t, const plant::ImuSample& imu, const estimation::EstimatedState& s,
                               double road_wheel_angle, const VehicleGeometry& g)
{
    DynamicsSample out;
    out.t = t;
    out.a_lon = imu.accel.x();
    out.a_lat = imu.accel.y();
    const double vx = s.velocity.x(), vy = s.velocity.y(), r = s.angular_velocity.z();
    out.v = std::hypot(vx, vy);
    out.sigma_f = road_wheel_angle - std::atan2(vy + g.l_f * r, vx);
    out.sigma_r = -std::atan2(vy - g.l_r * r, vx);
    out.f_yf = g.mass * out.a_lat * g.l_r / (g.l_f + g.l_r);
    return out;
}

std::vector<DynamicsSample> compute_dynamics(const RunData& d)
{
    std::vector<DynamicsSample> out;
    const auto g = geometry_from_header(d.header);
    std::size_t i_imu = 0, i_plant = 0;
    for (const auto& s : d.states)
    {
        while (i_imu + 1 < d.imu.size() && d.imu[i_imu + 1].tick <= s.tick)
            ++i_imu;
        while (i_plant + 1 < d.plant.size() && d.plant[i_plant + 1].tick <= s.tick)
            ++i_plant;
        if (d.imu.empty() || d.plant.empty() || d.imu[i_imu].tick > s.tick || d.plant[i_plant].tick > s.tick)
            continue;
        auto sample = dynamics_sample(d.seconds(s.tick), d.imu[i_imu].value, s.value,
                                      d.plant[i_plant].value.road_wheel_angle, g);
        const bool finite = std::isfinite(sample.a_lon) && std::isfinite(sample.a_lat) && std::isfinite(sample.v) &&
                            std::isfinite(sample.sigma_f) && std::isfinite(sample.sigma_r) &&
                            std::isfinite(sample.f_yf);
        if (finite)
            out.push_back(sample);
    }
    return out;
}

std::optional<double> fit_cornering_stiffness(const std::vector<DynamicsSample>& samples, double min_speed)
{
    double sxy = 0.0, sxx = 0.0;
    for (const auto& s : samples)
    {
        if (s.v < min_speed)
            continue;
        sxy += s.sigma_f * s.f_yf;
        sxx += s.sigma_f * s.sigma_f;
    }
    if (!(sxx > 0.0))
        return std::nullopt;
    return sxy / sxx;
}

CrashTrace analyze_crash(const RunData& d, double max_brake)
{
    CrashTrace c;
    std::optional<std::size_t> p_stale, p_emerg, p_thr, p_brake, p_rpm;
    for (std::size_t pos = 0; pos < d.order.size(); ++pos)
    {
        const auto& [topic, idx] = d.order[pos];
        if (topic == topics::kPlantEvents)
        {
            const auto& e = d.plant_events[idx];
            if (!p_stale && e.value.source == "watchdog")
            {
                p_stale = pos;
                c.t_counter_stale = d.seconds(e.tick);
            }
            if (!p_emerg && e.value.message.find("-> EMERGENCY") != std::string::npos)
            {
                p_emerg = pos;
                c.t_emergency = d.seconds(e.tick);
            }
        }
        else if (topic == topics::kVerdict)
        {
            const auto& v = d.verdicts[idx];
            if (!c.t_verdict && v.value.action == safety::Action::EmergencyStop)
            {
                c.t_verdict = d.seconds(v.tick);
                c.verdict_cause = v.value.cause;
            }
        }
        else if (topic == topics::kPlant && p_emerg)
        {
            const auto& s = d.plant[idx].value;
            const double t = d.seconds(d.plant[idx].tick);
            if (s.lowlevel != plant::LowLevelState::Emergency)
                c.exited = true;
            if (!p_thr && s.throttle_actual == 0.0)
            {
                p_thr = pos;
                c.t_throttle_zero = t;
            }
            if (!p_brake && s.brake_pressure_front >= max_brake && s.brake_pressure_rear >= max_brake)
            {
                p_brake = pos;
                c.t_brake_max = t;
            }
            if (!p_rpm && s.engine_rpm == 0.0)
            {
                p_rpm = pos;
                c.t_rpm_zero = t;
            }
        }
    }
    c.in_order = p_stale && p_emerg && p_thr && p_brake && p_rpm && c.t_verdict && *p_stale < *p_emerg &&
                 *p_emerg < *p_thr && *p_thr <= *p_brake && *p_brake < *p_rpm;
    return c;
}

RunData load_run(const std::filesystem::path& where, const std::string& run_id, LogGaps* gaps)
{
    std::string id = run_id;
    if (id.empty())
    {
        const auto ids = find_runs(where);
        if (ids.size() != 1)
            throw IoError(where.string() + ": expected exactly one run, found " + std::to_string(ids.size()));
        id = ids.front();
    }
    const auto log = telemetry::read_run(where, id);
    if (gaps)
    {
        gaps->chunks = log.chunk_count;
        gaps->missing = log.missing;
        gaps->incomplete = log.incomplete;
    }
    return decode_run(log.records);
}

std::vector<std::string> find_runs(const std::filesystem::path& where)
{
    if (std::filesystem::is_regular_file(where))
    {
        const auto name = where.filename().string();
        const auto under = name.rfind('_');
        if (name.rfind("run_", 0) != 0 || under == std::string::npos || under < 4)
            throw IoError(where.string() + ": not a chunk file");
        return {name.substr(4, under - 4)};
    }
    return telemetry::list_runs(where);
}

RunAnalysis analyze(const RunData& d)
{
    RunAnalysis a;
    a.laps = compute_lap_metrics(d);
    a.states = d.states.size();
    for (const auto& s : tracking_errors(d))
        a.max_abs_cross_track = std::max(a.max_abs_cross_track, std::abs(s.cross_track));
    if (!a.laps.empty())
        a.straight = straight_velocity_error(d, a.laps.front().t_start, a.laps.back().t_end);
    for (const auto& v : d.verdicts)
        a.verdicts.push_back(v.value);
    if (auto c = analyze_crash(d); c.t_emergency)
        a.crash = c;
    return a;
}

nlohmann::ordered_json to_json(const LapMetrics& m)
{
    nlohmann::ordered_json j;
    j["lap"] = m.lap;
    j["t_start"] = m.t_start;
    j["t_end"] = m.t_end;
    j["lap_time"] = m.lap_time;
    j["mean_speed"] = m.mean_speed;
    j["cross_track"] = {{"min", m.cross_track_min}, {"max", m.cross_track_max}, {"rms", m.cross_track_rms}};
    j["heading_error"] = {{"min", m.heading_error_min}, {"max", m.heading_error_max}, {"rms", m.heading_error_rms}};
    j["velocity_error"] = {{"mean", m.velocity_error_mean}, {"max", m.velocity_error_max}};
    j["v_cap_max"] = m.v_cap_max;
    j["samples"] = m.samples;
    return j;
}

nlohmann::ordered_json to_json(const RunAnalysis& a, const LogGaps* gaps)
{
    nlohmann::ordered_json j;
    j["laps"] = nlohmann::ordered_json::array();
    for (const auto& m : a.laps)
        j["laps"].push_back(to_json(m));
    j["max_abs_cross_track"] = a.max_abs_cross_track;
    j["straight_velocity_error"] = {{"mean", a.straight.mean}, {"samples", a.straight.samples}};
    j["verdicts"] = nlohmann::ordered_json::array();
    for (const auto& v : a.verdicts)
        j["verdicts"].push_back(nlohmann::ordered_json::parse(safety::to_json_line(v)));
    j["state_samples"] = a.states;
    if (a.crash)
    {
        const auto opt = [](const std::optional<double>& t) {
            return t ? nlohmann::ordered_json(*t) : nlohmann::ordered_json(nullptr);
        };
        const auto& c = *a.crash;
        j["crash"] = {{"t_counter_stale", opt(c.t_counter_stale)}, {"t_emergency", opt(c.t_emergency)},
                      {"t_verdict", opt(c.t_verdict)},           {"verdict_cause", c.verdict_cause},
                      {"t_throttle_zero", opt(c.t_throttle_zero)}, {"t_brake_max", opt(c.t_brake_max)},
                      {"t_rpm_zero", opt(c.t_rpm_zero)},         {"exited", c.exited},
                      {"in_order", c.in_order}};
    }
    if (gaps)
    {
        j["log"] = {{"chunks", gaps->chunks},
                    {"missing", gaps->missing},
                    {"incomplete", gaps->incomplete},
                    {"gap_free", gaps->gap_free()}};
    }
    return j;
}

std::string laps_csv(const std::vector<LapMetrics>& laps)
{
    std::ostringstream os;
    os << std::setprecision(10);
    os << "lap,t_start,t_end,lap_time,mean_speed,cross_track_min,cross_track_max,cross_track_rms,"
          "heading_error_min,heading_error_max,heading_error_rms,velocity_error_mean,velocity_error_max,v_cap_max\n";
    for (const auto& m : laps)
    {
        os << m.lap << ',' << m.t_start << ',' << m.t_end << ',' << m.lap_time << ',' << m.mean_speed << ','
           << m.cross_track_min << ',' << m.cross_track_max << ',' << m.cross_track_rms << ',' << m.heading_error_min
           << ',' << m.heading_error_max << ',' << m.heading_error_rms << ',' << m.velocity_error_mean << ','
           << m.velocity_error_max << ',' << m.v_cap_max << '\n';
    }
    return os.str();
}

std::string dynamics_csv(const std::vector<DynamicsSample>& samples)
{
    std::ostringstream os;
    os << std::setprecision(10);
    os << "t,a_lon,a_lat,v,sigma_f,sigma_r,f_yf\n";
    for (const auto& s : samples)
        os << s.t << ',' << s.a_lon << ',' << s.a_lat << ',' << s.v << ',' << s.sigma_f << ',' << s.sigma_r << ','
           << s.f_yf << '\n';
    return os.str();
}

} // namespace racestack::analysis
