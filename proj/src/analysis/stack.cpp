#include "racestack/analysis/stack.hpp"

#include "racestack/errors.hpp"
#include "racestack/track/boundaries.hpp"
#include "racestack/track/oval.hpp"

#include <json.hpp>

#include <cmath>

namespace racestack::analysis
{

namespace
{

constexpr double kPlantPeriod = 0.002;
constexpr double kFeedbackPeriod = 0.01;
constexpr double kImuPeriod = 0.008;
constexpr double kCyclePeriod = 0.02;
constexpr double kDashboardPeriod = 0.1;
constexpr double kBasestationPeriod = 0.05;

int initial_gear(const plant::VehicleParams& p, const control::GearTable& g, double v)
{
    for (int gear = 1; gear < 6; ++gear)
    {
        if (v * p.gear_ratios[static_cast<std::size_t>(gear - 1)] <= g.up[static_cast<std::size_t>(gear - 1)])
            return gear;
    }
    return 6;
}

plant::PlantState initial_state(const Scenario& sc, const track::Raceline& r)
{
    const double s0 = r.normalize(r.length() - sc.start_before_line);
    const auto p = r.eval(s0);
    plant::PlantState st;
    st.x = p.x;
    st.y = p.y;
    st.yaw = p.heading;
    st.v_x = sc.start_speed;
    st.roll = p.bank;
    st.gear = initial_gear(sc.vehicle, sc.controller.gears, sc.start_speed);
    st.engine_rpm = std::clamp(sc.start_speed * sc.vehicle.gear_ratios[static_cast<std::size_t>(st.gear - 1)],
                               sc.vehicle.idle_rpm, sc.vehicle.redline_rpm);
    return st;
}

std::string transition(plant::LowLevelState from, plant::LowLevelState to)
{
    return std::string(plant::to_string(from)) + " -> " + plant::to_string(to);
}

} // namespace

bool LapCounter::update(double s)
{
    const double q = 0.25 * m_length;
    bool crossed = false;
    if (m_prev && m_armed && *m_prev > m_length - q && s < q)
    {
        ++m_crossings;
        m_armed = false;
        crossed = true;
    }
    if (s > q && s < m_length - q)
        m_armed = true;
    m_prev = s;
    return crossed;
}

track::RacelineSamples prepare_raceline(const Scenario& sc)
{
    if (!sc.raceline_file.empty())
        return track::load_raceline(sc.raceline_file);
    track::TrackBoundaries b;
    if (sc.track.kind == "oval")
        b = track::make_oval(sc.track.oval);
    else
        b = track::load_boundaries(sc.track.boundaries,
                                   sc.track.format == "kml" ? track::BoundaryFormat::Kml : track::BoundaryFormat::Csv);
    return track::generate_raceline(b, sc.raceline);
}

Stack::Stack(Scenario sc, const track::RacelineSamples& line, StackOptions opt)
    : m_sc(std::move(sc)), m_opt(std::move(opt)), m_samples(line), m_line(track::fit_quintic_spline(line)),
      m_clock(m_sc.base_tick), m_bus(m_clock), m_sched(m_clock, m_bus),
      m_vehicle(m_sc.vehicle, initial_state(m_sc, m_line)),
      m_sensors(m_sc.sensors, runtime::RngFactory(m_sc.seed), m_sc.faults), m_cmd_link(m_sc.faults),
      m_last_lowlevel(plant::LowLevelState::Uninit), m_eskf(m_sc.estimator),
      m_planner(m_sc.planner, {m_line}, m_sched.fault_reporter()), m_fallback(m_sc.planner, {m_line}),
      m_controller(m_sc.controller, m_sched.fault_reporter()), m_supervisor(m_sc.supervisor),
      m_base_laps(m_line.length()), m_laps(m_line.length())
{
    m_sc.validate();
    if (!m_line.closed())
        throw ConfigError("raceline: the scenario runner needs a closed raceline");
    if (!m_opt.log_dir.empty())
        m_log = std::make_unique<telemetry::LogWriter>(m_opt.log_dir, m_opt.run_id, m_sc.log_budget,
                                                       m_sched.fault_reporter());

    for (const auto& ev : m_sc.faults.actuator)
        m_vehicle.add_actuator_fault(ev);
    m_bank_s = m_line.normalize(m_line.length() - m_sc.start_before_line);
    m_prev_roll = m_vehicle.state().roll;
    m_vehicle.set_bank_lookup([this](double x, double y) {
        const auto n = planner::nearest_point(m_line, {x, y}, m_bank_s, 20, 200.0);
        m_bank_s = n.s;
        return m_line.bank_at(n.s);
    });
    if (!m_vehicle.run_actuation_test().passed)
        throw ConfigError("vehicle: actuation test failed");
    m_vehicle.enable_driving(0.0);
    m_last_lowlevel = m_vehicle.state().lowlevel;

    if (m_opt.car_channel)
    {
        m_car = m_opt.car_channel;
    }
    else
    {
        auto [car, base] = telemetry::LoopbackChannel::make_pair();
        m_car = car;
        m_base = base;
    }
    m_base_frame.enable_engine = true;
    m_base_frame.enable_driving = true;

    auto& hb = m_supervisor.heartbeats();
    hb.add("estimator", kImuPeriod, 0.2, safety::Action::EmergencyStop, "localization");
    hb.add("planner", kCyclePeriod, 0.2, safety::Action::ControlledStop, "planner");
    hb.add("controller", kCyclePeriod, 0.2, safety::Action::EmergencyStop, "controller");

    m_pub_plant = m_bus.advertise<plant::PlantState>(topics::kPlant, "plant");
    m_pub_events = m_bus.advertise<TextEvent>(topics::kPlantEvents, "plant");
    m_pub_imu = m_bus.advertise<plant::ImuSample>(topics::kImu, "estimator");
    m_pub_gnss = m_bus.advertise<plant::GnssFix>(topics::kGnss, "gnss", 8);
    m_pub_state = m_bus.advertise<estimation::EstimatedState>(topics::kState, "estimator");
    m_pub_path = m_bus.advertise<planner::LocalPath>(topics::kPath, "planner", 4);
    m_pub_cmd = m_bus.advertise<control::ControllerOutput>(topics::kCommand, "controller");
    m_pub_verdict = m_bus.advertise<safety::Verdict>(topics::kVerdict, "supervisor", 8);
    m_pub_flags = m_bus.advertise<planner::FlagState>(topics::kFlags, "telemetry_rx");
    m_pub_dash = m_bus.advertise<telemetry::DashboardFrame>(topics::kDashboard, "telemetry_tx");
    m_pub_base = m_bus.advertise<telemetry::BasestationFrame>(topics::kBasestation, "telemetry_rx", 8);

    m_sub_plant = m_bus.subscribe<plant::PlantState>(topics::kPlant);
    m_sub_gnss = m_bus.subscribe<plant::GnssFix>(topics::kGnss, 8);
    m_sub_state = m_bus.subscribe<estimation::EstimatedState>(topics::kState);
    m_sub_path = m_bus.subscribe<planner::LocalPath>(topics::kPath, 4);
    m_sub_path_est = m_bus.subscribe<planner::LocalPath>(topics::kPath, 4);
    m_sub_cmd = m_bus.subscribe<control::ControllerOutput>(topics::kCommand);

    const auto ref = m_sc.controller.reference_index;
    log_topic<plant::PlantState>(topics::kPlant, [](const auto& v) { return encode(v); });
    log_topic<TextEvent>(topics::kPlantEvents, [](const auto& v) { return encode(v); });
    log_topic<plant::ImuSample>(topics::kImu, [](const auto& v) { return encode(v); });
    log_topic<plant::GnssFix>(topics::kGnss, [](const auto& v) { return encode(v); });
    log_topic<estimation::EstimatedState>(topics::kState, [](const auto& v) { return encode(v); });
    log_topic<planner::LocalPath>(topics::kPath, [ref](const auto& v) { return encode(summarize(v, ref)); });
    log_topic<control::ControllerOutput>(topics::kCommand, [](const auto& v) { return encode(v); });
    log_topic<safety::Verdict>(topics::kVerdict, [](const auto& v) { return encode(v); });
    log_topic<planner::FlagState>(topics::kFlags, [](const auto& v) { return encode(v); });
    log_topic<telemetry::DashboardFrame>(topics::kDashboard, [](const auto& v) { return telemetry::encode(v); });
    log_topic<telemetry::BasestationFrame>(topics::kBasestation, [](const auto& v) { return telemetry::encode(v); });
    log_topic<runtime::FaultEvent>(runtime::kFaultTopic,
                                   [](const auto& v) { return encode(TextEvent{v.source, v.message}); });

    add_tasks();
    for (const auto& stall : m_sc.faults.task_stall)
    {
        static const char* names[] = {"00_plant", "02_feedback", "05_gnss", "10_estimator", "20_telemetry_rx",
                                      "30_planner", "35_supervisor", "40_controller", "60_telemetry_tx",
                                      "70_basestation"};
        std::string task;
        for (const char* n : names)
        {
            const std::string s(n);
            if (s == stall.task || s.substr(3) == stall.task)
                task = s;
        }
        if (task.empty())
            throw ConfigError("faults: task_stall names unknown task '" + stall.task + "'");
        m_sched.suspend(task, m_clock.ticks_round(stall.window.t0), m_clock.ticks_round(stall.window.t1));
    }

    write_header();
}

Stack::~Stack() = default;

void Stack::record(const std::string& topic, runtime::Tick stamp, std::vector<std::uint8_t> payload)
{
    if (m_log)
        m_log->write(topic, stamp, payload);
    if (m_opt.keep_records)
        m_records.push_back({topic, stamp, std::move(payload)});
}

template <class T, class Enc>
void Stack::log_topic(const std::string& name, Enc enc)
{
    m_bus.tap<T>(name, [this, enc](const std::string& topic, const runtime::Stamped<T>& rec) {
        record(topic, rec.stamp, enc(rec.value));
    });
}

void Stack::write_header()
{
    nlohmann::ordered_json h;
    h["scenario"] = m_sc.name;
    h["seed"] = m_sc.seed;
    h["base_tick"] = m_sc.base_tick;
    h["duration"] = m_sc.duration;
    h["laps"] = m_sc.laps;
    h["faults"] = m_sc.fault_exprs;
    h["lap_v_max"] = m_sc.basestation.lap_v_max;
    h["expect"] = {{"emergency", m_sc.expect.emergency},
                   {"cause", m_sc.expect.emergency_cause},
                   {"controlled_stop", m_sc.expect.controlled_stop}};
    const auto& v = m_sc.vehicle;
    h["vehicle"] = {{"mass", v.mass},           {"l_f", v.l_f},         {"l_r", v.l_r},
                    {"wheelbase", v.wheelbase}, {"c_f", v.c_f},         {"c_r", v.c_r},
                    {"steering_ratio", v.steering_ratio}, {"max_brake", v.max_brake}};
    h["lateral_error_threshold"] = m_sc.supervisor.lateral_error_threshold;
    const auto s = h.dump();
    record(topics::kHeader, 0, {s.begin(), s.end()});
    record(topics::kRaceline, 0, encode(m_samples));
}

void Stack::add_tasks()
{
    auto add = [this](const char* name, double period, void (Stack::*fn)(runtime::Tick)) {
        m_sched.add_task({name, period, 0.0, [this, fn](runtime::Tick t) { (this->*fn)(t); }});
    };
    // estimator -> planner -> supervisor -> controller at coincident ticks
    add("00_plant", kPlantPeriod, &Stack::plant_task);
    add("02_feedback", kFeedbackPeriod, &Stack::feedback_task);
    add("05_gnss", m_sc.estimator.gnss_period, &Stack::gnss_task);
    add("10_estimator", kImuPeriod, &Stack::estimator_task);
    add("20_telemetry_rx", kCyclePeriod, &Stack::rx_task);
    add("30_planner", kCyclePeriod, &Stack::planner_task);
    add("35_supervisor", kCyclePeriod, &Stack::supervisor_task);
    add("40_controller", kCyclePeriod, &Stack::controller_task);
    add("60_telemetry_tx", kDashboardPeriod, &Stack::tx_task);
    if (m_base)
        add("70_basestation", kBasestationPeriod, &Stack::basestation_task);
}

void Stack::plant_task(runtime::Tick)
{
    m_vehicle.step(kPlantPeriod);
    const auto ll = m_vehicle.state().lowlevel;
    if (ll != m_last_lowlevel)
    {
        if (ll == plant::LowLevelState::Emergency)
        {
            const auto& cause = m_vehicle.emergency_cause();
            if (cause == "rolling counter stale")
                m_pub_events.publish({"watchdog", cause});
            m_pub_events.publish({"lowlevel", transition(m_last_lowlevel, ll) + ": " + cause});
        }
        else
        {
            m_pub_events.publish({"lowlevel", transition(m_last_lowlevel, ll)});
        }
        m_last_lowlevel = ll;
    }
}

void Stack::feedback_task(runtime::Tick)
{
    m_pub_plant.publish(m_vehicle.state());
}

void Stack::gnss_task(runtime::Tick t)
{
    if (auto fix = m_sensors.sample_gnss(m_vehicle.state(), m_clock.to_seconds(t)))
        m_pub_gnss.publish(*fix);
}

void Stack::estimator_task(runtime::Tick t)
{
    const double now = m_clock.to_seconds(t);
    if (m_prev_imu)
        m_eskf.predict(*m_prev_imu, now - m_prev_imu->stamp);
    const auto& st = m_vehicle.state();
    const double roll_rate = (st.roll - m_prev_roll) / kImuPeriod;
    m_prev_roll = st.roll;
    const auto imu = m_sensors.sample_imu(st, roll_rate, now);
    m_pub_imu.publish(imu);
    m_prev_imu = imu;

    for (const auto& fix : m_sub_gnss.poll())
        m_eskf.update_gnss(fix.value);
    if (const auto fb = m_sub_plant.latest())
        m_eskf.set_road_wheel_angle(fb->value.road_wheel_angle);
    m_eskf.check_deadreckoning(now);
    const auto paths = m_sub_path_est.poll();
    if (!paths.empty() && m_eskf.initialized())
    {
        const auto& p = paths.back().value;
        m_eskf.correct_banking(m_planner.line(p.raceline).bank_at(p.s_star), p.cross_track);
    }
    if (m_eskf.initialized())
    {
        m_pub_state.publish(m_eskf.output(now));
        m_supervisor.heartbeats().beat("estimator", now);
    }
}

void Stack::rx_task(runtime::Tick t)
{
    const double now = m_clock.to_seconds(t);
    bool changed = false;
    while (auto d = m_car->receive())
    {
        if (auto f = m_decoder.basestation(*d))
        {
            m_pub_base.publish(*f);
            changed = m_link.apply(*f, now) || changed;
        }
    }
    if (m_opt.bridge)
    {
        for (const auto& f : m_opt.bridge->take_inbound())
        {
            m_pub_base.publish(f);
            changed = m_link.apply(f, now) || changed;
        }
    }
    if (changed)
        m_pub_flags.publish(m_link.state().flags);
}

void Stack::planner_task(runtime::Tick t)
{
    const double now = m_clock.to_seconds(t);
    const auto est = m_sub_state.latest();
    if (!est)
        return;
    auto path = m_planner.step(est->value, m_link.state().flags, now, m_supervisor.directives().force_planner_stop);
    if (m_laps.update(path.s_star) && m_sc.laps > 0 && laps_completed() >= m_sc.laps && !m_finish_at)
        m_finish_at = now + 1.0;
    m_pub_path.publish(std::move(path));
    m_supervisor.heartbeats().beat("planner", now);
}

void Stack::supervisor_task(runtime::Tick t)
{
    const double now = m_clock.to_seconds(t);
    safety::SupervisorInputs in;
    in.now = now;
    const auto est = m_sub_state.latest();
    if (est)
    {
        in.state = est->value;
        in.speed = est->value.speed();
    }
    if (const auto p = m_sub_path.latest())
        in.cross_track = p->value.cross_track;
    const auto fb = m_sub_plant.latest();
    if (const auto c = m_sub_cmd.latest(); c && fb)
    {
        in.command = safety::ActuatorEcho{c->value.steering, c->value.brake, c->value.throttle};
        in.actual = safety::ActuatorEcho{fb->value.steering_actual, fb->value.brake_pressure_front,
                                         fb->value.throttle_actual};
    }
    if (fb && fb->value.lowlevel == plant::LowLevelState::Emergency && !m_supervisor_triggered)
        in.lowlevel_emergency = m_vehicle.emergency_cause();
    if (const auto v = m_supervisor.step(in))
    {
        m_verdicts.push_back(*v);
        m_pub_verdict.publish(*v);
    }
    const auto d = m_supervisor.directives();
    if (d.plant_emergency && m_vehicle.state().lowlevel != plant::LowLevelState::Emergency)
    {
        m_supervisor_triggered = true;
        m_vehicle.trigger_emergency(m_supervisor.latched().cause);
    }
    if (d.plant_supervised_stop)
        m_vehicle.request_supervised_stop();

    // A stalled planner cannot ramp down itself; follow the raceline with a local stop profile.
    m_fallback_path.reset();
    const auto p = m_sub_path.latest();
    const bool stale = !p || now - p->value.stamp > m_sc.planner.localization_timeout;
    if (d.force_planner_stop && stale && est)
        m_fallback_path = m_fallback.step(est->value, m_link.state().flags, now, true);
}

void Stack::controller_task(runtime::Tick t)
{
    const double now = m_clock.to_seconds(t);
    const auto p = m_sub_path.latest();
    const auto est = m_sub_state.latest();
    const auto fb = m_sub_plant.latest();
    const planner::LocalPath* path = m_fallback_path ? &*m_fallback_path : (p ? &p->value : nullptr);
    control::ControllerInputs in{path,
                                 est ? &est->value : nullptr,
                                 m_link.state().joystick,
                                 fb ? fb->value.engine_rpm : 0.0,
                                 fb ? fb->value.gear : 1,
                                 now};
    auto out = m_controller.step(in);
    if (m_link.state().throttle_lockout)
        out.throttle = 0.0;
    m_pub_cmd.publish(out);
    m_supervisor.heartbeats().beat("controller", now);

    plant::ActuationCommand cmd;
    cmd.throttle = out.throttle;
    cmd.brake = out.brake;
    cmd.steering = out.steering;
    cmd.gear = out.gear;
    cmd.rolling_counter = out.rolling_counter;
    m_vehicle.receive(m_cmd_link.transmit(cmd, now), now);
}

void Stack::tx_task(runtime::Tick t)
{
    const double now = m_clock.to_seconds(t);
    const auto c = m_sub_cmd.latest();
    const auto fb = m_sub_plant.latest();
    const auto est = m_sub_state.latest();
    telemetry::DashboardInputs in;
    in.time = now;
    in.command = c ? &c->value : nullptr;
    in.plant = fb ? &fb->value : nullptr;
    in.state = est ? &est->value : nullptr;
    const auto frame = telemetry::make_dashboard(in);
    m_pub_dash.publish(frame);
    if (!m_car->send(telemetry::encode(frame)))
        m_sched.report_fault("telemetry_tx", "dashboard datagram not sent");
    if (m_opt.bridge)
        m_opt.bridge->publish(frame);
    ++m_dashboard_frames;
}

void Stack::basestation_task(runtime::Tick t)
{
    const double now = m_clock.to_seconds(t);
    telemetry::FrameDecoder dec;
    while (auto d = m_base->receive())
    {
        const auto f = dec.dashboard(*d);
        if (!f)
            continue;
        const track::Point2 pos{f->position_x, f->position_y};
        m_base_s = m_base_s_valid ? planner::nearest_point(m_line, pos, m_base_s, 20, 200.0).s
                                  : planner::nearest_point_global(m_line, pos);
        m_base_s_valid = true;
        m_base_laps.update(m_base_s);
    }
    const auto& events = m_sc.basestation.events;
    while (m_next_event < events.size() && events[m_next_event].t <= now + 1e-9)
    {
        const auto& ev = events[m_next_event++];
        if (ev.v_max)
            m_base_v_override = *ev.v_max;
        if (ev.track_flag)
            m_base_frame.track_flag = static_cast<std::int8_t>(*ev.track_flag);
        if (ev.veh_flag)
            m_base_frame.veh_flag = static_cast<std::int8_t>(*ev.veh_flag);
        if (ev.raceline_index)
            m_base_frame.raceline_index = static_cast<std::int8_t>(*ev.raceline_index);
        if (ev.joystick)
            m_base_frame.enable_joystick_control = *ev.joystick;
        if (ev.brake)
            m_base_frame.brake_amount = static_cast<float>(*ev.brake);
        if (ev.steering)
            m_base_frame.steering_cmd = static_cast<float>(*ev.steering);
        if (ev.target_velocity)
            m_base_frame.target_velocity = static_cast<float>(*ev.target_velocity);
        if (ev.silent)
            m_base_silent = *ev.silent;
    }
    const auto& caps = m_sc.basestation.lap_v_max;
    const auto lap = static_cast<std::size_t>(std::max(0, m_base_laps.crossings() - 1));
    const double cap = m_base_v_override ? *m_base_v_override : caps[std::min(lap, caps.size() - 1)];
    m_base_frame.v_max = static_cast<float>(cap);
    m_base_frame.stamp = telemetry::FrameStamp::from_seconds(now);
    if (!m_base_silent)
        m_base->send(telemetry::encode(m_base_frame));
}

void Stack::advance(double until)
{
    if (m_finished)
        throw ConfigError("stack: advance after finish");
    m_sched.run_until(until);
}

RunOutcome Stack::run(bool wallclock, double speed)
{
    constexpr double kSlice = 0.1;
    std::string reason = "duration";
    while (now() + 1e-9 < m_sc.duration)
    {
        const double next = std::min(m_sc.duration, now() + kSlice);
        if (wallclock)
            m_sched.run_wallclock(next, speed);
        else
            m_sched.run_until(next);
        if (m_finish_at && now() + 1e-9 >= *m_finish_at)
        {
            reason = "laps";
            break;
        }
        const auto& st = m_vehicle.state();
        const bool stopping = m_supervisor.action() != safety::Action::None;
        if (stopping && st.speed() < 0.1 && st.engine_rpm <= m_sc.vehicle.idle_rpm)
        {
            if (m_rest_since < 0.0)
                m_rest_since = now();
            if (now() - m_rest_since >= 2.0 - 1e-9)
            {
                reason = "stopped";
                break;
            }
        }
        else
        {
            m_rest_since = -1.0;
        }
    }
    return finish(reason);
}

RunOutcome Stack::finish(std::string reason)
{
    RunOutcome out;
    if (m_log)
    {
        m_log->close();
        out.chunks = m_log->chunks();
        out.log_enabled = m_log->enabled();
    }
    m_finished = true;
    out.sim_time = now();
    out.laps_completed = laps_completed();
    out.action = m_supervisor.action();
    out.verdicts = m_verdicts;
    out.records = std::move(m_records);
    m_records.clear();
    out.dashboard_frames = m_dashboard_frames;
    out.stop_reason = std::move(reason);
    return out;
}

std::optional<planner::LocalPath> Stack::path() const
{
    const auto p = m_sub_path.latest();
    return p ? std::optional(p->value) : std::nullopt;
}

std::optional<control::ControllerOutput> Stack::command() const
{
    const auto c = m_sub_cmd.latest();
    return c ? std::optional(c->value) : std::nullopt;
}

std::optional<estimation::EstimatedState> Stack::state() const
{
    const auto s = m_sub_state.latest();
    return s ? std::optional(s->value) : std::nullopt;
}

} // namespace racestack::analysis
