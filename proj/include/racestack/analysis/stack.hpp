#pragma once

#include "racestack/analysis/records.hpp"
#include "racestack/analysis/scenario.hpp"
#include "racestack/control/controller.hpp"
#include "racestack/estimation/eskf.hpp"
#include "racestack/planner/planner.hpp"
#include "racestack/plant/sensors.hpp"
#include "racestack/plant/vehicle.hpp"
#include "racestack/runtime/bus.hpp"
#include "racestack/runtime/clock.hpp"
#include "racestack/runtime/scheduler.hpp"
#include "racestack/safety/supervisor.hpp"
#include "racestack/telemetry/bridge.hpp"
#include "racestack/telemetry/channel.hpp"
#include "racestack/telemetry/chunk_log.hpp"
#include "racestack/telemetry/link.hpp"

#include <filesystem>
#include <memory>
#include <optional>

namespace racestack::analysis
{

/// Counts forward passes over station 0. A pass needs the previous sample in the last
/// quarter of the lap, the new one in the first quarter, and a visit to the middle half
/// since the previous pass.
class LapCounter
{
public:
    explicit LapCounter(double length) : m_length(length) {}
    bool update(double s);
    int crossings() const noexcept { return m_crossings; }

private:
    double m_length;
    std::optional<double> m_prev;
    bool m_armed = true;
    int m_crossings = 0;
};

/// Raceline for a scenario: the configured file, or one generated from the track.
track::RacelineSamples prepare_raceline(const Scenario& sc);

struct StackOptions
{
    std::filesystem::path log_dir; // empty: no chunk files
    std::string run_id = "0";
    bool keep_records = true;
    /// Car end of the base-station link. Null: in-process loopback with the scripted base station.
    std::shared_ptr<telemetry::DatagramChannel> car_channel;
    telemetry::JsonBridge* bridge = nullptr;
};

struct RunOutcome
{
    double sim_time = 0.0;
    int laps_completed = 0;
    safety::Action action = safety::Action::None;
    std::vector<safety::Verdict> verdicts;
    std::vector<telemetry::LogRecord> records;
    std::vector<std::filesystem::path> chunks;
    bool log_enabled = true;
    std::uint64_t dashboard_frames = 0;
    std::string stop_reason;
};

class Stack
{
public:
    Stack(Scenario sc, const track::RacelineSamples& line, StackOptions opt = {});
    ~Stack();
    Stack(const Stack&) = delete;
    Stack& operator=(const Stack&) = delete;

    /// Runs until the lap count or duration is reached, or the car has come to rest
    /// after a stop. `wallclock` paces the loop against real time.
    RunOutcome run(bool wallclock = false, double speed = 1.0);

    /// Lockstep advance to an absolute time; for tests and interactive use.
    void advance(double until);

    /// Flushes the log and collects the outcome. Further advances are not allowed.
    RunOutcome finish(std::string reason = "requested");

    double now() const noexcept { return m_clock.seconds(); }
    const Scenario& scenario() const noexcept { return m_sc; }
    const track::Raceline& raceline() const noexcept { return m_line; }
    const plant::Vehicle& vehicle() const noexcept { return m_vehicle; }
    const estimation::Eskf& estimator() const noexcept { return m_eskf; }
    const safety::Supervisor& supervisor() const noexcept { return m_supervisor; }
    const telemetry::BasestationLink& link() const noexcept { return m_link; }
    std::optional<planner::LocalPath> path() const;
    std::optional<control::ControllerOutput> command() const;
    std::optional<estimation::EstimatedState> state() const;
    int laps_completed() const noexcept { return std::max(0, m_laps.crossings() - 1); }
    runtime::Scheduler& scheduler() noexcept { return m_sched; }
    runtime::Bus& bus() noexcept { return m_bus; }

private:
    void record(const std::string& topic, runtime::Tick stamp, std::vector<std::uint8_t> payload);
    template <class T, class Enc>
    void log_topic(const std::string& name, Enc enc);
    void add_tasks();
    void write_header();

    void plant_task(runtime::Tick t);
    void feedback_task(runtime::Tick t);
    void gnss_task(runtime::Tick t);
    void estimator_task(runtime::Tick t);
    void rx_task(runtime::Tick t);
    void planner_task(runtime::Tick t);
    void supervisor_task(runtime::Tick t);
    void controller_task(runtime::Tick t);
    void tx_task(runtime::Tick t);
    void basestation_task(runtime::Tick t);

    Scenario m_sc;
    StackOptions m_opt;
    track::RacelineSamples m_samples;
    track::Raceline m_line;

    runtime::SimClock m_clock;
    runtime::Bus m_bus;
    runtime::Scheduler m_sched;

    std::unique_ptr<telemetry::LogWriter> m_log;
    std::vector<telemetry::LogRecord> m_records;

    plant::Vehicle m_vehicle;
    plant::SensorSuite m_sensors;
    plant::CommandLink m_cmd_link;
    plant::LowLevelState m_last_lowlevel;
    double m_bank_s = 0.0;
    double m_prev_roll = 0.0;

    estimation::Eskf m_eskf;
    std::optional<plant::ImuSample> m_prev_imu;

    planner::Planner m_planner;
    planner::Planner m_fallback;
    std::optional<planner::LocalPath> m_fallback_path;
    control::Controller m_controller;
    safety::Supervisor m_supervisor;
    bool m_supervisor_triggered = false;

    telemetry::BasestationLink m_link;
    telemetry::FrameDecoder m_decoder;
    std::shared_ptr<telemetry::DatagramChannel> m_car;
    std::shared_ptr<telemetry::DatagramChannel> m_base; // null when the base station is external

    // scripted base station
    LapCounter m_base_laps;
    double m_base_s = 0.0;
    bool m_base_s_valid = false;
    std::size_t m_next_event = 0;
    telemetry::BasestationFrame m_base_frame;
    bool m_base_silent = false;
    std::optional<double> m_base_v_override;

    LapCounter m_laps;
    std::optional<double> m_finish_at;
    double m_rest_since = -1.0;
    std::uint64_t m_dashboard_frames = 0;
    std::vector<safety::Verdict> m_verdicts;
    bool m_finished = false;

    runtime::Publisher<plant::PlantState> m_pub_plant;
    runtime::Publisher<TextEvent> m_pub_events;
    runtime::Publisher<plant::ImuSample> m_pub_imu;
    runtime::Publisher<plant::GnssFix> m_pub_gnss;
    runtime::Publisher<estimation::EstimatedState> m_pub_state;
    runtime::Publisher<planner::LocalPath> m_pub_path;
    runtime::Publisher<control::ControllerOutput> m_pub_cmd;
    runtime::Publisher<safety::Verdict> m_pub_verdict;
    runtime::Publisher<planner::FlagState> m_pub_flags;
    runtime::Publisher<telemetry::DashboardFrame> m_pub_dash;
    runtime::Publisher<telemetry::BasestationFrame> m_pub_base;

    runtime::Subscriber<plant::PlantState> m_sub_plant;
    runtime::Subscriber<plant::GnssFix> m_sub_gnss;
    runtime::Subscriber<estimation::EstimatedState> m_sub_state;
    runtime::Subscriber<planner::LocalPath> m_sub_path;
    runtime::Subscriber<planner::LocalPath> m_sub_path_est;
    runtime::Subscriber<control::ControllerOutput> m_sub_cmd;
};

} // namespace racestack::analysis
