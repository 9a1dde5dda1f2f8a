#pragma once

#include "racestack/control/controller.hpp"
#include "racestack/estimation/eskf.hpp"
#include "racestack/planner/planner.hpp"
#include "racestack/plant/faults.hpp"
#include "racestack/plant/sensors.hpp"
#include "racestack/plant/types.hpp"
#include "racestack/safety/supervisor.hpp"
#include "racestack/track/oval.hpp"
#include "racestack/track/raceline.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace racestack::analysis
{

/// A timed base-station command. Unset fields keep their previous value.
struct BasestationEvent
{
    double t = 0.0;
    std::optional<double> v_max;
    std::optional<planner::TrackFlag> track_flag;
    std::optional<planner::VehicleFlag> veh_flag;
    std::optional<int> raceline_index;
    std::optional<bool> joystick;
    std::optional<double> brake;
    std::optional<double> steering;
    std::optional<double> target_velocity;
    std::optional<bool> silent; // stop transmitting
};

struct BasestationScript
{
    std::vector<double> lap_v_max{50.0}; // cap for the first, second, ... lap; last entry repeats
    std::vector<BasestationEvent> events;
};

struct Expectation
{
    bool emergency = false;
    std::string emergency_cause; // substring match, empty matches any
    bool controlled_stop = false;
};

struct TrackSource
{
    std::string kind = "oval"; // oval | boundaries
    track::OvalParams oval;
    std::filesystem::path boundaries;
    std::string format = "csv"; // csv | kml
};

struct Scenario
{
    std::string name = "scenario";
    std::uint64_t seed = 1;
    double duration = 60.0; // s, hard stop
    int laps = 0;           // stop once this many laps are complete; 0 runs for `duration`
    double base_tick = 0.001;
    TrackSource track;
    std::filesystem::path raceline_file; // empty: generate from the track
    track::RacelineOptions raceline;
    double start_before_line = 100.0; // m of raceline before station 0
    double start_speed = 50.0;
    plant::VehicleParams vehicle;
    plant::SensorConfig sensors;
    estimation::EskfConfig estimator;
    planner::PlannerConfig planner;
    control::ControlParams controller;
    safety::SupervisorConfig supervisor;
    BasestationScript basestation;
    plant::FaultSchedule faults;
    std::vector<std::string> fault_exprs;
    Expectation expect;
    std::size_t log_budget = 16u * 1024u * 1024u;

    /// Throws ConfigError naming the offending key.
    void validate() const;
};

/// Reads a YAML scenario. Relative file paths resolve against the scenario's directory.
/// Unknown keys are errors. Throws ConfigError with the key path.
Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const std::string& yaml, const std::filesystem::path& base_dir = {});

} // namespace racestack::analysis
