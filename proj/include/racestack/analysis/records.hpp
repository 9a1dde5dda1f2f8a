#pragma once

#include "racestack/control/controller.hpp"
#include "racestack/estimation/types.hpp"
#include "racestack/planner/planner.hpp"
#include "racestack/plant/types.hpp"
#include "racestack/runtime/clock.hpp"
#include "racestack/safety/supervisor.hpp"
#include "racestack/telemetry/chunk_log.hpp"
#include "racestack/telemetry/frames.hpp"
#include "racestack/track/raceline.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace racestack::analysis
{

namespace topics
{
inline constexpr const char* kHeader = "/run/header";
inline constexpr const char* kRaceline = "/track/raceline";
inline constexpr const char* kPlant = "/plant/state";
inline constexpr const char* kPlantEvents = "/plant/events";
inline constexpr const char* kImu = "/sensors/imu";
inline constexpr const char* kGnss = "/sensors/gnss";
inline constexpr const char* kState = "/estimator/state";
inline constexpr const char* kPath = "/planner/path";
inline constexpr const char* kCommand = "/control/command";
inline constexpr const char* kVerdict = "/safety/verdict";
inline constexpr const char* kFlags = "/remote/flags";
inline constexpr const char* kDashboard = "/telemetry/dashboard";
inline constexpr const char* kBasestation = "/telemetry/basestation";
inline constexpr const char* kFaults = "/runtime/faults";
} // namespace topics

/// What the log keeps of a local path.
struct PathSummary
{
    double s_star = 0.0;
    double v_cap = 0.0;
    double v_ref = 0.0; // speed of the controller's reference point
    planner::PathStatus status = planner::PathStatus::Nominal;
    double cross_track = 0.0;
    double heading_error = 0.0;
    int raceline = 0;
    double stamp = 0.0;
    std::uint16_t points = 0;
};

PathSummary summarize(const planner::LocalPath& p, std::size_t reference_index);

struct TextEvent
{
    std::string source;
    std::string message;
};

std::vector<std::uint8_t> encode(const plant::PlantState& s);
std::vector<std::uint8_t> encode(const plant::ImuSample& s);
std::vector<std::uint8_t> encode(const plant::GnssFix& s);
std::vector<std::uint8_t> encode(const estimation::EstimatedState& s);
std::vector<std::uint8_t> encode(const PathSummary& s);
std::vector<std::uint8_t> encode(const control::ControllerOutput& s);
std::vector<std::uint8_t> encode(const planner::FlagState& s);
std::vector<std::uint8_t> encode(const TextEvent& s);
std::vector<std::uint8_t> encode(const safety::Verdict& v);
std::vector<std::uint8_t> encode(const track::RacelineSamples& s);

/// Decoders throw FormatError on short or trailing bytes.
plant::PlantState decode_plant(std::span<const std::uint8_t> b);
plant::ImuSample decode_imu(std::span<const std::uint8_t> b);
plant::GnssFix decode_gnss(std::span<const std::uint8_t> b);
estimation::EstimatedState decode_state(std::span<const std::uint8_t> b);
PathSummary decode_path(std::span<const std::uint8_t> b);
control::ControllerOutput decode_command(std::span<const std::uint8_t> b);
planner::FlagState decode_flags(std::span<const std::uint8_t> b);
TextEvent decode_event(std::span<const std::uint8_t> b);
safety::Verdict decode_verdict(std::span<const std::uint8_t> b);
track::RacelineSamples decode_raceline(std::span<const std::uint8_t> b);

template <class T>
struct Timed
{
    runtime::Tick tick = 0;
    T value{};
};

/// Run log decoded into typed streams. `order` keeps the global record order as
/// (topic, index into that topic's stream) so sequence checks can compare positions.
struct RunData
{
    std::string header; // JSON
    double base_tick = 0.001;
    track::RacelineSamples raceline;
    bool has_raceline = false;
    std::vector<Timed<plant::PlantState>> plant;
    std::vector<Timed<TextEvent>> plant_events;
    std::vector<Timed<plant::ImuSample>> imu;
    std::vector<Timed<plant::GnssFix>> gnss;
    std::vector<Timed<estimation::EstimatedState>> states;
    std::vector<Timed<PathSummary>> paths;
    std::vector<Timed<control::ControllerOutput>> commands;
    std::vector<Timed<safety::Verdict>> verdicts;
    std::vector<Timed<planner::FlagState>> flags;
    std::vector<Timed<telemetry::DashboardFrame>> dashboard;
    std::vector<Timed<telemetry::BasestationFrame>> basestation;
    std::vector<Timed<TextEvent>> faults;
    std::vector<std::pair<std::string, std::size_t>> order;
    std::uint64_t undecodable = 0;

    double seconds(runtime::Tick t) const noexcept { return static_cast<double>(t) * base_tick; }
};

RunData decode_run(const std::vector<telemetry::LogRecord>& records);

} // namespace racestack::analysis
