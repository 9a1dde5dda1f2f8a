#pragma once

#include "racestack/analysis/metrics.hpp"
#include "racestack/analysis/scenario.hpp"
#include "racestack/analysis/stack.hpp"

#include <filesystem>
#include <string>

namespace racestack::analysis
{

enum ExitCode : int
{
    kExitOk = 0,
    kExitUnexpectedEmergency = 1,
    kExitConfig = 2,
    kExitIo = 3,
};

struct RunReport
{
    RunOutcome outcome;
    RunAnalysis analysis;
    bool emergency = false;
    bool controlled_stop = false;
    bool expectation_met = true;
    int exit_code = kExitOk;
    std::filesystem::path dir;
};

/// Nonzero only when an EMERGENCY happened that the scenario did not expect.
int exit_code_for(const Expectation& expect, const std::vector<safety::Verdict>& verdicts);
bool expectation_met(const Expectation& expect, const std::vector<safety::Verdict>& verdicts);

/// Runs a scenario into `out_dir`: chunked log, manifest.json, metrics.json, laps.csv,
/// dynamics.csv and verdicts.jsonl. Metrics come from the in-memory copy of the log.
RunReport run_scenario(const Scenario& sc, const track::RacelineSamples& line, const std::filesystem::path& out_dir,
                       StackOptions opt = {}, bool wallclock = false, double speed = 1.0);

void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace racestack::analysis
