#include "racestack/analysis/run.hpp"

#include "racestack/errors.hpp"

#include <fstream>

namespace racestack::analysis
{

namespace
{

bool is_emergency(const safety::Verdict& v) { return v.action == safety::Action::EmergencyStop; }

bool matches(const Expectation& e, const safety::Verdict& v)
{
    return e.emergency && (e.emergency_cause.empty() || v.cause.find(e.emergency_cause) != std::string::npos);
}

} // namespace

int exit_code_for(const Expectation& expect, const std::vector<safety::Verdict>& verdicts)
{
    for (const auto& v : verdicts)
    {
        if (is_emergency(v) && !matches(expect, v))
            return kExitUnexpectedEmergency;
    }
    return kExitOk;
}

bool expectation_met(const Expectation& expect, const std::vector<safety::Verdict>& verdicts)
{
    bool emergency = false, stop = false;
    for (const auto& v : verdicts)
    {
        if (is_emergency(v))
        {
            if (!matches(expect, v))
                return false;
            emergency = true;
        }
        stop = stop || v.action == safety::Action::ControlledStop;
    }
    return emergency == expect.emergency && stop == expect.controlled_stop;
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out)
        throw IoError("cannot write " + path.string());
}

RunReport run_scenario(const Scenario& sc, const track::RacelineSamples& line, const std::filesystem::path& out_dir,
                       StackOptions opt, bool wallclock, double speed)
{
    std::filesystem::create_directories(out_dir);
    opt.log_dir = out_dir;
    opt.keep_records = true;
    RunReport rep;
    rep.dir = out_dir;
    {
        Stack stack(sc, line, opt);
        rep.outcome = stack.run(wallclock, speed);
    }
    const auto data = decode_run(rep.outcome.records);
    rep.analysis = analyze(data);
    for (const auto& v : rep.outcome.verdicts)
    {
        rep.emergency = rep.emergency || is_emergency(v);
        rep.controlled_stop = rep.controlled_stop || v.action == safety::Action::ControlledStop;
    }
    rep.exit_code = exit_code_for(sc.expect, rep.outcome.verdicts);
    rep.expectation_met = expectation_met(sc.expect, rep.outcome.verdicts);

    LogGaps gaps;
    gaps.chunks = rep.outcome.chunks.size();
    write_text(out_dir / "metrics.json", to_json(rep.analysis, &gaps).dump(2) + "\n");
    write_text(out_dir / "laps.csv", laps_csv(rep.analysis.laps));
    write_text(out_dir / "dynamics.csv", dynamics_csv(compute_dynamics(data)));
    std::string verdicts;
    for (const auto& v : rep.outcome.verdicts)
        verdicts += safety::to_json_line(v) + "\n";
    write_text(out_dir / "verdicts.jsonl", verdicts);

    nlohmann::ordered_json m;
    m["scenario"] = sc.name;
    m["seed"] = sc.seed;
    m["run_id"] = opt.run_id;
    m["sim_time"] = rep.outcome.sim_time;
    m["stop_reason"] = rep.outcome.stop_reason;
    m["laps_completed"] = rep.outcome.laps_completed;
    m["final_action"] = safety::to_string(rep.outcome.action);
    m["expectation_met"] = rep.expectation_met;
    m["exit_code"] = rep.exit_code;
    m["log_enabled"] = rep.outcome.log_enabled;
    m["chunks"] = nlohmann::ordered_json::array();
    for (const auto& c : rep.outcome.chunks)
        m["chunks"].push_back(c.filename().string());
    m["files"] = {"metrics.json", "laps.csv", "dynamics.csv", "verdicts.jsonl"};
    write_text(out_dir / "manifest.json", m.dump(2) + "\n");
    return rep;
}

} // namespace racestack::analysis
