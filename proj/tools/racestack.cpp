#include "racestack/analysis/metrics.hpp"
#include "racestack/analysis/run.hpp"
#include "racestack/analysis/scenario.hpp"
#include "racestack/errors.hpp"
#include "racestack/telemetry/bridge.hpp"
#include "racestack/telemetry/channel.hpp"
#include "racestack/track/raceline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace racestack;
using namespace racestack::analysis;

namespace
{

std::pair<std::string, std::uint16_t> host_port(const std::string& s)
{
    const auto colon = s.rfind(':');
    if (colon == std::string::npos)
        throw ConfigError("expected host:port, got '" + s + "'");
    return {s.substr(0, colon), static_cast<std::uint16_t>(std::stoi(s.substr(colon + 1)))};
}

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void print_gaps(const LogGaps& g)
{
    std::cerr << "chunks: " << g.chunks;
    if (!g.missing.empty())
    {
        std::cerr << ", missing:";
        for (auto s : g.missing)
            std::cerr << ' ' << s;
    }
    if (!g.incomplete.empty())
    {
        std::cerr << ", incomplete:";
        for (auto s : g.incomplete)
            std::cerr << ' ' << s;
    }
    std::cerr << (g.gap_free() ? "" : " (partial metrics)") << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"racestack: scenario runner and run-log analysis"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir = "runs", raceline_path, run_id = "0", bridge_host = "127.0.0.1";
    std::string udp_bind, udp_peer;
    bool realtime = false;
    double speed = 1.0;
    int bridge_port = -1;
    auto* run = app.add_subcommand("run", "run a scenario");
    run->add_option("scenario", scenario_path, "scenario YAML")->required();
    run->add_option("-o,--out", out_dir, "output directory");
    run->add_option("--raceline", raceline_path, "raceline CSV (overrides the scenario)");
    run->add_option("--run-id", run_id, "log run id");
    run->add_flag("--realtime", realtime, "pace against the wall clock");
    run->add_option("--speed", speed, "wall-clock speed factor")->check(CLI::PositiveNumber);
    run->add_option("--bridge", bridge_port, "serve the JSON bridge on this port (0 picks one)");
    run->add_option("--bridge-host", bridge_host, "JSON bridge bind address");
    run->add_option("--udp-bind", udp_bind, "host:port for basestation datagrams (replaces the scripted base)");
    run->add_option("--udp-peer", udp_peer, "host:port that receives dashboard datagrams");

    std::string log_path, log_run;
    auto* metrics = app.add_subcommand("metrics", "lap metrics of a logged run");
    metrics->add_option("log", log_path, "run directory or chunk file")->required();
    metrics->add_option("--run-id", log_run, "run id when the directory holds several");

    std::string csv_out;
    auto* dynamics = app.add_subcommand("dynamics", "G-G and slip-angle samples of a logged run");
    dynamics->add_option("log", log_path, "run directory or chunk file")->required();
    dynamics->add_option("--run-id", log_run, "run id when the directory holds several");
    dynamics->add_option("-o,--out", csv_out, "CSV file (default stdout)");

    auto* replay = app.add_subcommand("replay", "rebuild topic streams from a log and recompute metrics");
    replay->add_option("log", log_path, "run directory or chunk file")->required();
    replay->add_option("--run-id", log_run, "run id when the directory holds several");

    std::string rl_out, rl_track = "oval";
    auto* raceline = app.add_subcommand("raceline", "generate a raceline CSV");
    raceline->add_option("-o,--out", rl_out, "output CSV")->required();
    raceline->add_option("--track", rl_track, "oval or a boundary CSV/KML file");

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*run)
        {
            auto sc = load_scenario(scenario_path);
            if (!raceline_path.empty())
                sc.raceline_file = raceline_path;
            const auto line = prepare_raceline(sc);
            StackOptions opt;
            opt.run_id = run_id;
            telemetry::JsonBridge bridge;
            if (bridge_port >= 0)
            {
                bridge.start(bridge_host, bridge_port);
                opt.bridge = &bridge;
                std::cerr << "bridge on http://" << bridge_host << ':' << bridge.port() << "/api/dashboard\n";
            }
            if (!udp_bind.empty())
            {
                const auto [bh, bp] = host_port(udp_bind);
                const auto [ph, pp] = udp_peer.empty() ? std::pair<std::string, std::uint16_t>{"127.0.0.1", 0}
                                                       : host_port(udp_peer);
                opt.car_channel = std::make_shared<telemetry::UdpChannel>(bh, bp, ph, pp);
            }
            const auto t0 = std::chrono::steady_clock::now();
            const auto rep = run_scenario(sc, line, out_dir, opt, realtime, speed);
            const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::cout << "scenario " << sc.name << ": " << rep.outcome.stop_reason << " after "
                      << rep.outcome.sim_time << " s simulated (" << wall << " s wall), "
                      << rep.outcome.laps_completed << " laps, final action "
                      << safety::to_string(rep.outcome.action) << '\n';
            for (const auto& v : rep.outcome.verdicts)
                std::cout << "  verdict " << safety::to_json_line(v) << '\n';
            for (const auto& m : rep.analysis.laps)
                std::cout << "  lap " << m.lap << ": " << m.lap_time << " s, cross-track [" << m.cross_track_min
                          << ", " << m.cross_track_max << "] m, velocity error " << m.velocity_error_mean
                          << " m/s\n";
            if (!rep.expectation_met)
                std::cout << "  scenario expectation not met\n";
            std::cout << "outputs in " << rep.dir.string() << '\n';
            return rep.exit_code;
        }
        if (*metrics || *replay)
        {
            LogGaps gaps;
            const auto data = load_run(log_path, log_run, &gaps);
            print_gaps(gaps);
            const auto json = to_json(analyze(data), &gaps);
            if (*replay)
            {
                std::cerr << "streams: plant " << data.plant.size() << ", imu " << data.imu.size() << ", gnss "
                          << data.gnss.size() << ", state " << data.states.size() << ", path " << data.paths.size()
                          << ", command " << data.commands.size() << ", verdict " << data.verdicts.size()
                          << ", dashboard " << data.dashboard.size() << ", basestation " << data.basestation.size()
                          << ", undecodable " << data.undecodable << '\n';
                const auto dir = std::filesystem::is_directory(log_path)
                                     ? std::filesystem::path(log_path)
                                     : std::filesystem::path(log_path).parent_path();
                if (std::filesystem::exists(dir / "metrics.json"))
                {
                    auto live = nlohmann::ordered_json::parse(read_file(dir / "metrics.json"));
                    auto again = json;
                    live.erase("log");
                    again.erase("log");
                    std::cerr << (live == again ? "metrics match the live run\n" : "metrics differ from the live run\n");
                }
            }
            std::cout << json.dump(2) << '\n';
            return gaps.gap_free() ? 0 : kExitIo;
        }
        if (*dynamics)
        {
            LogGaps gaps;
            const auto data = load_run(log_path, log_run, &gaps);
            print_gaps(gaps);
            const auto samples = compute_dynamics(data);
            if (csv_out.empty())
                std::cout << dynamics_csv(samples);
            else
                write_text(csv_out, dynamics_csv(samples));
            if (const auto c = fit_cornering_stiffness(samples))
                std::cerr << "front cornering stiffness fit: " << *c << " N/rad\n";
            return 0;
        }
        if (*raceline)
        {
            Scenario sc;
            if (rl_track != "oval")
            {
                sc.track.kind = "boundaries";
                sc.track.boundaries = rl_track;
                sc.track.format = std::filesystem::path(rl_track).extension() == ".kml" ? "kml" : "csv";
            }
            track::save_raceline(rl_out, prepare_raceline(sc));
            std::cout << "wrote " << rl_out << '\n';
            return 0;
        }
    }
    catch (const ConfigError& e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    }
    return 0;
}
