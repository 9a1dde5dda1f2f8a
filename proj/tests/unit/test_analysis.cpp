#include "racestack/analysis/metrics.hpp"
#include "racestack/analysis/run.hpp"
#include "racestack/analysis/scenario.hpp"
#include "racestack/analysis/stack.hpp"
#include "racestack/errors.hpp"
#include "racestack/planner/planner.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace racestack;
using namespace racestack::analysis;
namespace fs = std::filesystem;

namespace
{

constexpr double kPi = 3.14159265358979323846;

track::RacelineSamples circle_line(double radius, int n, double v)
{
    track::RacelineSamples s;
    s.closed = true;
    for (int i = 0; i < n; ++i)
    {
        const double a = 2.0 * kPi * i / n;
        s.x.push_back(radius * std::cos(a));
        s.y.push_back(radius * std::sin(a));
        s.v_ref.push_back(v);
    }
    return s;
}

// States driven counter-clockwise around a circle, `inward` metres inside it.
RunData circle_run(double radius, double inward, double speed, double turns)
{
    RunData d;
    d.base_tick = 0.001;
    d.raceline = circle_line(radius, 256, speed);
    d.has_raceline = true;
    const double length = 2.0 * kPi * radius;
    const double dt = 0.008;
    const double s0 = length - 20.0;
    const int steps = static_cast<int>(turns * length / speed / dt);
    for (int k = 0; k <= steps; ++k)
    {
        const double s = s0 + speed * dt * k;
        const double a = s / radius;
        estimation::EstimatedState st;
        st.position = {(radius - inward) * std::cos(a), (radius - inward) * std::sin(a), 0.0};
        st.rpy = {0.0, 0.0, a + kPi / 2.0};
        st.velocity = {speed * std::cos(a + kPi / 2.0), speed * std::sin(a + kPi / 2.0), 0.0};
        st.status = estimation::EstimatorStatus::Ok;
        d.states.push_back({static_cast<runtime::Tick>(8 * k), st});
    }
    return d;
}

fs::path scratch_dir(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("racestack_analysis_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Scenario short_oval(double duration)
{
    auto sc = parse_scenario("name: short\nseed: 3\nduration: " + std::to_string(duration) +
                             "\nbasestation:\n  lap_v_max: [50]\n");
    return sc;
}

const track::RacelineSamples& oval_line()
{
    static const auto line = prepare_raceline(Scenario{});
    return line;
}

} // namespace

TEST_CASE("scenario defaults and overrides")
{
    const auto sc = parse_scenario(R"(
name: demo
seed: 42
duration: 12.5
laps: 2
vehicle:
  mass: 800
  c_f: 1.5e5
basestation:
  lap_v_max: [40, 45]
  events:
    - t: 3.0
      track_flag: yellow
    - t: 4.0
      v_max: 20
faults:
  - counter_freeze(5.0, 2.0)
  - rtk_dropout(1.0, 2.0)
expect:
  emergency: true
  cause: rolling counter stale
)");
    CHECK(sc.name == "demo");
    CHECK(sc.seed == 42);
    CHECK(sc.duration == 12.5);
    CHECK(sc.laps == 2);
    CHECK(sc.vehicle.mass == 800.0);
    CHECK(sc.vehicle.c_f == 1.5e5);
    CHECK(sc.vehicle.c_r == Scenario{}.vehicle.c_r);
    REQUIRE(sc.basestation.lap_v_max.size() == 2);
    REQUIRE(sc.basestation.events.size() == 2);
    CHECK(sc.basestation.events[0].t == 3.0);
    CHECK(sc.basestation.events[0].track_flag.has_value());
    CHECK(sc.basestation.events[1].v_max == 20.0);
    REQUIRE(sc.faults.counter_freeze.size() == 1);
    CHECK(sc.faults.counter_freeze[0].t0 == 5.0);
    CHECK(sc.faults.counter_freeze[0].t1 == 7.0);
    CHECK(sc.faults.rtk_dropout.size() == 1);
    CHECK(sc.expect.emergency);
    CHECK(sc.expect.emergency_cause == "rolling counter stale");

    const auto empty = parse_scenario("{}");
    CHECK(empty.duration == 60.0);
    CHECK(empty.start_before_line == 100.0);
    CHECK(empty.basestation.lap_v_max == std::vector<double>{50.0});
}

TEST_CASE("scenario errors name the offending key")
{
    auto message = [](const std::string& yaml) {
        try
        {
            parse_scenario(yaml);
        }
        catch (const ConfigError& e)
        {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("vehicle:\n  masss: 3\n").find("vehicle.masss") != std::string::npos);
    CHECK(message("bogus: 1\n").find("bogus") != std::string::npos);
    CHECK(message("basestation:\n  events:\n    - v_max: 3\n").find("basestation.events[0].t") != std::string::npos);
    CHECK(message("duration: fast\n").find("duration") != std::string::npos);
    CHECK(message("duration: -1\n").find("duration") != std::string::npos);
    CHECK(message("faults:\n  - teleport(1)\n").find("teleport") != std::string::npos);
    CHECK(message("basestation:\n  events: 3\n").find("basestation.events") != std::string::npos);
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.yaml"), ConfigError);
}

TEST_CASE("shipped scenarios parse")
{
    const fs::path dir = RACESTACK_SCENARIO_DIR;
    int n = 0;
    for (const auto& e : fs::directory_iterator(dir))
    {
        if (e.path().extension() != ".yaml")
            continue;
        CAPTURE(e.path().string());
        CHECK_NOTHROW(load_scenario(e.path()));
        ++n;
    }
    CHECK(n >= 5);
}

TEST_CASE("record codecs roundtrip")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-100.0, 100.0);

    plant::PlantState ps;
    ps.x = u(rng);
    ps.y = u(rng);
    ps.yaw = u(rng);
    ps.v_x = u(rng);
    ps.engine_rpm = 4321.5;
    ps.gear = 4;
    ps.brake_pressure_front = 1800.0;
    ps.lowlevel = plant::LowLevelState::Emergency;
    ps.last_counter = 77;
    ps.time = 12.25;
    const auto ps2 = decode_plant(encode(ps));
    CHECK(ps2.x == ps.x);
    CHECK(ps2.yaw == ps.yaw);
    CHECK(ps2.engine_rpm == ps.engine_rpm);
    CHECK(ps2.gear == 4);
    CHECK(ps2.lowlevel == plant::LowLevelState::Emergency);
    CHECK(ps2.last_counter == 77);
    CHECK(ps2.time == ps.time);

    estimation::EstimatedState es;
    es.position = {u(rng), u(rng), u(rng)};
    es.rpy = {0.1, -0.2, 3.0};
    es.velocity = {u(rng), u(rng), 0.0};
    es.angular_velocity = {0.0, 0.0, 0.3};
    es.slip_angle_front = 0.01;
    es.trust = 0.5;
    es.status = estimation::EstimatorStatus::DeadReckoning;
    es.stamp = 3.0;
    const auto es2 = decode_state(encode(es));
    CHECK(es2.position == es.position);
    CHECK(es2.rpy == es.rpy);
    CHECK(es2.velocity == es.velocity);
    CHECK(es2.angular_velocity == es.angular_velocity);
    CHECK(es2.slip_angle_front == es.slip_angle_front);
    CHECK(es2.status == es.status);

    PathSummary p;
    p.s_star = 1234.5;
    p.v_cap = 35.763;
    p.v_ref = 35.0;
    p.cross_track = -0.4;
    p.points = 99;
    const auto p2 = decode_path(encode(p));
    CHECK(p2.s_star == p.s_star);
    CHECK(p2.v_cap == p.v_cap);
    CHECK(p2.cross_track == p.cross_track);
    CHECK(p2.points == 99);

    control::ControllerOutput c;
    c.throttle = 12.0;
    c.brake = 300.0;
    c.steering = -33.5;
    c.gear = 5;
    c.source = control::CommandSource::Autonomy;
    c.rolling_counter = 200;
    c.velocity_error = 2.5;
    const auto c2 = decode_command(encode(c));
    CHECK(c2.throttle == c.throttle);
    CHECK(c2.steering == c.steering);
    CHECK(c2.source == c.source);
    CHECK(c2.rolling_counter == 200);
    CHECK(c2.velocity_error == 2.5);

    const safety::Verdict v{safety::Action::EmergencyStop, "lowlevel: rolling counter stale", 20.6};
    const auto v2 = decode_verdict(encode(v));
    CHECK(v2.action == v.action);
    CHECK(v2.cause == v.cause);
    CHECK(v2.stamp == v.stamp);

    const auto e2 = decode_event(encode(TextEvent{"watchdog", "rolling counter stale"}));
    CHECK(e2.source == "watchdog");
    CHECK(e2.message == "rolling counter stale");

    auto line = circle_line(50.0, 40, 20.0);
    line.bank.assign(40, 0.16);
    const auto line2 = decode_raceline(encode(line));
    CHECK(line2.x == line.x);
    CHECK(line2.y == line.y);
    CHECK(line2.v_ref == line.v_ref);
    CHECK(line2.bank == line.bank);
    CHECK(line2.closed);

    auto bytes = encode(ps);
    bytes.pop_back();
    CHECK_THROWS_AS(decode_plant(bytes), FormatError);
    bytes = encode(p);
    bytes.push_back(0);
    CHECK_THROWS_AS(decode_path(bytes), FormatError);
}

TEST_CASE("lap counter counts forward crossings only")
{
    LapCounter c(1000.0);
    CHECK_FALSE(c.update(900.0));
    CHECK(c.update(10.0));
    CHECK(c.crossings() == 1);
    // jitter around the line does not count twice
    CHECK_FALSE(c.update(999.0));
    CHECK_FALSE(c.update(5.0));
    CHECK(c.crossings() == 1);
    for (double s : {300.0, 600.0, 800.0})
        CHECK_FALSE(c.update(s));
    CHECK(c.update(20.0));
    CHECK(c.crossings() == 2);
}

TEST_CASE("lap metrics on synthetic logs")
{
    SUBCASE("on the line")
    {
        const auto d = circle_run(100.0, 0.0, 20.0, 2.2);
        const auto laps = compute_lap_metrics(d);
        REQUIRE(laps.size() == 2);
        for (const auto& m : laps)
        {
            CHECK(std::abs(m.cross_track_min) < 1e-4);
            CHECK(std::abs(m.cross_track_max) < 1e-4);
            CHECK(m.heading_error_rms < 1e-4);
            CHECK(m.lap_time == doctest::Approx(2.0 * kPi * 100.0 / 20.0).epsilon(0.002));
            CHECK(m.mean_speed == doctest::Approx(20.0));
        }
    }
    SUBCASE("constant offset to the left")
    {
        const auto d = circle_run(100.0, 0.5, 20.0, 1.2);
        const auto laps = compute_lap_metrics(d);
        REQUIRE(laps.size() == 1);
        CHECK(laps[0].cross_track_min == doctest::Approx(0.5).epsilon(1e-4));
        CHECK(laps[0].cross_track_max == doctest::Approx(0.5).epsilon(1e-4));
        CHECK(laps[0].cross_track_rms == doctest::Approx(0.5).epsilon(1e-4));
        CHECK(laps[0].max_abs_cross_track() == doctest::Approx(0.5).epsilon(1e-4));
    }
}

TEST_CASE("tracking stations agree with radial projection")
{
    // circle r = 49: a pose at angle theta projects to s = 49 theta
    auto d = circle_run(49.0, 0.0, 10.0, 0.1);
    d.states.clear();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ang(0.05, 2.0 * kPi - 0.05), rad(46.0, 52.0);
    for (int i = 0; i < 200; ++i)
    {
        const double a = ang(rng), r = rad(rng);
        estimation::EstimatedState st;
        st.position = {r * std::cos(a), r * std::sin(a), 0.0};
        d.states = {{0, st}};
        const auto ts = tracking_errors(d);
        REQUIRE(ts.size() == 1);
        CHECK(ts[0].s == doctest::Approx(49.0 * a).epsilon(1e-4));
        CHECK(ts[0].cross_track == doctest::Approx(49.0 - r).epsilon(1e-3));
    }
}

TEST_CASE("dynamics samples match the steady-state bicycle model")
{
    const VehicleGeometry g;
    const double L = g.l_f + g.l_r, c_f = 1.2e5, c_r = 1.2e5;

    SUBCASE("straight line")
    {
        estimation::EstimatedState s;
        s.velocity = {50.0, 0.0, 0.0};
        plant::ImuSample imu;
        const auto ds = dynamics_sample(1.0, imu, s, 0.0, g);
        CHECK(ds.sigma_f == doctest::Approx(0.0));
        CHECK(ds.sigma_r == doctest::Approx(0.0));
        CHECK(ds.a_lat == doctest::Approx(0.0));
        CHECK(ds.v == doctest::Approx(50.0));
    }

    // steady turn: lateral acceleration v^2/R split over the axles by static moments
    auto steady = [&](double radius, double v) {
        const double a = v * v / radius;
        const double fyf = g.mass * a * g.l_r / L, fyr = g.mass * a * g.l_f / L;
        const double sf = fyf / c_f, sr = fyr / c_r;
        const double r = v / radius;
        const double vx = v;
        const double vy = g.l_r * r - vx * std::tan(sr);
        const double delta = sf + std::atan2(vy + g.l_f * r, vx);
        estimation::EstimatedState s;
        s.velocity = {vx, vy, 0.0};
        s.angular_velocity = {0.0, 0.0, r};
        plant::ImuSample imu;
        imu.accel = {0.0, a, 9.81};
        return std::tuple{dynamics_sample(0.0, imu, s, delta, g), sf, sr, fyf, a};
    };

    SUBCASE("circle r = 49 at 29.7 m/s")
    {
        const auto [ds, sf, sr, fyf, a] = steady(49.0, 29.7);
        CHECK(ds.a_lat == doctest::Approx(18.0).epsilon(0.002));
        CHECK(ds.sigma_f == doctest::Approx(sf).epsilon(1e-9));
        CHECK(ds.sigma_r == doctest::Approx(sr).epsilon(1e-3));
        CHECK(ds.f_yf == doctest::Approx(fyf));
    }

    SUBCASE("regression recovers the front stiffness")
    {
        std::vector<DynamicsSample> samples;
        for (double radius = 60.0; radius < 600.0; radius += 20.0)
            samples.push_back(std::get<0>(steady(radius, 30.0)));
        const auto fit = fit_cornering_stiffness(samples);
        REQUIRE(fit);
        CHECK(*fit == doctest::Approx(c_f).epsilon(1e-6));
        CHECK_FALSE(fit_cornering_stiffness({}).has_value());
    }
}

TEST_CASE("exit codes follow the scenario expectation")
{
    const safety::Verdict emergency{safety::Action::EmergencyStop, "lowlevel: rolling counter stale", 20.6};
    const safety::Verdict stop{safety::Action::ControlledStop, "planner", 25.0};

    Expectation none;
    CHECK(exit_code_for(none, {}) == kExitOk);
    CHECK(exit_code_for(none, {stop}) == kExitOk);
    CHECK(exit_code_for(none, {emergency}) == kExitUnexpectedEmergency);
    CHECK(expectation_met(none, {}));
    CHECK_FALSE(expectation_met(none, {emergency}));

    Expectation crash;
    crash.emergency = true;
    crash.emergency_cause = "rolling counter";
    CHECK(exit_code_for(crash, {emergency}) == kExitOk);
    CHECK(expectation_met(crash, {emergency}));
    // expected emergency that never happens is not an exit-code failure
    CHECK(exit_code_for(crash, {}) == kExitOk);
    CHECK_FALSE(expectation_met(crash, {}));
    Expectation wrong_cause = crash;
    wrong_cause.emergency_cause = "localization";
    CHECK(exit_code_for(wrong_cause, {emergency}) == kExitUnexpectedEmergency);

    Expectation stopping;
    stopping.controlled_stop = true;
    CHECK(expectation_met(stopping, {stop}));
    CHECK_FALSE(expectation_met(stopping, {}));
}

TEST_CASE("replay reproduces live metrics and reports gaps")
{
    auto sc = short_oval(40.0);
    sc.log_budget = 1u << 20;
    const auto dir = scratch_dir("replay");
    const auto rep = run_scenario(sc, oval_line(), dir);
    REQUIRE(rep.outcome.chunks.size() >= 3);
    CHECK(rep.exit_code == kExitOk);
    CHECK(rep.outcome.verdicts.empty());
    for (const char* f : {"metrics.json", "laps.csv", "dynamics.csv", "verdicts.jsonl", "manifest.json"})
        CHECK(fs::exists(dir / f));

    LogGaps gaps;
    const auto replayed = load_run(dir, "", &gaps);
    CHECK(gaps.gap_free());
    CHECK(gaps.chunks == rep.outcome.chunks.size());
    CHECK(to_json(analyze(replayed)) == to_json(rep.analysis));

    // the in-memory copy and the files hold the same records
    const auto live = decode_run(rep.outcome.records);
    CHECK(live.states.size() == replayed.states.size());
    CHECK(live.order.size() == replayed.order.size());

    // dynamics over a closed-loop run recover the plant's front stiffness
    const auto fit = fit_cornering_stiffness(compute_dynamics(replayed));
    REQUIRE(fit);
    CHECK(*fit == doctest::Approx(sc.vehicle.c_f).epsilon(0.05));

    fs::remove(rep.outcome.chunks[1]);
    LogGaps holes;
    const auto partial = load_run(dir, "0", &holes);
    CHECK_FALSE(holes.gap_free());
    REQUIRE(holes.missing.size() == 1);
    CHECK(holes.missing[0] == 1);
    CHECK(partial.states.size() < replayed.states.size());
    CHECK(to_json(analyze(partial), &holes)["log"]["gap_free"] == false);
    fs::remove_all(dir);
}

TEST_CASE("equal seeds give byte-identical logs")
{
    const auto sc = short_oval(15.0);
    const auto a = scratch_dir("det_a"), b = scratch_dir("det_b");
    const auto ra = run_scenario(sc, oval_line(), a);
    const auto rb = run_scenario(sc, oval_line(), b);
    REQUIRE(ra.outcome.chunks.size() == rb.outcome.chunks.size());
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    for (std::size_t i = 0; i < ra.outcome.chunks.size(); ++i)
        CHECK(slurp(ra.outcome.chunks[i]) == slurp(rb.outcome.chunks[i]));

    auto other = sc;
    other.seed = 4;
    const auto c = scratch_dir("det_c");
    const auto rc = run_scenario(other, oval_line(), c);
    CHECK(slurp(rc.outcome.chunks[0]) != slurp(ra.outcome.chunks[0]));
    for (const auto& d : {a, b, c})
        fs::remove_all(d);
}

TEST_CASE("stack stops on a supervisor verdict and keeps the log ordered")
{
    auto sc = parse_scenario("duration: 40\nfaults:\n  - task_stall(planner, 10.0, 40.0)\n"
                             "expect:\n  controlled_stop: true\n");
    Stack stack(sc, oval_line(), {});
    const auto out = stack.run();
    REQUIRE_FALSE(out.verdicts.empty());
    CHECK(out.verdicts.front().action == safety::Action::ControlledStop);
    CHECK(out.verdicts.front().cause == "planner");
    CHECK(out.stop_reason == "stopped");
    CHECK(out.sim_time < 40.0);
    runtime::Tick prev = 0;
    for (const auto& r : out.records)
    {
        CHECK(r.stamp >= prev);
        prev = r.stamp;
    }
}
