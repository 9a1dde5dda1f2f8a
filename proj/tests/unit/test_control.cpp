#include "racestack/control/controller.hpp"
#include "racestack/errors.hpp"
#include "racestack/plant/vehicle.hpp"
#include "racestack/runtime/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace racestack;
using namespace racestack::control;
using planner::LocalPath;
using planner::PathPoint;

namespace
{

constexpr double kPi = std::numbers::pi;

LocalPath straight_path(double v, double stamp, double y_offset = 0.0)
{
    LocalPath p;
    p.stamp = stamp;
    for (int k = 0; k <= 50; ++k)
        p.points.push_back({v * 0.05 * k, y_offset, 0.0, v, 0.05 * k, 0.0});
    return p;
}

estimation::EstimatedState state(double v, double stamp)
{
    estimation::EstimatedState s;
    s.velocity = {v, 0.0, 0.0};
    s.stamp = stamp;
    s.status = estimation::EstimatorStatus::Ok;
    s.trust = 1.0;
    return s;
}

} // namespace

TEST_CASE("parameter validation")
{
    ControlParams p;
    CHECK_NOTHROW(p.validate());
    p.ld_min = 30.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.brake_deadband = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.gears.up[2] = 100.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("longitudinal deadbands and single-step PID arithmetic")
{
    const double dt = 0.02;
    {
        Controller c;
        const auto cmd = c.longitudinal(50.1, 50.0, dt);
        CHECK(cmd.throttle == 0.0);
        CHECK(cmd.brake == 0.0);
        CHECK(c.longitudinal(0.2, 0.0, dt).throttle == 0.0);
        CHECK(c.longitudinal(0.0, 0.4, dt).brake == 0.0);
    }
    {
        Controller c;
        const auto cmd = c.longitudinal(52.5, 50.0, dt);
        const double d = dt / (0.05 + dt) * (2.5 / dt);
        const double raw = 17.0 * 2.5 + 16.0 * (2.5 * dt) + 1.1 * d;
        CHECK(raw > 55.0);
        CHECK(cmd.throttle == 55.0);
        CHECK(cmd.brake == 0.0);
    }
    {
        Controller c;
        const auto cmd = c.longitudinal(45.0, 50.0, dt);
        const double d = dt / (0.05 + dt) * (5.0 / dt);
        CHECK(cmd.brake == doctest::Approx(300.0 * 5.0 + 2.0 * d));
        CHECK(cmd.throttle == 0.0);
    }
    {
        Controller c;
        c.longitudinal(50.3, 50.0, dt); // small throttle error
        const auto second = c.longitudinal(50.3, 50.0, dt);
        const double d1 = dt / (0.05 + dt) * (0.3 / dt);
        const double d2 = d1 + dt / (0.05 + dt) * (0.0 - d1);
        CHECK(second.throttle == doctest::Approx(17.0 * 0.3 + 16.0 * 0.3 * 2 * dt + 1.1 * d2));
    }
}

TEST_CASE("pid integral never exceeds its clamp")
{
    runtime::RngStream rng(3);
    Pid pid(ControlParams{}.throttle);
    for (int i = 0; i < 20000; ++i)
    {
        pid.update(rng.gaussian(20.0), 0.02);
        REQUIRE(std::abs(pid.integral()) <= 0.5);
    }
}

TEST_CASE("gear logic over an exhaustive rpm grid")
{
    const GearTable t;
    for (int gear = 1; gear <= 6; ++gear)
    {
        for (int rpm = 0; rpm <= 9000; ++rpm)
        {
            int expected = gear;
            if (gear < 6 && rpm > t.up[gear - 1])
                expected = gear + 1;
            else if (gear > 1 && rpm < t.down[gear - 2])
                expected = gear - 1;
            REQUIRE(gear_logic(rpm, gear, t) == expected);
        }
    }
    CHECK(gear_logic(4100.0, 1) == 2);
    CHECK(gear_logic(4000.0, 1) == 1);
    CHECK(gear_logic(4000.001, 1) == 2);
    CHECK(gear_logic(2150.0, 4) == 3);
    CHECK(gear_logic(2200.0, 4) == 4);
    CHECK(gear_logic(9000.0, 6) == 6);
    CHECK(gear_logic(0.0, 1) == 1);
}

TEST_CASE("gear shifts hold for 500 ms")
{
    GearShifter g;
    CHECK(g.update(3000.0, 2, 0.0) == 2);
    CHECK(g.update(4300.0, 2, 1.0) == 3);
    // actual gear still 2 during the shift
    CHECK(g.update(4300.0, 2, 1.2) == 3);
    // actual now 3 but only 0.48 s elapsed
    CHECK(g.update(4500.0, 3, 1.48) == 3);
    CHECK(g.update(4500.0, 3, 1.5) == 4);
    // down-shift request right after is held too
    CHECK(g.update(1000.0, 4, 1.9) == 4);
    CHECK(g.update(1000.0, 4, 2.0) == 3);
}

TEST_CASE("adaptive lookahead")
{
    CHECK(adaptive_lookahead(0.0) == 15.0);
    CHECK(adaptive_lookahead(50.0) == 27.0);
    CHECK(adaptive_lookahead(10.0) == doctest::Approx(21.3));
    CHECK(adaptive_lookahead(12.0 / 0.63) == doctest::Approx(27.0).epsilon(1e-15));
}

TEST_CASE("pure pursuit worked example")
{
    const auto pp = pure_pursuit_point(10.0, 1.0, 15.0);
    CHECK(pp.lookahead_angle == doctest::Approx(0.0996687).epsilon(1e-6));
    CHECK(pp.road_wheel == doctest::Approx(0.0394).epsilon(1e-3));
    CHECK(pp.steering_deg == doctest::Approx(33.87).epsilon(1e-3));
    CHECK(pp.steering_deg * kPi / 180.0 == doctest::Approx(0.5911).epsilon(1e-3));

    const auto ahead = pure_pursuit(straight_path(50.0, 0.0).points, 50.0);
    REQUIRE(ahead);
    CHECK(ahead->steering_deg == 0.0);
    CHECK(ahead->point.x == doctest::Approx(27.0));

    const auto hard = pure_pursuit_point(1.0, 20.0, 15.0);
    CHECK(hard.steering_deg == doctest::Approx(230.0));
}

TEST_CASE("pure pursuit against an independent evaluation")
{
    runtime::RngStream rng(99);
    const ControlParams p;
    double worst = 0.0;
    for (int i = 0; i < 100000; ++i)
    {
        const double x = 0.5 + 40.0 * rng.uniform();
        const double y = -15.0 + 30.0 * rng.uniform();
        const double ld = 15.0 + 12.0 * rng.uniform();
        const auto pp = pure_pursuit_point(x, y, ld, p);
        // sin(atan2(y, x)) = y / |(x, y)|; clamp at 230/15 degrees road wheel
        const double delta = std::atan(2.0 * 2.9718 * y / std::hypot(x, y) / ld);
        const double lim = 230.0 / 15.0 * kPi / 180.0;
        const double hand = std::max(-lim, std::min(lim, delta)) * 15.0 * 180.0 / kPi;
        worst = std::max(worst, std::abs(pp.steering_deg - hand));
        const auto mirror = pure_pursuit_point(x, -y, ld, p);
        REQUIRE(mirror.steering_deg == -pp.steering_deg);
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("lookahead point selection")
{
    auto path = straight_path(50.0, 0.0).points;
    auto pt = find_lookahead(path, 15.0);
    REQUIRE(pt);
    CHECK(pt->x == doctest::Approx(15.0));
    CHECK_FALSE(pt->short_path);

    std::vector<PathPoint> diag{{0, 0, 0, 1, 0, 0}, {3, 4, 0, 1, 0.05, 0}, {6, 8, 0, 1, 0.1, 0}};
    pt = find_lookahead(diag, 7.5);
    CHECK(pt->x == doctest::Approx(4.5));
    CHECK(pt->y == doctest::Approx(6.0));
    pt = find_lookahead(diag, 20.0);
    CHECK(pt->short_path);
    CHECK(pt->x == 6.0);
    CHECK_FALSE(find_lookahead({}, 15.0));

    // mirrored paths give exactly negated steering
    runtime::RngStream rng(5);
    for (int trial = 0; trial < 200; ++trial)
    {
        std::vector<PathPoint> a, b;
        double x = 0.0, y = rng.gaussian(1.0), h = rng.gaussian(0.2);
        for (int k = 0; k <= 50; ++k)
        {
            a.push_back({x, y, h, 40.0, 0.05 * k, 0.0});
            b.push_back({x, -y, -h, 40.0, 0.05 * k, 0.0});
            h += rng.gaussian(0.02);
            x += 2.0 * std::cos(h);
            y += 2.0 * std::sin(h);
        }
        const double v = 40.0 * rng.uniform();
        REQUIRE(pure_pursuit(b, v)->steering_deg == -pure_pursuit(a, v)->steering_deg);
    }
}

TEST_CASE("control cycle priorities")
{
    Controller c;
    auto path = straight_path(50.0, 1.0, 1.0);
    auto est = state(45.0, 1.0);
    ControllerInputs in{&path, &est, {}, 3000.0, 6, 1.0};
    const auto a = c.step(in);
    CHECK(a.source == CommandSource::Autonomy);
    CHECK(a.throttle > 0.0);
    CHECK(a.brake == 0.0);
    CHECK(a.steering > 0.0);
    CHECK(a.v_ref == 50.0);
    CHECK(a.rolling_counter == 1);

    in.now = 1.3; // path 0.3 s old
    est.stamp = 1.3;
    const auto f = c.step(in);
    CHECK(f.source == CommandSource::Failsafe);
    CHECK(f.throttle == 0.0);
    CHECK(f.brake == 1800.0);
    CHECK(f.steering == a.steering);
    CHECK(f.rolling_counter == 2);

    path.stamp = 1.3;
    in.joystick = {true, 500.0, -12.0, 10.0, 1.0};
    const auto j = c.step(in);
    CHECK(j.source == CommandSource::Joystick);
    CHECK(j.throttle == 0.0);
    CHECK(j.brake == 500.0);
    CHECK(j.steering == -12.0);

    in.joystick.stamp = -10.0; // joystick link stale: back to autonomy
    CHECK(c.step(in).source == CommandSource::Autonomy);

    in.state = nullptr;
    CHECK(c.step(in).source == CommandSource::Failsafe);
    in.state = &est;
    est.status = estimation::EstimatorStatus::Failed;
    CHECK(c.step(in).source == CommandSource::Failsafe);
}

TEST_CASE("throttle and brake are mutually exclusive under random inputs")
{
    runtime::RngStream rng(17);
    Controller c;
    for (int i = 0; i < 20000; ++i)
    {
        const double t = 0.02 * i;
        auto path = straight_path(30.0 + 20.0 * rng.uniform(), t - (rng.uniform() < 0.05 ? 0.5 : 0.0),
                                  rng.gaussian(2.0));
        auto est = state(30.0 + 20.0 * rng.uniform(), t);
        ControllerInputs in{&path, &est, {}, 4000.0 * rng.uniform(), 1 + static_cast<int>(rng.uniform() * 6), t};
        const auto out = c.step(in);
        REQUIRE(out.throttle * out.brake == 0.0);
        REQUIRE(out.throttle <= 55.0);
        REQUIRE(out.brake <= 1800.0);
        REQUIRE(std::abs(out.steering) <= 230.0);
        REQUIRE(std::abs(c.throttle_pid().integral()) <= 0.5);
        REQUIRE(std::abs(c.brake_pid().integral()) <= 15.0);
    }
}

TEST_CASE("closed loop on a straight settles in the tracking band")
{
    plant::PlantState init;
    init.v_x = 40.0;
    init.gear = 6;
    init.engine_rpm = 4000.0;
    plant::Vehicle car({}, init);
    REQUIRE(car.run_actuation_test().passed);
    car.enable_driving(0.0);
    Controller c;
    bool entered = false, left_after_entry = false;
    double sum_err = 0.0;
    int n = 0;
    for (int k = 0; k < 60000; ++k)
    {
        if (k % 20 == 0)
        {
            const double t = car.state().time;
            auto path = straight_path(50.0, t);
            auto est = state(car.state().v_x, t);
            ControllerInputs in{&path, &est, {}, car.state().engine_rpm, car.state().gear, t};
            const auto out = c.step(in);
            plant::ActuationCommand cmd;
            cmd.throttle = out.throttle;
            cmd.brake = out.brake;
            cmd.steering = out.steering;
            cmd.gear = out.gear;
            cmd.rolling_counter = out.rolling_counter;
            car.receive(cmd, t);
            const double v = car.state().v_x;
            const bool inside = v >= 47.5 && v <= 52.5;
            if (entered && !inside)
                left_after_entry = true;
            entered = entered || inside;
            if (t > 20.0)
            {
                sum_err += 50.0 - v;
                ++n;
            }
        }
        car.step(0.001);
    }
    CHECK(entered);
    CHECK_FALSE(left_after_entry);
    const double mean = sum_err / n;
    MESSAGE("mean velocity error " << mean);
    CHECK(mean >= 1.0);
    CHECK(mean <= 4.0);
}
