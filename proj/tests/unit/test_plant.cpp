#include "racestack/errors.hpp"
#include "racestack/plant/sensors.hpp"
#include "racestack/plant/vehicle.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

using namespace racestack;
using namespace racestack::plant;

namespace
{

constexpr double kDeg = std::numbers::pi / 180.0;

struct Harness
{
    Vehicle car;
    std::uint8_t counter = 0;
    int ticks = 0;

    explicit Harness(VehicleParams p = {}, PlantState init = {}) : car(p, init)
    {
        REQUIRE(car.run_actuation_test().passed);
        car.enable_driving(0.0);
    }

    /// Commands at 50 Hz, plant at 1 kHz.
    void drive(ActuationCommand cmd, double seconds, bool advance_counter = true)
    {
        const int n = static_cast<int>(std::lround(seconds / 0.001));
        for (int i = 0; i < n; ++i)
        {
            if (ticks % 20 == 0)
            {
                if (advance_counter)
                    ++counter;
                cmd.rolling_counter = counter;
                car.receive(cmd, car.state().time);
            }
            car.step(0.001);
            ++ticks;
        }
    }
};

PlantState moving(double v)
{
    PlantState s;
    s.v_x = v;
    s.gear = 6;
    return s;
}

} // namespace

TEST_CASE("parameters satisfy the wheelbase invariant")
{
    VehicleParams p;
    CHECK_NOTHROW(p.validate());
    CHECK(p.l_f + p.l_r == doctest::Approx(2.9718));
    p.l_f = 1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("at rest with full brake the car stays put")
{
    Harness h;
    ActuationCommand cmd;
    cmd.brake = 1800.0;
    h.drive(cmd, 2.0);
    CHECK(h.car.state().v_x == 0.0);
    CHECK(h.car.state().x == 0.0);
    CHECK(h.car.state().lowlevel == LowLevelState::Driving);
}

TEST_CASE("lateral motion decays on a straight and the linear model is stable")
{
    VehicleParams p;
    // Oracle: eigenvalues of the 2-state linear lateral model at 50 m/s.
    const double v = 50.0, m = p.mass, Iz = p.yaw_inertia, cf = p.c_f, cr = p.c_r, a = p.l_f, b = p.l_r;
    Eigen::Matrix2d A;
    A << -(cf + cr) / (m * v), (b * cr - a * cf) / (m * v) - v, (b * cr - a * cf) / (Iz * v),
        -(a * a * cf + b * b * cr) / (Iz * v);
    const Eigen::EigenSolver<Eigen::Matrix2d> es(A);
    CHECK(es.eigenvalues().real().maxCoeff() < 0.0);

    PlantState init = moving(50.0);
    init.v_y = 1.0;
    init.yaw_rate = 0.2;
    Harness h(p, init);
    h.drive({}, 2.0);
    CHECK(std::abs(h.car.state().v_y) < 0.05);
    CHECK(std::abs(h.car.state().yaw_rate) < 0.01);
}

TEST_CASE("steady cornering yaw rate matches the bicycle formula")
{
    VehicleParams p;
    p.drag_coeff = 0.0;
    p.rolling_resistance = 0.0;
    const double delta = 0.01;
    PlantState init = moving(50.0);
    init.steering_actual = delta * p.steering_ratio / kDeg;
    Harness h(p, init);
    ActuationCommand cmd;
    cmd.gear = 6;
    cmd.steering = init.steering_actual;
    h.drive(cmd, 4.0);
    const auto& s = h.car.state();
    const double L = p.wheelbase;
    const double oracle = s.v_x * delta / (L + p.understeer_gradient() * s.v_x * s.v_x);
    CHECK(std::abs(s.yaw_rate - oracle) / oracle < 0.02);
}

TEST_CASE("rolling counter watchdog")
{
    SUBCASE("advancing counters keep driving, including the wrap")
    {
        Harness h;
        h.counter = 250;
        ActuationCommand cmd;
        h.drive(cmd, 3.0);
        CHECK(h.car.state().lowlevel == LowLevelState::Driving);
        CHECK(h.counter < 250); // wrapped through 255 -> 0
    }
    SUBCASE("frozen counter at speed latches the emergency outputs")
    {
        Harness h(VehicleParams{}, moving(40.0));
        ActuationCommand cmd;
        cmd.throttle = 30.0;
        cmd.gear = 6;
        cmd.steering = 12.0;
        h.drive(cmd, 1.0);
        REQUIRE(h.car.state().throttle_actual > 20.0);
        const double steer_before = h.car.state().steering_actual;
        const double t_freeze = h.car.state().time;
        double t_emergency = -1.0;
        bool brake_reached = false;
        double t_brake = -1.0;
        for (int i = 0; i < 120; ++i)
        {
            h.drive(cmd, 0.001, false);
            const auto& s = h.car.state();
            if (s.lowlevel == LowLevelState::Emergency && t_emergency < 0.0)
            {
                t_emergency = s.time;
                CHECK(s.throttle_actual == 0.0);
            }
            if (t_emergency > 0.0 && !brake_reached && s.brake_pressure_front == 1800.0)
            {
                brake_reached = true;
                t_brake = s.time;
            }
        }
        REQUIRE(t_emergency > 0.0);
        CHECK(t_emergency - t_freeze <= 0.12);
        CHECK(brake_reached);
        // slew-limited: 1800 kPa at 250 MPa/s takes 7.2 ms
        CHECK(t_brake - t_emergency <= 0.0081);
        CHECK(h.car.state().steering_actual == doctest::Approx(steer_before).epsilon(1e-6));
        CHECK(h.car.emergency_cause() == "rolling counter stale");
    }
    SUBCASE("repeated counter value is stale")
    {
        Harness h;
        ActuationCommand cmd;
        cmd.rolling_counter = 5;
        CHECK(h.car.receive(cmd, 0.0) == CommandVerdict::Accepted);
        CHECK(h.car.receive(cmd, 0.02) == CommandVerdict::Stale);
        cmd.rolling_counter = 200; // jump of 195 reads as going backwards
        CHECK(h.car.receive(cmd, 0.04) == CommandVerdict::Stale);
        cmd.rolling_counter = 6;
        CHECK(h.car.receive(cmd, 0.06) == CommandVerdict::Accepted);
    }
}

TEST_CASE("emergency is absorbing and the engine spins down")
{
    Harness h(VehicleParams{}, moving(30.0));
    ActuationCommand cmd;
    cmd.gear = 6;
    cmd.throttle = 20.0;
    h.drive(cmd, 0.5);
    h.car.trigger_emergency("test");
    for (int k = 0; k < 50; ++k)
    {
        cmd.throttle = 55.0;
        cmd.brake = 0.0;
        h.car.enable_driving(h.car.state().time);
        h.car.request_supervised_stop();
        h.drive(cmd, 0.1);
        CHECK(h.car.state().lowlevel == LowLevelState::Emergency);
        CHECK(h.car.state().throttle_actual == 0.0);
    }
    CHECK(h.car.state().engine_rpm == 0.0);
    CHECK(h.car.state().v_x == 0.0);
    CHECK(h.car.state().brake_pressure_front == doctest::Approx(1800.0));
}

TEST_CASE("actuation test detects faulty channels")
{
    {
        Vehicle v;
        const auto r = v.run_actuation_test();
        CHECK(r.passed);
        CHECK(v.state().lowlevel == LowLevelState::EngineOn);
    }
    {
        Vehicle v;
        v.add_actuator_fault({ActuatorChannel::Steering, ActuatorFaultMode::Lag, 0.0});
        const auto r = v.run_actuation_test();
        CHECK_FALSE(r.passed);
        REQUIRE(r.failed_channel.has_value());
        CHECK(*r.failed_channel == ActuatorChannel::Steering);
        CHECK(v.state().lowlevel == LowLevelState::Uninit);
    }
    {
        Vehicle v;
        v.add_actuator_fault({ActuatorChannel::Brake, ActuatorFaultMode::Stuck, 0.0});
        const auto r = v.run_actuation_test();
        CHECK_FALSE(r.passed);
        REQUIRE(r.failed_channel.has_value());
        CHECK(*r.failed_channel == ActuatorChannel::Brake);
    }
}

TEST_CASE("gear changes one step at a time after the shift time")
{
    Harness h;
    ActuationCommand cmd;
    cmd.brake = 500.0;
    cmd.gear = 3;
    std::vector<std::pair<double, int>> changes;
    int last = h.car.state().gear;
    for (int i = 0; i < 2000; ++i)
    {
        h.drive(cmd, 0.001);
        if (h.car.state().gear != last)
        {
            CHECK(std::abs(h.car.state().gear - last) == 1);
            last = h.car.state().gear;
            changes.emplace_back(h.car.state().time, last);
        }
    }
    REQUIRE(changes.size() == 2);
    CHECK(changes[0].first == doctest::Approx(0.501).epsilon(1e-6));
    CHECK(changes[1].first - changes[0].first == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(changes[1].second == 3);
}

TEST_CASE("coasting on flat ground never gains kinetic energy")
{
    PlantState init = moving(40.0);
    init.steering_actual = 30.0;
    Harness h(VehicleParams{}, init);
    ActuationCommand cmd;
    cmd.gear = 6;
    const auto& p = h.car.params();
    auto energy = [&](const PlantState& s) {
        return 0.5 * p.mass * (s.v_x * s.v_x + s.v_y * s.v_y) + 0.5 * p.yaw_inertia * s.yaw_rate * s.yaw_rate;
    };
    cmd.steering = 30.0;
    h.drive(cmd, 0.5);
    double prev = energy(h.car.state());
    for (int i = 0; i < 5000; ++i)
    {
        cmd.steering = 30.0 * std::sin(i * 0.002);
        h.drive(cmd, 0.001);
        const double e = energy(h.car.state());
        CHECK(e <= prev + 1e-9 * prev);
        prev = e;
    }
}

TEST_CASE("non-finite state freezes the plant")
{
    Harness h(VehicleParams{}, moving(20.0));
    h.car.set_bank_lookup([](double, double) { return std::nan(""); });
    const PlantState before = h.car.state();
    h.car.step(0.001);
    CHECK(h.car.faulted());
    CHECK(h.car.state().x == before.x);
}

TEST_CASE("GNSS emulation: truth, noise statistics, dropout")
{
    runtime::RngFactory rng(42);
    PlantState s;
    s.x = 12.0;
    s.y = -3.0;
    s.yaw = 0.7;
    {
        SensorConfig cfg;
        cfg.noise = false;
        SensorSuite sensors(cfg, rng);
        const auto fix = sensors.sample_gnss(s, 0.05);
        REQUIRE(fix.has_value());
        CHECK(fix->position.x() == 12.0);
        CHECK(fix->position.y() == -3.0);
        CHECK(fix->heading == doctest::Approx(0.7));
        CHECK(fix->status == RtkStatus::Fixed);
        CHECK(fix->variance.x() == doctest::Approx(0.02 * 0.02));
    }
    {
        SensorSuite sensors(SensorConfig{}, rng);
        double sum = 0.0, sum2 = 0.0;
        const int n = 10000;
        for (int i = 0; i < n; ++i)
        {
            const double e = sensors.sample_gnss(s, 0.05 * i)->position.x() - s.x;
            sum += e;
            sum2 += e * e;
        }
        const double mean = sum / n;
        const double sd = std::sqrt(sum2 / n - mean * mean);
        CHECK(std::abs(sd - 0.02) < 0.1 * 0.02);
    }
    {
        FaultSchedule faults;
        parse_fault("rtk_dropout(1.0, 2.0)", faults);
        SensorSuite sensors(SensorConfig{}, rng, faults);
        int emitted = 0;
        for (int i = 0; i < 60; ++i)
        {
            const double t = 0.05 * i;
            const auto fix = sensors.sample_gnss(s, t);
            if (t >= 1.0 && t < 2.0)
                CHECK_FALSE(fix.has_value());
            else
                CHECK(fix.has_value());
            emitted += fix.has_value();
        }
        CHECK(emitted == 40);
    }
}

TEST_CASE("IMU reports specific force and banked body rates")
{
    runtime::RngFactory rng(1);
    SensorConfig cfg;
    cfg.noise = false;
    SensorSuite sensors(cfg, rng);
    PlantState s;
    s.roll = -9.2 * kDeg;
    s.yaw_rate = 0.2;
    s.a_y = 5.0;
    const auto imu = sensors.sample_imu(s, 0.0, 0.0);
    CHECK(imu.accel.y() == doctest::Approx(5.0 + 9.81 * std::sin(s.roll)));
    CHECK(imu.accel.z() == doctest::Approx(9.81 * std::cos(s.roll)));
    CHECK(imu.gyro.z() == doctest::Approx(0.2 * std::cos(s.roll)));
    CHECK(imu.gyro.y() == doctest::Approx(0.2 * std::sin(s.roll)));
}

TEST_CASE("fault expressions parse")
{
    FaultSchedule f;
    parse_fault("counter_freeze(42.5, 0.3)", f);
    parse_fault("actuator_fault(steering, stuck, 3)", f);
    parse_fault("rtk_degrade(1, 2, single)", f);
    parse_fault("task_stall(30_planner, 5, 0.5)", f);
    CHECK(f.counter_frozen_at(42.6));
    CHECK_FALSE(f.counter_frozen_at(42.8));
    CHECK(f.actuator.front().t0 == 3.0);
    CHECK(f.degraded_status_at(1.5).value() == 2);
    CHECK(f.task_stall.front().task == "30_planner");
    CHECK_THROWS_AS(parse_fault("bogus(1)", f), ConfigError);
    CHECK_THROWS_AS(parse_fault("rtk_dropout(1)", f), ConfigError);
    CHECK_THROWS_AS(parse_fault("rtk_dropout(a, 2)", f), ConfigError);

    CommandLink link(f);
    ActuationCommand c;
    c.rolling_counter = 7;
    CHECK(link.transmit(c, 42.0).rolling_counter == 7);
    c.rolling_counter = 8;
    CHECK(link.transmit(c, 42.6).rolling_counter == 7);
    c.rolling_counter = 9;
    CHECK(link.transmit(c, 43.0).rolling_counter == 9);
}
