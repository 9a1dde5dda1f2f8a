#include "racestack/runtime/bus.hpp"
#include "racestack/runtime/rng.hpp"
#include "racestack/runtime/scheduler.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

using namespace racestack;
using namespace racestack::runtime;

namespace
{

struct Rate
{
    std::string name;
    Tick period;
    Tick phase;
};

// Reference: walk every base tick and list what is due, in name order.
std::vector<Execution> tick_walk(std::vector<Rate> rates, Tick from, Tick until)
{
    std::sort(rates.begin(), rates.end(), [](const Rate& a, const Rate& b) { return a.name < b.name; });
    std::vector<Execution> out;
    for (Tick t = from + 1; t <= until; ++t)
    {
        for (const auto& r : rates)
        {
            if (t > r.phase && (t - r.phase) % r.period == 0)
            {
                out.push_back({r.name, t});
            }
        }
    }
    return out;
}

} // namespace

TEST_CASE("empty scheduler only moves the clock")
{
    SimClock clock;
    Bus bus(clock);
    Scheduler sched(clock, bus);
    CHECK(sched.advance(1.0).empty());
    CHECK(clock.now() == 1000);
    CHECK(clock.seconds() == doctest::Approx(1.0));
}

TEST_CASE("a 50 Hz task fires 50 times per second")
{
    SimClock clock;
    Bus bus(clock);
    Scheduler sched(clock, bus);
    int count = 0;
    sched.add_task({"control", 0.02, 0.0, [&](Tick) { ++count; }});
    const auto trace = sched.advance(1.0);
    CHECK(count == 50);
    CHECK(trace == tick_walk({{"control", 20, 0}}, 0, 1000));
}

TEST_CASE("coincident deadlines run in name order")
{
    SimClock clock;
    Bus bus(clock);
    Scheduler sched(clock, bus);
    sched.add_task({"b_telemetry", 0.1, 0.0, [](Tick) {}});
    sched.add_task({"a_control", 0.02, 0.0, [](Tick) {}});
    const auto trace = sched.advance(0.1);
    CHECK(trace == tick_walk({{"b_telemetry", 100, 0}, {"a_control", 20, 0}}, 0, 100));
    REQUIRE(trace.size() == 6);
    CHECK(trace[4] == Execution{"a_control", 100});
    CHECK(trace[5] == Execution{"b_telemetry", 100});
}

TEST_CASE("firing counts match floor((until - phase) / period) over chained advances")
{
    SimClock clock;
    Bus bus(clock);
    Scheduler sched(clock, bus);
    const std::vector<Rate> rates = {{"plant", 1, 0}, {"imu", 8, 0}, {"gnss", 50, 0}, {"odd", 7, 3}, {"telemetry", 100, 0}};
    for (const auto& r : rates)
    {
        sched.add_task({r.name, r.period * 0.001, r.phase * 0.001, [](Tick) {}});
    }
    std::vector<Execution> all;
    for (double until : {0.013, 0.2, 0.2, 0.731, 1.5})
    {
        auto part = sched.advance(until);
        all.insert(all.end(), part.begin(), part.end());
    }
    CHECK(all == tick_walk(rates, 0, 1500));
    for (const auto& r : rates)
    {
        CHECK(sched.executions(r.name) == static_cast<std::uint64_t>((1500 - r.phase) / r.period));
    }
    // Integer ticks: elapsed time is exactly count * period.
    CHECK(clock.now() == 1500);
}

TEST_CASE("non-integral periods are configuration errors")
{
    SimClock clock;
    Bus bus(clock);
    Scheduler sched(clock, bus);
    CHECK_THROWS_AS(sched.add_task({"bad", 0.0005, 0.0, [](Tick) {}}), ConfigError);
    CHECK_THROWS_AS(sched.add_task({"zero", 0.0, 0.0, [](Tick) {}}), ConfigError);
    sched.add_task({"ok", 0.008, 0.0, [](Tick) {}});
    CHECK_THROWS_AS(sched.add_task({"ok", 0.008, 0.0, [](Tick) {}}), ConfigError);
}

TEST_CASE("callback failures become fault events and the loop continues")
{
    SimClock clock;
    Bus bus(clock);
    Scheduler sched(clock, bus);
    auto faults = bus.subscribe<FaultEvent>(kFaultTopic);
    int healthy = 0;
    sched.add_task({"broken", 0.05, 0.0, [](Tick) { throw std::runtime_error("boom"); }});
    sched.add_task({"healthy", 0.05, 0.0, [&](Tick) { ++healthy; }});
    sched.run_until(0.2);
    CHECK(healthy == 4);
    CHECK(sched.executions("broken") == 4);
    auto events = faults.poll();
    REQUIRE(events.size() == 4);
    CHECK(events[0].value.source == "broken");
    CHECK(events[0].value.message == "boom");
    CHECK(events[0].stamp == 50);
}

TEST_CASE("suspended tasks skip their window")
{
    SimClock clock;
    Bus bus(clock);
    Scheduler sched(clock, bus);
    int count = 0;
    sched.add_task({"planner", 0.02, 0.0, [&](Tick) { ++count; }});
    sched.suspend("planner", 100, 200);
    sched.run_until(1.0);
    CHECK(count == 50 - 5);
}

TEST_CASE("wall-clock mode executes the same trace")
{
    SimClock a;
    Bus bus_a(a);
    Scheduler lock(a, bus_a);
    SimClock b;
    Bus bus_b(b);
    Scheduler wall(b, bus_b);
    std::vector<Execution> ta, tb;
    lock.add_task({"x", 0.01, 0.0, [&](Tick t) { ta.push_back({"x", t}); }});
    lock.add_task({"y", 0.025, 0.0, [&](Tick t) { ta.push_back({"y", t}); }});
    wall.add_task({"x", 0.01, 0.0, [&](Tick t) { tb.push_back({"x", t}); }});
    wall.add_task({"y", 0.025, 0.0, [&](Tick t) { tb.push_back({"y", t}); }});
    lock.run_until(0.1);
    wall.run_wallclock(0.1, 20.0);
    CHECK(ta == tb);
}

TEST_CASE("publish then latest returns value and stamp")
{
    SimClock clock;
    Bus bus(clock);
    auto pub = bus.advertise<int>("/x", "writer");
    auto sub = bus.subscribe<int>("/x");
    CHECK_FALSE(sub.latest().has_value());
    clock.advance_to(42);
    pub.publish(7);
    auto got = sub.latest();
    REQUIRE(got.has_value());
    CHECK(got->value == 7);
    CHECK(got->stamp == 42);
}

TEST_CASE("two publishes in one tick: latest is the second, history keeps both")
{
    SimClock clock;
    Bus bus(clock);
    auto pub = bus.advertise<int>("/x", "writer", 4);
    auto sub = bus.subscribe<int>("/x");
    std::vector<int> log;
    bus.tap<int>("/x", [&](const std::string&, const Stamped<int>& r) { log.push_back(r.value); });
    clock.advance_to(5);
    pub.publish(1);
    pub.publish(2);
    CHECK(sub.latest()->value == 2);
    CHECK(log == std::vector<int>{1, 2});
    auto polled = sub.poll();
    REQUIRE(polled.size() == 2);
    CHECK(polled[0].seq < polled[1].seq);
    CHECK(polled[0].stamp == polled[1].stamp);
    CHECK(sub.poll().empty());
}

TEST_CASE("second writer and type mismatch are rejected")
{
    SimClock clock;
    Bus bus(clock);
    bus.advertise<int>("/x", "a");
    CHECK_NOTHROW(bus.advertise<int>("/x", "a"));
    CHECK_THROWS_AS(bus.advertise<int>("/x", "b"), ConfigError);
    CHECK_THROWS_AS(bus.subscribe<double>("/x"), ConfigError);
}

TEST_CASE("poll reports records that fell out of the history")
{
    SimClock clock;
    Bus bus(clock);
    auto pub = bus.advertise<int>("/x", "w", 2);
    auto sub = bus.subscribe<int>("/x");
    for (int i = 0; i < 5; ++i)
    {
        pub.publish(i);
    }
    auto got = sub.poll();
    REQUIRE(got.size() == 2);
    CHECK(got[0].value == 3);
    CHECK(sub.dropped() == 3);
}

TEST_CASE("named streams are reproducible and independent")
{
    RngFactory f(42);
    auto a1 = f.stream("gnss");
    auto a2 = f.stream("gnss");
    auto b = f.stream("imu");
    bool all_equal = true;
    bool any_equal_other = false;
    for (int i = 0; i < 100; ++i)
    {
        const auto x = a1.next_u64();
        all_equal = all_equal && (x == a2.next_u64());
        any_equal_other = any_equal_other || (x == b.next_u64());
    }
    CHECK(all_equal);
    CHECK_FALSE(any_equal_other);
    CHECK(RngFactory(43).stream("gnss").next_u64() != RngFactory(42).stream("gnss").next_u64());
}

TEST_CASE("gaussian stream has unit variance")
{
    auto s = RngFactory(7).stream("check");
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i)
    {
        const double g = s.gaussian();
        sum += g;
        sq += g * g;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.02);
}
