#pragma once

#include <cstdint>

namespace racestack::runtime
{

using Tick = std::int64_t;

/// Virtual time as an integer count of base ticks. Never goes backwards.
class SimClock
{
public:
    explicit SimClock(double base_tick = 0.001);

    Tick now() const noexcept { return m_now; }
    double seconds() const noexcept { return static_cast<double>(m_now) * m_base_tick; }
    double base_tick() const noexcept { return m_base_tick; }

    double to_seconds(Tick t) const noexcept { return static_cast<double>(t) * m_base_tick; }

    /// Converts a duration to ticks; throws ConfigError unless it is an integral
    /// multiple of the base tick (within 1e-9 relative).
    Tick ticks_exact(double seconds) const;

    /// Nearest tick, for timestamps that need not be aligned (fault windows etc.).
    Tick ticks_round(double seconds) const noexcept;

    void advance_to(Tick t);

private:
    double m_base_tick;
    Tick m_now = 0;
};

} // namespace racestack::runtime
