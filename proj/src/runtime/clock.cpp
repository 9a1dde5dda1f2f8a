#include "racestack/runtime/clock.hpp"

#include "racestack/errors.hpp"

#include <cmath>
#include <string>

namespace racestack::runtime
{

SimClock::SimClock(double base_tick) : m_base_tick(base_tick)
{
    if (!(base_tick > 0.0) || !std::isfinite(base_tick))
    {
        throw ConfigError("base tick must be positive");
    }
}

Tick SimClock::ticks_exact(double seconds) const
{
    const double ratio = seconds / m_base_tick;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, std::abs(ratio)))
    {
        throw ConfigError("duration " + std::to_string(seconds) + " s is not a multiple of the base tick");
    }
    return static_cast<Tick>(rounded);
}

Tick SimClock::ticks_round(double seconds) const noexcept
{
    return static_cast<Tick>(std::llround(seconds / m_base_tick));
}

void SimClock::advance_to(Tick t)
{
    if (t < m_now)
    {
        throw ConfigError("clock cannot move backwards");
    }
    m_now = t;
}

} // namespace racestack::runtime
