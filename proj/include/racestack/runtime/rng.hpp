#pragma once

#include <cstdint>
#include <string_view>

namespace racestack::runtime
{

/// Counter-based generator: the i-th draw is a pure function of (key, i), so
/// results do not depend on the standard library's distribution code.
class RngStream
{
public:
    RngStream() = default;
    explicit RngStream(std::uint64_t key) : m_key(key) {}

    std::uint64_t next_u64() noexcept;
    /// Uniform in (0, 1).
    double uniform() noexcept;
    /// Standard normal via Box-Muller; consumes two counters.
    double gaussian() noexcept;
    double gaussian(double sigma) noexcept { return sigma * gaussian(); }

    std::uint64_t counter() const noexcept { return m_counter; }

private:
    std::uint64_t m_key = 0;
    std::uint64_t m_counter = 0;
};

/// Derives one independent stream per named noise source from a single seed.
class RngFactory
{
public:
    explicit RngFactory(std::uint64_t seed) : m_seed(seed) {}

    RngStream stream(std::string_view name) const noexcept;
    std::uint64_t seed() const noexcept { return m_seed; }

private:
    std::uint64_t m_seed;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

} // namespace racestack::runtime
