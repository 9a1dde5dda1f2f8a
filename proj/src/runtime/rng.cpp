#include "racestack/runtime/rng.hpp"

#include <cmath>
#include <numbers>

namespace racestack::runtime
{

std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t RngStream::next_u64() noexcept
{
    const std::uint64_t c = m_counter++;
    return splitmix64(m_key ^ splitmix64(c));
}

double RngStream::uniform() noexcept
{
    // 53 random mantissa bits, shifted off zero.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::gaussian() noexcept
{
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream RngFactory::stream(std::string_view name) const noexcept
{
    // FNV-1a over the stream name, mixed with the seed.
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const char ch : name)
    {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001B3ULL;
    }
    return RngStream(splitmix64(m_seed ^ splitmix64(h)));
}

} // namespace racestack::runtime
