#pragma once

#include "racestack/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace racestack::telemetry
{

/// Little-endian packed writer.
class ByteWriter
{
public:
    template <class T>
    void put(T value)
    {
        static_assert(std::is_arithmetic_v<T>);
        if constexpr (std::is_same_v<T, bool>)
        {
            m_buf.push_back(value ? 1 : 0);
        }
        else
        {
            unsigned char raw[sizeof(T)];
            std::memcpy(raw, &value, sizeof(T));
            if constexpr (std::endian::native == std::endian::big)
            {
                for (std::size_t i = 0; i < sizeof(T); ++i)
                    m_buf.push_back(raw[sizeof(T) - 1 - i]);
            }
            else
            {
                m_buf.insert(m_buf.end(), raw, raw + sizeof(T));
            }
        }
    }

    void put_string(const std::string& s)
    {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        m_buf.insert(m_buf.end(), s.begin(), s.end());
    }

    void put_bytes(std::span<const std::uint8_t> b) { m_buf.insert(m_buf.end(), b.begin(), b.end()); }

    std::vector<std::uint8_t>& buffer() noexcept { return m_buf; }
    std::vector<std::uint8_t> take() noexcept { return std::move(m_buf); }
    std::size_t size() const noexcept { return m_buf.size(); }

private:
    std::vector<std::uint8_t> m_buf;
};

/// Little-endian reader; throws FormatError on overrun.
class ByteReader
{
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : m_data(data) {}

    template <class T>
    T get()
    {
        static_assert(std::is_arithmetic_v<T>);
        need(sizeof(T));
        if constexpr (std::is_same_v<T, bool>)
        {
            return m_data[m_pos++] != 0;
        }
        else
        {
            unsigned char raw[sizeof(T)];
            for (std::size_t i = 0; i < sizeof(T); ++i)
            {
                const std::size_t src = std::endian::native == std::endian::big ? sizeof(T) - 1 - i : i;
                raw[i] = m_data[m_pos + src];
            }
            m_pos += sizeof(T);
            T value;
            std::memcpy(&value, raw, sizeof(T));
            return value;
        }
    }

    std::string get_string()
    {
        const auto n = get<std::uint32_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(m_data.data() + m_pos), n);
        m_pos += n;
        return s;
    }

    std::span<const std::uint8_t> get_bytes(std::size_t n)
    {
        need(n);
        auto out = m_data.subspan(m_pos, n);
        m_pos += n;
        return out;
    }

    std::size_t remaining() const noexcept { return m_data.size() - m_pos; }
    std::size_t position() const noexcept { return m_pos; }

private:
    void need(std::size_t n) const
    {
        if (m_data.size() - m_pos < n)
            throw FormatError("truncated buffer: need " + std::to_string(n) + " bytes at offset " +
                              std::to_string(m_pos));
    }

    std::span<const std::uint8_t> m_data;
    std::size_t m_pos = 0;
};

std::uint32_t crc32(std::span<const std::uint8_t> data);

} // namespace racestack::telemetry
