#pragma once

#include <stdexcept>
#include <string>

namespace racestack
{

/// Invalid configuration: bad scenario keys, duplicate writers, non-integral task periods.
class ConfigError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the line (or element index) where parsing stopped.
class ParseError : public std::runtime_error
{
public:
    ParseError(const std::string& what, long line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), m_line(line)
    {
    }
    long line() const noexcept { return m_line; }

private:
    long m_line;
};

/// Track geometry violates an invariant (crossing boundaries, width collapse).
class GeometryError : public std::runtime_error
{
public:
    GeometryError(const std::string& what, long station)
        : std::runtime_error(what + " (station " + std::to_string(station) + ")"), m_station(station)
    {
    }
    long station() const noexcept { return m_station; }

private:
    long m_station;
};

class ConstraintError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class OptimizationError : public std::runtime_error
{
public:
    OptimizationError(const std::string& what, double residual)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"), m_residual(residual)
    {
    }
    double residual() const noexcept { return m_residual; }

private:
    double m_residual;
};

class FormatError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Socket or file I/O failure.
class IoError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

} // namespace racestack
