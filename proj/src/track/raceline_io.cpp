#include "racestack/errors.hpp"
#include "racestack/track/raceline.hpp"
#include "text_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace racestack::track
{

namespace
{

std::filesystem::path sidecar_path(const std::filesystem::path& csv)
{
    auto p = csv;
    p += ".json";
    return p;
}

std::string format_g17(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void save_raceline(const std::filesystem::path& path, const RacelineSamples& samples)
{
    validate_samples(samples);
    std::ofstream out(path);
    if (!out)
    {
        throw FormatError("cannot write '" + path.string() + "'");
    }
    out << "x,y,v_ref\n";
    for (std::size_t i = 0; i < samples.size(); ++i)
    {
        out << format_g17(samples.x[i]) << ',' << format_g17(samples.y[i]) << ',' << format_g17(samples.v_ref[i])
            << '\n';
    }
    nlohmann::json side;
    side["closed"] = samples.closed;
    side["bank"] = samples.bank;
    std::ofstream js(sidecar_path(path));
    js << side.dump(1) << '\n';
}

RacelineSamples load_raceline(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw FormatError("cannot open '" + path.string() + "'");
    }
    std::string line;
    if (!std::getline(in, line))
    {
        throw FormatError("empty raceline file");
    }
    const auto header = detail::split_csv(line);
    int cx = -1, cy = -1, cv = -1;
    for (std::size_t i = 0; i < header.size(); ++i)
    {
        if (header[i] == "x")
            cx = static_cast<int>(i);
        else if (header[i] == "y")
            cy = static_cast<int>(i);
        else if (header[i] == "v_ref")
            cv = static_cast<int>(i);
    }
    if (cx < 0 || cy < 0 || cv < 0)
    {
        throw FormatError("raceline header must contain x, y and v_ref: '" + line + "'");
    }
    RacelineSamples s;
    long lineno = 1;
    const auto need = static_cast<std::size_t>(std::max({cx, cy, cv})) + 1;
    while (std::getline(in, line))
    {
        ++lineno;
        if (detail::trim(line).empty())
        {
            continue;
        }
        const auto f = detail::split_csv(line);
        if (f.size() < need)
        {
            throw FormatError("missing column on line " + std::to_string(lineno));
        }
        const auto x = detail::parse_double(f[static_cast<std::size_t>(cx)]);
        const auto y = detail::parse_double(f[static_cast<std::size_t>(cy)]);
        const auto v = detail::parse_double(f[static_cast<std::size_t>(cv)]);
        if (!x || !y || !v)
        {
            throw FormatError("not a number on line " + std::to_string(lineno));
        }
        s.x.push_back(*x);
        s.y.push_back(*y);
        s.v_ref.push_back(*v);
    }
    if (s.size() == 0)
    {
        throw FormatError("raceline '" + path.string() + "' has no samples");
    }
    validate_samples(s);

    const auto side = sidecar_path(path);
    if (std::filesystem::exists(side))
    {
        std::ifstream js(side);
        const auto j = nlohmann::json::parse(js, nullptr, false);
        if (j.is_discarded() || !j.is_object())
        {
            throw FormatError("malformed sidecar '" + side.string() + "'");
        }
        s.closed = j.value("closed", false);
        s.bank = j.value("bank", std::vector<double>{});
        if (!s.bank.empty() && s.bank.size() != s.size())
        {
            throw FormatError("sidecar bank has " + std::to_string(s.bank.size()) + " entries for " +
                              std::to_string(s.size()) + " samples");
        }
    }
    else if (s.size() >= 3)
    {
        std::vector<double> gaps;
        for (std::size_t i = 0; i + 1 < s.size(); ++i)
        {
            gaps.push_back(std::hypot(s.x[i + 1] - s.x[i], s.y[i + 1] - s.y[i]));
        }
        std::nth_element(gaps.begin(), gaps.begin() + static_cast<long>(gaps.size() / 2), gaps.end());
        const double median = gaps[gaps.size() / 2];
        const double end_gap = std::hypot(s.x.front() - s.x.back(), s.y.front() - s.y.back());
        s.closed = end_gap < 3.0 * median;
    }
    return s;
}

} // namespace racestack::track
