#include "racestack/track/boundaries.hpp"

#include "racestack/errors.hpp"
#include "text_util.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace racestack::track
{

namespace
{

constexpr double kDeg = std::numbers::pi / 180.0;

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x)
{
    if (x <= xs.front())
    {
        return ys.front();
    }
    if (x >= xs.back())
    {
        return ys.back();
    }
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs.begin());
    const double u = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return ys[i - 1] + u * (ys[i] - ys[i - 1]);
}

/// Tangent at each vertex by central differences (one-sided at open ends).
Polyline tangents(const Polyline& pts, bool closed)
{
    const std::size_t n = pts.size();
    Polyline t(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        Point2 d;
        if (closed)
        {
            d = pts[(i + 1) % n] - pts[(i + n - 1) % n];
        }
        else if (i == 0)
        {
            d = pts[1] - pts[0];
        }
        else if (i + 1 == n)
        {
            d = pts[n - 1] - pts[n - 2];
        }
        else
        {
            d = pts[i + 1] - pts[i - 1];
        }
        t[i] = d.normalized();
    }
    return t;
}

Polyline midpoints(const Polyline& a, const Polyline& b)
{
    Polyline m(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        m[i] = 0.5 * (a[i] + b[i]);
    }
    return m;
}

/// Centered moving average. Open sequences are padded with a least-squares line
/// through the `half + 1` samples at each end, so straight lines are preserved.
std::vector<double> moving_average(const std::vector<double>& v, int window, bool closed)
{
    const int n = static_cast<int>(v.size());
    const int half = window / 2;
    std::vector<double> padded;
    padded.reserve(static_cast<std::size_t>(n + 2 * half));
    auto line_fit = [&](int from, int count) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int k = 0; k < count; ++k)
        {
            const double x = from + k;
            const double y = v[static_cast<std::size_t>(from + k)];
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double denom = count * sxx - sx * sx;
        const double slope = denom != 0.0 ? (count * sxy - sx * sy) / denom : 0.0;
        const double icpt = (sy - slope * sx) / count;
        return std::pair{slope, icpt};
    };
    const int fit = std::min(n, half + 1);
    const auto [s0, c0] = line_fit(0, fit);
    const auto [s1, c1] = line_fit(n - fit, fit);
    for (int k = -half; k < n + half; ++k)
    {
        if (k >= 0 && k < n)
        {
            padded.push_back(v[static_cast<std::size_t>(k)]);
        }
        else if (closed)
        {
            padded.push_back(v[static_cast<std::size_t>(((k % n) + n) % n)]);
        }
        else if (k < 0)
        {
            padded.push_back(s0 * k + c0);
        }
        else
        {
            padded.push_back(s1 * k + c1);
        }
    }
    std::vector<double> out(v.size());
    double acc = 0.0;
    for (int k = 0; k < window; ++k)
    {
        acc += padded[static_cast<std::size_t>(k)];
    }
    for (int i = 0; i < n; ++i)
    {
        out[static_cast<std::size_t>(i)] = acc / window;
        if (i + 1 < n)
        {
            acc += padded[static_cast<std::size_t>(i + window)] - padded[static_cast<std::size_t>(i)];
        }
    }
    return out;
}

Polyline smooth_ring(const Polyline& pts, int window, bool closed)
{
    std::vector<double> xs(pts.size()), ys(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
    {
        xs[i] = pts[i].x();
        ys[i] = pts[i].y();
    }
    auto twice = [&](const std::vector<double>& v) {
        const auto s1 = moving_average(v, window, closed);
        const auto s2 = moving_average(s1, window, closed);
        std::vector<double> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i)
        {
            out[i] = 2.0 * s1[i] - s2[i];
        }
        return out;
    };
    const auto sx = twice(xs);
    const auto sy = twice(ys);
    Polyline out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
    {
        out[i] = {sx[i], sy[i]};
    }
    return out;
}

struct RawTrack
{
    Polyline left;
    Polyline right;
    std::vector<double> bank; // per raw row, may be empty
};

RawTrack read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw ParseError("cannot open '" + path.string() + "'", 0);
    }
    RawTrack raw;
    std::string line;
    long lineno = 0;
    bool header_seen = false;
    bool has_bank = false;
    while (std::getline(in, line))
    {
        ++lineno;
        const auto fields = detail::split_csv(line);
        if (fields.empty() || (fields.size() == 1 && fields[0].empty()) || line[0] == '#')
        {
            continue;
        }
        if (!header_seen)
        {
            header_seen = true;
            if (!detail::parse_double(fields[0]))
            {
                if (fields.size() < 4 || fields[0] != "x_left" || fields[1] != "y_left" || fields[2] != "x_right" ||
                    fields[3] != "y_right")
                {
                    throw ParseError("expected header x_left,y_left,x_right,y_right[,bank]", lineno);
                }
                has_bank = fields.size() >= 5 && fields[4] == "bank";
                continue;
            }
        }
        if (fields.size() < 4)
        {
            throw ParseError("expected at least 4 columns", lineno);
        }
        double v[5] = {0, 0, 0, 0, 0};
        const std::size_t cols = has_bank ? 5 : 4;
        if (fields.size() < cols)
        {
            throw ParseError("missing bank column", lineno);
        }
        for (std::size_t c = 0; c < cols; ++c)
        {
            const auto parsed = detail::parse_double(fields[c]);
            if (!parsed)
            {
                throw ParseError("not a number: '" + fields[c] + "'", lineno);
            }
            v[c] = *parsed;
        }
        raw.left.emplace_back(v[0], v[1]);
        raw.right.emplace_back(v[2], v[3]);
        if (has_bank)
        {
            raw.bank.push_back(v[4]);
        }
    }
    return raw;
}

struct Geodetic
{
    double lon, lat, alt;
};

std::vector<Geodetic> parse_coordinates(const std::string& text, long element)
{
    std::vector<Geodetic> out;
    std::istringstream ss(text);
    std::string tuple;
    while (ss >> tuple)
    {
        const auto parts = detail::split_csv(tuple);
        if (parts.size() < 2 || parts.size() > 3)
        {
            throw ParseError("bad coordinate tuple '" + tuple + "'", element);
        }
        Geodetic g{0, 0, 0};
        const auto lon = detail::parse_double(parts[0]);
        const auto lat = detail::parse_double(parts[1]);
        const auto alt = parts.size() == 3 ? detail::parse_double(parts[2]) : std::optional<double>(0.0);
        if (!lon || !lat || !alt || std::abs(*lat) > 90.0 || std::abs(*lon) > 180.0)
        {
            throw ParseError("bad coordinate tuple '" + tuple + "'", element);
        }
        g = {*lon, *lat, *alt};
        out.push_back(g);
    }
    return out;
}

void collect_linestrings(const boost::property_tree::ptree& node, const std::string& name,
                         std::vector<std::pair<std::string, std::string>>& out)
{
    for (const auto& [key, child] : node)
    {
        if (key == "LineString")
        {
            if (auto coords = child.get_optional<std::string>("coordinates"))
            {
                out.emplace_back(name, *coords);
            }
        }
        else if (key == "Placemark")
        {
            collect_linestrings(child, child.get<std::string>("name", ""), out);
        }
        else if (key != "<xmlattr>")
        {
            collect_linestrings(child, name, out);
        }
    }
}

RawTrack read_kml(const std::filesystem::path& path)
{
    boost::property_tree::ptree tree;
    try
    {
        boost::property_tree::read_xml(path.string(), tree);
    }
    catch (const boost::property_tree::xml_parser_error& e)
    {
        throw ParseError("KML: " + e.message(), static_cast<long>(e.line()));
    }
    std::vector<std::pair<std::string, std::string>> lines;
    collect_linestrings(tree, "", lines);
    if (lines.size() < 2)
    {
        throw ParseError("KML needs two LineString elements, found " + std::to_string(lines.size()),
                         static_cast<long>(lines.size()));
    }
    std::size_t li = 0, ri = 1;
    for (std::size_t i = 0; i < lines.size(); ++i)
    {
        const auto n = lower(lines[i].first);
        if (n.find("left") != std::string::npos)
        {
            li = i;
        }
        else if (n.find("right") != std::string::npos)
        {
            ri = i;
        }
    }
    if (li == ri)
    {
        ri = li == 0 ? 1 : 0;
    }
    const auto left = parse_coordinates(lines[li].second, static_cast<long>(li));
    const auto right = parse_coordinates(lines[ri].second, static_cast<long>(ri));
    if (left.empty() || right.empty())
    {
        throw ParseError("empty coordinate list", static_cast<long>(left.empty() ? li : ri));
    }
    const Geodetic origin = left.front();
    RawTrack raw;
    for (const auto& g : left)
    {
        raw.left.push_back(geodetic_to_enu(g.lat, g.lon, g.alt, origin.lat, origin.lon, origin.alt));
    }
    for (const auto& g : right)
    {
        raw.right.push_back(geodetic_to_enu(g.lat, g.lon, g.alt, origin.lat, origin.lon, origin.alt));
    }
    return raw;
}

} // namespace

double BankingMap::at(double s, double length, bool closed) const
{
    if (station.empty())
    {
        return 0.0;
    }
    if (station.size() == 1)
    {
        return bank.front();
    }
    if (!closed)
    {
        return interp(station, bank, s);
    }
    s = std::fmod(s, length);
    if (s < 0.0)
    {
        s += length;
    }
    if (s < station.front() || s >= station.back())
    {
        // Wrap segment from the last station to the first one on the next lap.
        const double s0 = station.back();
        const double s1 = station.front() + length;
        const double x = s < station.front() ? s + length : s;
        const double u = (x - s0) / (s1 - s0);
        return bank.back() + u * (bank.front() - bank.back());
    }
    return interp(station, bank, s);
}

Point2 geodetic_to_enu(double lat_deg, double lon_deg, double alt, double lat0_deg, double lon0_deg, double alt0)
{
    constexpr double a = 6378137.0;
    constexpr double f = 1.0 / 298.257223563;
    constexpr double e2 = f * (2.0 - f);
    auto ecef = [&](double lat, double lon, double h) {
        const double sl = std::sin(lat), cl = std::cos(lat);
        const double n = a / std::sqrt(1.0 - e2 * sl * sl);
        return Eigen::Vector3d((n + h) * cl * std::cos(lon), (n + h) * cl * std::sin(lon), (n * (1.0 - e2) + h) * sl);
    };
    const double lat0 = lat0_deg * kDeg, lon0 = lon0_deg * kDeg;
    const Eigen::Vector3d d = ecef(lat_deg * kDeg, lon_deg * kDeg, alt) - ecef(lat0, lon0, alt0);
    const double east = -std::sin(lon0) * d.x() + std::cos(lon0) * d.y();
    const double north =
        -std::sin(lat0) * std::cos(lon0) * d.x() - std::sin(lat0) * std::sin(lon0) * d.y() + std::cos(lat0) * d.z();
    return {east, north};
}

std::vector<double> signed_widths(const TrackBoundaries& b)
{
    const auto mid = midpoints(b.left, b.right);
    const auto t = tangents(mid, b.closed);
    std::vector<double> w(b.size());
    for (std::size_t i = 0; i < b.size(); ++i)
    {
        w[i] = (b.left[i] - b.right[i]).dot(Point2(-t[i].y(), t[i].x()));
    }
    return w;
}

void validate_boundaries(const TrackBoundaries& b, double vehicle_width)
{
    if (b.left.size() != b.right.size())
    {
        throw GeometryError("left and right edges differ in station count", 0);
    }
    if (b.size() < kMinBoundaryPoints)
    {
        throw GeometryError("fewer than 16 stations", static_cast<long>(b.size()));
    }
    const auto w = signed_widths(b);
    for (std::size_t i = 0; i < w.size(); ++i)
    {
        if (!(w[i] > vehicle_width))
        {
            throw GeometryError("boundaries cross or are narrower than the vehicle", static_cast<long>(i));
        }
    }
}

TrackBoundaries make_boundaries(const Polyline& left_in, const Polyline& right_in, const BankingMap& banking,
                                const BoundaryOptions& options)
{
    if (left_in.size() < 2 || right_in.size() < 2)
    {
        throw GeometryError("each edge needs at least two points", 0);
    }
    const bool left_closed = (left_in.front() - left_in.back()).norm() <= 1e-6;
    const bool right_closed = (right_in.front() - right_in.back()).norm() <= 1e-6;
    if (left_closed != right_closed)
    {
        throw GeometryError("one edge is a closed ring and the other is not", 0);
    }
    const bool closed = left_closed;
    Polyline left(left_in.begin(), left_in.end() - (closed ? 1 : 0));
    Polyline right(right_in.begin(), right_in.end() - (closed ? 1 : 0));

    if (left.size() != right.size())
    {
        // No row correspondence: pair the edges by fractional arc length first.
        const std::size_t m = std::max(left.size(), right.size());
        left = resample(left, closed, m);
        right = resample(right, closed, m);
    }

    // Uniform spacing along the raw centerline; both edges share the interpolation
    // parameter so paired rows stay paired through the turns.
    const Polyline mid_raw = midpoints(left, right);
    const auto s_raw = cumulative_length(mid_raw, closed);
    const double mean_len = s_raw.back();
    auto count = static_cast<std::size_t>(std::llround(mean_len / options.spacing)) + (closed ? 0 : 1);
    count = std::max(count, kMinBoundaryPoints);

    TrackBoundaries out;
    out.closed = closed;
    const double step = closed ? mean_len / static_cast<double>(count) : mean_len / static_cast<double>(count - 1);
    const std::size_t nseg = closed ? mid_raw.size() : mid_raw.size() - 1;
    std::size_t seg = 0;
    for (std::size_t i = 0; i < count; ++i)
    {
        const double target = std::min(step * static_cast<double>(i), mean_len);
        while (seg + 1 < nseg && s_raw[seg + 1] < target)
        {
            ++seg;
        }
        const std::size_t nxt = (seg + 1) % left.size();
        const double len = s_raw[seg + 1] - s_raw[seg];
        const double u = len > 0.0 ? std::clamp((target - s_raw[seg]) / len, 0.0, 1.0) : 0.0;
        out.left.push_back(left[seg] + u * (left[nxt] - left[seg]));
        out.right.push_back(right[seg] + u * (right[nxt] - right[seg]));
    }

    if (!banking.empty())
    {
        // Banking is keyed on the raw centerline; map through the normalized station.
        const double raw_total = banking.station.back();
        const auto mid = midpoints(out.left, out.right);
        const auto st = cumulative_length(mid, closed);
        const double total = st.back();
        for (std::size_t i = 0; i < out.size(); ++i)
        {
            out.banking.station.push_back(st[i]);
            const double frac = total > 0.0 ? st[i] / total : 0.0;
            out.banking.bank.push_back(banking.at(frac * raw_total, raw_total, false));
        }
    }
    validate_boundaries(out, options.vehicle_width);
    return out;
}

TrackBoundaries load_boundaries(const std::filesystem::path& path, BoundaryFormat format,
                                const BoundaryOptions& options)
{
    RawTrack raw = format == BoundaryFormat::Csv ? read_csv(path) : read_kml(path);
    if (raw.left.size() < 2)
    {
        throw ParseError("track file has fewer than two stations", 0);
    }
    BankingMap banking;
    if (!raw.bank.empty())
    {
        const auto mid = midpoints(raw.left, raw.right);
        const auto st = cumulative_length(mid, false);
        banking.station.assign(st.begin(), st.begin() + static_cast<long>(mid.size()));
        banking.bank = raw.bank;
    }
    return make_boundaries(raw.left, raw.right, banking, options);
}

Centerline make_centerline(const TrackBoundaries& b)
{
    Centerline c;
    c.closed = b.closed;
    c.points = midpoints(b.left, b.right);
    const auto t = tangents(c.points, b.closed);
    c.normals.resize(c.points.size());
    c.half_left.resize(c.points.size());
    c.half_right.resize(c.points.size());
    c.bank.resize(c.points.size());
    c.station = cumulative_length(c.points, b.closed);
    for (std::size_t i = 0; i < c.points.size(); ++i)
    {
        c.normals[i] = Point2(-t[i].y(), t[i].x());
        c.half_left[i] = (b.left[i] - c.points[i]).dot(c.normals[i]);
        c.half_right[i] = (c.points[i] - b.right[i]).dot(c.normals[i]);
    }
    for (std::size_t i = 0; i < c.points.size(); ++i)
    {
        c.bank[i] = b.banking.empty() ? 0.0 : b.banking.at(c.station[i], c.length(), b.closed);
    }
    return c;
}

TrackBoundaries smooth_boundaries(const TrackBoundaries& b, int window)
{
    if (window < 1 || window % 2 == 0)
    {
        throw ConfigError("smoothing window must be odd and positive");
    }
    if (window == 1)
    {
        return b;
    }
    TrackBoundaries out = b;
    out.left = smooth_ring(b.left, window, b.closed);
    out.right = smooth_ring(b.right, window, b.closed);
    const auto before = signed_widths(b);
    const auto after = signed_widths(out);
    for (std::size_t i = 0; i < before.size(); ++i)
    {
        if (std::abs(after[i] - before[i]) > 0.05 * std::abs(before[i]))
        {
            throw GeometryError("smoothing changed the track width by more than 5%", static_cast<long>(i));
        }
    }
    return out;
}

} // namespace racestack::track
