#include "racestack/track/oval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace racestack::track
{

namespace
{

struct Piece
{
    double length;
    bool turn;
};

std::vector<Piece> pieces(const OvalParams& p)
{
    const double arc = 0.5 * std::numbers::pi * p.turn_radius;
    return {{0.5 * p.straight, false}, {arc, true}, {p.chute, false}, {arc, true}, {p.straight, false},
            {arc, true},               {p.chute, false}, {arc, true}, {0.5 * p.straight, false}};
}

} // namespace

double oval_length(const OvalParams& p) { return 2.0 * p.straight + 2.0 * p.chute + 2.0 * std::numbers::pi * p.turn_radius; }

TrackBoundaries make_oval(const OvalParams& p)
{
    const auto parts = pieces(p);
    const double total = oval_length(p);
    const double bank = -p.bank_deg * std::numbers::pi / 180.0; // left turns raise the right edge
    std::vector<std::pair<double, double>> turn_spans;
    {
        double s = 0.0;
        for (const auto& piece : parts)
        {
            if (piece.turn)
            {
                turn_spans.emplace_back(s, s + piece.length);
            }
            s += piece.length;
        }
    }
    auto bank_at = [&](double s) {
        double best = 0.0;
        for (const auto& [a, b] : turn_spans)
        {
            double w = 0.0;
            if (s >= a && s <= b)
            {
                w = 1.0;
            }
            else if (s < a)
            {
                w = std::clamp(1.0 - (a - s) / p.bank_ramp, 0.0, 1.0);
            }
            else
            {
                w = std::clamp(1.0 - (s - b) / p.bank_ramp, 0.0, 1.0);
            }
            best = std::max(best, w);
        }
        return best * bank;
    };

    Polyline left, right;
    BankingMap banking;
    Point2 pos(0.0, 0.0);
    double heading = 0.0;
    double s = 0.0;
    const double step = 1.0;
    auto emit = [&](const Point2& c, double h, double station) {
        const Point2 n(-std::sin(h), std::cos(h));
        left.push_back(c + 0.5 * p.width * n);
        right.push_back(c - 0.5 * p.width * n);
        banking.station.push_back(station);
        banking.bank.push_back(bank_at(station));
    };
    emit(pos, heading, 0.0);
    for (const auto& piece : parts)
    {
        const int steps = std::max(1, static_cast<int>(std::ceil(piece.length / step)));
        const double ds = piece.length / steps;
        const Point2 start = pos;
        const double h0 = heading;
        for (int k = 1; k <= steps; ++k)
        {
            const double u = k * ds;
            Point2 c;
            double h;
            if (piece.turn)
            {
                h = h0 + u / p.turn_radius;
                c = start + p.turn_radius * Point2(std::sin(h) - std::sin(h0), -std::cos(h) + std::cos(h0));
            }
            else
            {
                h = h0;
                c = start + u * Point2(std::cos(h0), std::sin(h0));
            }
            emit(c, h, s + u);
        }
        s += piece.length;
        pos = start;
        if (piece.turn)
        {
            heading = h0 + piece.length / p.turn_radius;
            pos = start + p.turn_radius * Point2(std::sin(heading) - std::sin(h0), -std::cos(heading) + std::cos(h0));
        }
        else
        {
            pos = start + piece.length * Point2(std::cos(h0), std::sin(h0));
        }
    }
    // Close the rings exactly.
    left.back() = left.front();
    right.back() = right.front();
    banking.station.back() = total;
    return make_boundaries(left, right, banking, p.boundary);
}

} // namespace racestack::track
