#include "racestack/track/raceline.hpp"

#include "racestack/errors.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <string>

namespace racestack::track
{

namespace
{

struct KnotDerivatives
{
    std::vector<double> d1;
    std::vector<double> d2;
};

/// First and second derivatives at the knots of a cubic spline through (t_i, y_i).
/// `h[i]` is the length of segment i; closed splines have n segments.
KnotDerivatives cubic_knot_derivatives(const std::vector<double>& y, const std::vector<double>& h, bool closed)
{
    const std::size_t n = y.size();
    const auto N = static_cast<Eigen::Index>(n);
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
    auto slope = [&](std::size_t i) { return (y[(i + 1) % n] - y[i]) / h[i]; };
    for (std::size_t i = 0; i < n; ++i)
    {
        const auto I = static_cast<int>(i);
        if (!closed && (i == 0 || i + 1 == n))
        {
            trip.emplace_back(I, I, 1.0);
            continue;
        }
        const std::size_t prev = (i + n - 1) % n;
        const std::size_t next = (i + 1) % n;
        // Pinned natural ends (M = 0) drop out of the coupling, keeping the system symmetric.
        if (closed || prev != 0)
        {
            trip.emplace_back(I, static_cast<int>(prev), h[prev]);
        }
        trip.emplace_back(I, I, 2.0 * (h[prev] + h[i]));
        if (closed || next + 1 != n)
        {
            trip.emplace_back(I, static_cast<int>(next), h[i]);
        }
        rhs(I) = 6.0 * (slope(i) - slope(prev));
    }
    Eigen::SparseMatrix<double> A(N, N);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    const Eigen::VectorXd M = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !M.allFinite())
    {
        throw GeometryError("spline knot system is singular", 0);
    }
    KnotDerivatives k;
    k.d1.resize(n);
    k.d2.assign(M.data(), M.data() + N);
    for (std::size_t i = 0; i < n; ++i)
    {
        if (!closed && i + 1 == n)
        {
            const std::size_t p = n - 2;
            k.d1[i] = slope(p) + h[p] * (M(static_cast<Eigen::Index>(p)) + 2.0 * M(static_cast<Eigen::Index>(i))) / 6.0;
        }
        else
        {
            const std::size_t q = (i + 1) % n;
            k.d1[i] = slope(i) - h[i] * (2.0 * M(static_cast<Eigen::Index>(i)) + M(static_cast<Eigen::Index>(q))) / 6.0;
        }
    }
    return k;
}

std::array<double, 6> quintic_hermite(double p0, double v0, double a0, double p1, double v1, double a1, double h)
{
    const double A = p1 - p0 - v0 * h - 0.5 * a0 * h * h;
    const double B = v1 - v0 - a0 * h;
    const double C = a1 - a0;
    const double h2 = h * h;
    return {p0,
            v0,
            0.5 * a0,
            (10.0 * A - 4.0 * B * h + 0.5 * C * h2) / (h2 * h),
            (-15.0 * A + 7.0 * B * h - C * h2) / (h2 * h2),
            (6.0 * A - 3.0 * B * h + 0.5 * C * h2) / (h2 * h2 * h)};
}

double poly(const std::array<double, 6>& c, double u)
{
    return c[0] + u * (c[1] + u * (c[2] + u * (c[3] + u * (c[4] + u * c[5]))));
}

double dpoly(const std::array<double, 6>& c, double u)
{
    return c[1] + u * (2.0 * c[2] + u * (3.0 * c[3] + u * (4.0 * c[4] + u * 5.0 * c[5])));
}

double ddpoly(const std::array<double, 6>& c, double u)
{
    return 2.0 * c[2] + u * (6.0 * c[3] + u * (12.0 * c[4] + u * 20.0 * c[5]));
}

// 5-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 5> kGlNodes = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                            0.9061798459386640};
constexpr std::array<double, 5> kGlWeights = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                              0.2369268850561891, 0.2369268850561891};

double segment_length(const QuinticSegment& seg, double u0, double u1)
{
    // Two panels keep the quadrature error far below the reparameterization tolerance.
    double total = 0.0;
    const double mid = 0.5 * (u0 + u1);
    for (const auto& [a, b] : {std::pair{u0, mid}, std::pair{mid, u1}})
    {
        const double c = 0.5 * (a + b);
        const double r = 0.5 * (b - a);
        for (std::size_t k = 0; k < kGlNodes.size(); ++k)
        {
            const double u = c + r * kGlNodes[k];
            total += kGlWeights[k] * r * std::hypot(dpoly(seg.cx, u), dpoly(seg.cy, u));
        }
    }
    return total;
}

std::vector<QuinticSegment> build_segments(const RacelineSamples& s, const std::vector<double>& h)
{
    const std::size_t n = s.size();
    const auto kx = cubic_knot_derivatives(s.x, h, s.closed);
    const auto ky = cubic_knot_derivatives(s.y, h, s.closed);
    const std::size_t nseg = s.closed ? n : n - 1;
    std::vector<QuinticSegment> segs(nseg);
    double s0 = 0.0;
    for (std::size_t i = 0; i < nseg; ++i)
    {
        const std::size_t j = (i + 1) % n;
        segs[i].s0 = s0;
        segs[i].h = h[i];
        segs[i].cx = quintic_hermite(s.x[i], kx.d1[i], kx.d2[i], s.x[j], kx.d1[j], kx.d2[j], h[i]);
        segs[i].cy = quintic_hermite(s.y[i], ky.d1[i], ky.d2[i], s.y[j], ky.d1[j], ky.d2[j], h[i]);
        s0 += h[i];
    }
    return segs;
}

} // namespace

void validate_samples(const RacelineSamples& s)
{
    if (s.y.size() != s.x.size() || s.v_ref.size() != s.x.size() || (!s.bank.empty() && s.bank.size() != s.x.size()))
    {
        throw FormatError("raceline columns have different lengths");
    }
    for (std::size_t i = 0; i < s.size(); ++i)
    {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || !std::isfinite(s.v_ref[i]))
        {
            throw FormatError("non-finite raceline value at sample " + std::to_string(i));
        }
        if (!(s.v_ref[i] > 0.0))
        {
            throw FormatError("v_ref must be positive (sample " + std::to_string(i) + ")");
        }
    }
}

Raceline fit_quintic_spline(const RacelineSamples& input)
{
    validate_samples(input);
    RacelineSamples s = input;
    if (s.closed && s.size() > 1 && std::hypot(s.x.front() - s.x.back(), s.y.front() - s.y.back()) <= 1e-9)
    {
        s.x.pop_back();
        s.y.pop_back();
        s.v_ref.pop_back();
        if (!s.bank.empty())
        {
            s.bank.pop_back();
        }
    }
    if (s.size() < kMinSplineSamples)
    {
        throw FormatError("spline needs at least " + std::to_string(kMinSplineSamples) + " samples, got " +
                          std::to_string(s.size()));
    }
    const std::size_t n = s.size();
    const std::size_t nseg = s.closed ? n : n - 1;
    std::vector<double> h(nseg);
    for (std::size_t i = 0; i < nseg; ++i)
    {
        const std::size_t j = (i + 1) % n;
        h[i] = std::hypot(s.x[j] - s.x[i], s.y[j] - s.y[i]);
        if (!(h[i] > 1e-9))
        {
            throw GeometryError("duplicate spline station", static_cast<long>(j));
        }
    }
    auto segs = build_segments(s, h);
    for (std::size_t i = 0; i < nseg; ++i)
    {
        h[i] = segment_length(segs[i], 0.0, segs[i].h);
    }
    segs = build_segments(s, h);

    Raceline r;
    r.m_samples = std::move(s);
    r.m_segments = std::move(segs);
    r.m_stations.resize(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        r.m_stations[i] = i < nseg ? r.m_segments[i].s0 : r.m_segments.back().s0 + r.m_segments.back().h;
    }
    r.m_length = r.m_segments.back().s0 + r.m_segments.back().h;
    return r;
}

double Raceline::normalize(double s) const
{
    if (closed())
    {
        s = std::fmod(s, m_length);
        if (s < 0.0)
        {
            s += m_length;
        }
        return s;
    }
    return std::clamp(s, 0.0, m_length);
}

std::size_t Raceline::segment_index(double s) const
{
    const auto it = std::upper_bound(m_segments.begin(), m_segments.end(), s,
                                     [](double v, const QuinticSegment& seg) { return v < seg.s0; });
    if (it == m_segments.begin())
    {
        return 0;
    }
    return static_cast<std::size_t>(it - m_segments.begin()) - 1;
}

Point2 Raceline::position(double s) const
{
    s = normalize(s);
    const auto& seg = m_segments[segment_index(s)];
    const double u = s - seg.s0;
    return {poly(seg.cx, u), poly(seg.cy, u)};
}

Point2 Raceline::first_derivative(double s) const
{
    s = normalize(s);
    const auto& seg = m_segments[segment_index(s)];
    const double u = s - seg.s0;
    return {dpoly(seg.cx, u), dpoly(seg.cy, u)};
}

Point2 Raceline::second_derivative(double s) const
{
    s = normalize(s);
    const auto& seg = m_segments[segment_index(s)];
    const double u = s - seg.s0;
    return {ddpoly(seg.cx, u), ddpoly(seg.cy, u)};
}

double Raceline::sample_interp(const std::vector<double>& values, double s) const
{
    if (values.empty())
    {
        return 0.0;
    }
    s = normalize(s);
    const std::size_t i = segment_index(s);
    const std::size_t j = (i + 1) % values.size();
    const auto& seg = m_segments[i];
    const double u = std::clamp((s - seg.s0) / seg.h, 0.0, 1.0);
    return values[i] + u * (values[j] - values[i]);
}

double Raceline::v_ref_at(double s) const { return sample_interp(m_samples.v_ref, s); }

double Raceline::bank_at(double s) const { return sample_interp(m_samples.bank, s); }

RacelinePoint Raceline::eval(double s) const
{
    s = normalize(s);
    const auto& seg = m_segments[segment_index(s)];
    const double u = s - seg.s0;
    const double dx = dpoly(seg.cx, u), dy = dpoly(seg.cy, u);
    const double ddx = ddpoly(seg.cx, u), ddy = ddpoly(seg.cy, u);
    RacelinePoint p;
    p.x = poly(seg.cx, u);
    p.y = poly(seg.cy, u);
    p.heading = std::atan2(dy, dx);
    const double speed = std::hypot(dx, dy);
    p.curvature = speed > 0.0 ? (dx * ddy - dy * ddx) / (speed * speed * speed) : 0.0;
    p.v_ref = v_ref_at(s);
    p.bank = bank_at(s);
    return p;
}

double spline_arc_length(const Raceline& r, double s0, double s1)
{
    double total = 0.0;
    for (const auto& seg : r.segments())
    {
        const double a = std::max(s0, seg.s0);
        const double b = std::min(s1, seg.s0 + seg.h);
        if (b > a)
        {
            total += segment_length(seg, a - seg.s0, b - seg.s0);
        }
    }
    return total;
}

RacelineSamples generate_raceline(const TrackBoundaries& b, const RacelineOptions& options)
{
    const TrackBoundaries smooth = options.smoothing_window > 1 ? smooth_boundaries(b, options.smoothing_window) : b;
    const auto opt = optimize_min_curvature(smooth, options.optimizer);
    const auto v = compute_velocity_profile(opt.path, smooth.closed, options.velocity);
    const Centerline c = make_centerline(smooth);
    RacelineSamples out;
    out.closed = smooth.closed;
    for (std::size_t i = 0; i < opt.path.size(); ++i)
    {
        out.x.push_back(opt.path[i].x());
        out.y.push_back(opt.path[i].y());
        out.v_ref.push_back(v[i]);
    }
    if (!smooth.banking.empty())
    {
        out.bank = c.bank;
    }
    return out;
}

} // namespace racestack::track
