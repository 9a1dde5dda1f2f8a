#include "racestack/track/min_curvature.hpp"

#include "racestack/errors.hpp"
#include "racestack/track/box_qp.hpp"

#include <Eigen/SparseCore>

#include <array>
#include <cmath>
#include <string>

namespace racestack::track
{

namespace
{

struct Problem
{
    const Centerline& c;
    std::size_t n;
    bool closed;

    Point2 point(std::size_t i, double a) const { return c.points[i] + a * c.normals[i]; }

    Polyline path(const Eigen::VectorXd& alpha) const
    {
        Polyline p(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            p[i] = point(i, alpha(static_cast<Eigen::Index>(i)));
        }
        return p;
    }

    /// Residual rows: one per vertex with a defined curvature.
    std::size_t first_row() const { return closed ? 0 : 1; }
    std::size_t last_row() const { return closed ? n : n - 1; }

    std::array<std::size_t, 3> stencil(std::size_t i) const
    {
        return {(i + n - 1) % n, i, (i + 1) % n};
    }

    Eigen::VectorXd residual(const Eigen::VectorXd& alpha) const
    {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        for (std::size_t i = first_row(); i < last_row(); ++i)
        {
            const auto s = stencil(i);
            r(static_cast<Eigen::Index>(i)) =
                menger_curvature(point(s[0], alpha(static_cast<Eigen::Index>(s[0]))),
                                 point(s[1], alpha(static_cast<Eigen::Index>(s[1]))),
                                 point(s[2], alpha(static_cast<Eigen::Index>(s[2]))));
        }
        return r;
    }

    Eigen::SparseMatrix<double> jacobian(const Eigen::VectorXd& alpha) const
    {
        constexpr double h = 1e-6;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(3 * n);
        for (std::size_t i = first_row(); i < last_row(); ++i)
        {
            const auto s = stencil(i);
            std::array<Point2, 3> p;
            for (int k = 0; k < 3; ++k)
            {
                p[k] = point(s[k], alpha(static_cast<Eigen::Index>(s[k])));
            }
            for (int k = 0; k < 3; ++k)
            {
                auto plus = p;
                auto minus = p;
                plus[k] += h * c.normals[s[k]];
                minus[k] -= h * c.normals[s[k]];
                const double d = (menger_curvature(plus[0], plus[1], plus[2]) -
                                  menger_curvature(minus[0], minus[1], minus[2])) /
                                 (2.0 * h);
                trip.emplace_back(static_cast<int>(i), static_cast<int>(s[k]), d);
            }
        }
        Eigen::SparseMatrix<double> J(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        J.setFromTriplets(trip.begin(), trip.end());
        return J;
    }
};

} // namespace

MinCurvatureResult optimize_min_curvature(const TrackBoundaries& b, const MinCurvatureOptions& options)
{
    const Centerline c = make_centerline(b);
    const std::size_t n = c.points.size();
    const auto N = static_cast<Eigen::Index>(n);
    Eigen::VectorXd lo(N), hi(N);
    for (std::size_t i = 0; i < n; ++i)
    {
        lo(static_cast<Eigen::Index>(i)) = -(c.half_right[i] - options.margin);
        hi(static_cast<Eigen::Index>(i)) = c.half_left[i] - options.margin;
        if (lo(static_cast<Eigen::Index>(i)) > hi(static_cast<Eigen::Index>(i)))
        {
            throw ConstraintError("margin " + std::to_string(options.margin) + " m leaves no room at station " +
                                  std::to_string(i));
        }
    }

    const Problem prob{c, n, b.closed};
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(N).cwiseMax(lo).cwiseMin(hi);
    Eigen::VectorXd r = prob.residual(alpha);
    double f = r.squaredNorm();

    MinCurvatureResult out;
    out.centerline_objective = curvature_objective(c.points, b.closed);

    // Levenberg damping relative to the curvature scale of the problem.
    double mu = 1e-6;
    double worst_kkt = 0.0;
    for (int iter = 0; iter < options.max_iterations; ++iter)
    {
        out.iterations = iter + 1;
        const Eigen::SparseMatrix<double> J = prob.jacobian(alpha);
        const Eigen::SparseMatrix<double> JtJ = Eigen::SparseMatrix<double>(J.transpose()) * J;
        const double scale = std::max(JtJ.diagonal().maxCoeff(), 1e-300);
        Eigen::SparseMatrix<double> I(N, N);
        I.setIdentity();
        const Eigen::VectorXd g = 2.0 * (J.transpose() * r);

        bool accepted = false;
        double f_new = f;
        Eigen::VectorXd alpha_new = alpha;
        for (int tries = 0; tries < 12 && !accepted; ++tries)
        {
            const Eigen::SparseMatrix<double> H = 2.0 * (JtJ + (mu * scale) * I);
            const auto qp = solve_box_qp(H, g, lo - alpha, hi - alpha, options.kkt_tol * scale);
            worst_kkt = qp.kkt_residual / scale;
            if (!qp.converged)
            {
                mu *= 10.0;
                continue;
            }
            // Backtracking on the true objective.
            for (double t = 1.0; t > 1e-4; t *= 0.5)
            {
                alpha_new = alpha + t * qp.x;
                const Eigen::VectorXd r_new = prob.residual(alpha_new);
                f_new = r_new.squaredNorm();
                if (f_new < f)
                {
                    accepted = true;
                    break;
                }
            }
            if (!accepted)
            {
                mu *= 10.0;
            }
        }
        if (!accepted)
        {
            break;
        }
        const double step = (alpha_new - alpha).cwiseAbs().maxCoeff();
        const double decrease = f - f_new;
        alpha = alpha_new;
        r = prob.residual(alpha);
        f = f_new;
        mu = std::max(mu * 0.3, 1e-9);
        // The objective is very flat along the straights; stop once progress stalls.
        if (step < 1e-9 || decrease <= options.rel_tol * f)
        {
            break;
        }
    }
    if (!std::isfinite(f))
    {
        throw OptimizationError("minimum-curvature objective is not finite", worst_kkt);
    }
    if (out.iterations == 0 || (worst_kkt > options.kkt_tol && f > out.centerline_objective))
    {
        throw OptimizationError("minimum-curvature QP did not converge", worst_kkt);
    }

    out.path = prob.path(alpha);
    out.offsets.assign(alpha.data(), alpha.data() + N);
    out.objective = f;
    return out;
}

} // namespace racestack::track
