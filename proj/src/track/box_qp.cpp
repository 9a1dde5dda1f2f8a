#include "racestack/track/box_qp.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <vector>

namespace racestack::track
{

namespace
{

enum class Side : signed char
{
    Free = 0,
    Lower = -1,
    Upper = 1,
};

/// Solves for the free variables with the active ones pinned at their bounds.
bool solve_reduced(const Eigen::SparseMatrix<double>& H, const Eigen::VectorXd& g, const std::vector<Side>& side,
                   Eigen::VectorXd& x)
{
    const Eigen::Index n = g.size();
    std::vector<Eigen::Index> map(static_cast<std::size_t>(n), -1);
    Eigen::Index nfree = 0;
    for (Eigen::Index i = 0; i < n; ++i)
    {
        if (side[static_cast<std::size_t>(i)] == Side::Free)
        {
            map[static_cast<std::size_t>(i)] = nfree++;
        }
    }
    if (nfree == 0)
    {
        return true;
    }
    Eigen::VectorXd rhs(nfree);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(H.nonZeros()));
    for (Eigen::Index i = 0; i < n; ++i)
    {
        if (map[static_cast<std::size_t>(i)] >= 0)
        {
            rhs(map[static_cast<std::size_t>(i)]) = -g(i);
        }
    }
    for (int k = 0; k < H.outerSize(); ++k)
    {
        for (Eigen::SparseMatrix<double>::InnerIterator it(H, k); it; ++it)
        {
            const auto r = map[static_cast<std::size_t>(it.row())];
            const auto c = map[static_cast<std::size_t>(it.col())];
            if (r >= 0 && c >= 0)
            {
                trip.emplace_back(r, c, it.value());
            }
            else if (r >= 0)
            {
                rhs(r) -= it.value() * x(it.col());
            }
        }
    }
    Eigen::SparseMatrix<double> Hff(nfree, nfree);
    Hff.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Hff);
    if (ldlt.info() != Eigen::Success)
    {
        return false;
    }
    const Eigen::VectorXd xf = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !xf.allFinite())
    {
        return false;
    }
    for (Eigen::Index i = 0; i < n; ++i)
    {
        if (map[static_cast<std::size_t>(i)] >= 0)
        {
            x(i) = xf(map[static_cast<std::size_t>(i)]);
        }
    }
    return true;
}

void projected_gauss_seidel(const Eigen::SparseMatrix<double>& H, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                            const Eigen::VectorXd& hi, Eigen::VectorXd& x, int sweeps)
{
    // H is symmetric, so column k doubles as row k.
    for (int s = 0; s < sweeps; ++s)
    {
        for (int k = 0; k < H.outerSize(); ++k)
        {
            double diag = 0.0;
            double acc = g(k);
            for (Eigen::SparseMatrix<double>::InnerIterator it(H, k); it; ++it)
            {
                if (it.row() == k)
                {
                    diag = it.value();
                }
                else
                {
                    acc += it.value() * x(it.row());
                }
            }
            if (diag > 0.0)
            {
                x(k) = std::clamp(-acc / diag, lo(k), hi(k));
            }
        }
    }
}

} // namespace

double box_qp_residual(const Eigen::SparseMatrix<double>& H, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                       const Eigen::VectorXd& hi, const Eigen::VectorXd& x)
{
    const Eigen::VectorXd grad = H * x + g;
    const Eigen::VectorXd proj = (x - grad).cwiseMax(lo).cwiseMin(hi);
    return (x - proj).cwiseAbs().maxCoeff();
}

BoxQpResult solve_box_qp(const Eigen::SparseMatrix<double>& H, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi, double tol, int max_iter)
{
    const Eigen::Index n = g.size();
    BoxQpResult res;
    res.x = Eigen::VectorXd::Zero(n).cwiseMax(lo).cwiseMin(hi);
    if (n == 0)
    {
        res.converged = true;
        return res;
    }
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(n);
    std::vector<Side> side(static_cast<std::size_t>(n), Side::Free);
    const double c = 1.0;
    for (int it = 0; it < max_iter; ++it)
    {
        res.iterations = it + 1;
        std::vector<Side> next(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i)
        {
            const double probe = res.x(i) + lambda(i) / c;
            next[static_cast<std::size_t>(i)] = probe > hi(i) ? Side::Upper : probe < lo(i) ? Side::Lower : Side::Free;
        }
        if (it > 0 && next == side)
        {
            break;
        }
        side = std::move(next);
        for (Eigen::Index i = 0; i < n; ++i)
        {
            const auto s = side[static_cast<std::size_t>(i)];
            if (s == Side::Upper)
            {
                res.x(i) = hi(i);
            }
            else if (s == Side::Lower)
            {
                res.x(i) = lo(i);
            }
        }
        if (!solve_reduced(H, g, side, res.x))
        {
            break;
        }
        // Hx + g + lambda = 0 with lambda zero on the free set.
        const Eigen::VectorXd grad = H * res.x + g;
        for (Eigen::Index i = 0; i < n; ++i)
        {
            lambda(i) = side[static_cast<std::size_t>(i)] == Side::Free ? 0.0 : -grad(i);
        }
    }
    res.x = res.x.cwiseMax(lo).cwiseMin(hi);
    res.kkt_residual = box_qp_residual(H, g, lo, hi, res.x);
    if (res.kkt_residual > tol)
    {
        for (int round = 0; round < 200 && res.kkt_residual > tol; ++round)
        {
            projected_gauss_seidel(H, g, lo, hi, res.x, 50);
            res.iterations += 50;
            res.kkt_residual = box_qp_residual(H, g, lo, hi, res.x);
        }
    }
    res.converged = res.kkt_residual <= tol;
    return res;
}

} // namespace racestack::track
