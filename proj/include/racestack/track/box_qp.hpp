#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace racestack::track
{

struct BoxQpResult
{
    Eigen::VectorXd x;
    double kkt_residual = 0.0; // natural residual |x - clamp(x - (Hx + g))|_inf
    int iterations = 0;
    bool converged = false;
};

/// Minimizes 0.5 x'Hx + g'x subject to lo <= x <= hi for sparse symmetric positive
/// definite H. Primal-dual active set with a projected Gauss-Seidel fallback.
BoxQpResult solve_box_qp(const Eigen::SparseMatrix<double>& H, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi, double tol = 1e-8, int max_iter = 200);

/// Natural KKT residual of a candidate point.
double box_qp_residual(const Eigen::SparseMatrix<double>& H, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                       const Eigen::VectorXd& hi, const Eigen::VectorXd& x);

} // namespace racestack::track
