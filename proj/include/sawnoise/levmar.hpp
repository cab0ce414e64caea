#ifndef SAWNOISE_LEVMAR_HPP
#define SAWNOISE_LEVMAR_HPP

#include <functional>
#include <span>
#include <vector>

namespace sawnoise {

struct LevMarOptions {
    int max_iterations = 200;
    double ftol = 1e-12;        // relative decrease of the cost
    double xtol = 1e-10;        // relative step size
    double initial_damping = 1e-3;
};

struct LevMarResult {
    std::vector<double> x;
    bool converged = false;
    int iterations = 0;
    double residual_norm = 0.0;     // ||r|| at the solution
    // Row-major n x n covariance estimate, (J^T J)^-1 * s^2 with
    // s^2 = ||r||^2 / (m - n). Empty if m <= n or J^T J is singular.
    std::vector<double> covariance;
};

// Residual function: fills r (size m) for the given parameter vector x.
using ResidualFn = std::function<void(std::span<const double>, std::vector<double>&)>;

// Damped Gauss-Newton (Levenberg-Marquardt) with a central-difference
// Jacobian and Marquardt diagonal scaling. No global state; re-entrant.
LevMarResult levmar(const ResidualFn& fn, std::vector<double> x0, std::size_t m,
                    const LevMarOptions& opts = {});

namespace detail {
// Solves A x = b for symmetric positive definite A (row-major n x n),
// in place Cholesky. Returns false if not positive definite.
bool cholesky_solve(std::vector<double> a, std::vector<double> b,
                    std::size_t n, std::vector<double>& x);
// Inverse of a symmetric positive definite matrix; false on failure.
bool spd_inverse(const std::vector<double>& a, std::size_t n,
                 std::vector<double>& inv);
} // namespace detail

} // namespace sawnoise

#endif
