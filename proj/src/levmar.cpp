#include "sawnoise/levmar.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sawnoise {

namespace detail {

bool cholesky_solve(std::vector<double> a, std::vector<double> b,
                    std::size_t n, std::vector<double>& x)
{
    // In-place lower Cholesky factorization.
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (!(d > 0.0)) return false;
        const double ljj = std::sqrt(d);
        a[j * n + j] = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / ljj;
        }
    }
    // Forward then backward substitution.
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
        b[i] = s / a[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= a[k * n + ii] * b[k];
        b[ii] = s / a[ii * n + ii];
    }
    x = std::move(b);
    return true;
}

bool spd_inverse(const std::vector<double>& a, std::size_t n,
                 std::vector<double>& inv)
{
    inv.assign(n * n, 0.0);
    std::vector<double> e(n), col;
    for (std::size_t j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), 0.0);
        e[j] = 1.0;
        if (!cholesky_solve(a, e, n, col)) return false;
        for (std::size_t i = 0; i < n; ++i) inv[i * n + j] = col[i];
    }
    return true;
}

} // namespace detail

namespace {

double sq_norm(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

void numeric_jacobian(const ResidualFn& fn, const std::vector<double>& x,
                      std::size_t m, std::vector<double>& jac,
                      std::vector<double>& rp, std::vector<double>& rm)
{
    const std::size_t n = x.size();
    jac.assign(m * n, 0.0);
    std::vector<double> xt = x;
    for (std::size_t j = 0; j < n; ++j) {
        const double h = 1e-6 * std::max(std::abs(x[j]), 1e-8);
        xt[j] = x[j] + h;
        fn(xt, rp);
        xt[j] = x[j] - h;
        fn(xt, rm);
        xt[j] = x[j];
        const double inv2h = 0.5 / h;
        for (std::size_t i = 0; i < m; ++i)
            jac[i * n + j] = (rp[i] - rm[i]) * inv2h;
    }
}

} // namespace

LevMarResult levmar(const ResidualFn& fn, std::vector<double> x0, std::size_t m,
                    const LevMarOptions& opts)
{
    const std::size_t n = x0.size();
    if (m < n)
        throw std::invalid_argument("levmar: fewer residuals than parameters");

    LevMarResult out;
    std::vector<double> r(m), r_try(m), rp, rm, jac;
    std::vector<double> jtj(n * n), jtr(n), step, x_try(n);

    fn(x0, r);
    double cost = sq_norm(r);
    double lambda = opts.initial_damping;

    int it = 0;
    bool converged = false;
    for (; it < opts.max_iterations; ++it) {
        numeric_jacobian(fn, x0, m, jac, rp, rm);

        for (std::size_t a = 0; a < n; ++a) {
            jtr[a] = 0.0;
            for (std::size_t b = a; b < n; ++b) {
                double s = 0.0;
                for (std::size_t i = 0; i < m; ++i)
                    s += jac[i * n + a] * jac[i * n + b];
                jtj[a * n + b] = s;
                jtj[b * n + a] = s;
            }
            for (std::size_t i = 0; i < m; ++i) jtr[a] += jac[i * n + a] * r[i];
        }

        bool improved = false;
        for (int inner = 0; inner < 30; ++inner) {
            std::vector<double> damped = jtj;
            for (std::size_t a = 0; a < n; ++a)
                damped[a * n + a] += lambda * std::max(jtj[a * n + a], 1e-30);
            std::vector<double> neg = jtr;
            for (double& v : neg) v = -v;
            if (!detail::cholesky_solve(damped, neg, n, step)) {
                lambda *= 10.0;
                continue;
            }
            for (std::size_t a = 0; a < n; ++a) x_try[a] = x0[a] + step[a];
            fn(x_try, r_try);
            const double cost_try = sq_norm(r_try);
            if (cost_try < cost) {
                double step_rel = 0.0;
                for (std::size_t a = 0; a < n; ++a)
                    step_rel = std::max(step_rel, std::abs(step[a]) /
                                        std::max(std::abs(x_try[a]), 1e-12));
                const double drop = (cost - cost_try) / std::max(cost, 1e-300);
                x0 = x_try;
                r = r_try;
                const double prev = cost;
                cost = cost_try;
                lambda = std::max(lambda * 0.3, 1e-14);
                improved = true;
                if (drop < opts.ftol || step_rel < opts.xtol ||
                    cost <= 1e-28 * std::max(1.0, prev))
                    converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) {
            // No downhill step found at any damping; treat the current
            // point as converged when the gradient is orthogonal to the
            // residual, i.e. |J^T r|_a / (||J_a|| ||r||) is tiny for every
            // parameter. This is scale free, unlike a raw gradient norm.
            double gmax = 0.0;
            for (std::size_t a = 0; a < n; ++a) {
                const double denom =
                    std::sqrt(jtj[a * n + a] * std::max(cost, 1e-300));
                if (denom > 0.0)
                    gmax = std::max(gmax, std::abs(jtr[a]) / denom);
            }
            converged = gmax < 1e-4 || cost <= 1e-28;
            break;
        }
        if (converged) break;
    }

    out.x = std::move(x0);
    out.converged = converged;
    out.iterations = it + 1;
    out.residual_norm = std::sqrt(cost);

    if (m > n) {
        // Recompute J at the solution for the covariance estimate.
        numeric_jacobian(fn, out.x, m, jac, rp, rm);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a; b < n; ++b) {
                double s = 0.0;
                for (std::size_t i = 0; i < m; ++i)
                    s += jac[i * n + a] * jac[i * n + b];
                jtj[a * n + b] = s;
                jtj[b * n + a] = s;
            }
        std::vector<double> inv;
        if (detail::spd_inverse(jtj, n, inv)) {
            const double s2 = cost / static_cast<double>(m - n);
            for (double& v : inv) v *= s2;
            out.covariance = std::move(inv);
        }
    }
    return out;
}

} // namespace sawnoise
