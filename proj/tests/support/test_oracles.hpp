#pragma once

// Test-side reference implementations, deliberately independent of the
// library's algorithms: quadrature, a Sturm-sequence eigensolve for the
// overlap matrix, a chi-squared tail via the regularized incomplete gamma,
// and random feasible states for property tests.

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "abstain/probe_states.hpp"

namespace oracles {

template <typename Fn>
double trapezoid(Fn&& f, double a, double b, int points) {
    const double h = (b - a) / (points - 1);
    double s = 0.5 * (f(a) + f(b));
    for (int k = 1; k < points - 1; ++k) s += f(a + k * h);
    return s * h;
}

// Number of eigenvalues of the (dim x dim) overlap matrix (zero diagonal,
// 1/2 off-diagonals) strictly below x, by the Sturm sequence of its LDL^T.
inline int eigenvalues_below(double x, int dim) {
    double d = -x;
    int count = d < 0.0 ? 1 : 0;
    for (int i = 1; i < dim; ++i) {
        d = -x - 0.25 / d;
        if (d == 0.0) d = -1e-300;
        if (d < 0.0) ++count;
    }
    return count;
}

inline double sturm_top_eigenvalue(int dim) {
    double lo = 0.0, hi = 1.0;  // Gershgorin: spectrum inside (-1, 1)
    while (hi - lo > 1e-14) {
        const double mid = 0.5 * (lo + hi);
        (eigenvalues_below(mid, dim) == dim ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

// Upper regularized incomplete gamma Q(a, x): series for the lower part when
// x < a+1, Lentz continued fraction otherwise.
inline double regularized_gamma_q(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw std::invalid_argument("regularized_gamma_q: bad arguments");
    if (x == 0.0) return 1.0;
    const double log_prefactor = -x + a * std::log(x) - std::lgamma(a);
    if (x < a + 1.0) {
        double term = 1.0 / a;
        double sum = term;
        double ap = a;
        for (int k = 0; k < 800; ++k) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-16) break;
        }
        return 1.0 - sum * std::exp(log_prefactor);
    }
    double b = x + 1.0 - a;
    double c = 1e300;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 800; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(log_prefactor) * h;
}

inline double chi_squared_pvalue(double chi2, int dof) {
    return regularized_gamma_q(0.5 * dof, 0.5 * chi2);
}

// Random normalized nonnegative state; occasional exact zeros exercise the
// pinned-coefficient paths.
inline abstain::FiducialState random_state(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> c(static_cast<std::size_t>(n) + 1);
    double norm_sq = 0.0;
    for (double& v : c) {
        v = unit(rng) < 0.15 ? 0.0 : 0.05 + unit(rng);
        norm_sq += v * v;
    }
    if (norm_sq == 0.0) {
        c[0] = 1.0;
        norm_sq = 1.0;
    }
    const double norm = std::sqrt(norm_sq);
    for (double& v : c) v /= norm;
    return abstain::FiducialState{n, std::move(c), "random"};
}

}  // namespace oracles
