#pragma once

#include <span>
#include <vector>

#include "abstain/probe_states.hpp"

namespace abstain {

/// Abstention rate q together with the cap multiplier lambda = (1-q)^{-1/2}.
struct AbstentionBudget {
    double q = 0.0;
    double lambda = 1.0;
    double q_bar = 1.0;

    explicit AbstentionBudget(double q_rate);
};

/// Nearest-neighbour overlap operator: M_ij = (delta_{i,j+1} + delta_{i,j-1})/2.
/// Held as a dimension only; applications run along the two diagonals.
class OverlapOperator {
public:
    explicit OverlapOperator(int dim);

    int dim() const { return dim_; }
    void apply(std::span<const double> x, std::span<double> out) const;
    double quad_form(std::span<const double> x) const;
    /// Largest eigenvalue, cos(pi/(dim+1)).
    double max_eigenvalue() const;

private:
    int dim_;
};

/// Tridiagonal quadratic form sum_j xi_j xi_{j+1}. Requires length >= 2.
double quad_form(std::span<const double> xi);

struct Eigenpair {
    double delta;             // cos(pi/(n+2))
    std::vector<double> xi;   // sqrt(2/(n+2)) sin((j+1) pi/(n+2))
};

/// Top eigenpair of M in closed form; the cap-free optimum.
Eigenpair unconstrained_optimum(int n);

struct CriticalRate {
    double q_star;     // smallest q at which F reaches f_star (1 when limit_only)
    double f_star;     // (1 + cos(pi/(n+2)))/2
    int argmin_index;  // index attaining min_j (c_j/xi*_j)^2
    bool limit_only;   // some c_j = 0: f_star reached only in the q -> 1 limit
};

CriticalRate critical_abstention(const FiducialState& state);

/// Optimal filtered state for a given budget, with its KKT certificate.
struct FilterSolution {
    std::vector<double> xi;
    double delta = 0.0;
    double fidelity = 0.0;
    std::vector<int> coincidence_set;   // sorted indices with xi_j = lambda c_j
    double eigen_multiplier = 0.0;      // b^2, multiplier of the normalization
    std::vector<double> slack;          // s_j, zero off the coincidence set
    std::vector<double> filter_diag;    // f_j = 1 - q_bar xi_j^2 / c_j^2
    bool converged = false;
    int iterations = 0;
};

struct SolverOptions {
    double feas_tol = 1e-10;
    double cert_tol = 1e-8;
    int max_iterations = 200;
};

/// Maximizes <xi|M|xi> subject to ||xi|| = 1 and 0 <= xi_j <= lambda c_j by
/// an active-set method on the coincidence set. A non-converged result keeps
/// the last iterate and certificate data with converged = false.
FilterSolution solve(const FiducialState& state, const AbstentionBudget& budget,
                     const SolverOptions& options = {});

struct KktResiduals {
    double stationarity = 0.0;  // max_j |2(M xi)_j - 2 b^2 xi_j - s_j|
    double primal = 0.0;        // max_j max(0, xi_j - lambda c_j)
    double dual = 0.0;          // max_j max(0, -s_j)
    double slackness = 0.0;     // max_j |s_j (xi_j - lambda c_j)|
    double norm = 0.0;          // | ||xi||^2 - 1 |

    double max_residual() const;
};

KktResiduals kkt_residuals(const FilterSolution& sol, const FiducialState& state,
                           const AbstentionBudget& budget);

/// Independent estimate of delta: projected gradient ascent restarted from
/// `restarts` random feasible points plus deterministic starts, and for
/// n <= 3 an exhaustive spherical-angle grid. Intended as a test oracle.
double brute_force_oracle(const FiducialState& state, const AbstentionBudget& budget,
                          int restarts);

}  // namespace abstain
