#include "abstain/exact_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace abstain {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Thrown on defensive checks inside the active-set iteration; solve() turns
// it into a converged = false diagnostic rather than propagating.
struct SubproblemFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FreeRun {
    int begin = 0;  // inclusive
    int end = 0;    // inclusive
    int length() const { return end - begin + 1; }
};

std::vector<FreeRun> collect_free_runs(const std::vector<char>& capped) {
    std::vector<FreeRun> runs;
    const int dim = static_cast<int>(capped.size());
    int j = 0;
    while (j < dim) {
        if (capped[static_cast<std::size_t>(j)]) {
            ++j;
            continue;
        }
        FreeRun run{j, j};
        while (run.end + 1 < dim && !capped[static_cast<std::size_t>(run.end + 1)]) ++run.end;
        runs.push_back(run);
        j = run.end + 1;
    }
    return runs;
}

// Solves (T - b2 I) x = rhs on one free run, T tridiagonal with zero diagonal
// and 1/2 off-diagonals. Requires b2 above the run's top eigenvalue so the
// system is negative definite.
void solve_run(double b2, std::span<const double> rhs, std::span<double> x,
               std::vector<double>& pivot_scratch) {
    const std::size_t m = rhs.size();
    pivot_scratch.resize(m);
    double piv = -b2;
    pivot_scratch[0] = piv;
    x[0] = rhs[0];
    for (std::size_t k = 1; k < m; ++k) {
        const double w = 0.5 / piv;
        piv = -b2 - 0.5 * w;
        pivot_scratch[k] = piv;
        x[k] = rhs[k] - w * x[k - 1];
    }
    x[m - 1] /= pivot_scratch[m - 1];
    for (std::size_t k = m - 1; k-- > 0;) x[k] = (x[k] - 0.5 * x[k + 1]) / pivot_scratch[k];
}

struct Subproblem {
    std::vector<FreeRun> runs;
    std::vector<double> rhs;     // full length; nonzero only next to capped entries
    std::vector<char> driven;    // per run: nonzero rhs somewhere on the run
    double target = 0.0;         // required || xi_F ||^2
    double lam_max_free = 0.0;   // top eigenvalue of the free block
    int max_len = 0;

    // Fills the free entries of xi for the given multiplier and returns
    // || xi_F ||^2. Entries of undriven singular runs stay zero.
    double fill(double b2, std::vector<double>& xi, std::vector<double>& scratch) const {
        double norm_sq = 0.0;
        for (std::size_t ri = 0; ri < runs.size(); ++ri) {
            const FreeRun& run = runs[ri];
            const std::size_t m = static_cast<std::size_t>(run.length());
            std::span<double> x(&xi[static_cast<std::size_t>(run.begin)], m);
            if (!driven[ri]) {
                std::fill(x.begin(), x.end(), 0.0);
                continue;
            }
            solve_run(b2, {&rhs[static_cast<std::size_t>(run.begin)], m}, x, scratch);
            for (double v : x) norm_sq += v * v;
        }
        return norm_sq;
    }
};

double run_top_eigenvalue(int length) { return std::cos(kPi / (length + 1)); }

Subproblem build_subproblem(const std::vector<double>& c, double lambda,
                            const std::vector<char>& capped) {
    const int dim = static_cast<int>(c.size());
    Subproblem sp;
    sp.runs = collect_free_runs(capped);
    if (sp.runs.empty())
        throw SubproblemFailure("active set covers every index; no free block to normalize");

    double cap_mass = 0.0;
    for (int j = 0; j < dim; ++j)
        if (capped[static_cast<std::size_t>(j)]) {
            const double v = lambda * c[static_cast<std::size_t>(j)];
            cap_mass += v * v;
        }
    sp.target = 1.0 - cap_mass;
    if (sp.target <= 0.0)
        throw SubproblemFailure("capped mass exceeds the unit norm; active set is inconsistent");

    sp.rhs.assign(static_cast<std::size_t>(dim), 0.0);
    for (const FreeRun& run : sp.runs) {
        if (run.begin > 0)
            sp.rhs[static_cast<std::size_t>(run.begin)] -=
                0.5 * lambda * c[static_cast<std::size_t>(run.begin - 1)];
        if (run.end + 1 < dim)
            sp.rhs[static_cast<std::size_t>(run.end)] -=
                0.5 * lambda * c[static_cast<std::size_t>(run.end + 1)];
        sp.max_len = std::max(sp.max_len, run.length());
    }
    sp.lam_max_free = run_top_eigenvalue(sp.max_len);

    sp.driven.resize(sp.runs.size());
    for (std::size_t ri = 0; ri < sp.runs.size(); ++ri) {
        const FreeRun& run = sp.runs[ri];
        sp.driven[ri] = sp.rhs[static_cast<std::size_t>(run.begin)] != 0.0 ||
                        sp.rhs[static_cast<std::size_t>(run.end)] != 0.0;
    }
    return sp;
}

// Finds the normalization multiplier b^2 on the monotone branch above the
// free block's spectrum (the trust-region condition for a global maximizer of
// the equality-constrained slice), then writes the free entries of xi.
// Scan-then-bisect: 64 sample points locate the sign change, bisection
// refines it to 1e-13.
double solve_for_multiplier(const Subproblem& sp, std::vector<double>& xi) {
    std::vector<double> scratch;
    const double lam1 = sp.lam_max_free;
    const double lo0 = lam1 + std::max(1.0, lam1) * 0x1p-50;
    const int dim = static_cast<int>(xi.size());
    const double r = sp.target;

    const double g_lo = sp.fill(lo0, xi, scratch);
    if (g_lo < r) {
        bool top_run_driven = false;
        for (std::size_t ri = 0; ri < sp.runs.size(); ++ri)
            if (sp.runs[ri].length() == sp.max_len && sp.driven[ri]) top_run_driven = true;
        if (top_run_driven) {
            // Root sits within ulps of the pole; accept the boundary value and
            // rescale. The outer loop polices the resulting certificate.
            const double scale = std::sqrt(r / g_lo);
            for (const FreeRun& run : sp.runs)
                for (int j = run.begin; j <= run.end; ++j) xi[static_cast<std::size_t>(j)] *= scale;
            return lo0;
        }
        // Hard case: every longest run is undriven. The particular solution on
        // the driven runs cannot absorb the free mass, so the remainder rides
        // the top eigenvector of the first longest run at b^2 = lam1.
        double g_part = sp.fill(lam1, xi, scratch);
        const double leftover = std::max(0.0, r - g_part);
        for (std::size_t ri = 0; ri < sp.runs.size(); ++ri) {
            const FreeRun& run = sp.runs[ri];
            if (sp.driven[ri] || run.length() != sp.max_len) continue;
            const int m = run.length();
            const double amp = std::sqrt(leftover) * std::sqrt(2.0 / (m + 1));
            for (int k = 0; k < m; ++k)
                xi[static_cast<std::size_t>(run.begin + k)] = amp * std::sin((k + 1) * kPi / (m + 1));
            break;
        }
        return lam1;
    }

    double hi = 4.0 * std::pow(std::cos(kPi / (2.0 * (dim + 1))), 2);
    double g_hi = sp.fill(hi, xi, scratch);
    int doublings = 0;
    while (g_hi >= r && doublings++ < 80) {
        hi *= 2.0;
        g_hi = sp.fill(hi, xi, scratch);
    }
    if (g_hi >= r) throw SubproblemFailure("no upper bracket for the normalization multiplier");

    double lo = lo0;
    constexpr int kScanPoints = 64;
    for (int k = 1; k <= kScanPoints; ++k) {
        const double p = lo0 + (hi - lo0) * k / kScanPoints;
        if (sp.fill(p, xi, scratch) < r) {
            hi = p;
            break;
        }
        lo = p;
    }

    while (hi - lo > 1e-13 * std::max(1.0, lo)) {
        const double mid = 0.5 * (lo + hi);
        if (sp.fill(mid, xi, scratch) >= r)
            lo = mid;
        else
            hi = mid;
    }
    const double b2 = 0.5 * (lo + hi);
    const double g_final = sp.fill(b2, xi, scratch);
    const double scale = std::sqrt(r / g_final);
    for (const FreeRun& run : sp.runs)
        for (int j = run.begin; j <= run.end; ++j) xi[static_cast<std::size_t>(j)] *= scale;
    return b2;
}

void apply_overlap(std::span<const double> x, std::span<double> out) {
    const std::size_t dim = x.size();
    for (std::size_t i = 0; i < dim; ++i) {
        double v = 0.0;
        if (i > 0) v += x[i - 1];
        if (i + 1 < dim) v += x[i + 1];
        out[i] = 0.5 * v;
    }
}

std::vector<double> filter_diagonal(const std::vector<double>& xi, const std::vector<double>& c,
                                    double q_bar) {
    std::vector<double> f(c.size());
    for (std::size_t j = 0; j < c.size(); ++j)
        f[j] = c[j] > 0.0 ? 1.0 - q_bar * (xi[j] * xi[j]) / (c[j] * c[j]) : 1.0;
    return f;
}

std::vector<int> capped_indices(const std::vector<char>& capped) {
    std::vector<int> out;
    for (std::size_t j = 0; j < capped.size(); ++j)
        if (capped[j]) out.push_back(static_cast<int>(j));
    return out;
}

// q = 0 leaves a single feasible point, xi = c. The multiplier that makes the
// certificate dual feasible is the smallest ratio (Mc)_j / c_j on the support.
FilterSolution solve_zero_abstention(const FiducialState& state) {
    const std::vector<double>& c = state.coeffs;
    const std::size_t dim = c.size();
    FilterSolution sol;
    sol.xi = c;
    sol.delta = quad_form(c);
    sol.fidelity = 0.5 * (1.0 + sol.delta);

    std::vector<double> mc(dim);
    apply_overlap(c, mc);
    double b2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < dim; ++j)
        if (c[j] > 0.0) b2 = std::min(b2, mc[j] / c[j]);
    sol.eigen_multiplier = b2;

    sol.slack.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) sol.slack[j] = 2.0 * mc[j] - 2.0 * b2 * c[j];
    sol.coincidence_set.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) sol.coincidence_set[j] = static_cast<int>(j);
    sol.filter_diag = filter_diagonal(sol.xi, c, 1.0);
    sol.converged = true;
    sol.iterations = 0;
    return sol;
}

FilterSolution solution_from_eigenpair(const FiducialState& state, const AbstentionBudget& budget,
                                       Eigenpair eigen) {
    FilterSolution sol;
    sol.delta = eigen.delta;
    sol.fidelity = 0.5 * (1.0 + eigen.delta);
    sol.xi = std::move(eigen.xi);
    sol.eigen_multiplier = sol.delta;
    sol.slack.assign(state.coeffs.size(), 0.0);
    sol.filter_diag = filter_diagonal(sol.xi, state.coeffs, budget.q_bar);
    sol.converged = true;
    sol.iterations = 0;
    return sol;
}

}  // namespace

AbstentionBudget::AbstentionBudget(double q_rate) : q(q_rate) {
    if (!(q_rate >= 0.0 && q_rate < 1.0))
        throw std::invalid_argument("AbstentionBudget: q must lie in [0,1)");
    q_bar = 1.0 - q_rate;
    lambda = 1.0 / std::sqrt(q_bar);
}

OverlapOperator::OverlapOperator(int dim) : dim_(dim) {
    if (dim < 1) throw std::invalid_argument("OverlapOperator: dim must be >= 1");
}

void OverlapOperator::apply(std::span<const double> x, std::span<double> out) const {
    if (static_cast<int>(x.size()) != dim_ || static_cast<int>(out.size()) != dim_)
        throw std::invalid_argument("OverlapOperator::apply: size mismatch");
    apply_overlap(x, out);
}

double OverlapOperator::quad_form(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dim_)
        throw std::invalid_argument("OverlapOperator::quad_form: size mismatch");
    return abstain::quad_form(x);
}

double OverlapOperator::max_eigenvalue() const { return std::cos(kPi / (dim_ + 1)); }

double quad_form(std::span<const double> xi) {
    if (xi.size() < 2) throw std::invalid_argument("quad_form: need at least two entries");
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < xi.size(); ++j) s += xi[j] * xi[j + 1];
    return s;
}

Eigenpair unconstrained_optimum(int n) {
    if (n < 1) throw std::invalid_argument("unconstrained_optimum: n must be >= 1");
    Eigenpair pair;
    pair.delta = std::cos(kPi / (n + 2));
    pair.xi.resize(static_cast<std::size_t>(n) + 1);
    const double amp = std::sqrt(2.0 / (n + 2));
    for (int j = 0; j <= n; ++j)
        pair.xi[static_cast<std::size_t>(j)] = amp * std::sin((j + 1) * kPi / (n + 2));
    return pair;
}

CriticalRate critical_abstention(const FiducialState& state) {
    validate_state(state);
    const Eigenpair eigen = unconstrained_optimum(state.n);
    CriticalRate rate;
    rate.f_star = 0.5 * (1.0 + eigen.delta);

    double min_ratio_sq = std::numeric_limits<double>::infinity();
    rate.argmin_index = 0;
    for (std::size_t j = 0; j < state.coeffs.size(); ++j) {
        if (eigen.xi[j] <= 0.0) continue;
        const double ratio = state.coeffs[j] / eigen.xi[j];
        if (ratio * ratio < min_ratio_sq) {
            min_ratio_sq = ratio * ratio;
            rate.argmin_index = static_cast<int>(j);
        }
    }
    rate.limit_only = min_ratio_sq == 0.0;
    rate.q_star = rate.limit_only ? 1.0 : std::clamp(1.0 - min_ratio_sq, 0.0, 1.0);
    return rate;
}

FilterSolution solve(const FiducialState& state, const AbstentionBudget& budget,
                     const SolverOptions& options) {
    validate_state(state);
    if (budget.q == 0.0) return solve_zero_abstention(state);

    const std::vector<double>& c = state.coeffs;
    const std::size_t dim = c.size();
    const double lambda = budget.lambda;
    Eigenpair eigen = unconstrained_optimum(state.n);

    std::vector<char> pinned(dim), capped(dim);
    bool any_capped = false;
    for (std::size_t j = 0; j < dim; ++j) {
        pinned[j] = c[j] == 0.0;
        capped[j] = pinned[j] || lambda * c[j] < eigen.xi[j];
        any_capped = any_capped || capped[j];
    }
    if (!any_capped) return solution_from_eigenpair(state, budget, std::move(eigen));

    FilterSolution sol;
    sol.xi.assign(dim, 0.0);
    sol.slack.assign(dim, 0.0);

    std::vector<double> mxi(dim);
    for (int iteration = 1; iteration <= options.max_iterations; ++iteration) {
        sol.iterations = iteration;
        for (std::size_t j = 0; j < dim; ++j) sol.xi[j] = capped[j] ? lambda * c[j] : 0.0;

        try {
            const Subproblem sp = build_subproblem(c, lambda, capped);
            sol.eigen_multiplier = solve_for_multiplier(sp, sol.xi);
        } catch (const SubproblemFailure&) {
            break;  // leave converged = false; caller sees the last iterate
        }

        apply_overlap(sol.xi, mxi);
        for (std::size_t j = 0; j < dim; ++j)
            sol.slack[j] = capped[j] ? 2.0 * mxi[j] - 2.0 * sol.eigen_multiplier * sol.xi[j] : 0.0;

        // Two-phase update: restore primal feasibility first; release capped
        // indices with negative slack only once no cap is violated.
        bool changed = false;
        for (std::size_t j = 0; j < dim; ++j) {
            if (!capped[j] && sol.xi[j] - lambda * c[j] > options.feas_tol) {
                capped[j] = true;
                changed = true;
            }
        }
        if (!changed) {
            for (std::size_t j = 0; j < dim; ++j) {
                if (capped[j] && !pinned[j] && sol.slack[j] < -options.feas_tol) {
                    capped[j] = false;
                    changed = true;
                }
            }
        }
        if (!changed) {
            sol.converged = true;
            break;
        }
    }

    sol.delta = quad_form(sol.xi);
    sol.fidelity = 0.5 * (1.0 + sol.delta);
    sol.coincidence_set = capped_indices(capped);
    sol.filter_diag = filter_diagonal(sol.xi, c, budget.q_bar);
    return sol;
}

double KktResiduals::max_residual() const {
    return std::max({stationarity, primal, dual, slackness, norm});
}

KktResiduals kkt_residuals(const FilterSolution& sol, const FiducialState& state,
                           const AbstentionBudget& budget) {
    const std::size_t dim = state.coeffs.size();
    if (sol.xi.size() != dim || sol.slack.size() != dim)
        throw std::invalid_argument("kkt_residuals: solution size mismatch");

    std::vector<double> mxi(dim);
    apply_overlap(sol.xi, mxi);

    KktResiduals res;
    double norm_sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
        const double cap_gap = sol.xi[j] - budget.lambda * state.coeffs[j];
        res.stationarity = std::max(
            res.stationarity,
            std::abs(2.0 * mxi[j] - 2.0 * sol.eigen_multiplier * sol.xi[j] - sol.slack[j]));
        res.primal = std::max(res.primal, cap_gap);
        res.dual = std::max(res.dual, -sol.slack[j]);
        res.slackness = std::max(res.slackness, std::abs(sol.slack[j] * cap_gap));
        norm_sq += sol.xi[j] * sol.xi[j];
    }
    res.primal = std::max(res.primal, 0.0);
    res.dual = std::max(res.dual, 0.0);
    res.norm = std::abs(norm_sq - 1.0);
    return res;
}

namespace {

// Exact nearest-point projection onto {0 <= x <= caps} intersected with the
// unit sphere, for nonnegative y: x = clip(nu y) with nu chosen by bisection
// so the clipped vector has unit norm.
void project_box_sphere(std::vector<double>& y, const std::vector<double>& caps) {
    auto clipped_norm = [&](double nu) {
        double s = 0.0;
        for (std::size_t j = 0; j < y.size(); ++j) {
            const double v = std::min(nu * y[j], caps[j]);
            s += v * v;
        }
        return std::sqrt(s);
    };
    double hi = 1.0;
    int guard = 0;
    while (clipped_norm(hi) < 1.0 && guard++ < 200) hi *= 2.0;
    double lo = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        (clipped_norm(mid) < 1.0 ? lo : hi) = mid;
    }
    const double nu = hi;
    for (std::size_t j = 0; j < y.size(); ++j) y[j] = std::min(nu * y[j], caps[j]);
}

double ascend_from(std::vector<double> x, const std::vector<double>& caps) {
    const std::size_t dim = x.size();
    std::vector<double> grad(dim);
    double best = quad_form(x);
    int stale = 0;
    static constexpr struct {
        double step;
        int iters;
    } kSchedule[] = {{0.8, 600}, {0.2, 600}, {0.05, 1200}};
    for (const auto& phase : kSchedule) {
        for (int it = 0; it < phase.iters; ++it) {
            apply_overlap(x, grad);
            for (std::size_t j = 0; j < dim; ++j) x[j] += 2.0 * phase.step * grad[j];
            project_box_sphere(x, caps);
            const double value = quad_form(x);
            if (value > best + 1e-15) {
                best = value;
                stale = 0;
            } else if (++stale > 80) {
                stale = 0;
                break;
            }
        }
    }
    return best;
}

// Spherical-angle sweep of the nonnegative orthant: x_0 = cos t_1,
// x_k = sin t_1 ... sin t_k cos t_{k+1}, angles in [0, pi/2].
template <typename Fn>
void for_each_angle_grid(int angles, double lo, double hi, double step, Fn&& fn,
                         std::vector<double>& angle_buf) {
    if (static_cast<int>(angle_buf.size()) == angles) {
        fn(angle_buf);
        return;
    }
    for (double a = lo; a <= hi + 0.5 * step; a += step) {
        angle_buf.push_back(std::min(a, kPi / 2));
        for_each_angle_grid(angles, lo, hi, step, fn, angle_buf);
        angle_buf.pop_back();
    }
}

std::vector<double> angles_to_point(const std::vector<double>& angles) {
    std::vector<double> x(angles.size() + 1);
    double tail = 1.0;
    for (std::size_t k = 0; k < angles.size(); ++k) {
        x[k] = tail * std::cos(angles[k]);
        tail *= std::sin(angles[k]);
    }
    x.back() = tail;
    return x;
}

double grid_search(const std::vector<double>& caps, int angles, double lo, double hi,
                   double step) {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> buf;
    buf.reserve(static_cast<std::size_t>(angles));
    for_each_angle_grid(
        angles, lo, hi, step,
        [&](const std::vector<double>& a) {
            const std::vector<double> x = angles_to_point(a);
            for (std::size_t j = 0; j < x.size(); ++j)
                if (x[j] > caps[j] + 1e-12) return;
            best = std::max(best, quad_form(x));
        },
        buf);
    return best;
}

}  // namespace

double brute_force_oracle(const FiducialState& state, const AbstentionBudget& budget,
                          int restarts) {
    validate_state(state);
    const std::vector<double>& c = state.coeffs;
    const std::size_t dim = c.size();
    std::vector<double> caps(dim);
    for (std::size_t j = 0; j < dim; ++j) caps[j] = budget.lambda * c[j];

    double best = ascend_from(c, caps);

    Eigenpair eigen = unconstrained_optimum(state.n);
    project_box_sphere(eigen.xi, caps);
    best = std::max(best, ascend_from(eigen.xi, caps));

    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int s = 0; s < restarts; ++s) {
        std::vector<double> x(dim);
        for (std::size_t j = 0; j < dim; ++j) x[j] = unit(rng) * (caps[j] > 0.0 ? caps[j] : 0.0);
        double norm_sq = 0.0;
        for (double v : x) norm_sq += v * v;
        if (norm_sq == 0.0) continue;
        project_box_sphere(x, caps);
        best = std::max(best, ascend_from(x, caps));
    }

    if (state.n <= 2) {
        best = std::max(best, grid_search(caps, state.n, 0.0, kPi / 2, 1e-3));
    } else if (state.n == 3) {
        // Two-stage sweep: coarse pass, then 1e-3 resolution around the best
        // coarse cell.
        const double coarse = 0.02;
        double best_coarse = -std::numeric_limits<double>::infinity();
        std::vector<double> best_angles;
        std::vector<double> buf;
        for_each_angle_grid(
            3, 0.0, kPi / 2, coarse,
            [&](const std::vector<double>& a) {
                const std::vector<double> x = angles_to_point(a);
                for (std::size_t j = 0; j < x.size(); ++j)
                    if (x[j] > caps[j] + 1e-12) return;
                const double v = quad_form(x);
                if (v > best_coarse) {
                    best_coarse = v;
                    best_angles = a;
                }
            },
            buf);
        if (!best_angles.empty()) {
            double fine_best = -std::numeric_limits<double>::infinity();
            std::vector<double> fine_buf;
            const double w = 1.5 * coarse;
            // Refine each angle independently around the coarse optimum.
            std::vector<double> lo(3), hi(3);
            for (int k = 0; k < 3; ++k) {
                lo[static_cast<std::size_t>(k)] = std::max(0.0, best_angles[static_cast<std::size_t>(k)] - w);
                hi[static_cast<std::size_t>(k)] = std::min(kPi / 2, best_angles[static_cast<std::size_t>(k)] + w);
            }
            for (double a0 = lo[0]; a0 <= hi[0]; a0 += 1e-3)
                for (double a1 = lo[1]; a1 <= hi[1]; a1 += 1e-3)
                    for (double a2 = lo[2]; a2 <= hi[2]; a2 += 1e-3) {
                        const std::vector<double> x = angles_to_point({a0, a1, a2});
                        bool ok = true;
                        for (std::size_t j = 0; j < x.size(); ++j)
                            if (x[j] > caps[j] + 1e-12) ok = false;
                        if (ok) fine_best = std::max(fine_best, quad_form(x));
                    }
            best = std::max(best, fine_best);
        }
    }
    return best;
}

}  // namespace abstain
