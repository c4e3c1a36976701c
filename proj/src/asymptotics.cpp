#include "abstain/asymptotics.hpp"

#include <cmath>
#include <stdexcept>

namespace abstain {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kOmegaLo = 1e-9;
constexpr double kOmegaHi = kPi / 2 - 1e-6;

double square(double x) { return x * x; }

}  // namespace

double erfcx(double x) {
    if (x < 0.0) throw std::invalid_argument("erfcx: nonnegative arguments only");
    if (x < 3.0) return std::exp(x * x) * std::erfc(x);
    // Legendre continued fraction, erfcx(x) = pi^{-1/2} / (x + K_m (m/2)/x),
    // evaluated by the modified Lentz scheme. Converges in a handful of terms
    // for x >= 3.
    constexpr double tiny = 1e-300;
    double f = x;
    double c = f;
    double d = 0.0;
    for (int m = 1; m <= 200; ++m) {
        const double a = 0.5 * m;
        d = x + a * d;
        if (d == 0.0) d = tiny;
        c = x + a / c;
        if (c == 0.0) c = tiny;
        d = 1.0 / d;
        const double ratio = c * d;
        f *= ratio;
        if (std::abs(ratio - 1.0) < 1e-16) break;
    }
    return 1.0 / (std::sqrt(kPi) * f);
}

double optimal_encoding_fidelity(int n) {
    if (n < 1) throw std::invalid_argument("optimal_encoding_fidelity: n must be >= 1");
    return 1.0 - kPi * kPi / (4.0 * n * n);
}

double phase_state_fidelity_asym(int n, double q) {
    if (n < 1) throw std::invalid_argument("phase_state_fidelity_asym: n must be >= 1");
    if (!(q > 0.0 && q < 1.0))
        throw std::invalid_argument(
            "phase_state_fidelity_asym: q must lie in (0,1); the q = 0 value is exact, not "
            "asymptotic");
    if (q > 0.5) return optimal_encoding_fidelity(n);
    return 1.0 - kPi * kPi / (16.0 * q * (1.0 - q) * n * n);
}

double phase_state_profile(double q, double t) {
    if (!(q > 0.0 && q <= 0.5))
        throw std::invalid_argument("phase_state_profile: q must lie in (0, 1/2]");
    if (!(t >= 0.0 && t <= 1.0))
        throw std::invalid_argument("phase_state_profile: t must lie in [0,1]");
    const double lambda = 1.0 / std::sqrt(1.0 - q);
    const double tt = std::min(t, 1.0 - t);  // profile is symmetric about 1/2
    if (tt < q) return lambda * std::sin(kPi * tt / (2.0 * q));
    return lambda;
}

ParametricPoint copies_shotnoise_point(double omega_param) {
    if (!(omega_param > 0.0 && omega_param <= kOmegaHi))
        throw std::invalid_argument(
            "copies_shotnoise_point: Omega must lie in (0, pi/2 - 1e-6]");
    const double om = omega_param;
    const double tn = std::tan(om);
    const double sec2 = 1.0 + tn * tn;
    const double x2 = om * tn;  // = 2 a^2
    const double x = std::sqrt(x2);

    ParametricPoint pt;
    pt.omega_param = om;
    pt.q = std::erf(x) - (om * sec2 + tn) * std::sqrt(tn / (kPi * om)) * std::exp(-x2);

    // The Erfc * e^{+ x^2} product in the denominator cancels catastrophically
    // if formed literally; route it through erfcx.
    const double numer = tn * tn - om * (2.0 * om - tn) * sec2;
    const double denom = 2.0 * om * om * sec2 + std::sqrt(kPi * x2) * erfcx(x);
    pt.ns = 0.5 / (1.0 + numer / denom);
    return pt;
}

double copies_shotnoise_ns_at_q(double q) {
    if (!(q > 0.0 && q < 1.0))
        throw std::invalid_argument("copies_shotnoise_ns_at_q: q must lie in (0,1)");
    constexpr int kScan = 256;
    double lo = kOmegaLo;
    double q_lo = copies_shotnoise_point(lo).q;
    if (q_lo >= q)
        throw std::runtime_error("copies_shotnoise_ns_at_q: q below the scanned curve");
    double hi = 0.0;
    bool bracketed = false;
    for (int k = 1; k <= kScan; ++k) {
        const double p = kOmegaLo + (kOmegaHi - kOmegaLo) * k / kScan;
        const double q_p = copies_shotnoise_point(p).q;
        if (q_p < q_lo - 1e-12)
            throw std::runtime_error(
                "copies_shotnoise_ns_at_q: Q(Omega) not monotone on the scan");
        if (q_p >= q) {
            hi = p;
            bracketed = true;
            break;
        }
        lo = p;
        q_lo = q_p;
    }
    if (!bracketed)
        throw std::runtime_error("copies_shotnoise_ns_at_q: no bracket for the requested q");
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        (copies_shotnoise_point(mid).q < q ? lo : hi) = mid;
    }
    return copies_shotnoise_point(0.5 * (lo + hi)).ns;
}

namespace {

// Left-hand side of the budget equation: the total filtered mass outside and
// inside the cap region must reproduce 1/lambda^2.
double inverse_lambda_sq(double om) {
    const double tn = std::tan(om);
    const double a2 = 0.5 * om * tn;
    const double a = std::sqrt(a2);
    const double correction = a * (4.0 * a2 * a2 + om * om) * (2.0 * om + std::sin(2.0 * om)) /
                              (std::sqrt(2.0 * kPi) * om * om * om) * std::exp(-2.0 * a2);
    return std::erfc(std::sqrt(2.0) * a) + correction;
}

}  // namespace

MatchingSolution copies_matching_solution(int n, double lambda) {
    if (n < 1) throw std::invalid_argument("copies_matching_solution: n must be >= 1");
    if (!(lambda >= 1.0))
        throw std::invalid_argument("copies_matching_solution: lambda must be >= 1");
    const double target = 1.0 / (lambda * lambda);

    // inverse_lambda_sq decreases from 1 toward 0 across (0, pi/2); scan for
    // the sign change, then bisect.
    constexpr int kScan = 256;
    double lo = kOmegaLo;
    if (inverse_lambda_sq(lo) <= target)
        throw std::runtime_error("copies_matching_solution: no bracket; budget too small");
    double hi = 0.0;
    bool bracketed = false;
    for (int k = 1; k <= kScan; ++k) {
        const double p = kOmegaLo + (kOmegaHi - kOmegaLo) * k / kScan;
        if (inverse_lambda_sq(p) <= target) {
            hi = p;
            bracketed = true;
            break;
        }
        lo = p;
    }
    if (!bracketed)
        throw std::runtime_error(
            "copies_matching_solution: no bracket; lambda outside the regime's validity");
    while (hi - lo > 1e-13) {
        const double mid = 0.5 * (lo + hi);
        (inverse_lambda_sq(mid) > target ? lo : hi) = mid;
    }
    const double om = 0.5 * (lo + hi);

    MatchingSolution ms;
    ms.lambda = lambda;
    const double a2 = 0.5 * om * std::tan(om);
    ms.a = std::sqrt(a2);
    ms.alpha = ms.a / std::sqrt(static_cast<double>(n));
    ms.omega = om * std::sqrt(static_cast<double>(n)) / ms.a;
    const double amp_sq = std::sqrt(2.0 * n / kPi) * lambda * lambda * std::exp(-2.0 * a2) *
                          (4.0 * a2 * a2 + om * om) / (om * om);
    ms.capital_a = std::sqrt(amp_sq);
    return ms;
}

double copies_profile(int n, double lambda, double t) {
    if (!(t >= 0.0 && t <= 1.0))
        throw std::invalid_argument("copies_profile: t must lie in [0,1]");
    const MatchingSolution ms = copies_matching_solution(n, lambda);
    const double tau = t - 0.5;
    if (std::abs(tau) <= ms.alpha) return ms.capital_a * std::cos(ms.omega * tau);
    return lambda * copies_gaussian_profile(t, n);
}

HeisenbergPoint copies_heisenberg(int n, double alpha) {
    if (n < 1) throw std::invalid_argument("copies_heisenberg: n must be >= 1");
    if (!(alpha > 0.0 && alpha <= 0.5))
        throw std::invalid_argument("copies_heisenberg: alpha must lie in (0, 1/2]");
    HeisenbergPoint pt;
    const double denom = 16.0 * alpha * alpha;
    pt.fidelity = 1.0 - kPi * kPi / (denom * n * n);
    pt.acceptance_exponent = n * relative_entropy_bernoulli(0.5 + alpha);
    pt.acceptance = std::exp(-pt.acceptance_exponent);
    return pt;
}

}  // namespace abstain
