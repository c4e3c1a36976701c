#pragma once

#include "abstain/probe_states.hpp"

namespace abstain {

/// One point of the shot-noise trade-off curve for the copies family,
/// parameterized by the scaled frequency Omega = omega * alpha in (0, pi/2).
struct ParametricPoint {
    double omega_param = 0.0;  // Omega
    double q = 0.0;            // abstention rate Q(Omega)
    double ns = 0.0;           // N*S = 2N(1-F) at that rate
};

/// Solved matching system for the copies-family profile at a given budget:
/// cosine cap region |tau| <= alpha stitched to the scaled Gaussian outside.
struct MatchingSolution {
    double a = 0.0;          // sqrt(N)-scaled boundary, a = alpha*sqrt(N)
    double capital_a = 0.0;  // amplitude A of the interior cosine
    double lambda = 0.0;     // cap multiplier (1-q)^{-1/2}
    double omega = 0.0;      // interior frequency, omega = Omega*sqrt(N)/a
    double alpha = 0.0;      // coincidence-set boundary in t-units
};

/// Fidelity and acceptance of the copies family deep in the Heisenberg
/// regime, at coincidence boundary alpha.
struct HeisenbergPoint {
    double fidelity = 0.0;
    double acceptance = 0.0;           // exp(-acceptance_exponent)
    double acceptance_exponent = 0.0;  // n * H(1/2 + alpha || 1/2)
};

/// Scaled complementary error function exp(x^2)*erfc(x) for x >= 0,
/// cancellation-safe for large x.
double erfcx(double x);

/// Large-N optimal-encoding fidelity, F* = 1 - pi^2/(4 n^2).
double optimal_encoding_fidelity(int n);

/// Large-N phase-family fidelity at abstention q: Heisenberg branch
/// 1 - pi^2/(16 q (1-q) n^2) for q <= 1/2, plateau F* beyond. Rejects q = 0.
double phase_state_fidelity_asym(int n, double q);

/// Continuum profile phi(t) of the transformed phase state, 0 < q <= 1/2.
double phase_state_profile(double q, double t);

/// Evaluates the parametric (Q, N*S) curve at Omega in (0, pi/2 - 1e-6].
ParametricPoint copies_shotnoise_point(double omega_param);

/// Inverts Q(Omega) = q on the parametric curve and returns N*S there.
double copies_shotnoise_ns_at_q(double q);

/// Solves the transcendental matching system for the copies profile.
MatchingSolution copies_matching_solution(int n, double lambda);

/// Continuum profile phi(t) of the transformed copies state at budget lambda.
double copies_profile(int n, double lambda, double t);

/// Heisenberg-regime fidelity and acceptance for the copies family.
HeisenbergPoint copies_heisenberg(int n, double alpha);

}  // namespace abstain
