#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace abstain {

enum class StateFamily { phase, copies };

/// Probe state given by nonnegative amplitudes c_0..c_n in the rotation
/// eigenbasis. Invariants: coeffs.size() == n+1, c_j >= 0, sum c_j^2 = 1
/// within 1e-12.
struct FiducialState {
    int n = 0;
    std::vector<double> coeffs;
    std::string label;
};

/// Throws std::invalid_argument if any FiducialState invariant is violated.
void validate_state(const FiducialState& state);

/// Equal-superposition probe, c_j = 1/sqrt(n+1). Requires n >= 1.
FiducialState make_phase_state(int n);

/// N-copies probe, c_j = 2^{-n/2} binom(n,j)^{1/2}. Coefficients are formed
/// in log space so large n does not overflow. Requires n >= 1.
FiducialState make_copies_state(int n);

/// Reads {"n": int, "coeffs": [...]} from a JSON file. Coefficients must be
/// nonnegative and normalized within 1e-9 (then renormalized exactly).
FiducialState load_state(const std::filesystem::path& path);

/// Kullback-Leibler divergence between Bernoulli(t) and Bernoulli(1/2),
/// natural log, with the 0*log(0) = 0 endpoint convention.
double relative_entropy_bernoulli(double t);

/// Continuum profile psi(t) of sqrt(N) c_{tN} for the built-in families:
/// 1 for phase, [N/(2 pi t(1-t))]^{1/4} exp(-N/2 H(t||1/2)) for copies.
/// Copies endpoints t in {0,1} return 0.
double continuum_profile(StateFamily family, double t, int n);

/// Gaussian form of the copies profile, (2N/pi)^{1/4} exp(-N tau^2) with
/// tau = t - 1/2. Accurate near the peak, |tau| <~ n^{-1/2}.
double copies_gaussian_profile(double t, int n);

}  // namespace abstain
