#pragma once

#include <cstdint>
#include <span>

#include "abstain/exact_solver.hpp"
#include "abstain/probe_states.hpp"

namespace abstain {

/// Splittable counter-based generator; substreams derived from (seed, index)
/// make parallel and serial shot loops agree exactly.
struct SplitMix64 {
    std::uint64_t state = 0;

    std::uint64_t next() {
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

/// Scrambles (seed, index) into an independent substream.
SplitMix64 substream(std::uint64_t seed, std::uint64_t index);

struct SimulationConfig {
    long long shots = 0;
    std::uint64_t seed = 0;
    long long max_rejection_iters = 1'000'000;  // per sample
};

struct SimulationReport {
    long long shots = 0;
    long long accepted = 0;
    double empirical_q = 0.0;
    double empirical_fidelity = 0.0;
    double fidelity_stderr = 0.0;
    double exact_q = 0.0;
    double exact_fidelity = 0.0;
};

/// Density of the estimation error delta given acceptance,
/// p(delta) = |sum_j xi_j e^{i j delta}|^2 / (2 pi). Requires unit-norm xi.
double conditional_density(std::span<const double> xi, double delta_angle);

/// Draws delta from conditional_density by rejection sampling under the flat
/// envelope (sum_j xi_j)^2 / (2 pi). Throws if max_iters proposals all miss.
double sample_estimate(std::span<const double> xi, SplitMix64& rng,
                       long long max_iters = 1'000'000);

/// Full-protocol Monte Carlo: uniform true phase, Bernoulli abstention from
/// the filter, covariant-POVM outcome on acceptance. Deterministic per seed.
SimulationReport simulate(const FiducialState& state, const AbstentionBudget& budget,
                          const FilterSolution& sol, const SimulationConfig& cfg);

}  // namespace abstain
