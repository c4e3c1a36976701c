#include "abstain/povm_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "abstain/parallel.hpp"

namespace abstain {

namespace {

constexpr double kTwoPi = 6.283185307179586476925;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double density_unchecked(std::span<const double> xi, double delta_angle) {
    // Accumulate sum_j xi_j e^{i j delta} by incremental rotation: one sin/cos
    // pair per evaluation point, O(n) multiplies.
    const double cd = std::cos(delta_angle);
    const double sd = std::sin(delta_angle);
    double re_rot = 1.0, im_rot = 0.0;  // e^{i j delta}
    double re = 0.0, im = 0.0;
    for (double coeff : xi) {
        re += coeff * re_rot;
        im += coeff * im_rot;
        const double re_next = re_rot * cd - im_rot * sd;
        im_rot = re_rot * sd + im_rot * cd;
        re_rot = re_next;
    }
    return (re * re + im * im) / kTwoPi;
}

struct BlockPartial {
    long long accepted = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
};

BlockPartial combine(const BlockPartial& a, const BlockPartial& b) {
    return {a.accepted + b.accepted, a.sum + b.sum, a.sum_sq + b.sum_sq};
}

// Pairwise reduction over block index: the combination tree depends only on
// the number of blocks, so threaded and serial runs produce identical sums.
BlockPartial reduce_pairwise(std::vector<BlockPartial>& partials, std::size_t lo,
                             std::size_t hi) {
    if (hi - lo == 1) return partials[lo];
    const std::size_t mid = lo + (hi - lo) / 2;
    return combine(reduce_pairwise(partials, lo, mid), reduce_pairwise(partials, mid, hi));
}

}  // namespace

SplitMix64 substream(std::uint64_t seed, std::uint64_t index) {
    return SplitMix64{mix64(seed + 0x9e3779b97f4a7c15ULL) ^
                      mix64(index * 0xbf58476d1ce4e5b9ULL + 0x94d049bb133111ebULL)};
}

double conditional_density(std::span<const double> xi, double delta_angle) {
    double norm_sq = 0.0;
    for (double v : xi) norm_sq += v * v;
    if (std::abs(std::sqrt(norm_sq) - 1.0) > 1e-9)
        throw std::invalid_argument("conditional_density: xi must have unit norm");
    return density_unchecked(xi, delta_angle);
}

double sample_estimate(std::span<const double> xi, SplitMix64& rng, long long max_iters) {
    double coeff_sum = 0.0;
    for (double v : xi) coeff_sum += v;
    const double envelope = coeff_sum * coeff_sum / kTwoPi;  // peak of p at delta = 0
    for (long long it = 0; it < max_iters; ++it) {
        const double delta = kTwoPi * rng.next_double();
        const double height = envelope * rng.next_double();
        if (height < density_unchecked(xi, delta)) return delta;
    }
    throw std::runtime_error("sample_estimate: rejection cap exceeded");
}

SimulationReport simulate(const FiducialState& state, const AbstentionBudget& budget,
                          const FilterSolution& sol, const SimulationConfig& cfg) {
    if (cfg.shots < 1) throw std::invalid_argument("simulate: shots must be >= 1");
    if (sol.xi.size() != state.coeffs.size() || sol.filter_diag.size() != state.coeffs.size())
        throw std::invalid_argument("simulate: solution does not match the state");

    double abstain_prob = 0.0;  // sum_j f_j c_j^2, theta-independent
    for (std::size_t j = 0; j < state.coeffs.size(); ++j)
        abstain_prob += sol.filter_diag[j] * state.coeffs[j] * state.coeffs[j];
    // Any filter built from a unit-norm xi spends the budget exactly, so a
    // mismatch here means the caller paired the solution with the wrong q.
    if (std::abs(abstain_prob - budget.q) > 1e-6)
        throw std::invalid_argument("simulate: filter does not match the abstention budget");

    constexpr long long kBlock = 4096;
    const std::size_t n_blocks =
        static_cast<std::size_t>((cfg.shots + kBlock - 1) / kBlock);
    std::vector<BlockPartial> partials(n_blocks);

    parallel_for(n_blocks, [&](std::size_t b) {
        BlockPartial acc;
        const long long begin = static_cast<long long>(b) * kBlock;
        const long long end = std::min(cfg.shots, begin + kBlock);
        for (long long shot = begin; shot < end; ++shot) {
            SplitMix64 rng = substream(cfg.seed, static_cast<std::uint64_t>(shot));
            const double theta = kTwoPi * rng.next_double();
            if (rng.next_double() < abstain_prob) continue;  // inconclusive outcome
            const double delta = sample_estimate(sol.xi, rng, cfg.max_rejection_iters);
            const double theta_hat = std::fmod(theta + delta, kTwoPi);
            const double score = 0.5 * (1.0 + std::cos(theta - theta_hat));
            acc.accepted += 1;
            acc.sum += score;
            acc.sum_sq += score * score;
        }
        partials[b] = acc;
    });

    const BlockPartial total = reduce_pairwise(partials, 0, partials.size());

    SimulationReport report;
    report.shots = cfg.shots;
    report.accepted = total.accepted;
    report.empirical_q =
        1.0 - static_cast<double>(total.accepted) / static_cast<double>(cfg.shots);
    report.exact_q = abstain_prob;
    report.exact_fidelity = sol.fidelity;
    if (total.accepted > 0) {
        const double m = static_cast<double>(total.accepted);
        report.empirical_fidelity = total.sum / m;
        if (total.accepted > 1) {
            const double var =
                std::max(0.0, (total.sum_sq - total.sum * total.sum / m) / (m - 1.0));
            report.fidelity_stderr = std::sqrt(var / m);
        }
    }
    return report;
}

}  // namespace abstain
