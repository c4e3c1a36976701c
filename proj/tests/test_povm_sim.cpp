#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "doctest.h"

#include "abstain/exact_solver.hpp"
#include "abstain/povm_sim.hpp"
#include "abstain/probe_states.hpp"
#include "support/test_oracles.hpp"

using namespace abstain;

namespace {

constexpr double kTwoPi = 6.283185307179586476925;

FilterSolution solved(const FiducialState& state, double q) {
    FilterSolution sol = solve(state, AbstentionBudget(q));
    REQUIRE(sol.converged);
    return sol;
}

}  // namespace

TEST_CASE("conditional density: flat for a single-component state") {
    const std::vector<double> xi = {1.0, 0.0, 0.0};
    for (double delta : {0.0, 0.3, 1.7, 3.9, 6.2})
        CHECK(conditional_density(xi, delta) == doctest::Approx(1.0 / kTwoPi).epsilon(1e-15));
}

TEST_CASE("conditional density: rejects non-unit input") {
    const std::vector<double> bad = {0.5, 0.5};
    CHECK_THROWS_AS(conditional_density(bad, 0.0), std::invalid_argument);
}

TEST_CASE("conditional density integrates to one and reproduces the fidelity") {
    const FiducialState state = make_phase_state(12);
    const FilterSolution sol = solved(state, 0.3);

    const double mass = oracles::trapezoid(
        [&](double d) { return conditional_density(sol.xi, d); }, 0.0, kTwoPi, 4097);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));

    // E[(1 + cos delta)/2] under p(delta) must equal the solver's fidelity.
    const double mean_score = oracles::trapezoid(
        [&](double d) { return conditional_density(sol.xi, d) * 0.5 * (1.0 + std::cos(d)); },
        0.0, kTwoPi, 4097);
    CHECK(mean_score == doctest::Approx(sol.fidelity).epsilon(1e-6));
}

TEST_CASE("substreams are reproducible and decorrelated") {
    SplitMix64 a = substream(42, 7);
    SplitMix64 b = substream(42, 7);
    for (int i = 0; i < 16; ++i) CHECK(a.next() == b.next());

    SplitMix64 c = substream(42, 8);
    SplitMix64 d = substream(43, 7);
    int same_c = 0, same_d = 0;
    SplitMix64 ref = substream(42, 7);
    for (int i = 0; i < 16; ++i) {
        const std::uint64_t r = ref.next();
        same_c += (c.next() == r);
        same_d += (d.next() == r);
    }
    CHECK(same_c == 0);
    CHECK(same_d == 0);
}

TEST_CASE("rejection sampler matches the target density (chi-squared, 1e6 draws)") {
    const FiducialState state = make_phase_state(12);
    const FilterSolution sol = solved(state, 0.3);

    constexpr int kBins = 128;
    constexpr long long kDraws = 1'000'000;
    std::vector<long long> counts(kBins, 0);
    double sum_cos = 0.0, sum_cos_sq = 0.0;

    SplitMix64 rng = substream(20240818ULL, 0);
    for (long long i = 0; i < kDraws; ++i) {
        const double delta = sample_estimate(sol.xi, rng);
        REQUIRE(delta >= 0.0);
        REQUIRE(delta < kTwoPi);
        int bin = static_cast<int>(delta / kTwoPi * kBins);
        if (bin == kBins) bin = kBins - 1;
        counts[bin] += 1;
        const double c = std::cos(delta);
        sum_cos += c;
        sum_cos_sq += c * c;
    }

    // Expected counts from per-bin quadrature of the density. The density has
    // deep nulls, so starved bins are merged with their neighbors until every
    // group carries enough mass for the chi-squared approximation.
    std::vector<double> expected(kBins);
    for (int b = 0; b < kBins; ++b) {
        const double lo = kTwoPi * b / kBins;
        const double hi = kTwoPi * (b + 1) / kBins;
        expected[b] = kDraws * oracles::trapezoid(
                                   [&](double d) { return conditional_density(sol.xi, d); }, lo,
                                   hi, 129);
    }
    std::vector<double> group_obs, group_exp;
    double acc_obs = 0.0, acc_exp = 0.0;
    for (int b = 0; b < kBins; ++b) {
        acc_obs += static_cast<double>(counts[b]);
        acc_exp += expected[b];
        if (acc_exp >= 10.0) {
            group_obs.push_back(acc_obs);
            group_exp.push_back(acc_exp);
            acc_obs = acc_exp = 0.0;
        }
    }
    if (acc_exp > 0.0 && !group_exp.empty()) {  // fold the remainder back in
        group_obs.back() += acc_obs;
        group_exp.back() += acc_exp;
    }
    REQUIRE(group_exp.size() >= 30);
    double chi2 = 0.0;
    for (std::size_t g = 0; g < group_exp.size(); ++g) {
        const double diff = group_obs[g] - group_exp[g];
        chi2 += diff * diff / group_exp[g];
    }
    const double pvalue =
        oracles::chi_squared_pvalue(chi2, static_cast<int>(group_exp.size()) - 1);
    INFO("chi2 = " << chi2 << ", p = " << pvalue);
    CHECK(pvalue > 1e-3);

    // The sample mean of cos(delta) estimates the overlap Delta.
    const double m = static_cast<double>(kDraws);
    const double mean = sum_cos / m;
    const double var = (sum_cos_sq - sum_cos * sum_cos / m) / (m - 1.0);
    const double se = std::sqrt(var / m);
    CHECK(std::abs(mean - sol.delta) <= 4.0 * se);
}

TEST_CASE("simulate: statistics agree with the exact solution at 1e5 shots") {
    const FiducialState state = make_phase_state(20);
    const double q = 0.3;
    const FilterSolution sol = solved(state, q);

    SimulationConfig cfg;
    cfg.shots = 100000;
    cfg.seed = 42;
    const SimulationReport rep = simulate(state, AbstentionBudget(q), sol, cfg);

    CHECK(rep.shots == cfg.shots);
    CHECK(rep.accepted > 0);
    CHECK(rep.exact_fidelity == sol.fidelity);
    CHECK(rep.exact_q == doctest::Approx(q).epsilon(1e-9));

    const double sigma_q =
        std::sqrt(rep.exact_q * (1.0 - rep.exact_q) / static_cast<double>(cfg.shots));
    CHECK(std::abs(rep.empirical_q - rep.exact_q) <= 4.0 * sigma_q);

    REQUIRE(rep.fidelity_stderr > 0.0);
    CHECK(std::abs(rep.empirical_fidelity - rep.exact_fidelity) <= 4.0 * rep.fidelity_stderr);
}

TEST_CASE("simulate: bitwise deterministic for a fixed seed") {
    const FiducialState state = make_phase_state(9);
    const double q = 0.25;
    const FilterSolution sol = solved(state, q);

    SimulationConfig cfg;
    cfg.shots = 20000;
    cfg.seed = 1234567;
    const SimulationReport a = simulate(state, AbstentionBudget(q), sol, cfg);
    const SimulationReport b = simulate(state, AbstentionBudget(q), sol, cfg);

    CHECK(a.accepted == b.accepted);
    CHECK(a.empirical_q == b.empirical_q);
    CHECK(a.empirical_fidelity == b.empirical_fidelity);
    CHECK(a.fidelity_stderr == b.fidelity_stderr);

    SimulationConfig other = cfg;
    other.seed = 7654321;
    const SimulationReport c = simulate(state, AbstentionBudget(q), sol, other);
    CHECK(c.empirical_fidelity != a.empirical_fidelity);
}

TEST_CASE("simulate: results do not depend on the thread count") {
    const FiducialState state = make_phase_state(15);
    const double q = 0.4;
    const FilterSolution sol = solved(state, q);

    SimulationConfig cfg;
    cfg.shots = 50000;
    cfg.seed = 99;

    setenv("ABSTAIN_METROLOGY_THREADS", "1", 1);
    const SimulationReport serial = simulate(state, AbstentionBudget(q), sol, cfg);
    setenv("ABSTAIN_METROLOGY_THREADS", "4", 1);
    const SimulationReport threaded = simulate(state, AbstentionBudget(q), sol, cfg);
    unsetenv("ABSTAIN_METROLOGY_THREADS");

    CHECK(serial.accepted == threaded.accepted);
    CHECK(serial.empirical_q == threaded.empirical_q);
    CHECK(serial.empirical_fidelity == threaded.empirical_fidelity);
    CHECK(serial.fidelity_stderr == threaded.fidelity_stderr);
}

TEST_CASE("simulate: zero abstention accepts every shot") {
    const FiducialState state = make_phase_state(6);
    const FilterSolution sol = solved(state, 0.0);

    SimulationConfig cfg;
    cfg.shots = 4096 + 17;  // exercise the ragged final block
    cfg.seed = 5;
    const SimulationReport rep = simulate(state, AbstentionBudget(0.0), sol, cfg);
    CHECK(rep.accepted == rep.shots);
    CHECK(rep.empirical_q == 0.0);
    CHECK(rep.exact_q == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("simulate: input validation") {
    const FiducialState state = make_phase_state(5);
    const FilterSolution sol = solved(state, 0.2);

    SimulationConfig cfg;
    cfg.shots = 0;
    CHECK_THROWS_AS(simulate(state, AbstentionBudget(0.2), sol, cfg), std::invalid_argument);

    cfg.shots = 10;
    const FiducialState other = make_phase_state(7);
    CHECK_THROWS_AS(simulate(other, AbstentionBudget(0.2), sol, cfg), std::invalid_argument);
    CHECK_THROWS_AS(simulate(state, AbstentionBudget(0.6), sol, cfg), std::invalid_argument);
}
