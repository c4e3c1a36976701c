#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "abstain/probe_states.hpp"
#include "doctest.h"
#include "support/test_oracles.hpp"

using namespace abstain;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = "/tmp/" + name;
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("phase states are equal superpositions") {
    const FiducialState one = make_phase_state(1);
    CHECK(one.coeffs.size() == 2);
    CHECK(one.coeffs[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));

    const FiducialState two = make_phase_state(2);
    for (double c : two.coeffs) CHECK(c == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));

    const FiducialState big = make_phase_state(100);
    CHECK(big.coeffs.size() == 101);
    double norm_sq = 0.0;
    for (double c : big.coeffs) {
        CHECK(c == doctest::Approx(1.0 / std::sqrt(101.0)).epsilon(1e-15));
        norm_sq += c * c;
    }
    CHECK(norm_sq == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(big.label == "phase");

    CHECK_THROWS_AS(make_phase_state(0), std::invalid_argument);
}

TEST_CASE("copies states carry square-root binomial amplitudes") {
    const FiducialState one = make_copies_state(1);
    CHECK(one.coeffs[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
    CHECK(one.coeffs[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));

    const FiducialState two = make_copies_state(2);
    CHECK(two.coeffs[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(two.coeffs[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
    CHECK(two.coeffs[2] == doctest::Approx(0.5).epsilon(1e-14));

    // Log-space construction keeps the norm despite astronomical binomials.
    const FiducialState big = make_copies_state(400);
    double norm_sq = 0.0;
    for (double c : big.coeffs) norm_sq += c * c;
    CHECK(std::abs(norm_sq - 1.0) <= 1e-10);

    CHECK_THROWS_AS(make_copies_state(0), std::invalid_argument);
}

TEST_CASE("built-in families are mirror symmetric") {
    for (int n : {1, 2, 7, 40}) {
        const FiducialState phase = make_phase_state(n);
        const FiducialState copies = make_copies_state(n);
        for (int j = 0; j <= n; ++j) {
            CHECK(phase.coeffs[static_cast<std::size_t>(j)] ==
                  phase.coeffs[static_cast<std::size_t>(n - j)]);
            CHECK(copies.coeffs[static_cast<std::size_t>(j)] ==
                  copies.coeffs[static_cast<std::size_t>(n - j)]);
        }
    }
}

TEST_CASE("load_state accepts near-normalized files and renormalizes") {
    const std::string path =
        write_temp("state_ok.json", R"({"n":1,"coeffs":[0.707106781,0.707106781]})");
    const FiducialState st = load_state(path);
    CHECK(st.n == 1);
    double norm_sq = 0.0;
    for (double c : st.coeffs) norm_sq += c * c;
    CHECK(norm_sq == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(st.coeffs[0] == doctest::Approx(make_phase_state(1).coeffs[0]).epsilon(1e-9));
}

TEST_CASE("load_state rejects malformed inputs") {
    CHECK_THROWS_AS(
        load_state(write_temp("state_neg.json", R"({"n":2,"coeffs":[0.5,-0.1,0.86]})")),
        std::invalid_argument);
    CHECK_THROWS_AS(load_state(write_temp("state_norm.json", R"({"n":2,"coeffs":[1,1,1]})")),
                    std::invalid_argument);
    CHECK_THROWS_AS(load_state(write_temp("state_len.json", R"({"n":3,"coeffs":[1,0]})")),
                    std::invalid_argument);
    CHECK_THROWS_AS(load_state(write_temp("state_syntax.json", "{not json")),
                    std::invalid_argument);
    CHECK_THROWS_AS(load_state("/tmp/definitely_missing_state.json"), std::invalid_argument);
}

TEST_CASE("validate_state enforces the documented invariants") {
    FiducialState bad{2, {0.6, 0.8}, "short"};
    CHECK_THROWS_AS(validate_state(bad), std::invalid_argument);
    FiducialState off_norm{1, {0.6, 0.9}, "norm"};
    CHECK_THROWS_AS(validate_state(off_norm), std::invalid_argument);
}

TEST_CASE("Bernoulli relative entropy endpoints and values") {
    CHECK(relative_entropy_bernoulli(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(relative_entropy_bernoulli(1.0) == std::log(2.0));
    CHECK(relative_entropy_bernoulli(0.0) == std::log(2.0));
    const double expected =
        std::log(2.0) + 0.75 * std::log(0.75) + 0.25 * std::log(0.25);
    CHECK(relative_entropy_bernoulli(0.75) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(relative_entropy_bernoulli(0.75) == doctest::Approx(0.13081).epsilon(1e-4));
    CHECK(relative_entropy_bernoulli(0.3) ==
          doctest::Approx(relative_entropy_bernoulli(0.7)).epsilon(1e-15));
    CHECK_THROWS_AS(relative_entropy_bernoulli(-0.1), std::invalid_argument);
}

TEST_CASE("continuum profiles: values, limits, and normalization") {
    CHECK(continuum_profile(StateFamily::phase, 0.3, 50) == 1.0);
    CHECK(continuum_profile(StateFamily::phase, 0.0, 5) == 1.0);

    const int n = 100;
    CHECK(continuum_profile(StateFamily::copies, 0.5, n) ==
          doctest::Approx(std::pow(2.0 * n / M_PI, 0.25)).epsilon(1e-14));
    CHECK(continuum_profile(StateFamily::copies, 0.0, n) == 0.0);
    CHECK(continuum_profile(StateFamily::copies, 1.0, n) == 0.0);

    // Near the center the full form collapses to the Gaussian variant.
    const double full = continuum_profile(StateFamily::copies, 0.55, n);
    const double gauss = copies_gaussian_profile(0.55, n);
    CHECK(std::abs(full - gauss) / full <= 0.01);

    // The squared profile integrates to 1 + O(1/n); allow that correction.
    for (int big : {100, 400}) {
        const double integral = oracles::trapezoid(
            [&](double t) {
                const double p = continuum_profile(StateFamily::copies, t, big);
                return p * p;
            },
            0.0, 1.0, 10001);
        CHECK(std::abs(integral - 1.0) <= 0.4 / big);
    }
}

TEST_CASE("discrete copies amplitudes converge to the continuum profile") {
    const int n = 400;
    const FiducialState st = make_copies_state(n);
    for (double t : {0.4, 0.5, 0.6}) {
        const std::size_t j = static_cast<std::size_t>(t * n);
        const double discrete = std::sqrt(static_cast<double>(n)) * st.coeffs[j];
        const double continuum = continuum_profile(StateFamily::copies, t, n);
        CHECK(std::abs(discrete - continuum) / continuum <= 0.02);
    }
}

TEST_CASE("Gaussian variant integrates to one in square") {
    const double integral = oracles::trapezoid(
        [](double t) {
            const double p = copies_gaussian_profile(t, 100);
            return p * p;
        },
        0.0, 1.0, 20001);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
}
