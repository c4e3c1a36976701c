#include "abstain/probe_states.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace abstain {

namespace {

double sum_of_squares(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

}  // namespace

void validate_state(const FiducialState& state) {
    if (state.n < 0) throw std::invalid_argument("state: n must be nonnegative");
    if (state.coeffs.size() != static_cast<std::size_t>(state.n) + 1)
        throw std::invalid_argument("state: coeffs must have exactly n+1 entries");
    for (double c : state.coeffs)
        if (!(c >= 0.0)) throw std::invalid_argument("state: coefficients must be nonnegative");
    if (std::abs(sum_of_squares(state.coeffs) - 1.0) > 1e-12)
        throw std::invalid_argument("state: coefficients are not normalized");
}

FiducialState make_phase_state(int n) {
    if (n < 1) throw std::invalid_argument("make_phase_state: n must be >= 1");
    FiducialState state;
    state.n = n;
    state.coeffs.assign(static_cast<std::size_t>(n) + 1, 1.0 / std::sqrt(n + 1.0));
    state.label = "phase";
    validate_state(state);
    return state;
}

FiducialState make_copies_state(int n) {
    if (n < 1) throw std::invalid_argument("make_copies_state: n must be >= 1");
    FiducialState state;
    state.n = n;
    state.coeffs.resize(static_cast<std::size_t>(n) + 1);
    const double log_half_n = -0.5 * n * std::log(2.0);
    const double lg_n = std::lgamma(n + 1.0);
    // Fill the lower half and mirror it so c_j = c_{n-j} holds bitwise; the
    // lgamma difference would otherwise round differently on the two sides.
    for (int j = 0; 2 * j <= n; ++j) {
        const double log_binom = lg_n - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0);
        const double value = std::exp(log_half_n + 0.5 * log_binom);
        state.coeffs[static_cast<std::size_t>(j)] = value;
        state.coeffs[static_cast<std::size_t>(n - j)] = value;
    }
    // Log-gamma rounding leaves the norm off by ~1e-13 at large n; scrub it.
    const double norm = std::sqrt(sum_of_squares(state.coeffs));
    for (double& c : state.coeffs) c /= norm;
    state.label = "copies";
    validate_state(state);
    return state;
}

FiducialState load_state(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("load_state: cannot open " + path.string());

    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("load_state: parse failure in " + path.string() + ": " + e.what());
    }

    FiducialState state;
    try {
        state.n = doc.at("n").get<int>();
        state.coeffs = doc.at("coeffs").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("load_state: bad schema in " + path.string() + ": " + e.what());
    }
    state.label = "file:" + path.filename().string();

    if (state.n < 0) throw std::invalid_argument("load_state: n must be nonnegative");
    if (state.coeffs.size() != static_cast<std::size_t>(state.n) + 1)
        throw std::invalid_argument("load_state: coeffs length does not match n+1");
    for (double c : state.coeffs)
        if (!(c >= 0.0)) throw std::invalid_argument("load_state: negative coefficient entry");

    const double norm = std::sqrt(sum_of_squares(state.coeffs));
    if (std::abs(norm - 1.0) > 1e-9)
        throw std::invalid_argument("load_state: norm " + std::to_string(norm) +
                                    " deviates from 1 by more than 1e-9");
    for (double& c : state.coeffs) c /= norm;

    validate_state(state);
    return state;
}

double relative_entropy_bernoulli(double t) {
    if (!(t >= 0.0 && t <= 1.0))
        throw std::invalid_argument("relative_entropy_bernoulli: t must lie in [0,1]");
    const double a = (t > 0.0) ? t * std::log(t) : 0.0;
    const double b = (t < 1.0) ? (1.0 - t) * std::log(1.0 - t) : 0.0;
    return std::log(2.0) + a + b;
}

double continuum_profile(StateFamily family, double t, int n) {
    if (!(t >= 0.0 && t <= 1.0))
        throw std::invalid_argument("continuum_profile: t must lie in [0,1]");
    if (n < 1) throw std::invalid_argument("continuum_profile: n must be >= 1");
    if (family == StateFamily::phase) return 1.0;
    if (t == 0.0 || t == 1.0) return 0.0;
    const double algebraic = std::pow(n / (2.0 * M_PI * t * (1.0 - t)), 0.25);
    return algebraic * std::exp(-0.5 * n * relative_entropy_bernoulli(t));
}

double copies_gaussian_profile(double t, int n) {
    if (!(t >= 0.0 && t <= 1.0))
        throw std::invalid_argument("copies_gaussian_profile: t must lie in [0,1]");
    if (n < 1) throw std::invalid_argument("copies_gaussian_profile: n must be >= 1");
    const double tau = t - 0.5;
    return std::pow(2.0 * n / M_PI, 0.25) * std::exp(-n * tau * tau);
}

}  // namespace abstain
