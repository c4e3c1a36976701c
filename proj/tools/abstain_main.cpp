// abstain: optimal phase estimation with an abstention budget.
//
// Subcommands expose the solver and analytic results as machine-readable
// records: every emitted file carries a reproducibility header with the full
// parameter set, and reals are printed with 17 significant digits so parsing
// them back yields the same doubles.

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "abstain/asymptotics.hpp"
#include "abstain/exact_solver.hpp"
#include "abstain/parallel.hpp"
#include "abstain/povm_sim.hpp"
#include "abstain/probe_states.hpp"
#include "abstain/version.hpp"

namespace {

using namespace abstain;

enum class FamilyKind { phase, copies, external };

std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char ch : s) {
        switch (ch) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(ch) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", ch);
                    out += buf;
                } else {
                    out += ch;
                }
        }
    }
    return out;
}

// Flat ordered key/value list; enough structure for RunRecord emission while
// keeping full control of the number formatting.
struct JValue {
    enum class Kind { str, real, integer, boolean } kind;
    std::string s;
    double d = 0.0;
    long long i = 0;
    bool b = false;

    static JValue str(std::string v) { return {Kind::str, std::move(v), 0.0, 0, false}; }
    static JValue real(double v) { return {Kind::real, {}, v, 0, false}; }
    static JValue integer(long long v) { return {Kind::integer, {}, 0.0, v, false}; }
    static JValue boolean(bool v) { return {Kind::boolean, {}, 0.0, 0, v}; }

    std::string render() const {
        switch (kind) {
            case Kind::str: return "\"" + json_escape(s) + "\"";
            case Kind::real: return fmt_real(d);
            case Kind::integer: return std::to_string(i);
            case Kind::boolean: return b ? "true" : "false";
        }
        return "null";
    }
};

using JObject = std::vector<std::pair<std::string, JValue>>;

std::string render_object(const JObject& obj) {
    std::string out = "{";
    for (std::size_t k = 0; k < obj.size(); ++k) {
        if (k) out += ",";
        out += "\"" + json_escape(obj[k].first) + "\":" + obj[k].second.render();
    }
    return out + "}";
}

std::string iso_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string run_record(const std::string& command, const JObject& params,
                       const std::vector<JObject>* outputs) {
    std::string out = "{\"command\":\"" + json_escape(command) + "\",";
    out += "\"parameters\":" + render_object(params) + ",";
    if (outputs) {
        out += "\"outputs\":[";
        for (std::size_t k = 0; k < outputs->size(); ++k) {
            if (k) out += ",";
            out += render_object((*outputs)[k]);
        }
        out += "],";
    }
    out += "\"artifact_version\":\"" + std::string(artifact_version) + "\",";
    out += "\"timestamp\":\"" + iso_timestamp() + "\"}";
    return out;
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open output file: " + path);
    file << content;
    if (!file.flush()) throw std::runtime_error("write failed: " + path);
}

struct ResolvedState {
    FiducialState state;
    FamilyKind family = FamilyKind::external;
};

ResolvedState resolve_state(const std::string& spec, int n) {
    if (spec == "phase") {
        if (n < 1) throw std::invalid_argument("--n must be >= 1 for the phase family");
        return {make_phase_state(n), FamilyKind::phase};
    }
    if (spec == "copies") {
        if (n < 1) throw std::invalid_argument("--n must be >= 1 for the copies family");
        return {make_copies_state(n), FamilyKind::copies};
    }
    if (spec.rfind("file:", 0) == 0) {
        ResolvedState rs{load_state(spec.substr(5)), FamilyKind::external};
        if (n > 0 && n != rs.state.n)
            throw std::invalid_argument("--n disagrees with the coefficient count in the file");
        return rs;
    }
    throw std::invalid_argument("--state must be phase, copies, or file:<path>");
}

FilterSolution solve_checked(const FiducialState& state, const AbstentionBudget& budget) {
    FilterSolution sol = solve(state, budget);
    if (!sol.converged)
        throw std::runtime_error("solver did not converge for q = " + fmt_real(budget.q));
    return sol;
}

// Asymptotic 1-F reference for a built-in family. The q = 0 phase value is
// the exact closed form (it has no separate asymptotic expansion).
double asymptotic_fidelity(FamilyKind family, int n, double q) {
    if (family == FamilyKind::phase) {
        if (q == 0.0) return 1.0 - 0.5 / (n + 1.0);
        return phase_state_fidelity_asym(n, q);
    }
    if (family == FamilyKind::copies) {
        const double ns = q == 0.0 ? 0.5 : copies_shotnoise_ns_at_q(q);
        return 1.0 - ns / (2.0 * n);
    }
    throw std::invalid_argument("asymptotic forms exist for the built-in families only");
}

struct CommonFlags {
    std::string state_spec = "phase";
    int n = 0;
    std::string out = "-";
};

int run_fidelity(const CommonFlags& common, double q, const std::string& method) {
    const ResolvedState rs = resolve_state(common.state_spec, common.n);
    const AbstentionBudget budget(q);
    const CriticalRate rate = critical_abstention(rs.state);

    JObject row;
    if (method == "exact" || method == "both") {
        const FilterSolution sol = solve_checked(rs.state, budget);
        row.emplace_back("F", JValue::real(sol.fidelity));
        row.emplace_back("delta", JValue::real(sol.delta));
    }
    if (method == "asymptotic" || method == "both") {
        const double f_asym = asymptotic_fidelity(rs.family, rs.state.n, q);
        if (method == "asymptotic") {
            row.emplace_back("F", JValue::real(f_asym));
            row.emplace_back("delta", JValue::real(2.0 * f_asym - 1.0));
        } else {
            row.emplace_back("F_asymptotic", JValue::real(f_asym));
            row.emplace_back("residual", JValue::real(std::abs(row[0].second.d - f_asym)));
        }
    }
    row.emplace_back("q_star", JValue::real(rate.q_star));
    row.emplace_back("F_star", JValue::real(rate.f_star));

    const JObject params = {{"state", JValue::str(common.state_spec)},
                            {"n", JValue::integer(rs.state.n)},
                            {"q", JValue::real(q)},
                            {"method", JValue::str(method)}};
    const std::vector<JObject> outputs = {row};
    write_output(common.out, run_record("fidelity", params, &outputs) + "\n");
    return 0;
}

int run_curve(const CommonFlags& common, double q_min, double q_max, double q_step) {
    const ResolvedState rs = resolve_state(common.state_spec, common.n);
    if (rs.family == FamilyKind::external)
        throw std::invalid_argument("curve needs a built-in family for its analytic column");
    if (!(q_step > 0.0) || !(q_min >= 0.0) || !(q_max < 1.0) || q_min > q_max)
        throw std::invalid_argument("curve grid must satisfy 0 <= q-min <= q-max < 1, q-step > 0");

    std::vector<double> grid;
    for (int k = 0;; ++k) {
        const double q = q_min + k * q_step;
        if (q > q_max + 1e-9 * q_step) break;
        grid.push_back(std::min(q, q_max));
    }
    if (grid.empty()) throw std::invalid_argument("curve grid is empty");

    const int n = rs.state.n;
    struct Row {
        double q, f_exact, ns_exact, ns_ref, deviation;
    };
    std::vector<Row> rows(grid.size());
    parallel_for(grid.size(), [&](std::size_t k) {
        const double q = grid[k];
        const FilterSolution sol = solve_checked(rs.state, AbstentionBudget(q));
        const double ns_exact = 2.0 * n * (1.0 - sol.fidelity);
        const double ns_ref = 2.0 * n * (1.0 - asymptotic_fidelity(rs.family, n, q));
        rows[k] = {q, sol.fidelity, ns_exact, ns_ref, std::abs(ns_exact - ns_ref)};
    });

    const JObject params = {{"state", JValue::str(common.state_spec)},
                            {"n", JValue::integer(n)},
                            {"q_min", JValue::real(q_min)},
                            {"q_max", JValue::real(q_max)},
                            {"q_step", JValue::real(q_step)}};
    const char* ref_name = rs.family == FamilyKind::copies ? "NS_parametric" : "NS_asymptotic";
    std::string csv = "# " + run_record("curve", params, nullptr) + "\n";
    csv += std::string("q,F_exact,NS_exact,") + ref_name + ",abs_deviation\n";
    for (const Row& r : rows)
        csv += fmt_real(r.q) + "," + fmt_real(r.f_exact) + "," + fmt_real(r.ns_exact) + "," +
               fmt_real(r.ns_ref) + "," + fmt_real(r.deviation) + "\n";
    write_output(common.out, csv);
    return 0;
}

int run_profile(const CommonFlags& common, double lambda) {
    const ResolvedState rs = resolve_state(common.state_spec, common.n);
    if (rs.family == FamilyKind::external)
        throw std::invalid_argument("profile needs a built-in family for its analytic column");
    const int n = rs.state.n;
    const double q = 1.0 - 1.0 / (lambda * lambda);
    const FilterSolution sol = solve_checked(rs.state, AbstentionBudget(q));

    const double sqrt_n = std::sqrt(static_cast<double>(n));
    auto analytic = [&](double t) {
        if (rs.family == FamilyKind::copies) return copies_profile(n, lambda, t);
        if (q == 0.0) return (t == 0.0 || t == 1.0) ? 0.0 : 1.0;  // cap never binds
        return phase_state_profile(q, t);
    };

    const JObject params = {{"state", JValue::str(common.state_spec)},
                            {"n", JValue::integer(n)},
                            {"lambda", JValue::real(lambda)}};
    std::string csv = "# " + run_record("profile", params, nullptr) + "\n";
    csv += "j,t,sqrtN_xi,phi_analytic,lambda_psi\n";
    for (int j = 0; j <= n; ++j) {
        const double t = static_cast<double>(j) / n;
        csv += std::to_string(j) + "," + fmt_real(t) + "," +
               fmt_real(sqrt_n * sol.xi[static_cast<std::size_t>(j)]) + "," +
               fmt_real(analytic(t)) + "," +
               fmt_real(lambda * sqrt_n * rs.state.coeffs[static_cast<std::size_t>(j)]) + "\n";
    }
    write_output(common.out, csv);
    return 0;
}

int run_simulate(const CommonFlags& common, double q, long long shots, std::uint64_t seed) {
    const ResolvedState rs = resolve_state(common.state_spec, common.n);
    const AbstentionBudget budget(q);
    const FilterSolution sol = solve_checked(rs.state, budget);
    SimulationConfig cfg;
    cfg.shots = shots;
    cfg.seed = seed;
    const SimulationReport rep = simulate(rs.state, budget, sol, cfg);

    const JObject params = {{"state", JValue::str(common.state_spec)},
                            {"n", JValue::integer(rs.state.n)},
                            {"q", JValue::real(q)},
                            {"shots", JValue::integer(shots)},
                            {"seed", JValue::integer(static_cast<long long>(seed))}};
    const std::vector<JObject> outputs = {
        {{"shots", JValue::integer(rep.shots)},
         {"accepted", JValue::integer(rep.accepted)},
         {"empirical_q", JValue::real(rep.empirical_q)},
         {"empirical_fidelity", JValue::real(rep.empirical_fidelity)},
         {"fidelity_stderr", JValue::real(rep.fidelity_stderr)},
         {"exact_q", JValue::real(rep.exact_q)},
         {"exact_fidelity", JValue::real(rep.exact_fidelity)}}};
    write_output(common.out, run_record("simulate", params, &outputs) + "\n");
    return 0;
}

int run_critical(const CommonFlags& common) {
    const ResolvedState rs = resolve_state(common.state_spec, common.n);
    const CriticalRate rate = critical_abstention(rs.state);
    const JObject params = {{"state", JValue::str(common.state_spec)},
                            {"n", JValue::integer(rs.state.n)}};
    const std::vector<JObject> outputs = {
        {{"q_star", JValue::real(rate.q_star)},
         {"F_star", JValue::real(rate.f_star)},
         {"argmin_index", JValue::integer(rate.argmin_index)},
         {"limit_only", JValue::boolean(rate.limit_only)}}};
    write_output(common.out, run_record("critical", params, &outputs) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"optimal phase estimation with abstention: exact solver, asymptotics, simulation"};
    app.require_subcommand(1);

    CommonFlags common;
    double q = 0.0;
    std::string method = "exact";
    double q_min = 0.0, q_max = 0.95, q_step = 0.05;
    double lambda = 1.5;
    long long shots = 100000;
    std::uint64_t seed = 42;

    auto add_common = [&](CLI::App* sub, bool with_n_required) {
        sub->add_option("--state", common.state_spec, "phase | copies | file:<path>")
            ->capture_default_str();
        auto* n_opt = sub->add_option("--n", common.n, "number of probes / copies N");
        if (with_n_required) n_opt->check(CLI::PositiveNumber);
        sub->add_option("--out", common.out, "output path ('-' for stdout)")
            ->capture_default_str();
    };

    auto* fid = app.add_subcommand("fidelity", "optimal fidelity at one abstention rate");
    add_common(fid, true);
    fid->add_option("--q", q, "abstention rate in [0,1)")
        ->required()
        ->check(CLI::Range(0.0, 1.0).description("q in [0,1)"));
    fid->add_option("--method", method, "exact | asymptotic | both")
        ->check(CLI::IsMember({"exact", "asymptotic", "both"}))
        ->capture_default_str();

    auto* curve = app.add_subcommand("curve", "fidelity trade-off across a q grid (CSV)");
    add_common(curve, true);
    curve->add_option("--q-min", q_min, "grid start")->capture_default_str();
    curve->add_option("--q-max", q_max, "grid end")->capture_default_str();
    curve->add_option("--q-step", q_step, "grid step")->capture_default_str();

    auto* profile = app.add_subcommand("profile", "transformed-state profile vs continuum (CSV)");
    add_common(profile, true);
    profile->add_option("--lambda", lambda, "cap multiplier, >= 1")
        ->check(CLI::Range(1.0, 1e9))
        ->capture_default_str();

    auto* sim = app.add_subcommand("simulate", "Monte Carlo protocol run");
    add_common(sim, true);
    sim->add_option("--q", q, "abstention rate in [0,1)")
        ->required()
        ->check(CLI::Range(0.0, 1.0).description("q in [0,1)"));
    sim->add_option("--shots", shots, "number of shots, >= 1")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sim->add_option("--seed", seed, "RNG seed")->capture_default_str();

    auto* crit = app.add_subcommand("critical", "critical abstention rate of a state");
    add_common(crit, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (fid->parsed()) return run_fidelity(common, q, method);
        if (curve->parsed()) return run_curve(common, q_min, q_max, q_step);
        if (profile->parsed()) return run_profile(common, lambda);
        if (sim->parsed()) return run_simulate(common, q, shots, seed);
        if (crit->parsed()) return run_critical(common);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
