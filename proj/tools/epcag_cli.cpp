// Command-line front end: parse a problem file, dispatch to the library,
// emit trajectories/solutions as CSV and reports as JSON.
//
// Exit codes: 0 success, 1 validation error (message names the offending
// JSON pointer), 2 numerical failure (report names the failed condition).

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "epcag/epcag.hpp"

namespace fs = std::filesystem;
using epcag::io::ordered_json;

namespace {

struct CliArgs {
    std::string problem_path;
    std::string out_dir;
    double tol = -1.0;          // > 0 overrides solver.tol
    std::vector<double> core;   // two values override solver.core
    double t_end = epcag::kInf; // finite value overrides the file's t_end
    long long seed = -1;        // >= 0 overrides the file's seed
    int trials = -1;            // >= 0 overrides stability.trials
};

struct SolverBlock {
    double core_lo = 0.0, core_hi = 20.0;
    double tol = 1e-9;
    double t_cut = -1.0; // >= 0 overrides the derived truncation margin
};

ordered_json load_document(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw epcag::ValidationError("/", "cannot open problem file " + path);
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw epcag::ValidationError("/", std::string("not valid JSON: ") + e.what());
    }
}

const std::set<std::string> kRootKeys = {"schema",    "A",     "f",        "deviations",
                                         "theta",     "dichotomy", "solver", "initial",
                                         "stability", "logistic",  "sequence", "t_end",
                                         "seed"};

void validate_root(const ordered_json& root) {
    epcag::io::require_keys(root, "", {}, kRootKeys);
    if (root.contains("schema")) {
        if (!root["schema"].is_string() ||
            root["schema"].get<std::string>() != epcag::io::kProblemSchema)
            throw epcag::ValidationError("/schema",
                                         std::string("expected ") + epcag::io::kProblemSchema);
    }
}

void require_blocks(const ordered_json& root, std::initializer_list<const char*> keys) {
    for (const char* key : keys)
        if (!root.contains(key))
            throw epcag::ValidationError(std::string("/") + key, "missing key");
}

double number_at(const ordered_json& j, const std::string& path) {
    if (!j.is_number()) throw epcag::ValidationError(path, "number expected");
    return j.get<double>();
}

long integer_at(const ordered_json& j, const std::string& path) {
    if (!j.is_number_integer()) throw epcag::ValidationError(path, "integer expected");
    return j.get<long>();
}

SolverBlock parse_solver(const ordered_json& root, const CliArgs& args) {
    SolverBlock s;
    if (root.contains("solver")) {
        const auto& j = root["solver"];
        epcag::io::require_keys(j, "/solver", {}, {"core", "tol", "t_cut"});
        if (j.contains("core")) {
            const auto& c = j["core"];
            if (!c.is_array() || c.size() != 2)
                throw epcag::ValidationError("/solver/core", "[lo, hi] expected");
            s.core_lo = number_at(c[0], "/solver/core/0");
            s.core_hi = number_at(c[1], "/solver/core/1");
        }
        if (j.contains("tol")) s.tol = number_at(j["tol"], "/solver/tol");
        if (j.contains("t_cut")) s.t_cut = number_at(j["t_cut"], "/solver/t_cut");
    }
    if (args.tol > 0.0) s.tol = args.tol;
    if (args.core.size() == 2) {
        s.core_lo = args.core[0];
        s.core_hi = args.core[1];
    }
    if (!(s.core_lo < s.core_hi))
        throw epcag::ValidationError("/solver/core", "lo must be below hi");
    if (s.tol <= 0.0) throw epcag::ValidationError("/solver/tol", "must be > 0");
    return s;
}

ordered_json solver_json(const SolverBlock& s) {
    ordered_json j;
    j["core"] = {s.core_lo, s.core_hi};
    j["tol"] = s.tol;
    if (s.t_cut >= 0.0) j["t_cut"] = s.t_cut;
    return j;
}

std::uint64_t resolve_seed(const ordered_json& root, const CliArgs& args) {
    if (args.seed >= 0) return static_cast<std::uint64_t>(args.seed);
    if (root.contains("seed")) {
        const long s = integer_at(root["seed"], "/seed");
        if (s < 0) throw epcag::ValidationError("/seed", "must be >= 0");
        return static_cast<std::uint64_t>(s);
    }
    return 1;
}

double resolve_t_end(const ordered_json& root, const CliArgs& args) {
    if (std::isfinite(args.t_end)) return args.t_end;
    if (root.contains("t_end")) return number_at(root["t_end"], "/t_end");
    throw epcag::ValidationError("/t_end", "missing key (or pass --t-end)");
}

void write_json_file(const fs::path& p, const ordered_json& j) {
    std::ofstream out(p);
    if (!out) throw epcag::ValidationError("/", "cannot write " + p.string());
    out << j.dump(2) << '\n';
}

void write_csv_file(const fs::path& p, const epcag::GridSolution& sol) {
    std::ofstream out(p);
    if (!out) throw epcag::ValidationError("/", "cannot write " + p.string());
    epcag::io::write_solution_csv(out, sol);
}

ordered_json report_head(const std::string& command) {
    ordered_json j;
    j["schema"] = epcag::io::kReportSchema;
    j["command"] = command;
    return j;
}

// --- simulate ---------------------------------------------------------------

// Compares the freshly integrated trajectory against a previously computed
// bounded solution (solution.csv in the output directory, if present) over
// the second half of their time overlap, where the transient has decayed.
std::optional<ordered_json> tail_agreement(const fs::path& csv_path,
                                           const epcag::GridSolution& traj) {
    if (!fs::exists(csv_path)) return std::nullopt;
    std::ifstream in(csv_path);
    if (!in) return std::nullopt;
    const epcag::io::CsvSolution ref = epcag::io::read_solution_csv(in);
    if (ref.t.empty() || ref.x.front().size() != traj.dim()) return std::nullopt;
    const double lo = std::max(ref.t.front(), traj.core_lo());
    const double hi = std::min(ref.t.back(), traj.core_hi());
    if (!(lo < hi)) return std::nullopt;
    const double tail_lo = 0.5 * (lo + hi);
    double sup = 0.0;
    long used = 0;
    for (std::size_t k = 0; k < ref.t.size(); ++k) {
        const double t = ref.t[k];
        if (t < tail_lo || t > hi) continue;
        sup = std::max(sup, (ref.x[k] - traj.value(t)).lpNorm<Eigen::Infinity>());
        ++used;
    }
    if (used == 0) return std::nullopt;
    ordered_json j;
    j["reference"] = csv_path.filename().string();
    j["window"] = {tail_lo, hi};
    j["samples"] = used;
    j["sup_diff"] = sup;
    return j;
}

int cmd_simulate(const ordered_json& root, const CliArgs& args, const fs::path& out) {
    require_blocks(root, {"A", "f", "deviations", "theta", "initial"});
    epcag::Problem prob = epcag::io::parse_problem(root);
    epcag::InitialData init = epcag::io::parse_initial(root["initial"], "/initial");
    const double t_end = resolve_t_end(root, args);
    const SolverBlock solver = parse_solver(root, args);

    epcag::IvpOptions opts;
    opts.rtol = std::min(solver.tol, 1e-10);
    opts.atol = opts.rtol * 1e-2;
    epcag::Trajectory traj = epcag::solve_ivp(prob, init, t_end, opts);

    write_csv_file(out / "trajectory.csv", traj);

    ordered_json rep = report_head("simulate");
    rep["continuity_defect"] = traj.continuity_defect();
    rep["node_window"] = {traj.node_lo(), traj.node_hi()};
    rep["final_time"] = t_end;
    rep["final_state"] = epcag::io::vector_json(traj.value(t_end));
    if (auto agree = tail_agreement(out / "solution.csv", traj))
        rep["bounded_tail_agreement"] = *agree;

    ordered_json config = epcag::io::problem_json(prob);
    config["initial"] = epcag::io::initial_json(init);
    config["t_end"] = t_end;
    rep["config"] = std::move(config);
    write_json_file(out / "report.json", rep);
    return 0;
}

// --- solve-ap -----------------------------------------------------------------

int cmd_solve_ap(const ordered_json& root, const CliArgs& args, const fs::path& out) {
    require_blocks(root, {"A", "f", "deviations", "theta"});
    epcag::Problem prob = epcag::io::parse_problem(root);
    const SolverBlock solver = parse_solver(root, args);

    epcag::ApOptions opts;
    opts.tol = solver.tol;
    opts.t_cut_override = solver.t_cut;
    auto [sol, rep] = epcag::picard_solve(prob, solver.core_lo, solver.core_hi, opts);

    write_csv_file(out / "solution.csv", sol);

    ordered_json j = report_head("solve-ap");
    j["solve"] = epcag::io::solve_report_json(rep);

    ordered_json config = epcag::io::problem_json(prob);
    config["dichotomy"] = epcag::io::dichotomy_json(rep.dichotomy);
    config["solver"] = solver_json(solver);
    j["config"] = std::move(config);
    write_json_file(out / "report.json", j);
    return 0;
}

// --- check ----------------------------------------------------------------------

int cmd_check(const ordered_json& root, const CliArgs& args, const fs::path& out) {
    require_blocks(root, {"A", "f", "deviations", "theta"});
    epcag::Problem prob = epcag::io::parse_problem(root);
    if (prob.f.state_dependent())
        throw epcag::ValidationError("/f", "check needs a state-independent nonlinearity");
    const SolverBlock solver = parse_solver(root, args);

    const epcag::DichotomyData d = epcag::resolve_dichotomy(prob);
    const double lipschitz = prob.f.lipschitz();
    const double mass = d.kernel_mass();
    const double margin = lipschitz * mass;
    const epcag::UniquenessReport uq = epcag::uniqueness_check(prob);

    prob.theta.ensure_time(solver.core_lo, solver.core_hi);
    const long i_lo = prob.theta.interval_index(solver.core_lo);
    const long i_hi = prob.theta.interval_index(solver.core_hi) + 1;
    const epcag::GapStats gs = prob.theta.gap_stats(i_lo, i_hi, 1.0);

    ordered_json rep = report_head("check");
    rep["dichotomy"] = epcag::io::dichotomy_json(d);
    rep["kernel_mass"] = mass;
    rep["lipschitz"] = lipschitz;
    rep["margin"] = margin;
    rep["contractive"] = margin < 1.0;
    rep["uniqueness"] = epcag::io::uniqueness_json(uq);
    rep["gap_stats"] = epcag::io::gap_stats_json(gs);
    rep["pass"] = margin < 1.0 && uq.pass;

    ordered_json config = epcag::io::problem_json(prob);
    config["dichotomy"] = epcag::io::dichotomy_json(d);
    config["solver"] = solver_json(solver);
    rep["config"] = std::move(config);
    write_json_file(out / "report.json", rep);
    return 0;
}

// --- stability --------------------------------------------------------------------

int cmd_stability(const ordered_json& root, const CliArgs& args, const fs::path& out) {
    require_blocks(root, {"A", "f", "deviations", "theta", "stability"});
    epcag::Problem prob = epcag::io::parse_problem(root);
    const SolverBlock solver = parse_solver(root, args);
    const std::uint64_t seed = resolve_seed(root, args);

    const auto& sj = root["stability"];
    epcag::io::require_keys(sj, "/stability", {"delta", "a"}, {"trials", "K", "sigma"});
    const double delta = number_at(sj["delta"], "/stability/delta");
    const double a = number_at(sj["a"], "/stability/a");
    int trials = sj.contains("trials")
                     ? static_cast<int>(integer_at(sj["trials"], "/stability/trials"))
                     : 32;
    if (args.trials >= 0) trials = args.trials;

    // Envelope constants: explicit stability block wins, then a supplied
    // one-sided dichotomy bound, then the spectral estimate.
    double K = 0.0, sigma = 0.0;
    if (sj.contains("K") || sj.contains("sigma")) {
        if (!sj.contains("K") || !sj.contains("sigma"))
            throw epcag::ValidationError("/stability", "K and sigma come as a pair");
        K = number_at(sj["K"], "/stability/K");
        sigma = number_at(sj["sigma"], "/stability/sigma");
    }

    epcag::ApOptions aopts;
    aopts.tol = solver.tol;
    aopts.t_cut_override = solver.t_cut;
    auto [xi, srep] = epcag::picard_solve(prob, solver.core_lo, solver.core_hi, aopts);

    if (K <= 0.0) {
        const epcag::DichotomyData& d =
            prob.dichotomy ? *prob.dichotomy : srep.dichotomy;
        if (!d.one_sided)
            throw epcag::ConditionFailure(
                "C6", "no one-sided envelope available; supply stability.K and sigma");
        K = d.one_sided->first;
        sigma = d.one_sided->second;
    }

    epcag::IvpOptions iopts;
    iopts.rtol = 1e-10;
    iopts.atol = 1e-12;
    const epcag::StabilityReport rep =
        epcag::stability_experiment(prob, xi, K, sigma, a, delta, trials, seed, iopts);

    write_csv_file(out / "solution.csv", xi);

    ordered_json j = report_head("stability");
    j["solve"] = epcag::io::solve_report_json(srep);
    j["stability"] = epcag::io::stability_json(rep);

    ordered_json config = epcag::io::problem_json(prob);
    config["dichotomy"] = epcag::io::dichotomy_json(srep.dichotomy);
    config["solver"] = solver_json(solver);
    ordered_json sb;
    sb["delta"] = delta;
    sb["a"] = a;
    sb["trials"] = trials;
    sb["K"] = K;
    sb["sigma"] = sigma;
    config["stability"] = std::move(sb);
    config["seed"] = seed;
    j["config"] = std::move(config);
    write_json_file(out / "report.json", j);
    return rep.envelope_ok ? 0 : 2;
}

// --- sequence ----------------------------------------------------------------------

int cmd_sequence(const ordered_json& root, const CliArgs&, const fs::path& out) {
    require_blocks(root, {"theta", "sequence"});
    epcag::SwitchingSequence seq = epcag::io::parse_theta(root["theta"], "/theta");

    const auto& qj = root["sequence"];
    epcag::io::require_keys(qj, "/sequence", {"epsilon"},
                            {"i_lo", "i_hi", "p_lo", "p_hi", "j_lo", "j_hi", "l0",
                             "density_bound"});
    epcag::EquipotentialQuery q;
    q.eps = number_at(qj["epsilon"], "/sequence/epsilon");
    if (q.eps <= 0.0) throw epcag::ValidationError("/sequence/epsilon", "must be > 0");
    long i_lo = -500, i_hi = 500;
    if (qj.contains("i_lo")) i_lo = integer_at(qj["i_lo"], "/sequence/i_lo");
    if (qj.contains("i_hi")) i_hi = integer_at(qj["i_hi"], "/sequence/i_hi");
    if (i_hi <= i_lo) throw epcag::ValidationError("/sequence/i_hi", "window is empty");
    if (qj.contains("p_lo")) q.p_lo = integer_at(qj["p_lo"], "/sequence/p_lo");
    if (qj.contains("p_hi")) q.p_hi = integer_at(qj["p_hi"], "/sequence/p_hi");
    if (qj.contains("j_lo")) q.j_lo = integer_at(qj["j_lo"], "/sequence/j_lo");
    if (qj.contains("j_hi")) q.j_hi = integer_at(qj["j_hi"], "/sequence/j_hi");
    double l0 = 1.0;
    if (qj.contains("l0")) l0 = number_at(qj["l0"], "/sequence/l0");
    if (qj.contains("density_bound"))
        q.density_bound = number_at(qj["density_bound"], "/sequence/density_bound");

    seq.ensure_index(i_lo, i_hi);
    const epcag::GapStats gs = seq.gap_stats(i_lo, i_hi, l0);
    q.tau_lo = 0.0;
    q.tau_hi = static_cast<double>(q.p_hi) * gs.max_gap;
    const epcag::EquipotentialReport er = epcag::equipotential_diagnostic(seq, i_lo, i_hi, q);

    ordered_json rep = report_head("sequence");
    rep["gap_stats"] = epcag::io::gap_stats_json(gs);
    rep["common_periods"] = epcag::io::almost_periods_json(er.common);
    rep["real_shifts"] = epcag::io::almost_periods_json(er.real_shifts);

    ordered_json config;
    config["schema"] = epcag::io::kProblemSchema;
    config["theta"] = epcag::io::theta_json(seq);
    ordered_json sq;
    sq["epsilon"] = q.eps;
    sq["i_lo"] = i_lo;
    sq["i_hi"] = i_hi;
    sq["p_lo"] = q.p_lo;
    sq["p_hi"] = q.p_hi;
    sq["j_lo"] = q.j_lo;
    sq["j_hi"] = q.j_hi;
    sq["l0"] = l0;
    config["sequence"] = std::move(sq);
    rep["config"] = std::move(config);
    write_json_file(out / "report.json", rep);
    return 0;
}

// --- logistic ----------------------------------------------------------------------

int cmd_logistic(const ordered_json& root, const CliArgs& args, const fs::path& out) {
    require_blocks(root, {"logistic"});
    const epcag::LogisticProblem lp = epcag::io::parse_logistic(root["logistic"], "/logistic");
    const SolverBlock solver = parse_solver(root, args);

    epcag::LogisticOptions opts;
    opts.tol = solver.tol;
    auto [sol, rep] = epcag::logistic_fixed_point(lp, solver.core_lo, solver.core_hi, opts);

    write_csv_file(out / "solution.csv", sol);

    ordered_json j = report_head("logistic");
    j["mean"] = epcag::mean_value(lp.a).numeric;
    j["logistic"] = epcag::io::logistic_report_json(rep);

    if (root["logistic"].contains("N0")) {
        const double n0 = number_at(root["logistic"]["N0"], "/logistic/N0");
        double t_end = 20.0;
        if (std::isfinite(args.t_end)) t_end = args.t_end;
        else if (root.contains("t_end")) t_end = number_at(root["t_end"], "/t_end");
        epcag::IvpOptions sopts;
        sopts.rtol = opts.rtol;
        sopts.atol = opts.rtol * 1e-2;
        epcag::Trajectory traj = epcag::simulate_logistic(lp, n0, t_end, sopts);
        write_csv_file(out / "trajectory.csv", traj);
        ordered_json sim;
        sim["N0"] = n0;
        sim["t_end"] = t_end;
        sim["final"] = traj.value(t_end)(0);
        double min_val = epcag::kInf;
        for (long i = 0; i <= traj.node_hi(); ++i) min_val = std::min(min_val, traj.node(i)(0));
        sim["min_node"] = min_val;
        j["simulation"] = std::move(sim);
    }

    ordered_json config;
    config["schema"] = epcag::io::kProblemSchema;
    config["logistic"] = epcag::io::logistic_json(lp);
    if (root["logistic"].contains("N0")) config["logistic"]["N0"] = root["logistic"]["N0"];
    config["solver"] = solver_json(solver);
    if (root.contains("t_end")) config["t_end"] = root["t_end"];
    j["config"] = std::move(config);
    write_json_file(out / "report.json", j);
    return 0;
}

// --- error reporting -----------------------------------------------------------------

void write_error_report(const fs::path& out, const std::string& command,
                        const std::string& type, const std::string& message,
                        const std::string& condition = {}) {
    std::error_code ec;
    if (out.empty() || !fs::exists(out, ec)) return;
    ordered_json rep = report_head(command);
    rep["error"]["type"] = type;
    if (!condition.empty()) rep["error"]["condition"] = condition;
    rep["error"]["message"] = message;
    std::ofstream f(out / "report.json");
    if (f) f << rep.dump(2) << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bounded and almost periodic solutions of differential equations "
                 "with piecewise constant arguments"};
    app.require_subcommand(1);
    app.fallthrough();

    CliArgs args;
    app.add_option("--problem", args.problem_path, "problem file (JSON)")->required();
    app.add_option("--out", args.out_dir, "output directory")->required();
    app.add_option("--tol", args.tol, "solver tolerance override");
    app.add_option("--core", args.core, "core window override: lo hi")->expected(2);
    app.add_option("--t-end", args.t_end, "integration horizon override");
    app.add_option("--seed", args.seed, "random seed override");
    app.add_option("--trials", args.trials, "stability trial count override");

    for (const char* name : {"simulate", "solve-ap", "check", "stability", "sequence",
                             "logistic"})
        app.add_subcommand(name)->fallthrough();

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    fs::path out(args.out_dir);
    try {
        std::error_code ec;
        fs::create_directories(out, ec);
        if (ec) throw epcag::ValidationError("/", "cannot create output directory " +
                                                      out.string());
        const ordered_json root = load_document(args.problem_path);
        validate_root(root);

        if (command == "simulate") return cmd_simulate(root, args, out);
        if (command == "solve-ap") return cmd_solve_ap(root, args, out);
        if (command == "check") return cmd_check(root, args, out);
        if (command == "stability") return cmd_stability(root, args, out);
        if (command == "sequence") return cmd_sequence(root, args, out);
        return cmd_logistic(root, args, out);
    } catch (const epcag::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        write_error_report(out, command, "validation", e.what());
        return 1;
    } catch (const epcag::ConditionFailure& e) {
        std::cerr << "error: condition " << e.condition() << ": " << e.what() << '\n';
        write_error_report(out, command, "condition", e.what(), e.condition());
        return 2;
    } catch (const epcag::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        write_error_report(out, command, "numerical", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        write_error_report(out, command, "internal", e.what());
        return 2;
    }
}
