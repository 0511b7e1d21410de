#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "epcag/ivp.hpp"
#include "epcag/json_io.hpp"

using namespace epcag;
using epcag::io::ordered_json;

namespace {

auto path_is = [](const std::string& want) {
    return Catch::Matchers::Predicate<ValidationError>(
        [want](const ValidationError& e) { return e.path() == want; });
};

Problem planar_document_problem() {
    Eigen::MatrixXd Am(2, 2);
    Am << -0.4, 1.0, -1.0, -0.4;
    TrigPolynomial A(Am);
    Eigen::MatrixXd wc(2, 2), ws(2, 2);
    wc << 0.3, 0.0, 0.0, 0.3;
    ws << 0.0, 0.1, -0.1, 0.0;
    A.add_term(std::sqrt(2.0), wc, ws);

    Eigen::MatrixXd C0(2, 2), C2(2, 2);
    C0 << 0.15, 0.05, 0.0, 0.1;
    C2 << 0.0, 0.2, -0.1, 0.05;
    TrigPolynomial g(Eigen::MatrixXd::Zero(2, 1));
    Eigen::MatrixXd gc(2, 1);
    gc << 1.0, 0.5;
    g.add_term(1.0, gc, Eigen::MatrixXd::Zero(2, 1));
    auto f = Nonlinearity::affine({C0, C2}, g);

    DichotomyData d;
    d.P = Eigen::MatrixXd::Identity(2, 2);
    d.K1 = 1.5;
    d.sigma1 = 0.8;
    d.one_sided = {{2.0, 0.7}};
    return Problem(A, f, {0, 2}, SwitchingSequence::perturbed(0.2, 1.0), d);
}

} // namespace

TEST_CASE("problem documents are stable under emit and reparse", "[io]") {
    Problem p = planar_document_problem();
    const ordered_json j1 = io::problem_json(p);
    Problem p2 = io::parse_problem(j1);
    const ordered_json j2 = io::problem_json(p2);
    REQUIRE(j1 == j2);

    REQUIRE(p2.dim() == 2);
    REQUIRE(p2.deviations == std::vector<long>{0, 2});
    REQUIRE(p2.theta.kind() == SwitchingSequence::Kind::perturbed);
    REQUIRE(p2.A.terms().size() == 1);
    REQUIRE(p2.A.terms()[0].omega == Catch::Approx(std::sqrt(2.0)));
    REQUIRE((p2.f.coefficients()[1] - p.f.coefficients()[1]).norm() == 0.0);
    REQUIRE(p2.dichotomy.has_value());
    REQUIRE(p2.dichotomy->one_sided->first == 2.0);

    // logistic documents round-trip the same way
    LogisticProblem lp(io::parse_trig(ordered_json{{"const", 3.0}}, "/a"), {0.05},
                       InnerKind::saturated, {1}, 1.0, SwitchingSequence::uniform(1.0));
    const ordered_json l1 = io::logistic_json(lp);
    LogisticProblem lp2 = io::parse_logistic(l1, "/logistic");
    REQUIRE(io::logistic_json(lp2) == l1);
}

TEST_CASE("unknown and missing keys are rejected with exact paths", "[io]") {
    REQUIRE_THROWS_MATCHES(
        io::parse_trig(ordered_json{{"const", 1.0}, {"bogus", 2.0}}, "/A"),
        ValidationError, path_is("/A/bogus"));
    REQUIRE_THROWS_MATCHES(io::parse_trig(ordered_json{{"terms", ordered_json::array()}}, "/A"),
                           ValidationError, path_is("/A/const"));
    REQUIRE_THROWS_MATCHES(
        io::parse_theta(ordered_json{{"kind", "uniform"}, {"gap", 1.0}, {"amplitude", 0.2}},
                        "/theta"),
        ValidationError, path_is("/theta/amplitude"));
    REQUIRE_THROWS_MATCHES(io::parse_theta(ordered_json{{"kind", "uniform"}}, "/theta"),
                           ValidationError, path_is("/theta/gap"));
    REQUIRE_THROWS_MATCHES(io::parse_theta(ordered_json{{"kind", "sometimes"}}, "/theta"),
                           ValidationError, path_is("/theta/kind"));

    ordered_json f = {{"kind", "affine"},
                      {"coefficients", ordered_json::array({0.5})},
                      {"scale", 2.0}};
    REQUIRE_THROWS_MATCHES(io::parse_f(f, "/f"), ValidationError, path_is("/f/scale"));

    ordered_json d = {{"P", 1.0},
                      {"one_sided", ordered_json{{"K", 1.0}, {"sigma", 1.0}, {"junk", 0.0}}}};
    REQUIRE_THROWS_MATCHES(io::parse_dichotomy(d, "/dichotomy"), ValidationError,
                           path_is("/dichotomy/one_sided/junk"));

    REQUIRE_THROWS_MATCHES(
        io::require_keys(ordered_json{{"cores", 1.0}}, "/solver", {}, {"core", "tol"}),
        ValidationError, path_is("/solver/cores"));
}

TEST_CASE("matrices parse from scalars, flat arrays, and row arrays", "[io]") {
    const auto m1 = io::parse_matrix(ordered_json(3.5), "/m");
    REQUIRE(m1.rows() == 1);
    REQUIRE(m1.cols() == 1);
    REQUIRE(m1(0, 0) == 3.5);

    const auto m2 = io::parse_matrix(ordered_json::array({1.0, 2.0, 3.0}), "/m");
    REQUIRE(m2.rows() == 3);
    REQUIRE(m2.cols() == 1);
    REQUIRE(m2(2, 0) == 3.0);

    const auto rows = ordered_json::array(
        {ordered_json::array({1.0, 2.0}), ordered_json::array({3.0, 4.0})});
    const auto m3 = io::parse_matrix(rows, "/m");
    REQUIRE(m3.rows() == 2);
    REQUIRE(m3.cols() == 2);
    REQUIRE(m3(1, 0) == 3.0);

    const auto ragged = ordered_json::array(
        {ordered_json::array({1.0, 2.0}), ordered_json::array({3.0})});
    REQUIRE_THROWS_MATCHES(io::parse_matrix(ragged, "/m"), ValidationError, path_is("/m/1"));
    REQUIRE_THROWS_MATCHES(io::parse_matrix(ordered_json::array(), "/m"), ValidationError,
                           path_is("/m"));
    REQUIRE_THROWS_MATCHES(
        io::parse_matrix(ordered_json::array({1.0, "x"}), "/m"), ValidationError,
        path_is("/m/1"));
}

TEST_CASE("trig terms are validated against the constant block", "[io]") {
    ordered_json bad_omega = {
        {"const", 0.0},
        {"terms", ordered_json::array({ordered_json{{"omega", -1.0}}})}};
    REQUIRE_THROWS_MATCHES(io::parse_trig(bad_omega, "/A"), ValidationError,
                           path_is("/A/terms/0/omega"));

    ordered_json bad_shape = {
        {"const", 0.0},
        {"terms", ordered_json::array(
                      {ordered_json{{"omega", 1.0}, {"cos", ordered_json::array({1.0, 2.0})}}})}};
    REQUIRE_THROWS_MATCHES(io::parse_trig(bad_shape, "/A"), ValidationError,
                           path_is("/A/terms/0"));

    // omitted cos/sin blocks default to zero
    ordered_json sin_only = {
        {"const", 2.0},
        {"terms", ordered_json::array({ordered_json{{"omega", 1.0}, {"sin", 1.0}}})}};
    const TrigPolynomial t = io::parse_trig(sin_only, "/A");
    REQUIRE(t.scalar_at(0.0) == Catch::Approx(2.0));
    REQUIRE(t.scalar_at(std::numbers::pi / 2.0) == Catch::Approx(3.0));
}

TEST_CASE("dichotomy blocks are validated", "[io]") {
    REQUIRE_THROWS_AS(io::parse_dichotomy(ordered_json{{"P", 1.0}, {"K1", -1.0}}, "/d"),
                      ValidationError);
    REQUIRE_THROWS_AS(
        io::parse_dichotomy(ordered_json{{"P", 1.0}, {"K1", 1.0}, {"sigma1", 0.0}}, "/d"),
        ValidationError);
    REQUIRE_THROWS_MATCHES(
        io::parse_dichotomy(
            ordered_json{{"P", 1.0},
                         {"one_sided", ordered_json{{"K", 0.5}, {"sigma", 1.0}}}},
            "/d"),
        ValidationError, path_is("/d/one_sided/K"));
    REQUIRE_THROWS_MATCHES(
        io::parse_dichotomy(ordered_json{{"P", ordered_json::array({1.0, 0.0})}}, "/d"),
        ValidationError, path_is("/d/P"));

    DichotomyData d;
    d.P = Eigen::MatrixXd::Identity(1, 1);
    d.K1 = 1.0;
    d.sigma1 = 2.0;
    const ordered_json j = io::dichotomy_json(d);
    const DichotomyData d2 = io::parse_dichotomy(j, "/d");
    REQUIRE(d2.K1 == 1.0);
    REQUIRE(d2.sigma2 == d.sigma2);
    REQUIRE_FALSE(d2.one_sided.has_value());
}

TEST_CASE("initial data and sequence forms round-trip", "[io]") {
    ordered_json init_doc = {{"start_index", -40},
                             {"history", ordered_json::array({ordered_json::array({0.0})})}};
    const InitialData init = io::parse_initial(init_doc, "/initial");
    REQUIRE(init.start_index() == -40);
    REQUIRE(init.lo() == -40);
    REQUIRE(init.dim() == 1);
    REQUIRE(io::parse_initial(io::initial_json(init), "/initial").at(-40)(0) == 0.0);

    // scalar history entries promote to one-dimensional states
    const InitialData flat =
        io::parse_initial(ordered_json{{"history", ordered_json::array({0.5, 1.5})}}, "/i");
    REQUIRE(flat.lo() == -1);
    REQUIRE(flat.at(0)(0) == 1.5);

    for (const SwitchingSequence& s :
         {SwitchingSequence::uniform(0.7, 0.2), SwitchingSequence::perturbed(0.3, 2.0),
          SwitchingSequence::explicit_window(-1, {-0.5, 0.4, 1.0, 2.2})}) {
        const ordered_json j = io::theta_json(s);
        const SwitchingSequence s2 = io::parse_theta(j, "/theta");
        REQUIRE(io::theta_json(s2) == j);
        REQUIRE(s2.kind() == s.kind());
    }
    REQUIRE_THROWS_MATCHES(
        io::parse_theta(ordered_json{{"kind", "explicit"},
                                     {"base_index", 0},
                                     {"values", ordered_json::array({1.0})}},
                        "/theta"),
        ValidationError, path_is("/theta/values"));
}

TEST_CASE("nonlinearity forms normalize after one emission", "[io]") {
    // affine without explicit forcing gets the zero forcing on emit
    ordered_json minimal = {{"kind", "affine"},
                            {"coefficients", ordered_json::array({0.5})}};
    const Nonlinearity f1 = io::parse_f(minimal, "/f");
    const ordered_json j1 = io::f_json(f1);
    REQUIRE(j1.contains("forcing"));
    REQUIRE(io::f_json(io::parse_f(j1, "/f")) == j1);

    ordered_json prod = {{"kind", "product_logistic"},
                         {"coefficients", ordered_json::array({0.2, 0.3})},
                         {"inner", "saturated"}};
    const Nonlinearity f2 = io::parse_f(prod, "/f");
    REQUIRE(f2.scale() == -1.0); // default
    REQUIRE(f2.inner_kind() == InnerKind::saturated);
    const ordered_json j2 = io::f_json(f2);
    REQUIRE(io::f_json(io::parse_f(j2, "/f")) == j2);

    // forcing must be a column vector
    ordered_json wide = {
        {"kind", "affine"},
        {"coefficients",
         ordered_json::array({ordered_json::array(
             {ordered_json::array({1.0, 0.0}), ordered_json::array({0.0, 1.0})})})},
        {"forcing",
         ordered_json{{"const", ordered_json::array({ordered_json::array({1.0, 2.0}),
                                                     ordered_json::array({3.0, 4.0})})}}}};
    REQUIRE_THROWS_MATCHES(io::parse_f(wide, "/f"), ValidationError, path_is("/f/forcing"));
}

TEST_CASE("solution tables survive the CSV round trip", "[io]") {
    auto A = TrigPolynomial::scalar(-1.0);
    auto g = TrigPolynomial::scalar(0.0);
    g.add_scalar_term(1.0, 1.0, 0.0);
    auto f = Nonlinearity::affine({Eigen::MatrixXd::Constant(1, 1, 0.5)}, g);
    Problem prob(A, f, {0}, SwitchingSequence::uniform(1.0));
    Eigen::VectorXd x0(1);
    x0 << 1.0;
    auto sol = solve_ivp(prob, InitialData(0, {x0}), 3.0);

    std::ostringstream os;
    io::write_solution_csv(os, sol);
    std::istringstream is(os.str());
    const io::CsvSolution back = io::read_solution_csv(is);

    // three intervals at 48 samples, shared switching times written once;
    // the final row t = 3.0 opens the trailing interval the integrator filled
    REQUIRE(back.t.size() == 3 * 47 + 1);
    REQUIRE(back.t.front() == 0.0);
    REQUIRE(back.t.back() == 3.0);
    for (std::size_t k = 0; k + 1 < back.t.size(); ++k) REQUIRE(back.t[k + 1] > back.t[k]);
    for (std::size_t k = 0; k < back.t.size(); ++k) {
        REQUIRE(back.x[k].size() == 1);
        REQUIRE(back.x[k](0) == Catch::Approx(sol.value(back.t[k])(0)).margin(1e-12));
        REQUIRE(back.interval[k] == sol.sequence().interval_index(back.t[k]));
    }

    // when the dense window ends at the core edge, the last interval keeps
    // its right endpoint
    GridSolution flat(SwitchingSequence::uniform(1.0), 0, 2, 1, 8, 0.0, 2.0);
    for (long i = 0; i <= 2; ++i) flat.set_node(i, Eigen::VectorXd::Constant(1, double(i)));
    for (long i = 0; i < 2; ++i) {
        std::vector<Eigen::VectorXd> d;
        for (int k = 0; k < 8; ++k)
            d.push_back(Eigen::VectorXd::Constant(1, flat.sample_time(i, k)));
        flat.set_dense(i, std::move(d));
    }
    std::ostringstream fs;
    io::write_solution_csv(fs, flat);
    std::istringstream fis(fs.str());
    const io::CsvSolution fb = io::read_solution_csv(fis);
    REQUIRE(fb.t.size() == 2 * 7 + 1);
    REQUIRE(fb.t.back() == 2.0);
    REQUIRE(fb.interval.back() == 1);

    std::istringstream empty("");
    REQUIRE_THROWS_AS(io::read_solution_csv(empty), ValidationError);
    std::istringstream garbled("t,x_1,interval_index\n1.0,abc,0\n");
    REQUIRE_THROWS_AS(io::read_solution_csv(garbled), ValidationError);
    std::istringstream short_row("t,x_1,interval_index\n1.0,2.0\n");
    REQUIRE_THROWS_AS(io::read_solution_csv(short_row), ValidationError);
}

// --- command-line tool ---------------------------------------------------------

namespace {

struct CliEnv {
    std::string exe;
    std::filesystem::path scratch;
};

std::optional<CliEnv> cli_env(const std::string& subdir) {
    const char* exe = std::getenv("EPCAG_CLI");
    const char* scratch = std::getenv("EPCAG_SCRATCH");
    if (!exe || !scratch) return std::nullopt;
    CliEnv env{exe, std::filesystem::path(scratch) / subdir};
    std::filesystem::create_directories(env.scratch);
    return env;
}

int run_cli(const CliEnv& env, const std::string& args) {
    const std::string cmd = env.exe + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WEXITSTATUS(rc);
}

void write_doc(const std::filesystem::path& p, const ordered_json& j) {
    std::ofstream f(p);
    REQUIRE(f.good());
    f << j.dump(2) << '\n';
}

ordered_json read_doc(const std::filesystem::path& p) {
    std::ifstream f(p);
    REQUIRE(f.good());
    return ordered_json::parse(f);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p);
    REQUIRE(f.good());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

// x' = -x + c x([t]) + cos t (+ cos sqrt(2) t), with the exact unit dichotomy
ordered_json scalar_doc(double coupling, bool second_tone) {
    ordered_json terms = ordered_json::array();
    terms.push_back(ordered_json{{"omega", 1.0}, {"cos", 1.0}});
    if (second_tone) terms.push_back(ordered_json{{"omega", std::sqrt(2.0)}, {"cos", 1.0}});
    ordered_json j;
    j["schema"] = io::kProblemSchema;
    j["A"] = ordered_json{{"const", -1.0}};
    j["f"] = ordered_json{{"kind", "affine"},
                          {"coefficients", ordered_json::array({coupling})},
                          {"forcing", ordered_json{{"const", 0.0}, {"terms", terms}}}};
    j["deviations"] = ordered_json::array({0});
    j["theta"] = ordered_json{{"kind", "uniform"}, {"gap", 1.0}};
    j["dichotomy"] =
        ordered_json{{"P", 1.0},
                     {"K1", 1.0},
                     {"sigma1", 1.0},
                     {"one_sided", ordered_json{{"K", 1.0}, {"sigma", 1.0}}}};
    j["solver"] = ordered_json{{"core", ordered_json::array({0.0, 20.0})}, {"tol", 1e-8}};
    j["initial"] = ordered_json{{"start_index", -40},
                                {"history", ordered_json::array({ordered_json::array({0.0})})}};
    j["t_end"] = 20.0;
    return j;
}

} // namespace

TEST_CASE("solve-ap runs end to end and is bit-reproducible", "[cli]") {
    auto env = cli_env("solveap");
    if (!env) SKIP("EPCAG_CLI / EPCAG_SCRATCH not set");
    const auto doc = env->scratch / "problem.json";
    write_doc(doc, scalar_doc(0.5, false));

    const auto out1 = env->scratch / "run1";
    const auto out2 = env->scratch / "run2";
    REQUIRE(run_cli(*env, "solve-ap --problem " + doc.string() + " --out " + out1.string()) ==
            0);
    REQUIRE(run_cli(*env, "solve-ap --problem " + doc.string() + " --out " + out2.string()) ==
            0);

    const ordered_json rep = read_doc(out1 / "report.json");
    REQUIRE(rep["schema"] == io::kReportSchema);
    REQUIRE(rep["command"] == "solve-ap");
    REQUIRE(rep["solve"]["margin"].get<double>() == Catch::Approx(0.5));
    REQUIRE(rep["solve"]["residual"].get<double>() < 1e-7);
    REQUIRE(rep["solve"]["fixed_point_gap"].get<double>() < 2e-8);
    REQUIRE(std::filesystem::exists(out1 / "solution.csv"));

    REQUIRE(slurp(out1 / "report.json") == slurp(out2 / "report.json"));
    REQUIRE(slurp(out1 / "solution.csv") == slurp(out2 / "solution.csv"));
}

TEST_CASE("forward simulation lands on the bounded solution tail", "[cli]") {
    auto env = cli_env("tail");
    if (!env) SKIP("EPCAG_CLI / EPCAG_SCRATCH not set");
    const auto doc = env->scratch / "problem.json";
    write_doc(doc, scalar_doc(0.5, true));

    const auto out = env->scratch / "run";
    REQUIRE(run_cli(*env, "solve-ap --problem " + doc.string() + " --out " + out.string()) ==
            0);
    REQUIRE(run_cli(*env, "simulate --problem " + doc.string() + " --out " + out.string()) ==
            0);

    const ordered_json rep = read_doc(out / "report.json");
    REQUIRE(rep["command"] == "simulate");
    REQUIRE(rep["continuity_defect"].get<double>() < 1e-9);
    REQUIRE(rep.contains("bounded_tail_agreement"));
    const auto& agree = rep["bounded_tail_agreement"];
    REQUIRE(agree["window"][0].get<double>() == Catch::Approx(10.0));
    REQUIRE(agree["window"][1].get<double>() == Catch::Approx(20.0));
    REQUIRE(agree["samples"].get<long>() > 100);
    REQUIRE(agree["sup_diff"].get<double>() < 1e-4);
    REQUIRE(std::filesystem::exists(out / "trajectory.csv"));
}

TEST_CASE("check reports the contraction margin and small-gain pass", "[cli]") {
    auto env = cli_env("check");
    if (!env) SKIP("EPCAG_CLI / EPCAG_SCRATCH not set");
    const auto doc = env->scratch / "problem.json";
    write_doc(doc, scalar_doc(0.5, false));
    const auto out = env->scratch / "run";
    REQUIRE(run_cli(*env, "check --problem " + doc.string() + " --out " + out.string()) == 0);
    const ordered_json rep = read_doc(out / "report.json");
    REQUIRE(rep["command"] == "check");
    REQUIRE(rep["kernel_mass"].get<double>() == Catch::Approx(1.0));
    REQUIRE(rep["margin"].get<double>() == Catch::Approx(0.5));
    REQUIRE(rep["contractive"] == true);
    REQUIRE(rep["uniqueness"]["pass"] == true);
    REQUIRE(rep["pass"] == true);
}

TEST_CASE("stability command reproduces the envelope constants", "[cli]") {
    auto env = cli_env("stab");
    if (!env) SKIP("EPCAG_CLI / EPCAG_SCRATCH not set");
    ordered_json doc = scalar_doc(0.1, false);
    doc["stability"] = ordered_json{{"delta", 0.01}, {"a", 0.5}, {"trials", 4}};
    doc["seed"] = 7;
    const auto p = env->scratch / "problem.json";
    write_doc(p, doc);
    const auto out = env->scratch / "run";
    REQUIRE(run_cli(*env, "stability --problem " + p.string() + " --out " + out.string()) ==
            0);
    const ordered_json rep = read_doc(out / "report.json");
    REQUIRE(rep["stability"]["zeta"].get<double>() ==
            Catch::Approx(0.6702557458599743).margin(1e-12));
    REQUIRE(rep["stability"]["L"].get<double>() ==
            Catch::Approx(0.014919678140423042).margin(1e-12));
    REQUIRE(rep["stability"]["conditions"]["C9"] == true);
    REQUIRE(rep["stability"]["envelope_ok"] == true);
    REQUIRE(rep["stability"]["trials"].get<int>() == 4);
}

TEST_CASE("malformed documents exit with the validation code", "[cli]") {
    auto env = cli_env("badjson");
    if (!env) SKIP("EPCAG_CLI / EPCAG_SCRATCH not set");
    ordered_json doc = scalar_doc(0.5, false);
    doc.erase("theta");
    const auto p = env->scratch / "problem.json";
    write_doc(p, doc);
    const auto out = env->scratch / "run";
    REQUIRE(run_cli(*env, "solve-ap --problem " + p.string() + " --out " + out.string()) == 1);
    const ordered_json rep = read_doc(out / "report.json");
    REQUIRE(rep["error"]["type"] == "validation");
    REQUIRE(rep["error"]["message"].get<std::string>().find("/theta") != std::string::npos);
}

TEST_CASE("non-contractive problems exit with the numerical code", "[cli]") {
    auto env = cli_env("noncontract");
    if (!env) SKIP("EPCAG_CLI / EPCAG_SCRATCH not set");
    const auto p = env->scratch / "problem.json";
    write_doc(p, scalar_doc(3.0, false));
    const auto out = env->scratch / "run";
    REQUIRE(run_cli(*env, "solve-ap --problem " + p.string() + " --out " + out.string()) == 2);
    const ordered_json rep = read_doc(out / "report.json");
    REQUIRE(rep["error"]["type"] == "numerical");
}

TEST_CASE("sequence and logistic commands emit their reports", "[cli]") {
    auto env = cli_env("misc");
    if (!env) SKIP("EPCAG_CLI / EPCAG_SCRATCH not set");

    ordered_json seq_doc;
    seq_doc["theta"] = ordered_json{{"kind", "uniform"}, {"gap", 1.0}};
    seq_doc["sequence"] = ordered_json{{"epsilon", 0.3}, {"i_lo", -50}, {"i_hi", 50}};
    const auto sp = env->scratch / "seq.json";
    write_doc(sp, seq_doc);
    const auto sout = env->scratch / "seq_out";
    REQUIRE(run_cli(*env, "sequence --problem " + sp.string() + " --out " + sout.string()) ==
            0);
    const ordered_json srep = read_doc(sout / "report.json");
    REQUIRE(srep["gap_stats"]["max_gap"].get<double>() == Catch::Approx(1.0));
    REQUIRE(srep["common_periods"]["relatively_dense"] == true);

    ordered_json log_doc;
    log_doc["logistic"] =
        ordered_json{{"a", ordered_json{{"const", 3.0},
                                        {"terms", ordered_json::array({ordered_json{
                                                      {"omega", 1.0}, {"sin", 1.0}}})}}},
                     {"f", ordered_json{{"coefficients", ordered_json::array({0.05})}}},
                     {"H", 1.0},
                     {"deviations", ordered_json::array({0})},
                     {"N0", 0.5}};
    log_doc["solver"] = ordered_json{{"core", ordered_json::array({0.0, 10.0})}};
    log_doc["t_end"] = 10.0;
    const auto lp = env->scratch / "logistic.json";
    write_doc(lp, log_doc);
    const auto lout = env->scratch / "log_out";
    REQUIRE(run_cli(*env, "logistic --problem " + lp.string() + " --out " + lout.string()) ==
            0);
    const ordered_json lrep = read_doc(lout / "report.json");
    REQUIRE(lrep["mean"].get<double>() == Catch::Approx(3.0).margin(1e-6));
    REQUIRE(lrep["logistic"]["conditions"]["amplitude"].get<double>() ==
            Catch::Approx(0.025).margin(1e-9));
    REQUIRE(lrep["logistic"]["conditions"]["contraction"].get<double>() ==
            Catch::Approx(0.05).margin(1e-9));
    REQUIRE(lrep["logistic"]["zero_solution"] == true);
    REQUIRE(lrep["simulation"]["min_node"].get<double>() > 0.0);
}
