#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "epcag/ap_solver.hpp"
#include "epcag/problem.hpp"

using namespace epcag;

namespace {

DichotomyData unit_decay() {
    DichotomyData d;
    d.P = Eigen::MatrixXd::Identity(1, 1);
    d.K1 = 1.0;
    d.sigma1 = 1.0;
    d.one_sided = {{1.0, 1.0}};
    return d;
}

Problem scalar_problem(double coupling, TrigPolynomial forcing) {
    auto A = TrigPolynomial::scalar(-1.0);
    auto f = Nonlinearity::affine({Eigen::MatrixXd::Constant(1, 1, coupling)},
                                  std::move(forcing));
    return Problem(A, f, {0}, SwitchingSequence::uniform(1.0), unit_decay());
}

} // namespace

TEST_CASE("piecewise-constant feedback with constant forcing settles exactly", "[solver]") {
    // x' = -x + 0.5 x([t]) + 1 has the constant solution x = 2
    auto prob = scalar_problem(0.5, TrigPolynomial::scalar(1.0));
    ApOptions opts;
    opts.tol = 1e-10;
    auto [sol, rep] = picard_solve(prob, 0.0, 12.0, opts);

    REQUIRE(rep.margin == Catch::Approx(0.5));
    for (long i = 0; i <= 12; ++i) REQUIRE(sol.node(i)(0) == Catch::Approx(2.0).margin(1e-8));
    for (double t : {0.3, 4.9, 11.5})
        REQUIRE(sol.value(t)(0) == Catch::Approx(2.0).margin(1e-8));
    REQUIRE(rep.residual < 1e-8);
    REQUIRE(rep.fixed_point_gap < 2.0 * opts.tol);
    REQUIRE(rep.sup_core == Catch::Approx(2.0).margin(1e-7));
    REQUIRE(rep.tail_bound < opts.tol);

    // updates contract at least as fast as the margin once they settle
    for (std::size_t k = 2; k < rep.ratios.size(); ++k)
        REQUIRE(rep.ratios[k] <= rep.margin + 0.02);
}

TEST_CASE("small forcing ripples stay within the contraction bound", "[solver]") {
    auto g = TrigPolynomial::scalar(1.0);
    g.add_scalar_term(1.0, 0.01, 0.0);
    auto prob = scalar_problem(0.5, g);
    auto [sol, rep] = picard_solve(prob, 0.0, 10.0);
    // perturbation of the fixed point is at most mass * 0.01 / (1 - margin)
    double worst = 0.0;
    for (double t = 0.0; t <= 10.0; t += 0.05)
        worst = std::max(worst, std::abs(sol.value(t)(0) - 2.0));
    REQUIRE(worst <= 0.021);
    REQUIRE(worst > 1e-4); // the ripple is real
}

TEST_CASE("strong coupling is rejected before iterating", "[solver]") {
    auto prob = scalar_problem(3.0, TrigPolynomial::scalar(1.0));
    REQUIRE_THROWS_AS(picard_solve(prob, 0.0, 10.0), NonContractive);
}

TEST_CASE("slow contractions hit the iteration budget", "[solver]") {
    auto prob = scalar_problem(0.999, TrigPolynomial::scalar(1.0));
    ApOptions opts;
    opts.max_iterations = 3;
    REQUIRE_THROWS_AS(picard_solve(prob, 0.0, 5.0, opts), IterationLimit);
}

TEST_CASE("quasi-periodic forcing converges to a small residual", "[solver]") {
    auto g = TrigPolynomial::scalar(0.0);
    g.add_scalar_term(1.0, 1.0, 0.0);
    g.add_scalar_term(std::numbers::sqrt2, 1.0, 0.0);
    auto prob = scalar_problem(0.5, g);
    ApOptions opts;
    opts.tol = 1e-9;
    auto [sol, rep] = picard_solve(prob, 0.0, 20.0, opts);
    REQUIRE(rep.residual < 10.0 * opts.tol);
    REQUIRE(rep.sup_core <=
            rep.dichotomy.kernel_mass() * rep.sup_forcing / (1.0 - rep.margin) + 1e-6);
    REQUIRE(rep.worst_condition >= 1.0);
}

TEST_CASE("solutions at nested tolerances agree to the coarse one", "[solver]") {
    auto g = TrigPolynomial::scalar(0.0);
    g.add_scalar_term(1.0, 1.0, 0.0);
    g.add_scalar_term(std::numbers::sqrt2, 1.0, 0.0);
    auto prob = scalar_problem(0.5, g);
    ApOptions coarse, fine;
    coarse.tol = 1e-6;
    fine.tol = 1e-10;
    auto [s1, r1] = picard_solve(prob, 0.0, 10.0, coarse);
    auto [s2, r2] = picard_solve(prob, 0.0, 10.0, fine);
    double worst = 0.0;
    for (double t = 0.0; t <= 10.0; t += 0.1)
        worst = std::max(worst, (s1.value(t) - s2.value(t)).norm());
    REQUIRE(worst < 10.0 * coarse.tol);
}

TEST_CASE("truncation margin can be pinned by the caller", "[solver]") {
    auto prob = scalar_problem(0.5, TrigPolynomial::scalar(1.0));
    ApOptions opts;
    opts.t_cut_override = 5.0;
    auto [sol, rep] = picard_solve(prob, 0.0, 5.0, opts);
    REQUIRE(rep.t_cut == 5.0);
    // the pinned margin is short, and the tail bound reports that honestly
    REQUIRE(rep.tail_bound >= dichotomy_tail(rep.dichotomy, rep.sup_forcing, 6.0, 6.0));
    auto [sol2, rep2] = picard_solve(prob, 0.0, 5.0);
    REQUIRE(rep2.t_cut > 5.0);
    REQUIRE(rep2.tail_bound < rep.tail_bound);
}

TEST_CASE("linear part resolution prefers supplied envelopes", "[solver]") {
    auto supplied = scalar_problem(0.5, TrigPolynomial::scalar(1.0));
    REQUIRE(resolve_dichotomy(supplied).K1 == 1.0);
    REQUIRE(resolve_dichotomy(supplied).sigma1 == 1.0);

    Problem bare(TrigPolynomial::scalar(-1.0),
                 Nonlinearity::affine({Eigen::MatrixXd::Constant(1, 1, 0.5)},
                                      TrigPolynomial::scalar(1.0)),
                 {0}, SwitchingSequence::uniform(1.0));
    auto d = resolve_dichotomy(bare);
    REQUIRE(d.sigma1 == Catch::Approx(0.98)); // spectral fallback with 2% back-off
    REQUIRE(d.one_sided.has_value());

    auto At = TrigPolynomial::scalar(-1.0);
    At.add_scalar_term(1.0, 0.0, 0.2);
    Problem varying(At,
                    Nonlinearity::affine({Eigen::MatrixXd::Constant(1, 1, 0.3)},
                                         TrigPolynomial::scalar(1.0)),
                    {0}, SwitchingSequence::uniform(1.0));
    auto dv = resolve_dichotomy(varying);
    REQUIRE(dv.sigma1 > 0.8);
    REQUIRE(dv.sigma1 < 1.1);
    REQUIRE(verify_dichotomy(At, dv, -5.0, 5.0, 0.41) <= 1.05);
}

TEST_CASE("translation numbers of the data carry over to the solution", "[solver]") {
    auto g = TrigPolynomial::scalar(0.0);
    g.add_scalar_term(1.0, 1.0, 0.0);
    auto prob = scalar_problem(0.5, g);
    auto [sol, rep] = picard_solve(prob, -15.0, 15.0);

    // candidate shifts: genuine translation numbers of the forcing
    TranslationQuery q;
    q.eps = 0.05;
    q.tau_lo = 1.0;
    q.tau_hi = 14.0;
    auto cand = translation_numbers(g, q);
    REQUIRE(!cand.periods.empty());
    std::vector<double> taus(cand.periods.begin(),
                             cand.periods.begin() +
                                 std::min<std::size_t>(3, cand.periods.size()));
    auto checks = translation_diagnostic(sol, rep, prob.f.lipschitz(), taus, q.eps);
    for (const auto& tc : checks) {
        REQUIRE(tc.within);
        REQUIRE(tc.sup_diff <= tc.bound);
        REQUIRE(tc.bound == Catch::Approx((2.0 * (1.0 + 0.5 * rep.sup_core) + 1.0) * q.eps));
    }

    // an arbitrary shift far from any translation number fails the bound
    // scaled down to the near-period tolerance it would need
    std::vector<double> bogus{0.5 * std::numbers::pi};
    auto bad = translation_diagnostic(sol, rep, prob.f.lipschitz(), bogus, 1e-4);
    REQUIRE(!bad[0].within);
}

TEST_CASE("two deviated arguments combine their couplings", "[solver]") {
    // x' = -x + 0.2 x([t]) + 0.2 x([t-1]) + 1: constant solution 1 / 0.6
    auto A = TrigPolynomial::scalar(-1.0);
    auto f = Nonlinearity::affine({Eigen::MatrixXd::Constant(1, 1, 0.2),
                                   Eigen::MatrixXd::Constant(1, 1, 0.2)},
                                  TrigPolynomial::scalar(1.0));
    Problem prob(A, f, {0, 1}, SwitchingSequence::uniform(1.0), unit_decay());
    REQUIRE(prob.max_deviation() == 1);
    auto [sol, rep] = picard_solve(prob, 0.0, 8.0);
    REQUIRE(rep.margin == Catch::Approx(0.4));
    for (double t : {0.0, 3.7, 8.0})
        REQUIRE(sol.value(t)(0) == Catch::Approx(1.0 / 0.6).margin(1e-8));
}
