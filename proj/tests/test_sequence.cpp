#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "epcag/sequence_diagnostics.hpp"
#include "epcag/switching_sequence.hpp"

using namespace epcag;

namespace {

bool contains(const std::vector<double>& v, double x, double tol = 1e-12) {
    for (double y : v)
        if (std::abs(y - x) <= tol) return true;
    return false;
}

} // namespace

TEST_CASE("integer switching times reduce the interval map to floor", "[sequence]") {
    auto seq = SwitchingSequence::uniform(1.0);
    seq.ensure_index(-64, 64);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> pick(-60.0, 60.0);
    for (int k = 0; k < 10000; ++k) {
        const double t = pick(rng);
        REQUIRE(seq.interval_index(t) == static_cast<long>(std::floor(t)));
    }
    // switching times themselves open their interval
    REQUIRE(seq.interval_index(3.0) == 3);
    REQUIRE(seq.interval_index(-3.0) == -3);
}

TEST_CASE("locate_interval grows the window on demand", "[sequence]") {
    auto seq = SwitchingSequence::uniform(1.0);
    REQUIRE(locate_interval(seq, 1.0e4) == 10000);
    REQUIRE(locate_interval(seq, -1.0e4 + 0.5) == -10000);
    REQUIRE(seq.lo_index() <= -10000);
    REQUIRE(seq.hi_index() >= 10001);
}

TEST_CASE("deviated nodes read the lagged switching times", "[sequence]") {
    auto seq = SwitchingSequence::uniform(1.0);
    seq.ensure_index(-8, 8);

    auto n1 = seq.deviated_nodes(2.5, {1});
    REQUIRE(n1.size() == 1);
    REQUIRE(n1[0] == 1.0);

    auto n2 = seq.deviated_nodes(2.5, {0, -1}); // advanced argument allowed
    REQUIRE(n2.size() == 2);
    REQUIRE(n2[0] == 2.0);
    REQUIRE(n2[1] == 3.0);

    auto pert = SwitchingSequence::perturbed(0.2, 1.0);
    pert.ensure_index(-8, 8);
    auto n3 = pert.deviated_nodes(2.5, {0});
    REQUIRE(n3.size() == 1);
    REQUIRE(n3[0] == Catch::Approx(2.0 + 0.2 * std::sin(2.0)).epsilon(1e-14));
}

TEST_CASE("deviation sup over uniform grids", "[sequence]") {
    auto seq = SwitchingSequence::uniform(1.0);
    seq.ensure_index(-16, 16);
    REQUIRE(seq.deviation_sup({0}, -8, 8) == Catch::Approx(1.0));
    REQUIRE(seq.deviation_sup({1}, -8, 8) == Catch::Approx(2.0));

    // gap g and lag p give exactly (p + 1) * g
    for (double g : {0.25, 0.5, 2.0}) {
        auto s = SwitchingSequence::uniform(g);
        s.ensure_index(-16, 16);
        for (long p : {0L, 1L, 3L, 5L})
            REQUIRE(s.deviation_sup({p}, -8, 8) ==
                    Catch::Approx((static_cast<double>(p) + 1.0) * g).epsilon(1e-14));
    }
}

TEST_CASE("deviation sup with alternating gaps", "[sequence]") {
    // gaps 0.5, 1.5, 0.5, 1.5: worst lag-one reach is one short plus one long
    auto seq = SwitchingSequence::explicit_window(0, {0.0, 0.5, 2.0, 2.5, 4.0, 4.5});
    REQUIRE(seq.deviation_sup({1}, 1, 5) == Catch::Approx(2.0));
    REQUIRE(seq.deviation_sup({0}, 0, 5) == Catch::Approx(1.5));
}

TEST_CASE("gap statistics over index windows", "[sequence]") {
    auto unit = SwitchingSequence::uniform(1.0);
    unit.ensure_index(-12, 12);
    auto st = unit.gap_stats(-10, 10, 2.5);
    REQUIRE(st.min_gap == Catch::Approx(1.0));
    REQUIRE(st.max_gap == Catch::Approx(1.0));
    REQUIRE(st.max_points == 3); // a closed stretch of length 2.5 holds 3 integers

    auto paired =
        SwitchingSequence::explicit_window(0, {0.0, 0.1, 1.0, 1.1, 2.0, 2.1, 3.0});
    auto st2 = paired.gap_stats(0, 6, 1.0);
    REQUIRE(st2.min_gap == Catch::Approx(0.1));
    REQUIRE(st2.max_gap == Catch::Approx(0.9));
    REQUIRE(st2.max_points == 3); // e.g. [0.1, 1.1] holds 0.1, 1.0, 1.1

    auto single = SwitchingSequence::explicit_window(0, {0.0, 1.0});
    auto st3 = single.gap_stats(0, 1, 5.0);
    REQUIRE(st3.max_points == 2);
}

TEST_CASE("explicit sequences refuse to extend", "[sequence]") {
    auto seq = SwitchingSequence::explicit_window(0, {0.0, 1.0, 2.0});
    REQUIRE_THROWS_AS(seq.interval_index(5.0), WindowExhausted);
    REQUIRE_THROWS_AS(seq.interval_index(-0.5), WindowExhausted);
    REQUIRE_THROWS_AS(seq.ensure_index(-2, 2), WindowExhausted);
    REQUIRE_THROWS_AS(seq.ensure_time(0.0, 5.0), WindowExhausted);
    REQUIRE(seq.interval_index(1.5) == 1);
}

TEST_CASE("almost periods of a constant sequence", "[sequence]") {
    std::vector<double> a(101, 4.0);
    auto rep = sequence_almost_periods(a, -50, 0.01, 1, 10, 1.0);
    REQUIRE(rep.periods.size() == 10);
    for (long p = 1; p <= 10; ++p) REQUIRE(contains(rep.periods, static_cast<double>(p)));
    REQUIRE(rep.relatively_dense);
    REQUIRE(rep.max_gap == Catch::Approx(1.0));
}

TEST_CASE("almost periods of an alternating sequence are the even shifts", "[sequence]") {
    std::vector<double> a;
    for (int i = -50; i <= 50; ++i) a.push_back((i % 2 == 0) ? 1.0 : -1.0);
    auto rep = sequence_almost_periods(a, -50, 0.1, 1, 12);
    REQUIRE(rep.periods.size() == 6);
    for (long p = 2; p <= 12; p += 2) REQUIRE(contains(rep.periods, static_cast<double>(p)));
    REQUIRE(!contains(rep.periods, 1.0));
    REQUIRE(!contains(rep.periods, 7.0));
}

TEST_CASE("golden rotation sequence accepts Fibonacci shifts", "[sequence]") {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    std::vector<double> a;
    const long lo = -500, hi = 500;
    for (long i = lo; i <= hi; ++i)
        a.push_back(std::sin(2.0 * std::numbers::pi * phi * static_cast<double>(i)));

    auto wide = sequence_almost_periods(a, lo, 0.14, 1, 64);
    auto tight = sequence_almost_periods(a, lo, 0.12, 1, 64);
    REQUIRE(contains(wide.periods, 21.0));
    REQUIRE(!contains(tight.periods, 21.0));

    // independent re-check of the shift-21 defect straight from the samples
    double worst = 0.0;
    for (long i = lo; i + 21 <= hi; ++i) {
        const double d = std::abs(a[static_cast<std::size_t>(i + 21 - lo)] -
                                  a[static_cast<std::size_t>(i - lo)]);
        worst = std::max(worst, d);
    }
    REQUIRE(worst < 0.14);
    REQUIRE(worst >= 0.12);
}

TEST_CASE("uniform grids are equipotentially almost periodic at every shift", "[sequence]") {
    auto seq = SwitchingSequence::uniform(1.0);
    seq.ensure_index(-80, 80);
    EquipotentialQuery q;
    q.eps = 0.1;
    q.p_lo = 1;
    q.p_hi = 16;
    q.tau_lo = 0.0;
    q.tau_hi = 4.0;
    q.tau_step = 0.5;
    q.density_bound = 1.0;
    auto rep = equipotential_diagnostic(seq, -60, 60, q);
    REQUIRE(rep.common.periods.size() == 16);
    REQUIRE(rep.common.relatively_dense);
    // difference families take only integer values, so the accepted real
    // shifts are exactly the integer grid points reached by some p in range
    for (double tau : {1.0, 2.0, 3.0, 4.0})
        REQUIRE(contains(rep.real_shifts.periods, tau));
    for (double tau : {0.5, 1.5, 2.5})
        REQUIRE(!contains(rep.real_shifts.periods, tau));
}

TEST_CASE("scaled grids shift by multiples of the gap", "[sequence]") {
    auto seq = SwitchingSequence::uniform(0.7);
    seq.ensure_index(-80, 80);
    EquipotentialQuery q;
    q.eps = 0.1;
    q.p_lo = 1;
    q.p_hi = 8;
    q.tau_lo = 0.0;
    q.tau_hi = 2.8;
    q.tau_step = 0.35;
    auto rep = equipotential_diagnostic(seq, -60, 60, q);
    REQUIRE(rep.common.periods.size() == 8);
    for (double tau : {0.7, 1.4, 2.1, 2.8})
        REQUIRE(contains(rep.real_shifts.periods, tau, 1e-9));
    for (double tau : {0.35, 1.05})
        REQUIRE(!contains(rep.real_shifts.periods, tau, 1e-9));
}

TEST_CASE("golden perturbed grid keeps Fibonacci-adjacent common shifts", "[sequence]") {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    auto seq = SwitchingSequence::perturbed(0.2, 2.0 * std::numbers::pi * phi);
    seq.ensure_index(-510, 510);
    EquipotentialQuery q;
    q.eps = 0.3;
    q.j_lo = -3;
    q.j_hi = 3;
    q.p_lo = 1;
    q.p_hi = 40;
    q.tau_lo = 0.0;
    q.tau_hi = 10.0;
    q.tau_step = 0.5;
    auto rep = equipotential_diagnostic(seq, -500, 500, q);
    for (double p : {5.0, 8.0, 13.0, 21.0, 34.0})
        REQUIRE(contains(rep.common.periods, p));
    for (double p : {1.0, 2.0, 4.0, 7.0, 12.0})
        REQUIRE(!contains(rep.common.periods, p));

    // spot check the defining property for p = 8 without the library
    double worst = 0.0;
    for (long j = -3; j <= 3; ++j)
        for (long i = -400; i <= 400; ++i) {
            const double gj_i = seq.at(i + j) - seq.at(i);
            const double gj_ip = seq.at(i + j + 8) - seq.at(i + 8);
            worst = std::max(worst, std::abs(gj_ip - gj_i));
        }
    REQUIRE(worst < 0.3);
}

TEST_CASE("identical sequences are epsilon-equivalent with zero defect", "[sequence]") {
    auto a = SwitchingSequence::uniform(1.0);
    auto b = SwitchingSequence::uniform(1.0);
    a.ensure_index(-12, 12);
    b.ensure_index(-12, 12);
    auto w = eps_equivalent(a, b, 0.05, -10.0, 10.0);
    REQUIRE(w.equivalent);
    REQUIRE(w.max_deviation == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(w.max_multiplicity == 1);
}

TEST_CASE("a shifted grid is equivalent only above the shift size", "[sequence]") {
    auto a = SwitchingSequence::uniform(1.0);
    auto b = SwitchingSequence::uniform(1.0, 0.1);
    a.ensure_index(-12, 12);
    b.ensure_index(-12, 12);
    REQUIRE(eps_equivalent(a, b, 0.2, -10.0, 10.0).equivalent);
    REQUIRE(!eps_equivalent(a, b, 0.05, -10.0, 10.0).equivalent);
}

TEST_CASE("near-coincident points match with multiplicity two", "[sequence]") {
    auto a = SwitchingSequence::explicit_window(0, {0.0, 1.0, 2.0, 3.0});
    auto b = SwitchingSequence::explicit_window(0, {0.0, 0.04, 1.0, 2.0, 3.0});
    auto w = eps_equivalent(a, b, 0.05, 0.0, 3.0);
    REQUIRE(w.equivalent);
    REQUIRE(w.max_multiplicity == 2);
    REQUIRE(w.max_deviation >= 0.04);

    auto [ra, rb] = representatives_from(w, a.window(0, 3), 0, b.window(0, 4), 0);
    REQUIRE(ra.value.size() == rb.value.size());
    REQUIRE(ra.max_multiplicity() == 2);
    for (std::size_t k = 0; k < ra.value.size(); ++k)
        REQUIRE(std::abs(ra.value[k] - rb.value[k]) < 0.05);
}

TEST_CASE("equivalence obeys the triangle bound over random jitters", "[sequence]") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> j1(-0.04, 0.04), j2(-0.08, 0.08);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> va, vb, vc;
        for (int i = 0; i <= 20; ++i) {
            const double t = static_cast<double>(i);
            va.push_back(t);
            vb.push_back(t + j1(rng));
            vc.push_back(vb.back() + j2(rng));
        }
        auto a = SwitchingSequence::explicit_window(0, va);
        auto b = SwitchingSequence::explicit_window(0, vb);
        auto c = SwitchingSequence::explicit_window(0, vc);
        auto wab = eps_equivalent(a, b, 0.05, 2.0, 18.0);
        auto wbc = eps_equivalent(b, c, 0.09, 2.0, 18.0);
        REQUIRE(wab.equivalent);
        REQUIRE(wbc.equivalent);
        auto wac = eps_equivalent(a, c, 0.05 + 0.09, 2.0, 18.0);
        REQUIRE(wac.equivalent);
    }
}
