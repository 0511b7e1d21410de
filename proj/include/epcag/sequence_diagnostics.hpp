#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "epcag/errors.hpp"
#include "epcag/math_util.hpp"
#include "epcag/switching_sequence.hpp"

namespace epcag {

/// Result of an almost-period scan over a finite window. `periods` holds the
/// shifts that keep the sequence within epsilon of itself everywhere the
/// window allows the comparison. Gaps are measured between consecutive
/// accepted shifts, including the distance to the ends of the searched range,
/// so `relatively_dense` means every stretch of length `density_bound`
/// inside the range contains an accepted shift.
struct AlmostPeriodReport {
    double epsilon = 0.0;
    std::vector<double> periods;
    double max_gap = kInf;
    bool relatively_dense = false;
    double density_bound = kInf;
    double range_lo = 0.0, range_hi = 0.0;
};

namespace detail {

inline void finalize_report(AlmostPeriodReport& r) {
    std::sort(r.periods.begin(), r.periods.end());
    if (r.periods.empty()) {
        r.max_gap = kInf;
        r.relatively_dense = false;
        return;
    }
    double g = std::max(r.periods.front() - r.range_lo, r.range_hi - r.periods.back());
    for (std::size_t k = 1; k < r.periods.size(); ++k)
        g = std::max(g, r.periods[k] - r.periods[k - 1]);
    r.max_gap = g;
    r.relatively_dense = g <= r.density_bound;
}

} // namespace detail

/// Scans integer shifts p in [p_lo, p_hi]: p is accepted when
/// |a_{i+p} - a_i| < eps for every index i the window can test. Requires at
/// least one testable index per shift.
template <class Seq, class Norm>
AlmostPeriodReport scan_sequence_periods(const Seq& a, long base, long count, double eps,
                                         long p_lo, long p_hi, Norm&& norm,
                                         double density_bound = kInf) {
    if (p_lo > p_hi) throw ValidationError("p_range", "empty shift range");
    AlmostPeriodReport rep;
    rep.epsilon = eps;
    rep.range_lo = static_cast<double>(p_lo);
    rep.range_hi = static_cast<double>(p_hi);
    rep.density_bound = density_bound;
    const long lo = base, hi = base + count - 1;
    for (long p = p_lo; p <= p_hi; ++p) {
        const long i_lo = std::max(lo, lo - p), i_hi = std::min(hi, hi - p);
        if (i_lo > i_hi)
            throw InsufficientWindow("window cannot test shift " + std::to_string(p));
        bool ok = true;
        for (long i = i_lo; i <= i_hi && ok; ++i)
            ok = norm(a[static_cast<std::size_t>(i + p - base)],
                      a[static_cast<std::size_t>(i - base)]) < eps;
        if (ok) rep.periods.push_back(static_cast<double>(p));
    }
    detail::finalize_report(rep);
    return rep;
}

inline AlmostPeriodReport sequence_almost_periods(const std::vector<double>& values, long base,
                                                  double eps, long p_lo, long p_hi,
                                                  double density_bound = kInf) {
    return scan_sequence_periods(
        values, base, static_cast<long>(values.size()), eps, p_lo, p_hi,
        [](double x, double y) { return std::abs(x - y); }, density_bound);
}

inline AlmostPeriodReport sequence_almost_periods(const std::vector<Eigen::VectorXd>& values,
                                                  long base, double eps, long p_lo, long p_hi,
                                                  double density_bound = kInf) {
    return scan_sequence_periods(
        values, base, static_cast<long>(values.size()), eps, p_lo, p_hi,
        [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) { return (x - y).norm(); },
        density_bound);
}

// --- Equipotential diagnostic --------------------------------------------

/// `common` lists integer shifts that are eps-almost periods of every
/// difference family gamma^j, j in [j_lo, j_hi], simultaneously (gamma^j_i =
/// gamma_{i+j} - gamma_i). `real_shifts` lists grid points tau for which some
/// integer q keeps |gamma^q_i - tau| < eps for all testable i.
struct EquipotentialReport {
    AlmostPeriodReport common;
    AlmostPeriodReport real_shifts;
};

struct EquipotentialQuery {
    double eps = 0.1;
    long j_lo = -3, j_hi = 3;
    long p_lo = 1, p_hi = 64;
    double tau_lo = 0.0, tau_hi = 0.0; // real-shift scan range
    double tau_step = 0.0;             // defaults to eps / 4
    double density_bound = kInf;
};

inline EquipotentialReport equipotential_diagnostic(const std::vector<double>& gamma, long base,
                                                    const EquipotentialQuery& q) {
    const long lo = base, hi = base + static_cast<long>(gamma.size()) - 1;
    auto g = [&](long i) { return gamma[static_cast<std::size_t>(i - base)]; };

    EquipotentialReport rep;
    rep.common.epsilon = q.eps;
    rep.common.range_lo = static_cast<double>(q.p_lo);
    rep.common.range_hi = static_cast<double>(q.p_hi);
    rep.common.density_bound = q.density_bound;

    for (long p = q.p_lo; p <= q.p_hi; ++p) {
        bool ok = true;
        for (long j = q.j_lo; j <= q.j_hi && ok; ++j) {
            // need i, i+j, i+p, i+j+p inside the window
            const long shift_min = std::min({0L, j, p, j + p});
            const long shift_max = std::max({0L, j, p, j + p});
            const long i_lo = lo - shift_min, i_hi = hi - shift_max;
            if (i_lo > i_hi)
                throw InsufficientWindow("window cannot test (j, p) = (" + std::to_string(j) +
                                         ", " + std::to_string(p) + ")");
            for (long i = i_lo; i <= i_hi && ok; ++i) {
                const double dj_here = g(i + j) - g(i);
                const double dj_there = g(i + j + p) - g(i + p);
                ok = std::abs(dj_there - dj_here) < q.eps;
            }
        }
        if (ok) rep.common.periods.push_back(static_cast<double>(p));
    }
    detail::finalize_report(rep.common);

    rep.real_shifts.epsilon = q.eps;
    rep.real_shifts.range_lo = q.tau_lo;
    rep.real_shifts.range_hi = q.tau_hi;
    rep.real_shifts.density_bound = q.density_bound;
    const double step = q.tau_step > 0.0 ? q.tau_step : q.eps / 4.0;
    if (q.tau_hi > q.tau_lo) {
        // For each q the admissible tau form the open interval
        // (max_i gamma^q_i - eps, min_i gamma^q_i + eps).
        std::vector<std::pair<double, double>> bands;
        for (long p = q.p_lo; p <= q.p_hi; ++p) {
            const long i_lo = std::max(lo, lo - p), i_hi = std::min(hi, hi - p);
            if (i_lo > i_hi) continue;
            double d_min = kInf, d_max = -kInf;
            for (long i = i_lo; i <= i_hi; ++i) {
                const double d = g(i + p) - g(i);
                d_min = std::min(d_min, d);
                d_max = std::max(d_max, d);
            }
            if (d_max - d_min < 2.0 * q.eps) bands.emplace_back(d_max - q.eps, d_min + q.eps);
        }
        const long n_grid = static_cast<long>(std::floor((q.tau_hi - q.tau_lo) / step));
        for (long k = 0; k <= n_grid; ++k) {
            const double tau = q.tau_lo + step * static_cast<double>(k);
            for (const auto& [blo, bhi] : bands)
                if (tau > blo && tau < bhi) {
                    rep.real_shifts.periods.push_back(tau);
                    break;
                }
        }
        detail::finalize_report(rep.real_shifts);
    }
    return rep;
}

inline EquipotentialReport equipotential_diagnostic(const SwitchingSequence& seq, long i_lo,
                                                    long i_hi, const EquipotentialQuery& q) {
    return equipotential_diagnostic(seq.window(i_lo, i_hi), i_lo, q);
}

// --- Epsilon-equivalence of switching sequences ---------------------------

/// Witness of an order-preserving matching between two point lists. Each
/// matched pair differs by less than epsilon; every core point of either
/// list is used at least once and at most `max_multiplicity` times.
struct MatchWitness {
    bool equivalent = false;
    double epsilon = 0.0;
    std::vector<std::pair<long, long>> pairs; // sequence indices (i of a, j of b)
    int max_multiplicity = 0;
    double max_deviation = 0.0;
};

/// A concrete non-decreasing relisting of switching times, produced from a
/// matching: entry k repeats source point `index[k]` of the support.
struct Representative {
    std::vector<long> index;
    std::vector<double> value;

    int max_multiplicity() const {
        int best = 0, run = 0;
        long prev = std::numeric_limits<long>::min();
        for (long i : index) {
            run = (i == prev) ? run + 1 : 1;
            prev = i;
            best = std::max(best, run);
        }
        return best;
    }
};

inline std::pair<Representative, Representative> representatives_from(
    const MatchWitness& w, const std::vector<double>& a_values, long a_base,
    const std::vector<double>& b_values, long b_base) {
    Representative ra, rb;
    for (auto [i, j] : w.pairs) {
        ra.index.push_back(i);
        ra.value.push_back(a_values[static_cast<std::size_t>(i - a_base)]);
        rb.index.push_back(j);
        rb.value.push_back(b_values[static_cast<std::size_t>(j - b_base)]);
    }
    return {std::move(ra), std::move(rb)};
}

namespace detail {

struct MatchLists {
    std::vector<double> v;  // point values, sorted
    std::vector<long> idx;  // original sequence indices
    int core_lo = 0, core_hi = -1; // inclusive range of mandatory points
};

inline MatchLists collect_points(const SwitchingSequence& s, double t_lo, double t_hi,
                                 double margin) {
    MatchLists m;
    for (long i = s.lo_index(); i <= s.hi_index(); ++i) {
        const double v = s.at(i);
        if (v < t_lo - margin || v > t_hi + margin) continue;
        if (v >= t_lo && v <= t_hi) {
            if (m.core_hi < m.core_lo) m.core_lo = static_cast<int>(m.v.size());
            m.core_hi = static_cast<int>(m.v.size());
        }
        m.v.push_back(v);
        m.idx.push_back(i);
    }
    return m;
}

} // namespace detail

/// Decides whether two switching sequences are epsilon-equivalent on
/// [t_lo, t_hi]: some order-preserving matching (repeats capped at
/// `multiplicity_cap`) pairs every point of one window with a point of the
/// other less than epsilon away. Points within epsilon outside the window
/// participate but may stay unmatched at the edges. Both sequences must
/// already store [t_lo - eps, t_hi + eps].
inline MatchWitness eps_equivalent(const SwitchingSequence& a, const SwitchingSequence& b,
                                   double eps, double t_lo, double t_hi,
                                   int multiplicity_cap = 4) {
    const auto A = detail::collect_points(a, t_lo, t_hi, eps);
    const auto B = detail::collect_points(b, t_lo, t_hi, eps);
    MatchWitness w;
    w.epsilon = eps;

    const int n = static_cast<int>(A.v.size()), m = static_cast<int>(B.v.size());
    const bool a_core = A.core_hi >= A.core_lo, b_core = B.core_hi >= B.core_lo;
    if (!a_core && !b_core) {
        w.equivalent = true; // nothing to match on this window
        return w;
    }
    if (n == 0 || m == 0) return w;

    // DP over "last matched pair (i, j)" with a run marker: state 0 means the
    // pair advanced both lists; 1..cap-1 repeats of A_i; negative for B_j.
    const int cap = std::max(1, multiplicity_cap);
    const int states = 2 * cap - 1;
    auto sid = [&](int i, int j, int r) { return (i * m + j) * states + (r + cap - 1); };
    std::vector<std::int32_t> parent(static_cast<std::size_t>(n) * m * states, -2);

    auto feasible = [&](int i, int j) { return std::abs(A.v[i] - B.v[j]) < eps; };

    // Entry pairs may skip only optional (margin) points before them.
    const int entry_a = a_core ? A.core_lo : n - 1;
    const int entry_b = b_core ? B.core_lo : m - 1;
    for (int i = 0; i <= entry_a; ++i)
        for (int j = 0; j <= entry_b; ++j)
            if (feasible(i, j)) parent[sid(i, j, 0)] = -1;

    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            if (!feasible(i, j)) continue;
            for (int r = -(cap - 1); r <= cap - 1; ++r) {
                const auto cur = sid(i, j, r);
                if (parent[cur] == -2) continue;
                // advance both
                if (i + 1 < n && j + 1 < m && feasible(i + 1, j + 1) &&
                    parent[sid(i + 1, j + 1, 0)] == -2)
                    parent[sid(i + 1, j + 1, 0)] = cur;
                // reuse A_i for the next B point (r' counts its extra uses)
                const int ra = r >= 0 ? r + 1 : 1;
                if (j + 1 < m && ra <= cap - 1 && feasible(i, j + 1) &&
                    parent[sid(i, j + 1, ra)] == -2)
                    parent[sid(i, j + 1, ra)] = cur;
                // reuse B_j for the next A point
                const int rb = r <= 0 ? r - 1 : -1;
                if (i + 1 < n && -rb <= cap - 1 && feasible(i + 1, j) &&
                    parent[sid(i + 1, j, rb)] == -2)
                    parent[sid(i + 1, j, rb)] = cur;
            }
        }

    // Exit pairs may leave only optional suffixes unmatched.
    std::int32_t end_state = -2;
    const int exit_a = a_core ? A.core_hi : 0;
    const int exit_b = b_core ? B.core_hi : 0;
    for (int i = exit_a; i < n && end_state == -2; ++i)
        for (int j = exit_b; j < m && end_state == -2; ++j)
            for (int r = -(cap - 1); r <= cap - 1 && end_state == -2; ++r)
                if (parent[sid(i, j, r)] != -2) end_state = sid(i, j, r);
    if (end_state == -2) return w;

    // Reconstruct the matching.
    std::vector<std::pair<int, int>> chain;
    for (std::int32_t s = end_state; s != -1; s = parent[static_cast<std::size_t>(s)]) {
        const int pair_id = s / states;
        chain.emplace_back(pair_id / m, pair_id % m);
    }
    std::reverse(chain.begin(), chain.end());

    w.equivalent = true;
    int run_a = 0, run_b = 0;
    int prev_i = -1, prev_j = -1;
    for (auto [i, j] : chain) {
        w.pairs.emplace_back(A.idx[i], B.idx[j]);
        w.max_deviation = std::max(w.max_deviation, std::abs(A.v[i] - B.v[j]));
        run_a = (i == prev_i) ? run_a + 1 : 1;
        run_b = (j == prev_j) ? run_b + 1 : 1;
        prev_i = i;
        prev_j = j;
        w.max_multiplicity = std::max({w.max_multiplicity, run_a, run_b});
    }
    return w;
}

} // namespace epcag
