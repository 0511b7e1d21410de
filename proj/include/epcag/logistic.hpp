#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "epcag/ap_solver.hpp"
#include "epcag/errors.hpp"
#include "epcag/green_operator.hpp"
#include "epcag/grid_solution.hpp"
#include "epcag/ivp.hpp"
#include "epcag/math_util.hpp"
#include "epcag/problem.hpp"

namespace epcag {

/// Scalar logistic equation with piecewise-constant arguments,
///   x'(t) = x(t) [ a(t) - h(x(theta_{beta(t)-p_1}), ..., x(theta_{beta(t)-p_m})) ],
/// with positive-mean growth a and a nonnegative coupling h vanishing at 0.
struct LogisticProblem {
    TrigPolynomial a;
    Nonlinearity f; // product kind with scale -1: f = -x * h(z)
    std::vector<long> deviations;
    double H;
    SwitchingSequence theta;

    LogisticProblem(TrigPolynomial growth, std::vector<double> coeffs, InnerKind inner,
                    std::vector<long> devs, double box, SwitchingSequence seq)
        : a(std::move(growth)),
          f(Nonlinearity::product_logistic(coeffs, -1.0, inner)),
          deviations(std::move(devs)), H(box), theta(std::move(seq)) {
        if (a.rows() != 1 || a.cols() != 1)
            throw ValidationError("logistic.a", "scalar growth rate required");
        if (H <= 0.0) throw ValidationError("logistic.H", "positive box size required");
        for (double c : coeffs)
            if (c < 0.0)
                throw ValidationError("logistic.coefficients",
                                      "nonnegative coefficients keep h >= 0 on the box");
        if (deviations.size() != coeffs.size())
            throw ValidationError("logistic.deviations", "one deviation per argument required");
    }

    Problem to_problem() const { return Problem(a, f, deviations, theta); }
    long max_deviation() const {
        return *std::max_element(deviations.begin(), deviations.end());
    }
};

// --- Mean value and the backward kernel envelope ---------------------------

struct MeanValue {
    double exact = 0.0;          // constant term
    double numeric = 0.0;        // symmetric window average
    double window = 0.0;
    double error_estimate = 0.0; // O(1/window) bound on |numeric - exact|
};

inline MeanValue mean_value(const TrigPolynomial& a, double window = 1000.0) {
    if (a.rows() != 1 || a.cols() != 1) throw ValidationError("a", "scalar function required");
    if (window <= 0.0) throw ValidationError("window", "positive window required");
    MeanValue mv;
    mv.exact = a.constant_term()(0, 0);
    mv.window = window;
    std::vector<double> s, w;
    composite_gl8(-window, window, 0.5, s, w);
    double acc = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) acc += w[k] * a.scalar_at(s[k]);
    mv.numeric = acc / (2.0 * window);
    for (const auto& term : a.terms())
        mv.error_estimate +=
            (std::abs(term.cos_coeff(0, 0)) + std::abs(term.sin_coeff(0, 0))) /
            (term.omega * window);
    return mv;
}

struct KernelBounds {
    double K = 1.0;
    double sigma = 0.0;
    bool fitted = false; // false: inf a > 0 gives (1, inf a) directly
    double mean = 0.0;
    double inf_a = 0.0;
};

namespace detail {

/// Minimum of a scalar trig polynomial: dense scan plus local ternary
/// refinement around the best sample.
inline double refined_inf(const TrigPolynomial& a, double t_lo, double t_hi, int samples) {
    double best = kInf, t_best = t_lo;
    for (int k = 0; k <= samples; ++k) {
        const double t = t_lo + (t_hi - t_lo) * k / static_cast<double>(samples);
        const double v = a.scalar_at(t);
        if (v < best) {
            best = v;
            t_best = t;
        }
    }
    const double h = (t_hi - t_lo) / samples;
    double lo = t_best - h, hi = t_best + h;
    for (int it = 0; it < 80; ++it) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (a.scalar_at(m1) < a.scalar_at(m2)) hi = m2; else lo = m1;
    }
    return std::min(best, a.scalar_at(0.5 * (lo + hi)));
}

/// Bounded antiderivative of the oscillating part of a scalar trig sum.
inline double oscillation_antiderivative(const TrigPolynomial& a, double t) {
    double p = 0.0;
    for (const auto& term : a.terms())
        p += (term.cos_coeff(0, 0) * std::sin(term.omega * t) -
              term.sin_coeff(0, 0) * std::cos(term.omega * t)) /
             term.omega;
    return p;
}

} // namespace detail

/// Envelope exp(integral of a from s to t) <= K exp(sigma (t-s)) for t <= s.
/// When a stays positive the envelope is immediate with K = 1. Otherwise
/// sigma backs off the mean by fit_margin and K covers the range of the
/// bounded antiderivative of the oscillating part, which makes the envelope
/// rigorous for the represented trig sum.
inline KernelBounds kernel_bounds(const TrigPolynomial& a, double fit_margin = 0.02) {
    if (a.rows() != 1 || a.cols() != 1) throw ValidationError("a", "scalar function required");
    KernelBounds kb;
    kb.mean = a.constant_term()(0, 0);
    if (kb.mean <= 0.0) throw NoEnvelope("mean growth rate must be positive");
    kb.inf_a = detail::refined_inf(a, -80.0, 80.0, 16384);
    if (kb.inf_a > 0.0) {
        kb.K = 1.0;
        kb.sigma = kb.inf_a;
        kb.fitted = false;
        return kb;
    }
    kb.fitted = true;
    kb.sigma = kb.mean * (1.0 - fit_margin);
    double p_lo = kInf, p_hi = -kInf;
    for (int k = 0; k <= 40000; ++k) {
        const double t = -200.0 + 400.0 * k / 40000.0;
        const double p = detail::oscillation_antiderivative(a, t);
        p_lo = std::min(p_lo, p);
        p_hi = std::max(p_hi, p);
    }
    kb.K = std::max(1.0, std::exp(p_hi - p_lo));
    return kb;
}

// --- Box bounds of the coupling --------------------------------------------

/// Summed Lipschitz constant of the inner factor h over [0, H]^m.
inline double logistic_lipschitz(const Nonlinearity& f, double H) {
    if (f.kind() != NonlinearityKind::product_logistic)
        throw ValidationError("nonlinearity", "product kind required");
    double l = 0.0;
    switch (f.inner_kind()) {
    case InnerKind::linear:
    case InnerKind::saturated:
        for (const auto& c : f.coefficients()) l += std::abs(c(0, 0));
        break;
    case InnerKind::product: {
        double prod = 1.0;
        for (const auto& c : f.coefficients()) prod *= std::abs(c(0, 0));
        const int m = f.arity();
        l = static_cast<double>(m) * prod * std::pow(H, m - 1);
        break;
    }
    }
    return l;
}

/// Grid search for sup of z_0 h(z_1..z_m) over the box [0, H]^{m+1}.
inline double mu_grid_search(const Nonlinearity& f, double H, int points = 25) {
    if (f.kind() != NonlinearityKind::product_logistic)
        throw ValidationError("nonlinearity", "product kind required");
    const int m = f.arity();
    std::vector<double> z(static_cast<std::size_t>(m), 0.0);
    std::vector<int> idx(static_cast<std::size_t>(m), 0);
    double best = 0.0;
    while (true) {
        for (int j = 0; j < m; ++j)
            z[static_cast<std::size_t>(j)] =
                H * idx[static_cast<std::size_t>(j)] / static_cast<double>(points - 1);
        const double h = f.inner_eval(z);
        // z_0 enters linearly, so the box corner z_0 = H is optimal per sign
        best = std::max(best, H * h);
        int j = 0;
        for (; j < m; ++j) {
            if (++idx[static_cast<std::size_t>(j)] < points) break;
            idx[static_cast<std::size_t>(j)] = 0;
        }
        if (j == m) break;
    }
    return best;
}

/// Supremum of z_0 h(z_1..z_m) over the box; the catalog inner shapes with
/// nonnegative coefficients are monotone, so the corner is exact.
inline double mu_sup(const Nonlinearity& f, double H) {
    if (f.kind() != NonlinearityKind::product_logistic)
        throw ValidationError("nonlinearity", "product kind required");
    bool nonneg = true;
    for (const auto& c : f.coefficients()) nonneg = nonneg && c(0, 0) >= 0.0;
    if (!nonneg) return mu_grid_search(f, H, 41);
    std::vector<double> corner(static_cast<std::size_t>(f.arity()), H);
    return H * f.inner_eval(corner);
}

// --- Existence conditions ---------------------------------------------------

struct ExistenceReport {
    double mean = 0.0, K = 1.0, sigma = 0.0;
    bool kernel_fitted = false;
    double mu = 0.0, lipschitz = 0.0, H = 0.0;
    double amplitude = 0.0;   // K mu / sigma, must stay <= H
    double contraction = 0.0; // (K / sigma)(l H + mu), must stay < 1
    bool amplitude_ok = false, contraction_ok = false, pass = false;
};

inline ExistenceReport existence_conditions(const LogisticProblem& lp) {
    ExistenceReport r;
    const KernelBounds kb = kernel_bounds(lp.a);
    r.mean = kb.mean;
    r.K = kb.K;
    r.sigma = kb.sigma;
    r.kernel_fitted = kb.fitted;
    r.mu = mu_sup(lp.f, lp.H);
    r.lipschitz = logistic_lipschitz(lp.f, lp.H);
    r.H = lp.H;
    r.amplitude = r.K * r.mu / r.sigma;
    r.contraction = (r.K / r.sigma) * (r.lipschitz * lp.H + r.mu);
    r.amplitude_ok = r.amplitude <= lp.H;
    r.contraction_ok = r.contraction < 1.0;
    r.pass = r.amplitude_ok && r.contraction_ok;
    return r;
}

// --- Fixed point of the backward operator -----------------------------------

struct LogisticOptions {
    double tol = 1e-9;
    int max_iterations = 80;
    int dense_samples = 48;
    double rtol = 1e-11;
};

struct LogisticRun {
    double start = 0.0; // constant initial level
    int iterations = 0;
    std::vector<double> updates, ratios;
    double final_update = 0.0;
    double sup = 0.0;                    // core sup of the converged iterate
    bool monotone_nonincreasing = true;  // nodewise, along the iteration
};

struct LogisticReport {
    ExistenceReport conditions;
    LogisticRun from_zero, from_top;
    bool zero_solution = false; // converged fixed point is the zero function
    double start_gap = 0.0;     // node sup distance between the two runs
    double fixed_point_gap = 0.0;
    double residual = 0.0;
    double tail_bound = 0.0;
    double t_cut = 0.0;
    long i_lo = 0, i_hi = 0;
};

namespace detail {

inline void clamp_solution(GridSolution& sol, double lo, double hi) {
    for (long i = sol.node_lo(); i <= sol.node_hi(); ++i) {
        Eigen::VectorXd v = sol.node(i);
        for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = std::clamp(v(k), lo, hi);
        sol.set_node(i, std::move(v));
    }
    for (long i = sol.node_lo(); i < sol.node_hi(); ++i) {
        if (!sol.has_dense(i)) continue;
        auto d = sol.dense(i);
        for (auto& v : d)
            for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = std::clamp(v(k), lo, hi);
        sol.set_dense(i, std::move(d));
    }
}

inline GridSolution constant_solution(const SwitchingSequence& seq, long i_lo, long i_hi,
                                      int samples, double core_lo, double core_hi,
                                      double level) {
    GridSolution sol(seq, i_lo, i_hi, 1, samples, core_lo, core_hi);
    Eigen::VectorXd v(1);
    v(0) = level;
    for (long i = i_lo; i <= i_hi; ++i) sol.set_node(i, v);
    for (long i = i_lo; i < i_hi; ++i)
        sol.set_dense(i, std::vector<Eigen::VectorXd>(static_cast<std::size_t>(samples), v));
    return sol;
}

} // namespace detail

/// Picard iteration of the truncated anti-causal integral
///   x(t) = integral_t^inf exp(integral_s^t a) x(s) h(x at deviated nodes) ds
/// inside the order box [0, H]. This is the Green-kernel machinery with the
/// zero projection: the growing-part sweep reproduces the backward kernel
/// exactly (the two sign flips cancel). Iterates are clamped into the box.
/// Both the zero start and the top start are run; when they coincide near
/// zero the report raises the zero_solution flag rather than presenting the
/// trivial fixed point as a positive solution.
inline std::pair<GridSolution, LogisticReport>
logistic_fixed_point(const LogisticProblem& lp, double core_lo, double core_hi,
                     LogisticOptions opts = {}) {
    if (core_hi <= core_lo) throw ValidationError("core", "empty core window");
    LogisticReport rep;
    rep.conditions = existence_conditions(lp);
    if (!rep.conditions.amplitude_ok)
        throw ConditionFailure("K*mu/sigma<=H",
                               "operator leaves the box: amplitude bound " +
                                   std::to_string(rep.conditions.amplitude) + " exceeds H");
    if (!rep.conditions.contraction_ok)
        throw NonContractive("iteration bound " + std::to_string(rep.conditions.contraction) +
                             " is not below 1");

    DichotomyData d;
    d.P = Eigen::MatrixXd::Zero(1, 1);
    d.K1 = 0.0;
    d.K2 = rep.conditions.K;
    d.sigma2 = rep.conditions.sigma;
    rep.t_cut = truncation_margin(d, std::max(rep.conditions.mu, 1e-12), opts.tol / 10.0);

    SwitchingSequence seq = lp.theta;
    seq.ensure_time(core_lo - rep.t_cut - 1.0, core_hi + rep.t_cut + 1.0);
    const double slack =
        static_cast<double>(lp.max_deviation() + 1) * seq.max_gap() + rep.t_cut;
    seq.ensure_time(core_lo - slack, core_hi + slack);
    rep.i_lo = seq.interval_index(core_lo - slack);
    rep.i_hi = seq.interval_index(core_hi + slack) + 1;

    GreenOperator green(lp.a, d, seq, rep.i_lo, rep.i_hi,
                        GreenOptions{opts.rtol, 0.5, 1e-12, opts.dense_samples});
    const Problem view = Problem(lp.a, lp.f, lp.deviations, green.sequence());

    auto iterate = [&](double level, LogisticRun& run) -> GridSolution {
        run.start = level;
        GridSolution cur = detail::constant_solution(green.sequence(), rep.i_lo, rep.i_hi,
                                                     opts.dense_samples, core_lo, core_hi,
                                                     std::clamp(level, 0.0, lp.H));
        for (int it = 1; it <= opts.max_iterations; ++it) {
            auto forcing = [&](long i, double t) -> Eigen::VectorXd {
                std::vector<Eigen::VectorXd> z;
                z.reserve(lp.deviations.size());
                for (long p : lp.deviations) z.push_back(cur.node_clamped(i - p));
                return lp.f.eval(t, cur.value(t), z);
            };
            GridSolution next = green.apply(forcing, core_lo, core_hi);
            detail::clamp_solution(next, 0.0, lp.H);
            double update = 0.0, increase = 0.0;
            for (long i = rep.i_lo; i <= rep.i_hi; ++i) {
                const double diff = (next.node(i) - cur.node(i)).norm();
                update = std::max(update, diff);
                increase = std::max(increase, (next.node(i) - cur.node(i)).maxCoeff());
            }
            if (increase > 1e-12) run.monotone_nonincreasing = false;
            cur = std::move(next);
            run.iterations = it;
            if (!run.updates.empty() && run.updates.back() > 0.0)
                run.ratios.push_back(update / run.updates.back());
            run.updates.push_back(update);
            if (update <= opts.tol * 0.5) break;
        }
        run.final_update = run.updates.empty() ? 0.0 : run.updates.back();
        if (run.final_update > opts.tol * 0.5)
            throw IterationLimit("no convergence after " +
                                 std::to_string(opts.max_iterations) + " iterations");
        run.sup = cur.sup_norm_core();
        return cur;
    };

    GridSolution psi_zero = iterate(0.0, rep.from_zero);
    GridSolution psi = iterate(lp.H, rep.from_top);

    double start_gap = 0.0;
    for (long i = rep.i_lo; i <= rep.i_hi; ++i)
        start_gap = std::max(start_gap, (psi.node(i) - psi_zero.node(i)).norm());
    rep.start_gap = start_gap;
    rep.zero_solution = psi.sup_norm_window() < 10.0 * opts.tol;

    {
        auto forcing = [&](long i, double t) -> Eigen::VectorXd {
            std::vector<Eigen::VectorXd> z;
            z.reserve(lp.deviations.size());
            for (long p : lp.deviations) z.push_back(psi.node_clamped(i - p));
            return lp.f.eval(t, psi.value(t), z);
        };
        auto again = green.apply_nodes(forcing);
        double gap = 0.0;
        for (long i = rep.i_lo; i <= rep.i_hi; ++i) {
            Eigen::VectorXd v = again[static_cast<std::size_t>(i - rep.i_lo)];
            for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = std::clamp(v(k), 0.0, lp.H);
            gap = std::max(gap, (v - psi.node(i)).norm());
        }
        rep.fixed_point_gap = gap;
    }

    rep.residual = ode_residual(view, psi, core_lo, core_hi);
    rep.tail_bound = dichotomy_tail(d, rep.conditions.mu, core_lo - seq.at(rep.i_lo),
                                    seq.at(rep.i_hi) - core_hi);
    return {std::move(psi), std::move(rep)};
}

/// Forward simulation with constant positive history.
inline Trajectory simulate_logistic(const LogisticProblem& lp, double n0, double t_end,
                                    IvpOptions opts = {}) {
    if (n0 <= 0.0) throw ValidationError("logistic.N0", "positive initial value required");
    const long p0 = lp.max_deviation();
    Eigen::VectorXd v(1);
    v(0) = n0;
    std::vector<Eigen::VectorXd> history(static_cast<std::size_t>(p0 + 1), v);
    return solve_ivp(lp.to_problem(), InitialData(0, std::move(history)), t_end, opts);
}

} // namespace epcag
