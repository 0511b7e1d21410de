#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "epcag/errors.hpp"
#include "epcag/grid_solution.hpp"
#include "epcag/math_util.hpp"
#include "epcag/problem.hpp"
#include "epcag/rk45.hpp"

namespace epcag {

using Trajectory = GridSolution;

struct IvpOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    int dense_samples = 48;
};

/// Forward simulation by the method of steps: on each interval the deviated
/// arguments freeze at already-known node values, leaving a plain ODE that
/// is integrated to the next switching time. The last interval is simulated
/// in full even when t_end falls inside it; accuracy is claimed on the core
/// [theta_start, t_end].
inline Trajectory solve_ivp(const Problem& prob, const InitialData& init, double t_end,
                            IvpOptions opts = {}) {
    const long p0 = prob.max_deviation();
    if (init.dim() != prob.dim()) throw ValidationError("initial", "dimension mismatch");
    if (!init.covers(p0))
        throw ValidationError("initial.history",
                              "history must reach back " + std::to_string(p0) +
                                  " nodes before the start node");
    const long s = init.start_index();
    SwitchingSequence seq = prob.theta;
    seq.ensure_index(s - p0, s + 1);
    const double t0 = seq.at(s);
    if (t_end <= t0) throw ValidationError("t_end", "must lie beyond the start node");
    seq.ensure_time(t0, t_end);
    const long i_end = seq.interval_index(t_end) + 1;
    seq.ensure_index(s - p0, i_end);

    Trajectory sol(seq, s - p0, i_end, prob.dim(), opts.dense_samples, t0, t_end);
    for (long i = s - p0; i <= s; ++i) sol.set_node(i, init.at(i));

    IntegratorOptions io;
    io.rtol = opts.rtol;
    io.atol = opts.atol;
    std::vector<Eigen::VectorXd> z(prob.deviations.size());
    auto rhs = [&](double t, const Eigen::VectorXd& y) -> Eigen::VectorXd {
        return prob.A(t) * y + prob.f.eval(t, y, z);
    };
    Rk45<decltype(rhs)> integ(rhs, io);

    const int ns = opts.dense_samples;
    std::vector<double> ts(static_cast<std::size_t>(ns));
    for (long i = s; i < i_end; ++i) {
        for (std::size_t j = 0; j < z.size(); ++j) z[j] = sol.node(i - prob.deviations[j]);
        for (int k = 0; k < ns; ++k) ts[static_cast<std::size_t>(k)] = sol.sample_time(i, k);
        std::vector<Eigen::VectorXd> samples;
        samples.reserve(static_cast<std::size_t>(ns));
        samples.push_back(sol.node(i));
        integ.path(ts.front(), std::span<const double>(ts.data() + 1, ts.size() - 1),
                   sol.node(i), [&](double, const Eigen::VectorXd& y) { samples.push_back(y); });
        sol.set_node(i + 1, samples.back());
        sol.set_dense(i, std::move(samples));
    }
    return sol;
}

/// One node-to-node step by variation of constants,
///   x(theta_{i+1}) = U_i x(theta_i) + U_i * integral of X(theta_i, s) f(s, frozen) ds,
/// an independent cross-check of solve_ivp for state-independent couplings.
inline Eigen::VectorXd node_map(const Problem& prob,
                                const std::function<Eigen::VectorXd(long)>& node, long i,
                                double rtol = 1e-11) {
    if (prob.f.state_dependent())
        throw ValidationError("problem.nonlinearity",
                              "variation of constants needs a state-independent coupling");
    SwitchingSequence seq = prob.theta;
    seq.ensure_index(i, i + 1);
    const double a = seq.at(i), b = seq.at(i + 1);
    const int dim = prob.dim();

    std::vector<Eigen::VectorXd> z;
    z.reserve(prob.deviations.size());
    for (long p : prob.deviations) z.push_back(node(i - p));
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(dim);

    IntegratorOptions io;
    io.rtol = rtol;
    io.atol = rtol * 1e-2;
    // Joint system [U | q] with U' = A U, q' = A q + f, q(theta_i) = 0:
    // q(theta_{i+1}) is the variation-of-constants integral itself.
    auto affine = [&](double t, const Eigen::VectorXd& y) -> Eigen::VectorXd {
        Eigen::Map<const Eigen::MatrixXd> u(y.data(), dim, dim);
        Eigen::VectorXd out(dim * dim + dim);
        Eigen::MatrixXd du = prob.A(t) * u;
        out.head(dim * dim) = Eigen::Map<Eigen::VectorXd>(du.data(), dim * dim);
        out.tail(dim) = prob.A(t) * y.tail(dim) + prob.f.eval(t, zero, z);
        return out;
    };
    Rk45<decltype(affine)> integ(affine, io);
    Eigen::VectorXd y0 = Eigen::VectorXd::Zero(dim * dim + dim);
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(dim, dim);
    y0.head(dim * dim) = Eigen::Map<Eigen::VectorXd>(id.data(), dim * dim);
    const Eigen::VectorXd y1 = integ.integrate(a, b, y0);
    const Eigen::Map<const Eigen::MatrixXd> u(y1.data(), dim, dim);
    return u * node(i) + y1.tail(dim);
}

// --- Short-span transition norms ------------------------------------------

/// Sampled sup of ||X(t, s)|| over 0 <= t - s <= span, bases drawn from
/// [t_lo, t_hi]. Forward only: the short-span bounds always integrate from
/// an earlier s up to t. The sup includes t = s, so the result is at least 1.
inline double transition_norm_sup(const TrigPolynomial& A, double span, double t_lo,
                                  double t_hi, int bases = 16, int offsets = 12,
                                  double rtol = 1e-10) {
    if (span <= 0.0) throw ValidationError("span", "positive span required");
    const int dim = static_cast<int>(A.rows());
    IntegratorOptions io;
    io.rtol = rtol;
    io.atol = rtol * 1e-2;
    auto rhs = [&](double t, const Eigen::VectorXd& zf) -> Eigen::VectorXd {
        Eigen::Map<const Eigen::MatrixXd> zm(zf.data(), dim, dim);
        Eigen::MatrixXd dz = A(t) * zm;
        return Eigen::Map<Eigen::VectorXd>(dz.data(), dim * dim);
    };
    Rk45<decltype(rhs)> integ(rhs, io);
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::VectorXd idf = Eigen::Map<Eigen::VectorXd>(id.data(), dim * dim);

    double m = 1.0;
    std::vector<double> grid(static_cast<std::size_t>(offsets));
    for (int b = 0; b < bases; ++b) {
        const double s =
            t_lo + (t_hi - t_lo) * static_cast<double>(b) / std::max(1, bases - 1);
        for (int k = 1; k <= offsets; ++k)
            grid[static_cast<std::size_t>(k - 1)] =
                s + span * static_cast<double>(k) / offsets;
        integ.path(s, grid, idf, [&](double, const Eigen::VectorXd& zf) {
            m = std::max(m, op_norm(Eigen::Map<const Eigen::MatrixXd>(zf.data(), dim, dim)));
        });
    }
    return m;
}

/// Worst ratio of ||X(s+dt, s)|| against the one-sided envelope K e^{-sigma dt}
/// over sampled bases and forward offsets up to horizon.
inline double one_sided_envelope_ratio(const TrigPolynomial& A, double K, double sigma,
                                       double t_lo, double t_hi, double horizon,
                                       int bases = 10, int offsets = 16, double rtol = 1e-10) {
    const int dim = static_cast<int>(A.rows());
    IntegratorOptions io;
    io.rtol = rtol;
    io.atol = rtol * 1e-2;
    auto rhs = [&](double t, const Eigen::VectorXd& zf) -> Eigen::VectorXd {
        Eigen::Map<const Eigen::MatrixXd> zm(zf.data(), dim, dim);
        Eigen::MatrixXd dz = A(t) * zm;
        return Eigen::Map<Eigen::VectorXd>(dz.data(), dim * dim);
    };
    Rk45<decltype(rhs)> integ(rhs, io);
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::VectorXd idf = Eigen::Map<Eigen::VectorXd>(id.data(), dim * dim);

    double worst = 1.0 / K; // dt = 0 term
    std::vector<double> grid(static_cast<std::size_t>(offsets));
    for (int b = 0; b < bases; ++b) {
        const double s =
            t_lo + (t_hi - t_lo) * static_cast<double>(b) / std::max(1, bases - 1);
        for (int k = 1; k <= offsets; ++k)
            grid[static_cast<std::size_t>(k - 1)] = s + horizon * static_cast<double>(k) / offsets;
        integ.path(s, grid, idf, [&](double t, const Eigen::VectorXd& zf) {
            const double norm =
                op_norm(Eigen::Map<const Eigen::MatrixXd>(zf.data(), dim, dim));
            worst = std::max(worst, norm / (K * std::exp(-sigma * (t - s))));
        });
    }
    return worst;
}

// --- Uniqueness and stability constants -----------------------------------

struct UniquenessReport {
    double M = 1.0;        // sampled sup of ||X(t,s)|| over |t-s| <= theta_bar
    double theta_bar = 0.0;
    double product = 0.0;  // M * theta_bar-window coupling strength
    bool pass = false;
};

/// The small-gain number M * theta_bar * (summed Lipschitz constant); below
/// 1 the method-of-steps solution is the unique one through its data.
inline UniquenessReport uniqueness_check(const Problem& prob, double lipschitz_override = -1.0,
                                         double t_lo = 0.0, double t_hi = 20.0) {
    UniquenessReport r;
    SwitchingSequence seq = prob.theta;
    seq.ensure_time(t_lo - 1.0, t_hi + 1.0);
    r.theta_bar = seq.max_gap();
    r.M = transition_norm_sup(prob.A, r.theta_bar, t_lo, t_hi);
    const double l = lipschitz_override >= 0.0 ? lipschitz_override : prob.f.lipschitz();
    r.product = r.M * r.theta_bar * l;
    r.pass = r.product < 1.0;
    return r;
}

struct StabilityReport {
    double K = 1.0, sigma = 1.0; // one-sided decay envelope of the linear part
    double a = 0.0;              // chosen decay rate, 0 < a < sigma
    double delta = 0.0;          // initial perturbation radius
    double theta_bar = 0.0;      // uniform gap bound
    double tau = 0.0;            // worst span theta_{i+1} - theta_{i-p}
    double zeta = 0.0;           // 1 - e^{a tau} K l / (sigma - a)
    double L = 0.0;              // envelope amplitude K delta / zeta
    double M = 1.0;              // short-span transition norm bound
    double small_gain = 0.0;     // M theta_bar l
    bool c6 = false;             // one-sided envelope holds on samples
    bool c7 = false;             // K l < sigma
    bool c8 = false;             // zeta > 0
    bool c9 = false;             // small_gain < 1
    int trials = 0;
    std::vector<double> trial_margins; // worst envelope ratio per trial
    double worst_margin = 0.0;
    long worst_trial = -1;
    bool envelope_ok = true;
};

/// Decay-envelope constants for the perturbation around a bounded solution:
/// tau is the longest stretch an argument deviation can reach back,
/// zeta the contraction slack, and L the envelope amplitude so that
/// ||x(t, phi) - xi(t)|| < L e^{-a t} whenever the initial data stays
/// delta-close to xi. The Lipschitz constant is summed over arguments.
inline StabilityReport stability_constants(const Problem& prob, double K, double sigma,
                                           double a, double delta,
                                           double lipschitz_override = -1.0) {
    if (K < 1.0) throw ValidationError("stability.K", "one-sided constant must be >= 1");
    if (sigma <= 0.0) throw ValidationError("stability.sigma", "positive decay rate required");
    if (!(a > 0.0 && a < sigma))
        throw ValidationError("stability.a", "decay rate must satisfy 0 < a < sigma");
    if (delta < 0.0) throw ValidationError("stability.delta", "nonnegative radius required");

    StabilityReport r;
    r.K = K;
    r.sigma = sigma;
    r.a = a;
    r.delta = delta;
    const double l = lipschitz_override >= 0.0 ? lipschitz_override : prob.f.lipschitz();
    const long p0 = prob.max_deviation();

    SwitchingSequence seq = prob.theta;
    if (seq.kind() != SwitchingSequence::Kind::explicit_window) seq.ensure_index(-p0 - 2, 256);
    r.theta_bar = seq.max_gap();
    r.tau = seq.deviation_sup(prob.deviations, seq.lo_index() + p0, seq.hi_index() - 1);
    r.zeta = 1.0 - std::exp(a * r.tau) * K * l / (sigma - a);
    r.L = r.zeta > 0.0 ? K * delta / r.zeta : kInf;

    r.c6 = one_sided_envelope_ratio(prob.A, K, sigma, 0.0, 12.0, 6.0 / sigma) <= 1.0 + 1e-6;
    r.c7 = K * l < sigma;
    r.c8 = r.zeta > 0.0;
    r.M = transition_norm_sup(prob.A, r.theta_bar, 0.0, 12.0);
    r.small_gain = r.M * r.theta_bar * l;
    r.c9 = r.small_gain < 1.0;
    return r;
}

/// Random perturbation trials around a computed bounded solution xi: every
/// history node in [-p0, 0] is displaced inside the open delta-ball, the
/// perturbed problem is simulated forward, and the difference is checked
/// against the envelope L e^{-a t} on the shared core. A small absolute
/// slack keeps integrator noise from failing the delta = 0 case.
inline StabilityReport stability_experiment(const Problem& prob, const Trajectory& xi,
                                            double K, double sigma, double a, double delta,
                                            int trials, std::uint64_t seed,
                                            IvpOptions opts = {},
                                            double lipschitz_override = -1.0) {
    StabilityReport r = stability_constants(prob, K, sigma, a, delta, lipschitz_override);
    if (!r.c6) throw ConditionFailure("C6", "one-sided envelope fails on samples");
    if (!r.c7) throw ConditionFailure("C7", "coupling too strong: K l >= sigma");
    if (!r.c8) throw ConditionFailure("C8", "no envelope slack: zeta <= 0");
    if (trials < 0) throw ValidationError("trials", "nonnegative count required");
    if (xi.core_lo() > 0.0 || xi.core_hi() <= 0.0)
        throw ValidationError("xi", "reference solution must cover t = 0");

    const long p0 = prob.max_deviation();
    const double t_end = xi.core_hi();
    const double slack = 100.0 * opts.rtol * (1.0 + xi.sup_norm_core());
    std::mt19937_64 rng(seed);
    r.trials = trials;
    for (int trial = 0; trial < trials; ++trial) {
        std::vector<Eigen::VectorXd> history;
        history.reserve(static_cast<std::size_t>(p0 + 1));
        for (long i = -p0; i <= 0; ++i) {
            Eigen::VectorXd v = xi.node(i);
            if (delta > 0.0) v += ball_sample(rng, prob.dim(), delta);
            history.push_back(std::move(v));
        }
        Trajectory x = solve_ivp(prob, InitialData(0, std::move(history)), t_end, opts);
        double margin = 0.0;
        const int n = 512;
        for (int k = 0; k <= n; ++k) {
            const double t = t_end * static_cast<double>(k) / n;
            const double diff = (x.value(t) - xi.value(t)).norm();
            const double env = r.L * std::exp(-a * t);
            const double excess = std::max(diff - slack, 0.0);
            margin = std::max(margin, env > 0.0 ? excess / env : excess);
        }
        r.trial_margins.push_back(margin);
        if (margin > r.worst_margin) {
            r.worst_margin = margin;
            r.worst_trial = trial;
        }
    }
    r.envelope_ok = r.worst_margin <= 1.0;
    return r;
}

} // namespace epcag
