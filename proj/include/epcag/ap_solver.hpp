#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "epcag/dichotomy.hpp"
#include "epcag/errors.hpp"
#include "epcag/green_operator.hpp"
#include "epcag/grid_solution.hpp"
#include "epcag/math_util.hpp"
#include "epcag/problem.hpp"

namespace epcag {

struct ApOptions {
    double tol = 1e-9;
    int max_iterations = 200;
    int dense_samples = 48;
    double rtol = 1e-11;          // in-interval integration tolerance
    double quad_panel = 0.5;
    double t_cut_override = -1.0; // >= 0 replaces the derived truncation margin
    bool enforce_contraction = true; // set false to explore past margin >= 1
};

struct SolveReport {
    DichotomyData dichotomy;
    double margin = 0.0;              // Lipschitz bound of one iteration step
    int iterations = 0;
    std::vector<double> update_norms; // sup over nodes per iteration
    std::vector<double> ratios;       // successive update quotients
    double final_update = 0.0;
    double fixed_point_gap = 0.0;     // node sup of one extra iteration step
    double residual = 0.0;            // ODE defect on the core window
    double tail_bound = 0.0;          // truncation error bound on the core
    double t_cut = 0.0;               // truncation margin beyond the core
    double sup_core = 0.0;
    double sup_forcing = 0.0;         // bound used to size the window
    double worst_condition = 0.0;
    long i_lo = 0, i_hi = 0;          // node window of the computation
};

/// One application of the solution operator restricted to switching nodes:
/// new_x(theta_i) = integral of G(theta_i, s) f(s, frozen arguments) ds,
/// with the arguments frozen per interval from the supplied node values.
/// Node indices reaching outside the window clamp to its edge; the window
/// enlargement in picard_solve keeps that approximation below the
/// truncation budget on the core.
class IntegralOperator {
public:
    IntegralOperator(const Problem& prob, const DichotomyData& d, long i_lo, long i_hi,
                     const ApOptions& opts = {})
        : prob_(prob),
          green_(prob.A, d, prob.theta, i_lo, i_hi,
                 GreenOptions{opts.rtol, opts.quad_panel, 1e-12, opts.dense_samples}),
          zero_state_(Eigen::VectorXd::Zero(prob.dim())),
          dense_samples_(opts.dense_samples) {
        if (prob_.f.state_dependent())
            throw ValidationError("problem.nonlinearity",
                                  "state-dependent coupling needs the logistic solver");
    }

    const GreenOperator& green() const { return green_; }
    long i_lo() const { return green_.i_lo(); }
    long i_hi() const { return green_.i_hi(); }
    std::size_t node_count() const { return static_cast<std::size_t>(i_hi() - i_lo() + 1); }

    /// The returned callable references the node vector it was built from.
    GreenOperator::Forcing forcing(const std::vector<Eigen::VectorXd>& nodes) const {
        return [this, &nodes](long i, double t) -> Eigen::VectorXd {
            return prob_.f.eval(t, zero_state_, frozen_arguments(nodes, i));
        };
    }

    std::vector<Eigen::VectorXd> step(const std::vector<Eigen::VectorXd>& nodes) const {
        return green_.apply_nodes(forcing(nodes));
    }

    GridSolution materialize(const std::vector<Eigen::VectorXd>& nodes, double core_lo,
                             double core_hi) const {
        GridSolution sol(green_.sequence(), i_lo(), i_hi(), prob_.dim(), dense_samples_,
                         core_lo, core_hi);
        for (long i = i_lo(); i <= i_hi(); ++i)
            sol.set_node(i, nodes[static_cast<std::size_t>(i - i_lo())]);
        green_.dense_fill(forcing(nodes), sol);
        return sol;
    }

private:
    std::vector<Eigen::VectorXd> frozen_arguments(const std::vector<Eigen::VectorXd>& nodes,
                                                  long interval) const {
        std::vector<Eigen::VectorXd> z;
        z.reserve(prob_.deviations.size());
        const long n = static_cast<long>(nodes.size()) - 1;
        for (long p : prob_.deviations) {
            const long k = std::clamp(interval - p - i_lo(), 0L, n);
            z.push_back(nodes[static_cast<std::size_t>(k)]);
        }
        return z;
    }

    Problem prob_;
    GreenOperator green_;
    Eigen::VectorXd zero_state_;
    int dense_samples_;
};

/// Max-norm ODE defect of a candidate solution over [t_lo, t_hi]: the
/// derivative is recovered from the dense samples with 7-point one-sided
/// finite-difference stencils that never cross a switching time, then
/// compared against A x + f with the arguments frozen per interval from the
/// stored node values.
inline double ode_residual(const Problem& prob, const GridSolution& sol, double t_lo,
                           double t_hi) {
    const int ns = sol.samples_per_interval();
    if (ns < 7) throw ValidationError("samples_per_interval", "need at least 7 for the defect");
    const auto& seq = sol.sequence();
    const int stencil = 7;
    double worst = 0.0;
    std::vector<double> xs(stencil);
    for (long i = sol.node_lo(); i < sol.node_hi(); ++i) {
        if (seq.at(i + 1) < t_lo || seq.at(i) > t_hi) continue;
        const auto& d = sol.dense(i);
        std::vector<Eigen::VectorXd> z;
        z.reserve(prob.deviations.size());
        for (long p : prob.deviations) z.push_back(sol.node_clamped(i - p));
        const double a = seq.at(i);
        const double h = (seq.at(i + 1) - a) / (ns - 1);
        for (int k = 0; k < ns; ++k) {
            const double t = a + k * h;
            if (t < t_lo || t > t_hi) continue;
            const int k0 = std::clamp(k - stencil / 2, 0, ns - stencil);
            for (int j = 0; j < stencil; ++j) xs[static_cast<std::size_t>(j)] = a + (k0 + j) * h;
            const auto w = fd_weights(t, xs, 1);
            Eigen::VectorXd deriv = Eigen::VectorXd::Zero(sol.dim());
            for (int j = 0; j < stencil; ++j)
                deriv += w[static_cast<std::size_t>(j)] * d[static_cast<std::size_t>(k0 + j)];
            const Eigen::VectorXd rhs =
                prob.A(t) * d[static_cast<std::size_t>(k)] +
                prob.f.eval(t, d[static_cast<std::size_t>(k)], z);
            worst = std::max(worst, (deriv - rhs).norm());
        }
    }
    return worst;
}

/// Dichotomy data for the linear part: supplied with the problem, exact
/// from the spectrum when A is constant, otherwise fitted along the
/// fundamental matrix starting from the spectral projection of the mean.
inline DichotomyData resolve_dichotomy(const Problem& prob) {
    if (prob.dichotomy) return *prob.dichotomy;
    if (prob.A.is_constant()) return spectral_dichotomy(prob.A.constant_term());
    const DichotomyData mean = spectral_dichotomy(prob.A.constant_term());
    return estimate_dichotomy(prob.A, mean.P, EstimateGrid{});
}

/// Successive approximations for the bounded integral equation
/// x(t) = integral of G(t,s) f(s, x at deviated nodes) ds, starting from
/// the zero function and iterating on node values. Accuracy is claimed on
/// the core window; the computation window adds the truncation margin plus
/// room for every deviated argument.
inline std::pair<GridSolution, SolveReport> picard_solve(const Problem& prob, double core_lo,
                                                         double core_hi, ApOptions opts = {}) {
    if (core_hi <= core_lo) throw ValidationError("core", "empty core window");
    SolveReport rep;
    rep.dichotomy = resolve_dichotomy(prob);
    const double lip = prob.f.lipschitz();
    const double mass = rep.dichotomy.kernel_mass();
    rep.margin = lip * mass;
    if (rep.margin >= 1.0 && opts.enforce_contraction)
        throw NonContractive("iteration margin " + std::to_string(rep.margin) +
                             " is not below 1");

    // Ball radius of the iterates and the forcing bound inside it.
    const double f0 = prob.f.bound(0.0);
    const double radius = rep.margin < 1.0 ? mass * f0 / (1.0 - rep.margin) : 10.0 * mass * f0;
    rep.sup_forcing = std::max(prob.f.bound(radius), 1e-12);

    // The fixed point feels the window boundary through the node coupling,
    // which reinjects the boundary defect every interval: the defect decays
    // into the core slower than the linear kernel. A decay rate a is
    // certified when the weighted-norm contraction factor
    //   rho(a) = l m e^{a tau} (K1/(sigma1 - a) + K2/(sigma2 - a))
    // stays below 1 (tau bounds the reach of a deviated argument); the
    // boundary defect at distance D into the window is then at most
    // mass * sup_f * e^{-aD} / (1 - rho). The margin is sized so that bound
    // meets the tolerance, never less than the linear-kernel margin.
    SwitchingSequence seq = prob.theta;
    seq.ensure_time(core_lo - 1.0, core_hi + 1.0);
    const double tau = static_cast<double>(prob.max_deviation() + 1) * seq.max_gap();
    const double m_dev = static_cast<double>(prob.deviations.size());
    const DichotomyData& dd = rep.dichotomy;
    auto rho = [&](double a) {
        double s = 0.0;
        if (dd.has_decaying_part()) s += dd.K1 / (dd.sigma1 - a);
        if (dd.has_growing_part()) s += dd.K2 / (dd.sigma2 - a);
        return lip * m_dev * std::exp(a * tau) * s;
    };
    const double rho_target = std::max(0.9, (1.0 + std::min(rep.margin, 1.0)) / 2.0);
    double sig_min = kInf;
    if (dd.has_decaying_part()) sig_min = std::min(sig_min, dd.sigma1);
    if (dd.has_growing_part()) sig_min = std::min(sig_min, dd.sigma2);
    double a_star = sig_min * (1.0 - 1e-9);
    if (lip > 0.0 && rho(a_star) > rho_target) {
        double a_lo = 0.0, a_hi = a_star;
        for (int k = 0; k < 80; ++k) {
            const double mid = 0.5 * (a_lo + a_hi);
            (rho(mid) <= rho_target ? a_lo : a_hi) = mid;
        }
        a_star = a_lo;
    }
    const double tol_tail = opts.tol / 10.0;
    const double defect0 = mass * rep.sup_forcing;
    double t_nl = 0.0;
    if (a_star > 0.0 && defect0 > tol_tail / 2.0)
        t_nl = std::log(2.0 * defect0 / ((1.0 - rho_target) * tol_tail)) / a_star;
    // cost guard: never widen past a few hundred gaps beyond the core
    t_nl = std::min(t_nl, (500.0 + 10.0 * (core_hi - core_lo)) * seq.max_gap());
    rep.t_cut = opts.t_cut_override >= 0.0
                    ? opts.t_cut_override
                    : std::max(truncation_margin(rep.dichotomy, rep.sup_forcing, tol_tail),
                               t_nl);

    seq.ensure_time(core_lo - rep.t_cut - 1.0, core_hi + rep.t_cut + 1.0);
    const double slack =
        static_cast<double>(prob.max_deviation() + 1) * seq.max_gap() + rep.t_cut;
    seq.ensure_time(core_lo - slack, core_hi + slack);
    rep.i_lo = seq.interval_index(core_lo - slack);
    rep.i_hi = seq.interval_index(core_hi + slack) + 1;

    Problem local(prob.A, prob.f, prob.deviations, seq, prob.dichotomy);
    IntegralOperator op(local, rep.dichotomy, rep.i_lo, rep.i_hi, opts);

    std::vector<Eigen::VectorXd> nodes(op.node_count(), Eigen::VectorXd::Zero(prob.dim()));
    bool converged = false;
    for (int it = 1; it <= opts.max_iterations; ++it) {
        auto next = op.step(nodes);
        double update = 0.0;
        for (std::size_t k = 0; k < nodes.size(); ++k)
            update = std::max(update, (next[k] - nodes[k]).norm());
        nodes = std::move(next);
        rep.iterations = it;
        if (!rep.update_norms.empty() && rep.update_norms.back() > 0.0)
            rep.ratios.push_back(update / rep.update_norms.back());
        rep.update_norms.push_back(update);
        if (update <= opts.tol * 0.5) {
            converged = true;
            break;
        }
    }
    rep.final_update = rep.update_norms.empty() ? 0.0 : rep.update_norms.back();
    if (!converged && rep.final_update > opts.tol * 0.5)
        throw IterationLimit("no convergence after " + std::to_string(opts.max_iterations) +
                             " iterations; last update " + std::to_string(rep.final_update));

    {
        auto again = op.step(nodes);
        double gap = 0.0;
        for (std::size_t k = 0; k < nodes.size(); ++k)
            gap = std::max(gap, (again[k] - nodes[k]).norm());
        rep.fixed_point_gap = gap;
    }

    GridSolution sol = op.materialize(nodes, core_lo, core_hi);
    rep.residual = ode_residual(local, sol, core_lo, core_hi);
    // boundary defect transported to the core at the certified rate
    const double dist_lo = core_lo - seq.at(rep.i_lo);
    const double dist_hi = seq.at(rep.i_hi) - core_hi;
    rep.tail_bound = defect0 * (std::exp(-a_star * dist_lo) + std::exp(-a_star * dist_hi)) /
                     (1.0 - rho_target);
    rep.sup_core = sol.sup_norm_core();
    rep.worst_condition = op.green().worst_condition();
    return {std::move(sol), std::move(rep)};
}

// --- Translation diagnostics ---------------------------------------------

struct TranslationCheck {
    double tau = 0.0;
    double sup_diff = 0.0; // sup over sampled core of ||x(t+tau) - x(t)||
    double bound = 0.0;    // C * eps with C from the contraction constants
    bool within = false;
};

/// Checks how well candidate translation numbers of the input data carry
/// over to the computed solution. The factor C combines the kernel mass,
/// the coupling strength at the solution's amplitude and the contraction
/// margin; a genuinely common eps-translation number of all inputs must
/// keep the solution within C*eps of itself.
inline std::vector<TranslationCheck>
translation_diagnostic(const GridSolution& sol, const SolveReport& rep, double lipschitz,
                       std::span<const double> taus, double eps, double sample_step = 0.05) {
    const double mass = rep.dichotomy.kernel_mass();
    const double c =
        mass * (1.0 + lipschitz * rep.sup_core) / (1.0 - std::min(rep.margin, 0.999)) + 1.0;
    std::vector<TranslationCheck> out;
    out.reserve(taus.size());
    for (double tau : taus) {
        TranslationCheck tc;
        tc.tau = tau;
        tc.bound = c * eps;
        const double lo = std::max(sol.core_lo(), sol.core_lo() - tau);
        const double hi = std::min(sol.core_hi(), sol.core_hi() - tau);
        if (hi <= lo) throw InsufficientWindow("translation leaves no core overlap");
        const long n = std::max(2L, static_cast<long>(std::floor((hi - lo) / sample_step)));
        for (long k = 0; k <= n; ++k) {
            const double t = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n);
            tc.sup_diff = std::max(tc.sup_diff, (sol.value(t + tau) - sol.value(t)).norm());
        }
        tc.within = tc.sup_diff <= tc.bound;
        out.push_back(tc);
    }
    return out;
}

} // namespace epcag
