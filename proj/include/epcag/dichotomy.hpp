#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "epcag/errors.hpp"
#include "epcag/math_util.hpp"
#include "epcag/rk45.hpp"
#include "epcag/trig_polynomial.hpp"

namespace epcag {

/// Exponential splitting certificate for x' = A(t)x with fundamental matrix
/// X (X(0) = I): on the verification grid,
///   ||X(t) P X^{-1}(s)||       <= K1 exp(-sigma1 (t - s)),  t >= s,
///   ||X(t) (I - P) X^{-1}(s)|| <= K2 exp(-sigma2 (s - t)),  t <= s.
/// K1 == 0 (with P == 0) means no decaying part; K2 == 0 (with P == I) means
/// no growing part. `one_sided` carries (K, sigma) with
/// ||X(t)X^{-1}(s)|| <= K exp(-sigma (t - s)) when every solution decays.
struct DichotomyData {
    Eigen::MatrixXd P;
    double K1 = 0.0, sigma1 = 1.0;
    double K2 = 0.0, sigma2 = 1.0;
    std::optional<std::pair<double, double>> one_sided;

    int dim() const { return static_cast<int>(P.rows()); }
    bool has_decaying_part() const { return K1 > 0.0; }
    bool has_growing_part() const { return K2 > 0.0; }

    /// Kernel mass sup_t int ||G(t, s)|| ds of the associated Green kernel.
    double kernel_mass() const {
        double m = 0.0;
        if (has_decaying_part()) m += K1 / sigma1;
        if (has_growing_part()) m += K2 / sigma2;
        return m;
    }
};

/// Fixed-point contraction bound l * m * (K1/sigma1 + K2/sigma2).
inline double contraction_margin(const DichotomyData& d, double lipschitz, int deviations) {
    return lipschitz * static_cast<double>(deviations) * d.kernel_mass();
}

/// Fundamental matrix X(t) of x' = A(t)x with X(0) = I.
inline Eigen::MatrixXd fundamental_matrix(const TrigPolynomial& A, double t,
                                          double rtol = 1e-10) {
    const auto n = A.rows();
    IntegratorOptions opts;
    opts.rtol = rtol;
    opts.atol = rtol * 1e-2;
    if (t == 0.0) return Eigen::MatrixXd::Identity(n, n);
    return rk45_integrate([&](double s, const Eigen::MatrixXd& X) { return (A(s) * X).eval(); },
                          0.0, t, Eigen::MatrixXd::Identity(n, n), opts);
}

namespace detail {

/// Smallest sampled K with ||M(t)|| <= K exp(-sigma t) over the samples
/// (pairs of (t, log-norm)).
inline double fit_k(const std::vector<std::pair<double, double>>& log_norms, double sigma) {
    double log_k = -kInf;
    for (auto [d, u] : log_norms) log_k = std::max(log_k, u + sigma * d);
    return std::exp(log_k);
}

/// Least-squares slope of u against d.
inline double ls_slope(const std::vector<std::pair<double, double>>& pts) {
    double sd = 0, su = 0, sdd = 0, sdu = 0;
    for (auto [d, u] : pts) {
        sd += d;
        su += u;
        sdd += d * d;
        sdu += d * u;
    }
    const double n = static_cast<double>(pts.size());
    const double denom = n * sdd - sd * sd;
    if (denom <= 0.0) throw NoEnvelope("degenerate sample set");
    return (n * sdu - sd * su) / denom;
}

} // namespace detail

struct SpectralOptions {
    double margin = 0.02;    // sigma backs off this fraction below the spectral gap
    double sample_dt = 0.02; // envelope-constant sampling resolution
    double k_cap = 1e8;
};

/// Dichotomy data for constant A from its spectrum. The projection comes
/// from the eigen-decomposition (stable eigenvalues to 1, unstable to 0);
/// decay rates back off `margin` below the spectral gaps and the constants
/// are sampled sups of the projected propagator against those envelopes.
inline DichotomyData spectral_dichotomy(const Eigen::MatrixXd& A, SpectralOptions opts = {}) {
    const int n = static_cast<int>(A.rows());
    Eigen::EigenSolver<Eigen::MatrixXd> eig(A);
    if (eig.info() != Eigen::Success) throw NoEnvelope("eigen-decomposition failed");

    double stable_gap = kInf, unstable_gap = kInf;
    int n_stable = 0;
    for (int k = 0; k < n; ++k) {
        const double re = eig.eigenvalues()(k).real();
        if (re < 0.0) {
            ++n_stable;
            stable_gap = std::min(stable_gap, -re);
        } else {
            unstable_gap = std::min(unstable_gap, re);
        }
        if (re == 0.0)
            throw NoEnvelope("eigenvalue on the imaginary axis: no exponential splitting");
    }

    DichotomyData d;
    if (n_stable == n) {
        d.P = Eigen::MatrixXd::Identity(n, n);
    } else if (n_stable == 0) {
        d.P = Eigen::MatrixXd::Zero(n, n);
    } else {
        // Spectral projection through the (complex) eigenvector basis.
        Eigen::MatrixXcd V = eig.eigenvectors();
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(V);
        Eigen::MatrixXcd Vi = lu.inverse();
        if (condition_estimate(V.cwiseAbs(), Vi.cwiseAbs()) > 1e10)
            throw NoEnvelope("near-defective mixed spectrum: projection ill-conditioned");
        Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(n, n);
        for (int k = 0; k < n; ++k)
            if (eig.eigenvalues()(k).real() < 0.0) D(k, k) = 1.0;
        d.P = (V * D * Vi).real();
    }

    auto sampled_sup = [&](const Eigen::MatrixXd& proj, double sigma, double gap,
                           bool forward) {
        // ||e^{At} proj|| e^{sigma t} decays once the margin bites; scan to a
        // horizon where the residual rate has clearly taken over, then refine
        // around the coarse peak.
        const double rate = std::max(gap - sigma, 1e-3);
        const double horizon = std::min(40.0 / rate, 4e4);
        double dt = std::max(std::min(opts.sample_dt / std::max(1.0, op_norm(A)),
                                      horizon / 2000.0),
                             horizon / 20000.0);
        const double sdt = forward ? dt : -dt;
        const Eigen::MatrixXd step = fundamental_matrix(TrigPolynomial(A), sdt, 1e-12);
        // Track log ||X(t) proj|| with the iterate renormalized each step:
        // the raw product underflows to denormals long before the scan ends,
        // after which its floored norm would fake envelope growth.
        Eigen::MatrixXd cur = proj;
        double log_scale = 0.0, best = std::log(op_norm(proj)), t_best = 0.0, t = 0.0;
        const double log_cap = std::log(opts.k_cap);
        while (std::abs(t) < horizon) {
            cur = step * cur;
            t += sdt;
            const double nrm = op_norm(cur);
            if (nrm <= 0.0) break; // annihilated exactly; nothing left to bound
            cur /= nrm;
            log_scale += std::log(nrm);
            const double g = log_scale + sigma * std::abs(t);
            if (g > best) {
                best = g;
                t_best = t;
            }
            if (best > log_cap) throw NoEnvelope("no finite envelope constant");
        }
        // refine one coarse cell on each side of the peak
        const double t0 = forward ? std::max(0.0, t_best - dt) : std::min(0.0, t_best + dt);
        const Eigen::MatrixXd fine_step =
            fundamental_matrix(TrigPolynomial(A), sdt / 200.0, 1e-12);
        cur = fundamental_matrix(TrigPolynomial(A), t0, 1e-12) * proj;
        t = t0;
        log_scale = 0.0;
        for (int k = 0; k < 400; ++k) {
            cur = fine_step * cur;
            t += sdt / 200.0;
            const double nrm = op_norm(cur);
            if (nrm <= 0.0) break;
            cur /= nrm;
            log_scale += std::log(nrm);
            best = std::max(best, log_scale + sigma * std::abs(t));
        }
        return std::exp(best);
    };

    if (n_stable > 0) {
        d.sigma1 = stable_gap * (1.0 - opts.margin);
        if (!(d.sigma1 > 0.0)) throw NoEnvelope("stable gap too small");
        d.K1 = sampled_sup(d.P, d.sigma1, stable_gap, true);
    }
    if (n_stable < n) {
        d.sigma2 = unstable_gap * (1.0 - opts.margin);
        if (!(d.sigma2 > 0.0)) throw NoEnvelope("unstable gap too small");
        d.K2 = sampled_sup(Eigen::MatrixXd::Identity(n, n) - d.P, d.sigma2, unstable_gap,
                           false);
    }
    if (n_stable == n) d.one_sided = {{d.K1, d.sigma1}};
    return d;
}

struct EstimateGrid {
    double t_lo = -15.0, t_hi = 15.0;
    double dt = 0.25;
    double margin = 0.02;
    double k_cap = 1e8;
    double sigma_floor = 1e-4;
    double rtol = 1e-10;
};

/// Certifies a dichotomy for time-varying A on a sample grid: integrates the
/// fundamental matrix, then fits the smallest exponential envelopes of the
/// projected transition norms (slope by least squares, backed off by
/// `margin`; constant by the sampled sup). Throws NoEnvelope when the decay
/// fit degenerates or the constants blow past `k_cap`.
inline DichotomyData estimate_dichotomy(const TrigPolynomial& A, const Eigen::MatrixXd& P,
                                        EstimateGrid grid = {}) {
    const int n = static_cast<int>(A.rows());
    if (P.rows() != n || P.cols() != n)
        throw ValidationError("dichotomy.P", "projection shape mismatch");
    if ((P * P - P).norm() > 1e-8 * std::max(1.0, P.norm()))
        throw ValidationError("dichotomy.P", "candidate is not a projection");

    // X on the grid, integrated once in each direction from X(0) = I.
    std::vector<double> ts;
    for (double t = grid.t_lo; t <= grid.t_hi + 1e-12; t += grid.dt) ts.push_back(t);
    std::vector<Eigen::MatrixXd> X(ts.size());
    {
        IntegratorOptions opts;
        opts.rtol = grid.rtol;
        opts.atol = grid.rtol * 1e-2;
        auto rhs = [&](double s, const Eigen::MatrixXd& Y) { return (A(s) * Y).eval(); };
        std::vector<double> fwd, bwd;
        std::vector<std::size_t> fwd_id, bwd_id;
        for (std::size_t k = 0; k < ts.size(); ++k)
            (ts[k] >= 0.0 ? fwd : bwd).push_back(ts[k]),
                (ts[k] >= 0.0 ? fwd_id : bwd_id).push_back(k);
        std::sort(bwd.rbegin(), bwd.rend());
        std::sort(bwd_id.rbegin(), bwd_id.rend());
        Rk45 solver(rhs, opts);
        std::size_t e = 0;
        if (!fwd.empty())
            solver.path(0.0, fwd, Eigen::MatrixXd::Identity(n, n),
                        [&](double, const Eigen::MatrixXd& Y) { X[fwd_id[e++]] = Y; });
        e = 0;
        Rk45 solver_b(rhs, opts);
        if (!bwd.empty())
            solver_b.path(0.0, bwd, Eigen::MatrixXd::Identity(n, n),
                          [&](double, const Eigen::MatrixXd& Y) { X[bwd_id[e++]] = Y; });
    }
    std::vector<Eigen::MatrixXd> Xi(ts.size());
    for (std::size_t k = 0; k < ts.size(); ++k) {
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(X[k]);
        Xi[k] = lu.inverse();
    }

    const bool has_stable = P.norm() > 1e-14;
    const bool has_unstable = (Eigen::MatrixXd::Identity(n, n) - P).norm() > 1e-14;

    DichotomyData d;
    d.P = P;
    auto fit_part = [&](const Eigen::MatrixXd& proj, bool forward, double& K, double& sigma) {
        std::vector<std::pair<double, double>> log_norms;
        for (std::size_t a = 0; a < ts.size(); ++a)
            for (std::size_t b = 0; b <= a; ++b) {
                // forward part: t = ts[a] >= s = ts[b]; backward: swap roles
                const std::size_t it = forward ? a : b, is = forward ? b : a;
                const double dspan = ts[a] - ts[b];
                const double nrm = op_norm(X[it] * proj * Xi[is]);
                if (nrm > 0.0) log_norms.emplace_back(dspan, std::log(nrm));
            }
        const double slope = detail::ls_slope(log_norms);
        sigma = -slope * (1.0 - grid.margin);
        if (!(sigma > grid.sigma_floor))
            throw NoEnvelope("no exponential decay on the sample grid (C4)");
        K = detail::fit_k(log_norms, sigma);
        if (!(K < grid.k_cap)) throw NoEnvelope("envelope constant exceeds cap (C4)");
    };

    if (has_stable) fit_part(P, true, d.K1, d.sigma1);
    if (has_unstable)
        fit_part(Eigen::MatrixXd::Identity(n, n) - P, false, d.K2, d.sigma2);
    if (has_stable && !has_unstable) d.one_sided = {{d.K1, d.sigma1}};
    return d;
}

/// Re-checks the two envelope inequalities on a fresh grid; returns the worst
/// ratio ||.|| / envelope (<= 1 + slack means certified).
inline double verify_dichotomy(const TrigPolynomial& A, const DichotomyData& d, double t_lo,
                               double t_hi, double dt, double rtol = 1e-10) {
    const int n = d.dim();
    std::vector<double> ts;
    for (double t = t_lo; t <= t_hi + 1e-12; t += dt) ts.push_back(t);
    std::vector<Eigen::MatrixXd> X(ts.size()), Xi(ts.size());
    for (std::size_t k = 0; k < ts.size(); ++k) {
        X[k] = fundamental_matrix(A, ts[k], rtol);
        Xi[k] = Eigen::PartialPivLU<Eigen::MatrixXd>(X[k]).inverse();
    }
    const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n) - d.P;
    double worst = 0.0;
    for (std::size_t a = 0; a < ts.size(); ++a)
        for (std::size_t b = 0; b <= a; ++b) {
            const double span = ts[a] - ts[b];
            if (d.has_decaying_part())
                worst = std::max(worst, op_norm(X[a] * d.P * Xi[b]) /
                                            (d.K1 * std::exp(-d.sigma1 * span)));
            if (d.has_growing_part())
                worst = std::max(worst, op_norm(X[b] * Q * Xi[a]) /
                                            (d.K2 * std::exp(-d.sigma2 * span)));
        }
    return worst;
}

/// Green kernel of the dichotomy, evaluated directly from the fundamental
/// matrix (intended for point probes over moderate spans; the solvers use
/// node-factor products instead):
///   G(t, s) = X(t) P X^{-1}(s)        for t >= s,
///   G(t, s) = X(t) (P - I) X^{-1}(s)  for t <  s,
/// so G(s+, s) - G(s-, s) = I.
inline Eigen::MatrixXd green_kernel(const TrigPolynomial& A, const DichotomyData& d, double t,
                                    double s, double rtol = 1e-10) {
    const int n = d.dim();
    const Eigen::MatrixXd Xt = fundamental_matrix(A, t, rtol);
    const Eigen::MatrixXd Xs = fundamental_matrix(A, s, rtol);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(Xs);
    const Eigen::MatrixXd proj =
        t >= s ? d.P : (d.P - Eigen::MatrixXd::Identity(n, n)).eval();
    return Xt * proj * lu.solve(Eigen::MatrixXd::Identity(n, n));
}

} // namespace epcag
