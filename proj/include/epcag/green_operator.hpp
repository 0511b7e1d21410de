#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "epcag/cauchy.hpp"
#include "epcag/dichotomy.hpp"
#include "epcag/errors.hpp"
#include "epcag/grid_solution.hpp"
#include "epcag/math_util.hpp"
#include "epcag/rk45.hpp"
#include "epcag/switching_sequence.hpp"
#include "epcag/trig_polynomial.hpp"

namespace epcag {

struct GreenOptions {
    double rtol = 1e-11;          // tolerance of the in-interval integrations
    double quad_panel = 0.5;      // max Gauss panel length for local integrals
    double commutator_tol = 1e-12; // threshold for the frozen-projection path
    int dense_samples = 48;       // per-interval sample count for dense output
};

/// Error of truncating the kernel integral t_*_margin away from the
/// evaluation point, for forcing bounded by sup_f.
inline double dichotomy_tail(const DichotomyData& d, double sup_f, double t_lo_margin,
                             double t_hi_margin) {
    double b = 0.0;
    if (d.has_decaying_part()) b += sup_f * d.K1 * std::exp(-d.sigma1 * t_lo_margin) / d.sigma1;
    if (d.has_growing_part()) b += sup_f * d.K2 * std::exp(-d.sigma2 * t_hi_margin) / d.sigma2;
    return b;
}

/// Smallest symmetric margin with dichotomy_tail below tol.
inline double truncation_margin(const DichotomyData& d, double sup_f, double tol) {
    double t = 0.0;
    while (dichotomy_tail(d, sup_f, t, t) >= tol && t < 1e4) t += 0.25;
    if (t >= 1e4) throw TruncationBudget("tail bound does not reach the requested tolerance");
    return t;
}

/// Applies the bounded-solution integral x(t) = integral of G(t,s) F(s) ds
/// over a finite node window, where G is the Green kernel of x' = A(t) x
/// under an exponential dichotomy with projection P.
///
/// The kernel is never formed over long spans. Writing S for the decaying
/// (history) part and W for the growing (future) part, node values obey
///
///   S(theta_{i+1}) = U_i P_i (S(theta_i) + Q_i)
///   W(theta_i)     = (I - P_i)(U_i^{-1} W(theta_{i+1}) - Q_i)
///
/// with U_i the one-interval transition matrix, P_i the projection
/// transported into the frame at theta_i, and Q_i the local integral of
/// X(theta_i, s) F(s) over one interval. Both propagation factors are
/// projected, so their norms obey the dichotomy envelopes and roundoff
/// cannot grow along a sweep even when U_i itself is expanding. Truncation
/// at the window ends is the only systematic error; tail_bound() quantifies
/// it from the dichotomy constants.
class GreenOperator {
public:
    GreenOperator(const TrigPolynomial& A, const DichotomyData& d, SwitchingSequence seq,
                  long i_lo, long i_hi, GreenOptions opts = {})
        : A_(A), d_(d), seq_(std::move(seq)), i_lo_(i_lo), i_hi_(i_hi), opts_(opts) {
        if (i_hi_ <= i_lo_) throw InsufficientWindow("need at least one interval");
        if (d_.dim() != A_.rows()) throw ValidationError("dichotomy", "dimension mismatch");
        seq_.ensure_index(i_lo_, i_hi_);
        cache_.emplace(A_, seq_, i_lo_, i_hi_, CauchyOptions{opts_.rtol, 1e8});
        build_projections();
        build_quadrature();
    }

    const DichotomyData& dichotomy() const { return d_; }
    const SwitchingSequence& sequence() const { return seq_; }
    long i_lo() const { return i_lo_; }
    long i_hi() const { return i_hi_; }
    double worst_condition() const { return cache_->worst_condition(); }

    /// Largest norm of a projected one-interval propagation factor, split by
    /// direction; both stay below the dichotomy envelope at the interval gap.
    std::pair<double, double> factor_norms() const {
        double fwd = 0.0, bwd = 0.0;
        for (const auto& iv : ivs_) {
            fwd = std::max(fwd, op_norm(iv.fwd));
            bwd = std::max(bwd, op_norm(iv.bwd));
        }
        return {fwd, bwd};
    }

    /// Forcing terms are passed as F(i, t) with i the index of the interval
    /// t belongs to. Step-frozen arguments make F discontinuous at the
    /// switching times, and the interval index pins the correct branch when
    /// t falls exactly on one.
    using Forcing = std::function<Eigen::VectorXd(long, double)>;

    /// Node values of the truncated integral over the cached window.
    /// Returned vector holds x(theta_i) for i = i_lo .. i_hi.
    std::vector<Eigen::VectorXd> apply_nodes(const Forcing& F) const {
        const long n = i_hi_ - i_lo_;
        const int dim = A_.rows();
        std::vector<Eigen::VectorXd> q(static_cast<std::size_t>(n));
        for (long i = 0; i < n; ++i) {
            const auto& iv = ivs_[static_cast<std::size_t>(i)];
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
            for (std::size_t k = 0; k < iv.s.size(); ++k)
                acc += iv.w[k] * (iv.Z[k] * F(i_lo_ + i, iv.s[k]));
            q[static_cast<std::size_t>(i)] = std::move(acc);
        }

        std::vector<Eigen::VectorXd> s(static_cast<std::size_t>(n + 1),
                                       Eigen::VectorXd::Zero(dim));
        if (d_.has_decaying_part()) {
            for (long i = 0; i < n; ++i) {
                const auto& iv = ivs_[static_cast<std::size_t>(i)];
                s[static_cast<std::size_t>(i + 1)] =
                    iv.fwd * (s[static_cast<std::size_t>(i)] + q[static_cast<std::size_t>(i)]);
            }
        }
        if (d_.has_growing_part()) {
            Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
            for (long i = n - 1; i >= 0; --i) {
                const auto& iv = ivs_[static_cast<std::size_t>(i)];
                w = iv.bwd * w - iv.Pc * q[static_cast<std::size_t>(i)];
                s[static_cast<std::size_t>(i)] += w;
            }
        }
        return s;
    }

    /// Re-integrates x' = A x + F across each interval from its sweep node
    /// value to populate dense samples. Valid because the swept nodes lie on
    /// a genuine solution of that ODE, so per-interval error stays local.
    void dense_fill(const Forcing& F, GridSolution& sol) const {
        IntegratorOptions io;
        io.rtol = opts_.rtol;
        io.atol = opts_.rtol * 1e-2;
        long cur = sol.node_lo();
        auto rhs = [&](double t, const Eigen::VectorXd& y) -> Eigen::VectorXd {
            return A_(t) * y + F(cur, t);
        };
        Rk45<decltype(rhs)> integ(rhs, io);
        const int ns = sol.samples_per_interval();
        std::vector<double> ts(static_cast<std::size_t>(ns));
        for (long i = sol.node_lo(); i < sol.node_hi(); ++i) {
            cur = i;
            for (int k = 0; k < ns; ++k) ts[static_cast<std::size_t>(k)] = sol.sample_time(i, k);
            std::vector<Eigen::VectorXd> samples;
            samples.reserve(static_cast<std::size_t>(ns));
            integ.path(ts.front(), std::span<const double>(ts.data() + 1, ts.size() - 1),
                       sol.node(i), [&](double, const Eigen::VectorXd& y) {
                           if (samples.empty()) samples.push_back(sol.node(i));
                           samples.push_back(y);
                       });
            if (samples.empty()) samples.push_back(sol.node(i));
            sol.set_dense(i, std::move(samples));
        }
    }

    /// Truncated integral as a dense solution over the cached window.
    GridSolution apply(const Forcing& F, double core_lo, double core_hi) const {
        GridSolution sol(seq_, i_lo_, i_hi_, A_.rows(), opts_.dense_samples, core_lo, core_hi);
        auto nodes = apply_nodes(F);
        for (long i = i_lo_; i <= i_hi_; ++i)
            sol.set_node(i, std::move(nodes[static_cast<std::size_t>(i - i_lo_)]));
        dense_fill(F, sol);
        return sol;
    }

    double tail_bound(double sup_f, double t_lo_margin, double t_hi_margin) const {
        return dichotomy_tail(d_, sup_f, t_lo_margin, t_hi_margin);
    }

    /// Projection in the frame at theta_i.
    const Eigen::MatrixXd& projection(long i) const {
        if (i < i_lo_ || i >= i_hi_) throw WindowExhausted("projection index outside window");
        return ivs_[static_cast<std::size_t>(i - i_lo_)].P;
    }

private:
    struct Interval {
        Eigen::MatrixXd P;   // transported projection at theta_i
        Eigen::MatrixXd Pc;  // I - P
        Eigen::MatrixXd fwd; // U_i P_i
        Eigen::MatrixXd bwd; // (I - P_i) U_i^{-1}
        std::vector<double> s, w;       // quadrature nodes and weights
        std::vector<Eigen::MatrixXd> Z; // X(theta_i, s_q) at the nodes
    };

    static Eigen::MatrixXd reidempotentize(Eigen::MatrixXd p) {
        for (int it = 0; it < 3 && (p * p - p).norm() > 1e-14; ++it)
            p = 3.0 * p * p - 2.0 * p * p * p;
        return p;
    }

    static Eigen::MatrixXd orth(const Eigen::MatrixXd& b) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(b);
        return qr.householderQ() * Eigen::MatrixXd::Identity(b.rows(), b.cols());
    }

    bool commuting_projection() const {
        const double scale = 1.0 + A_.sup_bound();
        for (double t : {0.0, 0.37, 1.1, 2.9, 7.3, -1.7, -5.2}) {
            const Eigen::MatrixXd a = A_(t);
            if ((d_.P * a - a * d_.P).norm() > opts_.commutator_tol * scale) return false;
        }
        return true;
    }

    void build_projections() {
        const long n = i_hi_ - i_lo_;
        ivs_.resize(static_cast<std::size_t>(n));
        const int dim = A_.rows();
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(dim, dim);

        if (commuting_projection()) {
            for (auto& iv : ivs_) iv.P = d_.P;
        } else {
            // Conjugating the full projection node to node is unstable: the
            // error grows at the spectral-gap rate in either direction. Each
            // invariant subspace is instead transported only the way it is
            // attracting: the kernel (unstable space) forward from the bottom
            // node, the range (stable space) backward from the top node. Seed
            // error then decays at the gap rate, so both bases are converged
            // everywhere except within a few intervals of their seeding end,
            // where the sweep attenuates the defect like truncation error.
            if (seq_.at(i_lo_) > 0.0 || seq_.at(i_hi_) < 0.0)
                throw InsufficientWindow(
                    "window must contain t = 0 to anchor a non-commuting projection");
            const long ia = seq_.interval_index(0.0);
            const Eigen::MatrixXd x0 = cache_->transition(seq_.at(ia), 0.0);
            const Eigen::MatrixXd p0 = reidempotentize(x0 * d_.P * x0.inverse());

            Eigen::FullPivLU<Eigen::MatrixXd> lu(p0);
            lu.setThreshold(1e-8);
            const Eigen::MatrixXd bs0 = orth(lu.image(p0));
            const Eigen::MatrixXd bu0 = orth(lu.kernel());
            const Eigen::Index ks = bs0.cols();
            if (ks + bu0.cols() != dim)
                throw NoEnvelope("projection rank split is not a direct sum");

            std::vector<Eigen::MatrixXd> bu(static_cast<std::size_t>(n));
            std::vector<Eigen::MatrixXd> bs(static_cast<std::size_t>(n));
            bu[0] = bu0;
            for (long k = 1; k < n; ++k)
                bu[static_cast<std::size_t>(k)] =
                    orth(cache_->factor(i_lo_ + k - 1) * bu[static_cast<std::size_t>(k - 1)]);
            bs[static_cast<std::size_t>(n - 1)] = bs0;
            for (long k = n - 2; k >= 0; --k)
                bs[static_cast<std::size_t>(k)] =
                    orth(cache_->factor_inv(i_lo_ + k) * bs[static_cast<std::size_t>(k + 1)]);

            Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(dim, dim);
            sel.topLeftCorner(ks, ks).setIdentity();
            for (long k = 0; k < n; ++k) {
                Eigen::MatrixXd frame(dim, dim);
                frame.leftCols(ks) = bs[static_cast<std::size_t>(k)];
                frame.rightCols(dim - ks) = bu[static_cast<std::size_t>(k)];
                Eigen::PartialPivLU<Eigen::MatrixXd> flu(frame);
                ivs_[static_cast<std::size_t>(k)].P = frame * sel * flu.inverse();
            }
        }

        for (long i = i_lo_; i < i_hi_; ++i) {
            auto& iv = ivs_[static_cast<std::size_t>(i - i_lo_)];
            iv.Pc = id - iv.P;
            iv.fwd = cache_->factor(i) * iv.P;
            iv.bwd = iv.Pc * cache_->factor_inv(i);
        }
    }

    void build_quadrature() {
        const int dim = A_.rows();
        IntegratorOptions io;
        io.rtol = opts_.rtol;
        io.atol = opts_.rtol * 1e-2;
        // Z(s) = X(theta_i, s) solves Z' = -Z A(s), Z(theta_i) = I; no
        // matrix inversions are needed for the local integrals.
        auto rhs = [&](double t, const Eigen::VectorXd& zf) -> Eigen::VectorXd {
            Eigen::Map<const Eigen::MatrixXd> z(zf.data(), dim, dim);
            Eigen::MatrixXd dz = -z * A_(t);
            return Eigen::Map<Eigen::VectorXd>(dz.data(), dim * dim);
        };
        Rk45<decltype(rhs)> integ(rhs, io);
        Eigen::MatrixXd id = Eigen::MatrixXd::Identity(dim, dim);
        Eigen::Map<Eigen::VectorXd> idf(id.data(), dim * dim);

        for (long i = i_lo_; i < i_hi_; ++i) {
            auto& iv = ivs_[static_cast<std::size_t>(i - i_lo_)];
            composite_gl8(seq_.at(i), seq_.at(i + 1), opts_.quad_panel, iv.s, iv.w);
            iv.Z.reserve(iv.s.size());
            integ.path(seq_.at(i), iv.s, Eigen::VectorXd(idf),
                       [&](double, const Eigen::VectorXd& zf) {
                           iv.Z.push_back(
                               Eigen::Map<const Eigen::MatrixXd>(zf.data(), dim, dim));
                       });
        }
    }

    TrigPolynomial A_;
    DichotomyData d_;
    SwitchingSequence seq_;
    long i_lo_, i_hi_;
    GreenOptions opts_;
    std::optional<CauchyCache> cache_;
    std::vector<Interval> ivs_;
};

/// Bounded solution of the inhomogeneous linear system x' = A(t) x + g(t)
/// on a core window, with the truncation margin chosen from the dichotomy
/// tail so the result is accurate to tol on the core.
inline GridSolution bounded_solution(const TrigPolynomial& A, const DichotomyData& d,
                                     const SwitchingSequence& seq, const TrigPolynomial& g,
                                     double core_lo, double core_hi, double tol,
                                     GreenOptions opts = {}) {
    if (core_hi <= core_lo) throw ValidationError("core", "empty core window");
    if (g.cols() != 1) throw ValidationError("forcing", "column vector required");
    const double margin = truncation_margin(d, g.sup_bound(), tol / 10.0);
    SwitchingSequence s = seq;
    s.ensure_time(core_lo - margin - 1.0, core_hi + margin + 1.0);
    const long lo = s.interval_index(core_lo - margin);
    const long hi = s.interval_index(core_hi + margin) + 1;
    GreenOperator op(A, d, s, lo, hi, opts);
    return op.apply([&](long, double t) -> Eigen::VectorXd { return g(t); }, core_lo, core_hi);
}

} // namespace epcag
