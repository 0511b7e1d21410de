#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "epcag/errors.hpp"
#include "epcag/sequence_diagnostics.hpp"
#include "epcag/switching_sequence.hpp"
#include "epcag/trig_polynomial.hpp"

namespace epcag {

/// Piecewise-smooth, right-continuous function on a finite window. Pieces are
/// callables valid on the closure of their interval, so one-sided limits at
/// interior boundaries come from evaluating the adjacent piece at the
/// boundary itself.
class PiecewiseFunction {
public:
    using Piece = std::function<Eigen::VectorXd(double)>;

    PiecewiseFunction(std::vector<double> bounds, std::vector<Piece> pieces, int dim)
        : bounds_(std::move(bounds)), pieces_(std::move(pieces)), dim_(dim) {
        if (bounds_.size() != pieces_.size() + 1 || pieces_.empty())
            throw ValidationError("piecewise", "need n pieces and n+1 boundaries");
        for (std::size_t k = 1; k < bounds_.size(); ++k)
            if (!(bounds_[k] > bounds_[k - 1]))
                throw ValidationError("piecewise", "boundaries must increase");
    }

    /// Single smooth piece over [lo, hi] (no interior breakpoints).
    static PiecewiseFunction smooth(double lo, double hi, Piece f, int dim) {
        return PiecewiseFunction({lo, hi}, {std::move(f)}, dim);
    }

    static PiecewiseFunction smooth_scalar(double lo, double hi,
                                           std::function<double(double)> f) {
        return smooth(
            lo, hi,
            [f = std::move(f)](double t) {
                return Eigen::VectorXd::Constant(1, f(t)).eval();
            },
            1);
    }

    int dim() const { return dim_; }
    double window_lo() const { return bounds_.front(); }
    double window_hi() const { return bounds_.back(); }

    /// Interior piece boundaries: the candidate discontinuity points.
    std::vector<double> breakpoints() const {
        return {bounds_.begin() + 1, bounds_.end() - 1};
    }

    Eigen::VectorXd operator()(double t) const {
        return pieces_[piece_of(t)](t);
    }

    Eigen::VectorXd left_limit(double t) const {
        if (t <= window_lo()) throw WindowExhausted("no left limit at the window start");
        auto it = std::lower_bound(bounds_.begin(), bounds_.end(), t);
        std::size_t k = (it != bounds_.end() && *it == t)
                            ? static_cast<std::size_t>(it - bounds_.begin())
                            : piece_of(t) + 1;
        return pieces_[k - 1](t);
    }

    PiecewiseFunction shifted(double tau) const {
        std::vector<double> b(bounds_);
        for (double& x : b) x -= tau;
        std::vector<Piece> p;
        p.reserve(pieces_.size());
        for (const Piece& f : pieces_)
            p.push_back([f, tau](double t) { return f(t + tau); });
        return PiecewiseFunction(std::move(b), std::move(p), dim_);
    }

    /// Restriction to [lo, hi] (must lie inside the window).
    PiecewiseFunction restricted(double lo, double hi) const {
        if (lo < window_lo() || hi > window_hi() || !(lo < hi))
            throw WindowExhausted("restriction outside stored window");
        std::vector<double> b{lo};
        std::vector<Piece> p;
        for (std::size_t k = 0; k < pieces_.size(); ++k) {
            const double a = bounds_[k], c = bounds_[k + 1];
            if (c <= lo || a >= hi) continue;
            p.push_back(pieces_[k]);
            b.push_back(std::min(c, hi));
        }
        b.back() = hi;
        return PiecewiseFunction(std::move(b), std::move(p), dim_);
    }

private:
    std::size_t piece_of(double t) const {
        if (t < window_lo() || t > window_hi())
            throw WindowExhausted("evaluation outside stored window");
        if (t >= bounds_[bounds_.size() - 2]) return pieces_.size() - 1;
        auto it = std::upper_bound(bounds_.begin(), bounds_.end(), t);
        return static_cast<std::size_t>(it - bounds_.begin()) - 1;
    }

    std::vector<double> bounds_;
    std::vector<Piece> pieces_;
    int dim_;
};

enum class StepArgument {
    node_time,  // piece value f(theta_{i-p})
    node_index  // piece value f(i-p), the index fed in as a real argument
};

/// The step function t -> f(theta_{interval_index(t) - p}) over the index
/// window [i_lo, i_hi] of the sequence: constant on each switching interval.
inline PiecewiseFunction step_compose(const TrigPolynomial& f, const SwitchingSequence& seq,
                                      long deviation, long i_lo, long i_hi,
                                      StepArgument mode = StepArgument::node_time) {
    if (f.cols() != 1)
        throw ValidationError("step_compose", "needs a scalar or vector function");
    std::vector<double> bounds;
    std::vector<PiecewiseFunction::Piece> pieces;
    for (long i = i_lo; i <= i_hi; ++i) bounds.push_back(seq.at(i));
    for (long i = i_lo; i < i_hi; ++i) {
        const double arg = mode == StepArgument::node_time
                               ? seq.at(i - deviation)
                               : static_cast<double>(i - deviation);
        Eigen::VectorXd value = f(arg);
        pieces.push_back([value](double) { return value; });
    }
    return PiecewiseFunction(std::move(bounds), std::move(pieces),
                             static_cast<int>(f.rows()));
}

struct BwComparison {
    bool equivalent = false;
    bool breakpoints_equivalent = false;
    double max_value_deviation = 0.0; // outside the excluded neighbourhoods
    MatchWitness breakpoint_match;
};

/// Two-part equivalence test for piecewise right-continuous functions:
/// the breakpoint sequences must be eps-equivalent on the common window, and
/// the values must differ by less than eps everywhere outside the union of
/// eps-neighbourhoods of either function's breakpoints. Functions without
/// breakpoints reduce to a sup-norm comparison.
inline BwComparison bw_equivalent(const PiecewiseFunction& u1, const PiecewiseFunction& u2,
                                  double eps, int samples_per_piece = 32,
                                  int multiplicity_cap = 4) {
    BwComparison cmp;
    const double lo = std::max(u1.window_lo(), u2.window_lo());
    const double hi = std::min(u1.window_hi(), u2.window_hi());
    if (!(lo < hi)) throw WindowExhausted("windows do not overlap");

    auto inside = [&](double x, const std::vector<double>& pts) {
        for (double p : pts)
            if (std::abs(x - p) < eps) return true;
        return false;
    };
    std::vector<double> b1, b2;
    for (double x : u1.breakpoints())
        if (x > lo - eps && x < hi + eps) b1.push_back(x);
    for (double x : u2.breakpoints())
        if (x > lo - eps && x < hi + eps) b2.push_back(x);

    if (b1.empty() && b2.empty()) {
        cmp.breakpoints_equivalent = true;
    } else if (b1.empty() || b2.empty()) {
        // A breakpoint-free function can only match one whose breakpoints all
        // sit in the edge margins.
        const auto& nonempty = b1.empty() ? b2 : b1;
        cmp.breakpoints_equivalent =
            std::all_of(nonempty.begin(), nonempty.end(),
                        [&](double x) { return x < lo + eps || x > hi - eps; });
    } else {
        auto sa = SwitchingSequence::explicit_window(0, b1);
        auto sb = SwitchingSequence::explicit_window(0, b2);
        // collect_points needs the margin-extended range stored; b1/b2 were
        // already clipped to it, so compare on the core window only.
        cmp.breakpoint_match = eps_equivalent(sa, sb, eps, lo, hi, multiplicity_cap);
        cmp.breakpoints_equivalent = cmp.breakpoint_match.equivalent;
    }

    // Sample every piece of both functions on the common window, skipping the
    // excluded neighbourhoods; include one-sided limits at piece boundaries.
    std::vector<double> exclusion = b1;
    exclusion.insert(exclusion.end(), b2.begin(), b2.end());
    double worst = 0.0;
    auto sample = [&](const PiecewiseFunction& u) {
        std::vector<double> cuts{lo, hi};
        for (double x : u.breakpoints())
            if (x > lo && x < hi) cuts.push_back(x);
        std::sort(cuts.begin(), cuts.end());
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            const double a = cuts[k], b = cuts[k + 1];
            for (int s = 0; s <= samples_per_piece; ++s) {
                double t = a + (b - a) * s / static_cast<double>(samples_per_piece);
                if (inside(t, exclusion)) continue;
                // stay within the open piece so both one-sided values agree
                const Eigen::VectorXd v1 =
                    (t == b) ? u1.left_limit(t) : u1(std::min(t, hi));
                const Eigen::VectorXd v2 =
                    (t == b) ? u2.left_limit(t) : u2(std::min(t, hi));
                worst = std::max(worst, (v1 - v2).norm());
            }
        }
    };
    sample(u1);
    sample(u2);
    cmp.max_value_deviation = worst;
    cmp.equivalent = cmp.breakpoints_equivalent && worst < eps;
    return cmp;
}

/// Shift grid scan for piecewise functions: tau is accepted when the
/// function and its tau-shift are bw-equivalent on the overlap window.
inline AlmostPeriodReport bw_translation_numbers(const PiecewiseFunction& u, double eps,
                                                 double tau_lo, double tau_hi, double tau_step,
                                                 double min_overlap = 1.0,
                                                 int samples_per_piece = 32) {
    AlmostPeriodReport rep;
    rep.epsilon = eps;
    rep.range_lo = tau_lo;
    rep.range_hi = tau_hi;
    const long n = static_cast<long>(std::floor((tau_hi - tau_lo) / tau_step));
    for (long k = 0; k <= n; ++k) {
        const double tau = tau_lo + tau_step * static_cast<double>(k);
        const double lo = std::max(u.window_lo(), u.window_lo() - tau);
        const double hi = std::min(u.window_hi(), u.window_hi() - tau);
        if (hi - lo < min_overlap) continue;
        const auto shifted = u.shifted(tau);
        if (bw_equivalent(u.restricted(lo, hi), shifted.restricted(lo, hi), eps,
                          samples_per_piece)
                .equivalent)
            rep.periods.push_back(tau);
    }
    detail::finalize_report(rep);
    return rep;
}

} // namespace epcag
