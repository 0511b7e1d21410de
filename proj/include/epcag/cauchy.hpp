#pragma once

#include <Eigen/Dense>
#include <vector>

#include "epcag/dichotomy.hpp"
#include "epcag/errors.hpp"
#include "epcag/math_util.hpp"
#include "epcag/rk45.hpp"
#include "epcag/switching_sequence.hpp"
#include "epcag/trig_polynomial.hpp"

namespace epcag {

struct CauchyOptions {
    double rtol = 1e-11;
    double cond_warn = 1e8;
};

/// Transition (Cauchy) matrices X(t, s) of x' = A(t)x over a node window.
/// One factor X(theta_{i+1}, theta_i) is integrated per switching interval;
/// long-span transitions are assembled from those factors so no global
/// fundamental matrix (with its exponentially bad conditioning) is ever
/// inverted. Build once, then share read-only.
class CauchyCache {
public:
    CauchyCache(TrigPolynomial A, SwitchingSequence seq, long i_lo, long i_hi,
                CauchyOptions opts = {})
        : A_(std::move(A)), seq_(std::move(seq)), i_lo_(i_lo), i_hi_(i_hi), opts_(opts) {
        if (i_hi_ <= i_lo_) throw InsufficientWindow("need at least one interval");
        seq_.ensure_index(i_lo_, i_hi_);
        const long n_int = i_hi_ - i_lo_;
        factors_.reserve(n_int);
        inverses_.reserve(n_int);
        for (long i = i_lo_; i < i_hi_; ++i) {
            Eigen::MatrixXd U = local(seq_.at(i), seq_.at(i + 1));
            Eigen::PartialPivLU<Eigen::MatrixXd> lu(U);
            Eigen::MatrixXd Ui = lu.inverse();
            worst_condition_ = std::max(worst_condition_, condition_estimate(U, Ui));
            factors_.push_back(std::move(U));
            inverses_.push_back(std::move(Ui));
        }
    }

    int dim() const { return static_cast<int>(A_.rows()); }
    const SwitchingSequence& sequence() const { return seq_; }
    const TrigPolynomial& coefficient() const { return A_; }
    long lo_interval() const { return i_lo_; }
    long hi_interval() const { return i_hi_; }

    /// X(theta_{i+1}, theta_i)
    const Eigen::MatrixXd& factor(long i) const {
        return factors_.at(static_cast<std::size_t>(i - i_lo_));
    }

    /// X(theta_i, theta_{i+1})
    const Eigen::MatrixXd& factor_inv(long i) const {
        return inverses_.at(static_cast<std::size_t>(i - i_lo_));
    }

    bool condition_exceeded() const { return worst_condition_ > opts_.cond_warn; }
    double worst_condition() const { return worst_condition_; }

    /// X(t, s) for t, s anywhere in the covered span [theta_lo, theta_hi].
    Eigen::MatrixXd transition(double t, double s) const {
        const long kt = locate(t), ks = locate(s);
        if (kt == ks) return local(s, t);
        if (t >= s) {
            // X(t, theta_{kt}) * X(theta_{kt}, ...) * X(theta_{ks+1}, s)
            Eigen::MatrixXd acc = local(s, seq_.at(ks + 1));
            for (long i = ks + 1; i < kt; ++i) acc = factor(i) * acc;
            return local(seq_.at(kt), t) * acc;
        }
        // t < s: descend through inverse factors
        Eigen::MatrixXd acc = local(s, seq_.at(ks));
        for (long i = ks - 1; i > kt; --i) acc = factor_inv(i) * acc;
        return local(seq_.at(kt + 1), t) * acc;
    }

    /// X(t) with X(0) = I; the span must cover 0.
    Eigen::MatrixXd fundamental(double t) const { return transition(t, 0.0); }

    /// X(b, a) by direct integration (meant for spans of a few intervals).
    Eigen::MatrixXd local(double a, double b) const {
        const auto n = A_.rows();
        if (a == b) return Eigen::MatrixXd::Identity(n, n);
        IntegratorOptions iopts;
        iopts.rtol = opts_.rtol;
        iopts.atol = opts_.rtol * 1e-2;
        return rk45_integrate(
            [this](double u, const Eigen::MatrixXd& X) { return (A_(u) * X).eval(); }, a, b,
            Eigen::MatrixXd::Identity(n, n), iopts);
    }

private:
    long locate(double t) const {
        if (t == seq_.at(i_hi_)) return i_hi_ - 1; // closed right end of the span
        const long k = seq_.interval_index(t);
        if (k < i_lo_ || k >= i_hi_)
            throw WindowExhausted("time outside cached node span");
        return k;
    }

    TrigPolynomial A_;
    SwitchingSequence seq_;
    long i_lo_, i_hi_;
    CauchyOptions opts_;
    std::vector<Eigen::MatrixXd> factors_, inverses_;
    double worst_condition_ = 0.0;
};

} // namespace epcag
