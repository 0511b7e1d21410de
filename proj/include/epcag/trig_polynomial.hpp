#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "epcag/errors.hpp"
#include "epcag/math_util.hpp"
#include "epcag/sequence_diagnostics.hpp"

namespace epcag {

/// Finite trigonometric sum
///   f(t) = C0 + sum_k (Ck_cos * cos(w_k t) + Ck_sin * sin(w_k t))
/// with matrix (or vector, or scalar 1x1) coefficients. The natural model
/// for uniformly almost periodic coefficients: every value is exact, shifts
/// are exact, and a sup-norm bound is available in closed form.
class TrigPolynomial {
public:
    struct Term {
        double omega;
        Eigen::MatrixXd cos_coeff;
        Eigen::MatrixXd sin_coeff;
    };

    TrigPolynomial() : constant_(Eigen::MatrixXd::Zero(1, 1)) {}

    explicit TrigPolynomial(Eigen::MatrixXd constant) : constant_(std::move(constant)) {}

    static TrigPolynomial scalar(double c) {
        return TrigPolynomial(Eigen::MatrixXd::Constant(1, 1, c));
    }

    void add_term(double omega, Eigen::MatrixXd cos_coeff, Eigen::MatrixXd sin_coeff) {
        if (!(omega > 0.0))
            throw ValidationError("terms.omega", "frequencies must be positive");
        for (const Term& t : terms_)
            if (t.omega == omega)
                throw ValidationError("terms.omega", "duplicate frequency");
        if (cos_coeff.rows() != constant_.rows() || cos_coeff.cols() != constant_.cols() ||
            sin_coeff.rows() != constant_.rows() || sin_coeff.cols() != constant_.cols())
            throw ValidationError("terms", "coefficient shape mismatch");
        terms_.push_back({omega, std::move(cos_coeff), std::move(sin_coeff)});
    }

    void add_scalar_term(double omega, double c, double s) {
        add_term(omega, Eigen::MatrixXd::Constant(1, 1, c), Eigen::MatrixXd::Constant(1, 1, s));
    }

    Eigen::Index rows() const { return constant_.rows(); }
    Eigen::Index cols() const { return constant_.cols(); }
    bool is_constant() const { return terms_.empty(); }
    const Eigen::MatrixXd& constant_term() const { return constant_; }
    const std::vector<Term>& terms() const { return terms_; }

    Eigen::MatrixXd operator()(double t) const {
        Eigen::MatrixXd v = constant_;
        for (const Term& term : terms_)
            v += std::cos(term.omega * t) * term.cos_coeff +
                 std::sin(term.omega * t) * term.sin_coeff;
        return v;
    }

    double scalar_at(double t) const {
        double v = constant_(0, 0);
        for (const Term& term : terms_)
            v += std::cos(term.omega * t) * term.cos_coeff(0, 0) +
                 std::sin(term.omega * t) * term.sin_coeff(0, 0);
        return v;
    }

    /// Valid (not tight) bound: sup_t ||f(t)|| <= ||C0|| + sum (||Ccos|| + ||Csin||).
    double sup_bound() const {
        double b = op_norm(constant_);
        for (const Term& t : terms_) b += op_norm(t.cos_coeff) + op_norm(t.sin_coeff);
        return b;
    }

    double sampled_sup(double t_lo, double t_hi, int samples = 2048) const {
        double s = 0.0;
        for (int k = 0; k <= samples; ++k) {
            const double t = t_lo + (t_hi - t_lo) * k / static_cast<double>(samples);
            s = std::max(s, op_norm((*this)(t)));
        }
        return s;
    }

    double sampled_inf_scalar(double t_lo, double t_hi, int samples = 4096) const {
        double s = kInf;
        for (int k = 0; k <= samples; ++k) {
            const double t = t_lo + (t_hi - t_lo) * k / static_cast<double>(samples);
            s = std::min(s, scalar_at(t));
        }
        return s;
    }

private:
    Eigen::MatrixXd constant_;
    std::vector<Term> terms_;
};

struct TranslationQuery {
    double eps = 0.05;
    double tau_lo = 0.0, tau_hi = 50.0;
    double tau_step = 0.0;        // defaults to eps / 4
    double verify_lo = 0.0, verify_hi = 50.0;
    double verify_step = 0.05;
    double density_bound = kInf;
};

/// Scans a shift grid and keeps each tau with
/// sup_t ||f(t + tau) - f(t)|| < eps over the verification samples.
inline AlmostPeriodReport translation_numbers(const TrigPolynomial& f,
                                              const TranslationQuery& q) {
    AlmostPeriodReport rep;
    rep.epsilon = q.eps;
    rep.range_lo = q.tau_lo;
    rep.range_hi = q.tau_hi;
    rep.density_bound = q.density_bound;
    const double step = q.tau_step > 0.0 ? q.tau_step : q.eps / 4.0;
    const long n_tau = static_cast<long>(std::floor((q.tau_hi - q.tau_lo) / step));
    const long n_t = static_cast<long>(std::floor((q.verify_hi - q.verify_lo) / q.verify_step));
    for (long k = 0; k <= n_tau; ++k) {
        const double tau = q.tau_lo + step * static_cast<double>(k);
        bool ok = true;
        for (long s = 0; s <= n_t && ok; ++s) {
            const double t = q.verify_lo + q.verify_step * static_cast<double>(s);
            ok = op_norm(f(t + tau) - f(t)) < q.eps;
        }
        if (ok) rep.periods.push_back(tau);
    }
    detail::finalize_report(rep);
    return rep;
}

} // namespace epcag
