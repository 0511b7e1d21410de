#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "epcag/dichotomy.hpp"
#include "epcag/errors.hpp"
#include "epcag/math_util.hpp"
#include "epcag/switching_sequence.hpp"
#include "epcag/trig_polynomial.hpp"

namespace epcag {

enum class NonlinearityKind { affine, saturated, product_logistic };

/// Shape of the scalar factor h(z_1..z_m) inside the product kind.
enum class InnerKind { linear, saturated, product };

/// Right-hand side coupling term f(t, x, z_1, ..., z_m) where z_j are the
/// state values frozen at deviated switching times. The affine and saturated
/// kinds ignore the instantaneous state x; the product kind multiplies by it.
class Nonlinearity {
public:
    /// f = sum_j C_j z_j + g(t)
    static Nonlinearity affine(std::vector<Eigen::MatrixXd> coeffs, TrigPolynomial g) {
        return Nonlinearity(NonlinearityKind::affine, std::move(coeffs), std::move(g), 0.0);
    }

    /// f = sum_j C_j tanh(z_j) + g(t), tanh applied componentwise
    static Nonlinearity saturated(std::vector<Eigen::MatrixXd> coeffs, TrigPolynomial g) {
        return Nonlinearity(NonlinearityKind::saturated, std::move(coeffs), std::move(g), 0.0);
    }

    /// Scalar f = scale * x * h(z_1..z_m) with h one of
    ///   linear:    sum_j c_j z_j
    ///   saturated: sum_j c_j tanh(z_j)
    ///   product:   prod_j (c_j z_j)
    static Nonlinearity product_logistic(const std::vector<double>& c, double scale,
                                         InnerKind inner = InnerKind::linear) {
        std::vector<Eigen::MatrixXd> coeffs;
        coeffs.reserve(c.size());
        for (double cj : c) {
            Eigen::MatrixXd m(1, 1);
            m(0, 0) = cj;
            coeffs.push_back(m);
        }
        Nonlinearity n(NonlinearityKind::product_logistic, std::move(coeffs),
                       TrigPolynomial::scalar(0.0), scale);
        n.inner_ = inner;
        return n;
    }

    NonlinearityKind kind() const { return kind_; }
    InnerKind inner_kind() const { return inner_; }
    int dim() const { return static_cast<int>(coeffs_.front().rows()); }
    int arity() const { return static_cast<int>(coeffs_.size()); }
    bool state_dependent() const { return kind_ == NonlinearityKind::product_logistic; }
    const std::vector<Eigen::MatrixXd>& coefficients() const { return coeffs_; }
    const TrigPolynomial& forcing() const { return forcing_; }
    double scale() const { return scale_; }

    /// The scalar inner factor h(z) of the product kind.
    double inner_eval(const std::vector<double>& z) const {
        if (kind_ != NonlinearityKind::product_logistic)
            throw ValidationError("nonlinearity", "inner factor exists only for the product kind");
        if (static_cast<int>(z.size()) != arity())
            throw ValidationError("nonlinearity", "argument count mismatch");
        switch (inner_) {
        case InnerKind::linear: {
            double s = 0.0;
            for (std::size_t j = 0; j < z.size(); ++j) s += coeffs_[j](0, 0) * z[j];
            return s;
        }
        case InnerKind::saturated: {
            double s = 0.0;
            for (std::size_t j = 0; j < z.size(); ++j) s += coeffs_[j](0, 0) * std::tanh(z[j]);
            return s;
        }
        case InnerKind::product: {
            double s = 1.0;
            for (std::size_t j = 0; j < z.size(); ++j) s *= coeffs_[j](0, 0) * z[j];
            return s;
        }
        }
        throw Error("unreachable");
    }

    Eigen::VectorXd eval(double t, const Eigen::VectorXd& state,
                         const std::vector<Eigen::VectorXd>& z) const {
        if (static_cast<int>(z.size()) != arity())
            throw ValidationError("nonlinearity", "argument count mismatch");
        switch (kind_) {
        case NonlinearityKind::affine: {
            Eigen::VectorXd out = forcing_(t);
            for (std::size_t j = 0; j < coeffs_.size(); ++j) out += coeffs_[j] * z[j];
            return out;
        }
        case NonlinearityKind::saturated: {
            Eigen::VectorXd out = forcing_(t);
            for (std::size_t j = 0; j < coeffs_.size(); ++j)
                out += coeffs_[j] * z[j].array().tanh().matrix();
            return out;
        }
        case NonlinearityKind::product_logistic: {
            std::vector<double> zf(z.size());
            for (std::size_t j = 0; j < z.size(); ++j) zf[j] = z[j](0);
            Eigen::VectorXd out(1);
            out(0) = scale_ * state(0) * inner_eval(zf);
            return out;
        }
        }
        throw Error("unreachable");
    }

    /// Global Lipschitz constant in each deviated argument, summed
    /// (Euclidean norms). Undefined for the product kind, whose constants
    /// depend on the invariant box and live in the logistic module.
    double lipschitz() const {
        if (kind_ == NonlinearityKind::product_logistic)
            throw ValidationError("nonlinearity", "product kind has no global Lipschitz constant");
        double l = 0.0;
        for (const auto& c : coeffs_) l += op_norm(c);
        return l;
    }

    /// Bound on ||f|| when every argument satisfies ||z_j|| <= radius.
    double bound(double radius) const {
        switch (kind_) {
        case NonlinearityKind::affine:
            return lipschitz() * radius + forcing_.sup_bound();
        case NonlinearityKind::saturated:
            return lipschitz() * std::min(radius, std::sqrt(static_cast<double>(dim()))) +
                   forcing_.sup_bound();
        case NonlinearityKind::product_logistic: {
            double inner = 0.0;
            switch (inner_) {
            case InnerKind::linear:
                for (const auto& c : coeffs_) inner += std::abs(c(0, 0)) * radius;
                break;
            case InnerKind::saturated:
                for (const auto& c : coeffs_) inner += std::abs(c(0, 0)) * std::min(radius, 1.0);
                break;
            case InnerKind::product:
                inner = 1.0;
                for (const auto& c : coeffs_) inner *= std::abs(c(0, 0)) * radius;
                break;
            }
            return std::abs(scale_) * radius * inner;
        }
        }
        throw Error("unreachable");
    }

private:
    Nonlinearity(NonlinearityKind kind, std::vector<Eigen::MatrixXd> coeffs, TrigPolynomial g,
                 double scale)
        : kind_(kind), coeffs_(std::move(coeffs)), forcing_(std::move(g)), scale_(scale) {
        if (coeffs_.empty()) throw ValidationError("nonlinearity.coefficients", "need at least one");
        const auto rows = coeffs_.front().rows();
        for (const auto& c : coeffs_)
            if (c.rows() != rows || c.cols() != rows)
                throw ValidationError("nonlinearity.coefficients", "square blocks of equal size required");
        if (kind_ != NonlinearityKind::product_logistic &&
            (forcing_.rows() != rows || forcing_.cols() != 1))
            throw ValidationError("nonlinearity.forcing", "dimension mismatch");
    }

    NonlinearityKind kind_;
    InnerKind inner_ = InnerKind::linear;
    std::vector<Eigen::MatrixXd> coeffs_;
    TrigPolynomial forcing_;
    double scale_;
};

/// A full problem instance: linear part, coupling term, integer argument
/// deviations (z_j freezes the state at theta_{beta(t) - p_j}) and the
/// switching sequence. The dichotomy data is optional; solvers that need it
/// estimate one when absent.
struct Problem {
    TrigPolynomial A;
    Nonlinearity f;
    std::vector<long> deviations;
    SwitchingSequence theta;
    std::optional<DichotomyData> dichotomy;

    Problem(TrigPolynomial a, Nonlinearity fn, std::vector<long> devs, SwitchingSequence seq,
            std::optional<DichotomyData> dich = std::nullopt)
        : A(std::move(a)), f(std::move(fn)), deviations(std::move(devs)), theta(std::move(seq)),
          dichotomy(std::move(dich)) {
        if (A.rows() != A.cols()) throw ValidationError("problem.linear", "square matrix required");
        if (A.rows() != f.dim()) throw ValidationError("problem", "linear/nonlinear dimension mismatch");
        if (static_cast<int>(deviations.size()) != f.arity())
            throw ValidationError("problem.deviations", "one deviation per argument required");
        for (long p : deviations)
            if (p < 0) throw ValidationError("problem.deviations", "deviations must be >= 0");
        if (dichotomy && dichotomy->dim() != f.dim())
            throw ValidationError("problem.dichotomy", "dimension mismatch");
    }

    int dim() const { return f.dim(); }
    int arity() const { return f.arity(); }
    long max_deviation() const {
        return *std::max_element(deviations.begin(), deviations.end());
    }
};

/// History for an initial value run starting at node start_index: one state
/// per node over a contiguous index range ending at start_index. A map keyed
/// only by the deviated nodes can leave interior nodes unpinned (e.g. a lone
/// deviation p = 2 says nothing about theta_{start-1}), so completeness over
/// the whole range is required up front.
class InitialData {
public:
    InitialData(long start_index, std::vector<Eigen::VectorXd> history)
        : start_(start_index), values_(std::move(history)) {
        if (values_.empty()) throw ValidationError("initial.history", "empty history");
        const auto d = values_.front().size();
        for (const auto& v : values_)
            if (v.size() != d) throw ValidationError("initial.history", "dimension mismatch");
    }

    static InitialData from_node_map(long start_index, const std::map<long, Eigen::VectorXd>& m) {
        if (m.empty()) throw ValidationError("initial.history", "empty history");
        if (m.rbegin()->first != start_index)
            throw ValidationError("initial.history", "last entry must sit at the start node");
        const long lo = m.begin()->first;
        std::vector<Eigen::VectorXd> values;
        values.reserve(static_cast<std::size_t>(start_index - lo + 1));
        for (long i = lo; i <= start_index; ++i) {
            auto it = m.find(i);
            if (it == m.end())
                throw ValidationError("initial.history",
                                      "missing node " + std::to_string(i) +
                                          "; every node between the earliest deviated index and "
                                          "the start node needs a value");
            values.push_back(it->second);
        }
        return InitialData(start_index, std::move(values));
    }

    long start_index() const { return start_; }
    long lo() const { return start_ - static_cast<long>(values_.size()) + 1; }
    int dim() const { return static_cast<int>(values_.front().size()); }

    const Eigen::VectorXd& at(long i) const {
        if (i < lo() || i > start_) throw WindowExhausted("history index outside initial data");
        return values_[static_cast<std::size_t>(i - lo())];
    }

    /// True when the history reaches back far enough for every deviation.
    bool covers(long max_deviation) const { return lo() <= start_ - max_deviation; }

private:
    long start_;
    std::vector<Eigen::VectorXd> values_;
};

} // namespace epcag
