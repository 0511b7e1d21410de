#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>

#include "epcag/errors.hpp"
#include "epcag/math_util.hpp"

namespace epcag {

struct IntegratorOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_max = kInf;
    long max_steps = 2'000'000;
};

namespace detail {

// Dormand-Prince 5(4) tableau.
inline constexpr double dp_c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
inline constexpr double dp_a[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
inline constexpr double dp_b[7] = {35.0 / 384,      0.0,        500.0 / 1113, 125.0 / 192,
                                   -2187.0 / 6784, 11.0 / 84, 0.0};
inline constexpr double dp_e[7] = {71.0 / 57600,  0.0,          -71.0 / 16695, 71.0 / 1920,
                                   -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

} // namespace detail

/// Adaptive Dormand-Prince integrator for small dense systems. The state is
/// an Eigen matrix (a column vector is the common case). Steps are forced to
/// land exactly on requested output times, in either time direction.
template <class Rhs>
class Rk45 {
public:
    Rk45(Rhs rhs, IntegratorOptions opts = {}) : rhs_(std::move(rhs)), opts_(opts) {}

    /// Integrates from (t0, y0) to t1 and returns y(t1).
    Eigen::MatrixXd integrate(double t0, double t1, Eigen::MatrixXd y0) {
        const double out[] = {t1};
        path(t0, out, std::move(y0), [&](double, const Eigen::MatrixXd& y) { last_ = y; });
        return last_;
    }

    /// Integrates from (t0, y0) visiting each time in `outputs` (which must be
    /// monotone, starting at or beyond t0 in the travel direction); `emit` is
    /// called once per output time.
    template <class Emit>
    void path(double t0, std::span<const double> outputs, Eigen::MatrixXd y0, Emit&& emit) {
        if (outputs.empty()) return;
        const double dir = outputs.back() >= t0 ? 1.0 : -1.0;
        for (std::size_t i = 1; i < outputs.size(); ++i)
            if (dir * (outputs[i] - outputs[i - 1]) < 0.0)
                throw IntegratorFailure("output times are not monotone");
        double t = t0;
        Eigen::MatrixXd y = std::move(y0);
        Eigen::MatrixXd k[7];
        k[0] = rhs_(t, y);
        double h = initial_step(t, y, k[0], dir, outputs.back());

        std::size_t next = 0;
        long steps = 0;
        while (next < outputs.size()) {
            if (dir * (outputs[next] - t) <= 1e-14 * std::max(1.0, std::abs(t))) {
                emit(outputs[next], y);
                ++next;
                continue;
            }
            if (++steps > opts_.max_steps)
                throw IntegratorFailure("step budget exhausted");
            // Never step past the next requested output time.
            if (dir * (t + h - outputs[next]) > 0.0) h = outputs[next] - t;

            for (int s = 1; s < 7; ++s) {
                Eigen::MatrixXd acc = y;
                for (int j = 0; j < s; ++j)
                    if (detail::dp_a[s][j] != 0.0) acc += (h * detail::dp_a[s][j]) * k[j];
                k[s] = rhs_(t + detail::dp_c[s] * h, acc);
            }
            Eigen::MatrixXd y_new = y;
            for (int s = 0; s < 7; ++s)
                if (detail::dp_b[s] != 0.0) y_new += (h * detail::dp_b[s]) * k[s];
            Eigen::MatrixXd err = Eigen::MatrixXd::Zero(y.rows(), y.cols());
            for (int s = 0; s < 7; ++s)
                if (detail::dp_e[s] != 0.0) err += (h * detail::dp_e[s]) * k[s];

            double norm2 = 0.0;
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                const double scale =
                    opts_.atol + opts_.rtol * std::max(std::abs(y(i)), std::abs(y_new(i)));
                const double q = err(i) / scale;
                norm2 += q * q;
            }
            const double err_norm = std::sqrt(norm2 / static_cast<double>(y.size()));

            if (err_norm <= 1.0) {
                t += h;
                y = std::move(y_new);
                k[0] = k[6]; // FSAL: stage 7 is evaluated at (t + h, y_new)
            }
            const double factor = err_norm > 0.0
                                      ? 0.9 * std::pow(err_norm, -0.2)
                                      : 5.0;
            h *= std::clamp(factor, 0.2, 5.0);
            const double h_cap = std::min(opts_.h_max, std::abs(outputs.back() - t0) + 1.0);
            if (std::abs(h) > h_cap) h = dir * h_cap;
            if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(t)))
                throw IntegratorFailure("step size underflow");
        }
    }

private:
    double initial_step(double t, const Eigen::MatrixXd& y, const Eigen::MatrixXd& f0,
                        double dir, double t_final) const {
        const double span = std::abs(t_final - t);
        double h = span / 100.0;
        const double f_norm = f0.norm();
        if (f_norm > 0.0) h = std::min(h, 0.01 * (1.0 + y.norm()) / f_norm);
        h = std::min(h, opts_.h_max);
        if (h == 0.0) h = 1e-6;
        return dir * h;
    }

    Rhs rhs_;
    IntegratorOptions opts_;
    Eigen::MatrixXd last_;
};

template <class Rhs>
Eigen::MatrixXd rk45_integrate(Rhs&& rhs, double t0, double t1, Eigen::MatrixXd y0,
                               IntegratorOptions opts = {}) {
    Rk45<std::decay_t<Rhs>> solver(std::forward<Rhs>(rhs), opts);
    return solver.integrate(t0, t1, std::move(y0));
}

} // namespace epcag
