#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace epcag {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Spectral (operator 2-) norm; the matrix counterpart of the Euclidean
/// vector norm used throughout.
inline double op_norm(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
    return m.jacobiSvd().singularValues()(0);
}

/// 1-norm condition estimate from an explicit inverse.
inline double condition_estimate(const Eigen::MatrixXd& m, const Eigen::MatrixXd& m_inv) {
    return m.cwiseAbs().colwise().sum().maxCoeff() *
           m_inv.cwiseAbs().colwise().sum().maxCoeff();
}

// --- Gauss-Legendre quadrature, 8 points on [-1, 1] ---------------------

struct GaussLegendre8 {
    static constexpr std::array<double, 4> abscissa = {
        0.18343464249564980494, 0.52553240991632898582,
        0.79666647741362673959, 0.96028985649753623168};
    static constexpr std::array<double, 4> weight = {
        0.36268378337836198297, 0.31370664587788728734,
        0.22238103445337447054, 0.10122853629037625915};

    /// Appends the 8 nodes/weights for the interval [a, b], in increasing
    /// node order (callers stream them through one-directional integrators).
    static void panel(double a, double b,
                      std::vector<double>& nodes, std::vector<double>& weights) {
        const double c = 0.5 * (a + b), h = 0.5 * (b - a);
        for (int k = 3; k >= 0; --k) {
            nodes.push_back(c - h * abscissa[k]);
            weights.push_back(h * weight[k]);
        }
        for (int k = 0; k < 4; ++k) {
            nodes.push_back(c + h * abscissa[k]);
            weights.push_back(h * weight[k]);
        }
    }
};

/// Splits [a, b] into panels no longer than max_len and collects the
/// composite Gauss-Legendre rule.
inline void composite_gl8(double a, double b, double max_len,
                          std::vector<double>& nodes, std::vector<double>& weights) {
    if (b <= a) return;
    const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / max_len)));
    const double h = (b - a) / panels;
    for (int k = 0; k < panels; ++k)
        GaussLegendre8::panel(a + k * h, a + (k + 1) * h, nodes, weights);
}

// --- Finite-difference weights (Fornberg recurrence) ---------------------

/// Weights w such that sum_k w[k] f(x[k]) approximates d^m/dt^m f at x0.
/// Exact for polynomials of degree x.size() - 1.
inline std::vector<double> fd_weights(double x0, std::span<const double> x, int m) {
    const int n = static_cast<int>(x.size()) - 1;
    std::vector<double> c((n + 1) * (m + 1), 0.0);
    auto C = [&](int i, int j) -> double& { return c[i * (m + 1) + j]; };

    double c1 = 1.0;
    double c4 = x[0] - x0;
    C(0, 0) = 1.0;
    for (int i = 1; i <= n; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    C(i, k) = c1 * (k * C(i - 1, k - 1) - c5 * C(i - 1, k)) / c2;
                C(i, 0) = -c1 * c5 * C(i - 1, 0) / c2;
            }
            for (int k = mn; k >= 1; --k)
                C(j, k) = (c4 * C(j, k) - k * C(j, k - 1)) / c3;
            C(j, 0) = c4 * C(j, 0) / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n + 1);
    for (int i = 0; i <= n; ++i) w[i] = C(i, m);
    return w;
}

/// Local Lagrange interpolation through all supplied samples.
inline Eigen::VectorXd lagrange_eval(std::span<const double> ts,
                                     std::span<const Eigen::VectorXd> ys, double t) {
    const int n = static_cast<int>(ts.size());
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(ys[0].size());
    for (int i = 0; i < n; ++i) {
        double li = 1.0;
        for (int j = 0; j < n; ++j)
            if (j != i) li *= (t - ts[j]) / (ts[i] - ts[j]);
        acc += li * ys[i];
    }
    return acc;
}

// --- Deterministic sampling helpers --------------------------------------

/// Uniform double in [0, 1) built directly from engine output so results
/// do not depend on the standard library's distribution internals.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Standard normal via Box-Muller on engine-native uniforms.
inline double gaussian(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

/// Uniform draw from the open ball of the given radius.
inline Eigen::VectorXd ball_sample(std::mt19937_64& rng, int dim, double radius) {
    Eigen::VectorXd dir(dim);
    double norm2 = 0.0;
    do {
        for (int i = 0; i < dim; ++i) dir(i) = gaussian(rng);
        norm2 = dir.squaredNorm();
    } while (norm2 == 0.0);
    const double r = radius * (1.0 - 1e-12) *
                     std::pow(uniform01(rng), 1.0 / static_cast<double>(dim));
    return dir * (r / std::sqrt(norm2));
}

} // namespace epcag
