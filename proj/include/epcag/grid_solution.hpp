#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "epcag/errors.hpp"
#include "epcag/math_util.hpp"
#include "epcag/switching_sequence.hpp"

namespace epcag {

/// Continuous piecewise-smooth solution stored on a node window: one value
/// per switching time theta_i plus uniform in-interval samples (both
/// endpoints included, so the last sample of interval i is the left limit at
/// theta_{i+1} and coincides with the next node value up to solver accuracy).
/// Evaluation interpolates locally inside one interval and never crosses a
/// switching time, where only C^0 continuity holds. Accuracy is claimed on
/// the core window; the node range extends beyond it.
class GridSolution {
public:
    GridSolution(SwitchingSequence seq, long node_lo, long node_hi, int dim,
                 int samples_per_interval, double core_lo, double core_hi)
        : seq_(std::move(seq)), node_lo_(node_lo), node_hi_(node_hi), dim_(dim),
          samples_(samples_per_interval), core_lo_(core_lo), core_hi_(core_hi) {
        if (node_hi_ <= node_lo_) throw InsufficientWindow("need at least one interval");
        if (samples_ < 8) throw ValidationError("samples_per_interval", "need at least 8");
        seq_.ensure_index(node_lo_, node_hi_);
        nodes_.assign(static_cast<std::size_t>(node_hi_ - node_lo_ + 1),
                      Eigen::VectorXd::Zero(dim_));
        dense_.resize(static_cast<std::size_t>(node_hi_ - node_lo_));
    }

    const SwitchingSequence& sequence() const { return seq_; }
    long node_lo() const { return node_lo_; }
    long node_hi() const { return node_hi_; }
    int dim() const { return dim_; }
    int samples_per_interval() const { return samples_; }
    double core_lo() const { return core_lo_; }
    double core_hi() const { return core_hi_; }

    const Eigen::VectorXd& node(long i) const {
        if (i < node_lo_ || i > node_hi_)
            throw WindowExhausted("node index outside solution window");
        return nodes_[static_cast<std::size_t>(i - node_lo_)];
    }

    /// Node value with the index clamped into the stored window; how data
    /// beyond the enlarged window is represented during sweeps.
    const Eigen::VectorXd& node_clamped(long i) const {
        return nodes_[static_cast<std::size_t>(std::clamp(i, node_lo_, node_hi_) - node_lo_)];
    }

    void set_node(long i, Eigen::VectorXd v) {
        nodes_[static_cast<std::size_t>(i - node_lo_)] = std::move(v);
    }

    bool has_dense(long interval) const {
        return !dense_[static_cast<std::size_t>(interval - node_lo_)].empty();
    }

    const std::vector<Eigen::VectorXd>& dense(long interval) const {
        return dense_[static_cast<std::size_t>(interval - node_lo_)];
    }

    void set_dense(long interval, std::vector<Eigen::VectorXd> samples) {
        if (static_cast<int>(samples.size()) != samples_)
            throw ValidationError("dense", "sample count mismatch");
        dense_[static_cast<std::size_t>(interval - node_lo_)] = std::move(samples);
    }

    /// Sample time k of interval i (uniform grid including both endpoints).
    double sample_time(long interval, int k) const {
        const double a = seq_.at(interval), b = seq_.at(interval + 1);
        return a + (b - a) * static_cast<double>(k) / static_cast<double>(samples_ - 1);
    }

    /// Interpolated value; t must lie in an interval with dense samples.
    Eigen::VectorXd value(double t) const {
        long i = (t == seq_.at(node_hi_)) ? node_hi_ - 1 : seq_.interval_index(t);
        if (i < node_lo_ || i >= node_hi_)
            throw WindowExhausted("evaluation outside solution window");
        const auto& d = dense_[static_cast<std::size_t>(i - node_lo_)];
        if (d.empty()) throw WindowExhausted("interval has no dense samples");
        const double a = seq_.at(i), h = (seq_.at(i + 1) - a) / (samples_ - 1);
        // 6-point local Lagrange interpolation inside the piece
        const int order = std::min(6, samples_);
        int k0 = static_cast<int>(std::floor((t - a) / h)) - order / 2 + 1;
        k0 = std::clamp(k0, 0, samples_ - order);
        std::vector<double> ts(static_cast<std::size_t>(order));
        for (int k = 0; k < order; ++k) ts[static_cast<std::size_t>(k)] = a + (k0 + k) * h;
        return lagrange_eval(ts, std::span(d.data() + k0, static_cast<std::size_t>(order)), t);
    }

    /// Sup of the node and dense sample norms over intervals meeting
    /// [t_lo, t_hi].
    double sup_norm(double t_lo, double t_hi) const {
        double s = 0.0;
        for (long i = node_lo_; i < node_hi_; ++i) {
            if (seq_.at(i + 1) < t_lo || seq_.at(i) > t_hi) continue;
            s = std::max(s, node(i).norm());
            for (const auto& v : dense_[static_cast<std::size_t>(i - node_lo_)])
                s = std::max(s, v.norm());
            s = std::max(s, node(i + 1).norm());
        }
        return s;
    }

    double sup_norm_core() const { return sup_norm(core_lo_, core_hi_); }
    double sup_norm_window() const { return sup_norm(seq_.at(node_lo_), seq_.at(node_hi_)); }

    /// Largest mismatch between a node value and the left limit stored as the
    /// final dense sample of the preceding interval.
    double continuity_defect() const {
        double worst = 0.0;
        for (long i = node_lo_; i < node_hi_; ++i) {
            const auto& d = dense_[static_cast<std::size_t>(i - node_lo_)];
            if (d.empty()) continue;
            worst = std::max(worst, (d.front() - node(i)).norm());
            worst = std::max(worst, (d.back() - node(i + 1)).norm());
        }
        return worst;
    }

private:
    SwitchingSequence seq_;
    long node_lo_, node_hi_;
    int dim_;
    int samples_;
    double core_lo_, core_hi_;
    std::vector<Eigen::VectorXd> nodes_;
    std::vector<std::vector<Eigen::VectorXd>> dense_;
};

} // namespace epcag
