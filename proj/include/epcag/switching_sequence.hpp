#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "epcag/errors.hpp"
#include "epcag/math_util.hpp"

namespace epcag {

struct GapStats {
    double min_gap = kInf;
    double max_gap = 0.0;  // the uniform gap bound used by the solvers
    int max_points = 0;    // most points any closed interval of length l0 holds
    double l0 = 0.0;
};

/// Strictly increasing switching times theta_i, stored on a finite index
/// window and extended on demand from a generator. `interval_index(t)` maps a
/// time to the index i with theta_i <= t < theta_{i+1} (right-continuous);
/// for unit spacing it reduces to floor(t).
///
/// Extension mutates the object and needs exclusive access; an extended
/// sequence is safe to share read-only afterwards. Regenerating a stored
/// index always reproduces the stored value (generators are pure in i).
class SwitchingSequence {
public:
    enum class Kind { uniform, perturbed, explicit_window };

    static SwitchingSequence uniform(double gap, double offset = 0.0) {
        if (!(gap > 0.0)) throw ValidationError("theta.gap", "gap must be positive");
        SwitchingSequence s;
        s.kind_ = Kind::uniform;
        s.gap_ = gap;
        s.offset_ = offset;
        s.base_ = 0;
        s.values_ = {s.generate(0), s.generate(1)};
        return s;
    }

    /// theta_i = i + amplitude * sin(omega * i). The amplitude/omega pair must
    /// keep the sequence strictly increasing (2|A sin(w/2)| < 1).
    static SwitchingSequence perturbed(double amplitude, double omega) {
        if (2.0 * std::abs(amplitude * std::sin(omega / 2.0)) >= 1.0)
            throw ValidationError("theta.amplitude",
                                  "perturbation breaks strict monotonicity");
        SwitchingSequence s;
        s.kind_ = Kind::perturbed;
        s.amplitude_ = amplitude;
        s.omega_ = omega;
        s.base_ = 0;
        s.values_ = {s.generate(0), s.generate(1)};
        return s;
    }

    static SwitchingSequence explicit_window(long base_index, std::vector<double> values) {
        if (values.size() < 2)
            throw ValidationError("theta.values", "need at least two switching times");
        for (std::size_t k = 1; k < values.size(); ++k)
            if (!(values[k] > values[k - 1]))
                throw ValidationError("theta.values[" + std::to_string(k) + "]",
                                      "switching times must be strictly increasing");
        SwitchingSequence s;
        s.kind_ = Kind::explicit_window;
        s.base_ = base_index;
        s.values_.assign(values.begin(), values.end());
        return s;
    }

    Kind kind() const { return kind_; }
    long lo_index() const { return base_; }
    long hi_index() const { return base_ + static_cast<long>(values_.size()) - 1; }
    bool covers_index(long i) const { return i >= lo_index() && i <= hi_index(); }

    double at(long i) const {
        if (!covers_index(i))
            throw WindowExhausted("switching time " + std::to_string(i) +
                                  " outside stored window [" + std::to_string(lo_index()) +
                                  ", " + std::to_string(hi_index()) + "]");
        return values_[static_cast<std::size_t>(i - base_)];
    }

    /// Extends the stored window to cover [lo, hi]; explicit sequences
    /// cannot grow and raise WindowExhausted instead.
    void ensure_index(long lo, long hi) {
        if (lo > hi) std::swap(lo, hi);
        if (kind_ == Kind::explicit_window) {
            if (lo < lo_index() || hi > hi_index())
                throw WindowExhausted("explicit sequence has no generator to extend it");
            return;
        }
        while (base_ > lo) {
            --base_;
            values_.push_front(generate(base_));
            if (!(values_[0] < values_[1]))
                throw ValidationError("theta", "generator is not strictly increasing");
        }
        while (hi_index() < hi) {
            values_.push_back(generate(hi_index() + 1));
            const std::size_t n = values_.size();
            if (!(values_[n - 2] < values_[n - 1]))
                throw ValidationError("theta", "generator is not strictly increasing");
        }
    }

    /// Extends until the stored times bracket [t_lo, t_hi] with one spare
    /// node on each side, so interval_index is defined on the whole range.
    void ensure_time(double t_lo, double t_hi) {
        if (t_lo > t_hi) std::swap(t_lo, t_hi);
        if (kind_ == Kind::explicit_window) {
            if (!(at(lo_index()) <= t_lo && t_hi < at(hi_index())))
                throw WindowExhausted("time range outside explicit switching window");
            return;
        }
        while (at(lo_index()) > t_lo) ensure_index(lo_index() - 8, hi_index());
        while (at(hi_index()) <= t_hi) ensure_index(lo_index(), hi_index() + 8);
    }

    /// Index of the interval containing t: theta_i <= t < theta_{i+1}.
    long interval_index(double t) const {
        if (!(at(lo_index()) <= t && t < at(hi_index())))
            throw WindowExhausted("time " + std::to_string(t) +
                                  " not covered by stored switching window");
        // values_ is sorted: find the last index with theta_i <= t.
        auto it = std::upper_bound(values_.begin(), values_.end(), t);
        return base_ + static_cast<long>(it - values_.begin()) - 1;
    }

    /// Switching times theta_{interval_index(t) - p_j} read by the equation
    /// at time t.
    std::vector<double> deviated_nodes(double t, const std::vector<long>& deviations) const {
        const long i = interval_index(t);
        std::vector<double> out;
        out.reserve(deviations.size());
        for (long p : deviations) out.push_back(at(i - p));
        return out;
    }

    /// Worst-case age of frozen data: sup over t in the window of
    /// t - theta_{interval_index(t) - p_j}, maximised over the deviations.
    /// The sup over one interval [theta_i, theta_{i+1}) equals
    /// theta_{i+1} - theta_{i-p_j}.
    double deviation_sup(const std::vector<long>& deviations, long i_lo, long i_hi) const {
        if (i_hi <= i_lo) throw InsufficientWindow("empty interval range");
        double worst = 0.0;
        for (long i = i_lo; i < i_hi; ++i)
            for (long p : deviations)
                worst = std::max(worst, at(i + 1) - at(i - p));
        return worst;
    }

    double min_gap(long i_lo, long i_hi) const {
        double g = kInf;
        for (long i = i_lo; i < i_hi; ++i) g = std::min(g, at(i + 1) - at(i));
        return g;
    }

    double max_gap(long i_lo, long i_hi) const {
        double g = 0.0;
        for (long i = i_lo; i < i_hi; ++i) g = std::max(g, at(i + 1) - at(i));
        return g;
    }

    double max_gap() const { return max_gap(lo_index(), hi_index()); }

    /// Gap extremes plus the largest number of switching times any closed
    /// interval of length l0 can hold on the index window.
    GapStats gap_stats(long i_lo, long i_hi, double l0) const {
        if (i_hi <= i_lo) throw InsufficientWindow("empty interval range");
        GapStats st;
        st.l0 = l0;
        st.min_gap = min_gap(i_lo, i_hi);
        st.max_gap = max_gap(i_lo, i_hi);
        // A densest placement starts at a switching time, so a sweep over
        // left endpoints is exact.
        for (long i = i_lo; i <= i_hi; ++i) {
            long j = i;
            while (j + 1 <= i_hi && at(j + 1) <= at(i) + l0) ++j;
            st.max_points = std::max(st.max_points, static_cast<int>(j - i + 1));
        }
        return st;
    }

    /// Stored values on [i_lo, i_hi] as a plain vector.
    std::vector<double> window(long i_lo, long i_hi) const {
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(i_hi - i_lo + 1));
        for (long i = i_lo; i <= i_hi; ++i) out.push_back(at(i));
        return out;
    }

    // Descriptor fields, echoed into reports.
    double descriptor_gap() const { return gap_; }
    double descriptor_offset() const { return offset_; }
    double descriptor_amplitude() const { return amplitude_; }
    double descriptor_omega() const { return omega_; }

private:
    SwitchingSequence() = default;

    double generate(long i) const {
        switch (kind_) {
        case Kind::uniform:
            return offset_ + gap_ * static_cast<double>(i);
        case Kind::perturbed:
            return static_cast<double>(i) + amplitude_ * std::sin(omega_ * static_cast<double>(i));
        default:
            throw WindowExhausted("explicit sequence has no generator");
        }
    }

    Kind kind_ = Kind::uniform;
    double gap_ = 1.0, offset_ = 0.0;       // uniform
    double amplitude_ = 0.0, omega_ = 0.0;  // perturbed
    long base_ = 0;
    std::deque<double> values_;
};

/// Extending lookup: grows the window as needed, then locates t.
inline long locate_interval(SwitchingSequence& seq, double t) {
    seq.ensure_time(t, t);
    return seq.interval_index(t);
}

} // namespace epcag
