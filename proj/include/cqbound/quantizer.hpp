#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "cqbound/common.hpp"
#include "cqbound/state_space.hpp"

namespace cqbound {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
inline double normal_cdf_upper(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }
inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }

// Standard-normal mass on (z_lo, z_hi], evaluated in whichever tail keeps
// full relative precision; cells far from the mode would otherwise drown in
// the rounding of CDF values near 1.
inline double gaussian_cell_mass(double z_lo, double z_hi) {
    double mass;
    if (z_lo >= 0.0)
        mass = normal_cdf_upper(z_lo) - normal_cdf_upper(z_hi);
    else if (z_hi <= 0.0)
        mass = normal_cdf(z_hi) - normal_cdf(z_lo);
    else
        mass = 1.0 - normal_cdf(z_lo) - normal_cdf_upper(z_hi);
    return std::max(0.0, mass);
}

// Any h used as a denominator is clamped here; score terms for cells with
// h below kScoreFloor are dropped entirely (they carry no usable information
// and would otherwise produce 0/0 in the score ratios).
inline constexpr double kProbClamp = 1e-300;
inline constexpr double kScoreFloor = 1e-12;

// Scalar quantizer defined by its strictly increasing interior thresholds.
// With k interior thresholds there are k+1 output levels 0..k; the effective
// threshold sequence is (-inf, t_1, ..., t_k, +inf). An empty threshold list
// is the trivial one-level quantizer.
class QuantizerSpec {
public:
    QuantizerSpec() = default;

    static QuantizerSpec from_thresholds(std::vector<double> thresholds) {
        for (std::size_t i = 0; i < thresholds.size(); ++i) {
            if (!std::isfinite(thresholds[i]))
                throw ConfigError("QuantizerSpec: thresholds must be finite");
            if (i > 0 && thresholds[i] <= thresholds[i - 1])
                throw ConfigError("QuantizerSpec: thresholds must be strictly increasing");
        }
        QuantizerSpec spec;
        spec.thresholds_ = std::move(thresholds);
        return spec;
    }

    // 2^bits - 1 equally spaced interior thresholds strictly inside (lo, hi).
    static QuantizerSpec uniform(int bits, double lo, double hi) {
        if (bits < 1) throw ConfigError("QuantizerSpec: bits must be >= 1");
        if (!(lo < hi)) throw ConfigError("QuantizerSpec: need lo < hi");
        const int n_levels = 1 << bits;
        const double width = (hi - lo) / n_levels;
        std::vector<double> t(n_levels - 1);
        for (int i = 1; i < n_levels; ++i) t[i - 1] = lo + i * width;
        return from_thresholds(std::move(t));
    }

    int levels() const { return static_cast<int>(thresholds_.size()) + 1; }
    const std::vector<double>& thresholds() const { return thresholds_; }

    // Extended threshold q_i for i in [0, levels()]: q_0 = -inf, q_levels = +inf.
    double extended_threshold(int i) const {
        if (i <= 0) return -std::numeric_limits<double>::infinity();
        if (i >= levels()) return std::numeric_limits<double>::infinity();
        return thresholds_[static_cast<std::size_t>(i) - 1];
    }

private:
    std::vector<double> thresholds_;
};

// Level index i such that q_i <= raw < q_{i+1}. Total on finite inputs.
inline int quantize(double raw, const QuantizerSpec& spec) {
    const auto& t = spec.thresholds();
    return static_cast<int>(std::upper_bound(t.begin(), t.end(), raw) - t.begin());
}

// P(level = i) for a raw observation ~ N(g, r). Tail cells keep full
// relative precision; the vector sums to 1 up to a few ulps.
inline VecX level_probs(double g, double r, const QuantizerSpec& spec) {
    if (!(r > 0.0)) throw ConfigError("level_probs: variance must be positive");
    const int n = spec.levels();
    const double sigma = std::sqrt(r);
    VecX h(n);
    for (int i = 0; i < n; ++i)
        h[i] = gaussian_cell_mass((spec.extended_threshold(i) - g) / sigma,
                                  (spec.extended_threshold(i + 1) - g) / sigma);
    return h;
}

// P(level | g, r) for one level without materializing the full vector.
inline double level_prob(int level, double g, double r, const QuantizerSpec& spec) {
    if (!(r > 0.0)) throw ConfigError("level_prob: variance must be positive");
    if (level < 0 || level >= spec.levels()) throw ConfigError("level_prob: level out of range");
    const double sigma = std::sqrt(r);
    return gaussian_cell_mass((spec.extended_threshold(level) - g) / sigma,
                              (spec.extended_threshold(level + 1) - g) / sigma);
}

// Rows of d h_i / d x via the chain rule through grad_g. Only the mean's
// state dependence is differentiated; the variance r is held fixed.
inline MatX level_prob_grads(double g, double r, const VecX& grad_g, const QuantizerSpec& spec) {
    if (!(r > 0.0)) throw ConfigError("level_prob_grads: variance must be positive");
    const int n = spec.levels();
    const double sigma = std::sqrt(r);
    MatX grads(n, grad_g.size());
    double prev_pdf = 0.0;  // phi at -inf
    for (int i = 0; i < n; ++i) {
        const double pdf = (i == n - 1) ? 0.0 : normal_pdf((spec.thresholds()[i] - g) / sigma);
        grads.row(i) = ((prev_pdf - pdf) / sigma) * grad_g.transpose();
        prev_pdf = pdf;
    }
    return grads;
}

inline MatX level_prob_grads(const StateVec& state, const SensorPos& sensor,
                             const BearingObsModel& model, const QuantizerSpec& spec) {
    const double g = bearing(state, sensor);
    const double r = obs_noise_variance(state, sensor, model);
    return level_prob_grads(g, r, bearing_gradient(state, sensor), spec);
}

// Fisher information that the quantized observation carries about its own
// mean g: sum over levels of (dh/dg)^2 / h. Multiplying by grad_g grad_g^T
// gives the state-space contribution, since every dh_i/dx is parallel to
// grad_g. Levels more than ~8.5 sigma from g hold less mass than kScoreFloor
// and are skipped without evaluating them.
inline double quantized_score_coeff(double g, double r, const QuantizerSpec& spec) {
    if (!(r > 0.0)) throw ConfigError("quantized_score_coeff: variance must be positive");
    const double sigma = std::sqrt(r);
    const double halfwin = 8.5 * sigma;
    const int lo = quantize(g - halfwin, spec);
    const int hi = quantize(g + halfwin, spec);

    double coeff = 0.0;
    double prev_cdf = 0.0;
    double prev_pdf = 0.0;
    if (lo > 0) {
        const double z = (spec.extended_threshold(lo) - g) / sigma;
        prev_cdf = normal_cdf(z);
        prev_pdf = normal_pdf(z);
    }
    for (int i = lo; i <= hi; ++i) {
        double cdf = 1.0;
        double pdf = 0.0;
        if (i + 1 < spec.levels()) {
            const double z = (spec.extended_threshold(i + 1) - g) / sigma;
            cdf = normal_cdf(z);
            pdf = normal_pdf(z);
        }
        const double h = cdf - prev_cdf;
        if (h >= kScoreFloor) {
            const double dnum = prev_pdf - pdf;
            coeff += dnum * dnum / std::max(h, kProbClamp);
        }
        prev_cdf = cdf;
        prev_pdf = pdf;
    }
    return coeff / r;
}

}  // namespace cqbound
