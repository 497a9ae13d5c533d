#pragma once

#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "cqbound/common.hpp"
#include "cqbound/particles.hpp"
#include "cqbound/quantizer.hpp"
#include "cqbound/rng.hpp"

// Reference computations kept deliberately separate from the fim module:
// everything here carries its own arithmetic so it can anchor the main
// recursion instead of mirroring it.

namespace cqbound::oracle {

struct LinearGaussianModel {
    MatX F;
    MatX Q;
    MatX H;
    MatX R;
};

// Information-filter recursion L(k+1) = (Q + F L^{-1} F^T)^{-1} + H^T R^{-1} H.
inline std::vector<MatX> kalman_info_recursion(const MatX& l0, const LinearGaussianModel& model,
                                               int steps) {
    std::vector<MatX> out;
    out.reserve(steps);
    const MatX obs_info = model.H.transpose() * model.R.fullPivLu().solve(model.H);
    MatX l = l0;
    for (int k = 0; k < steps; ++k) {
        Eigen::FullPivLU<MatX> lu(l);
        if (!lu.isInvertible())
            throw NumericalError("kalman_info_recursion: singular information matrix");
        const MatX pred_cov = model.Q + model.F * lu.solve(MatX::Identity(l.rows(), l.cols())) *
                                            model.F.transpose();
        Eigen::FullPivLU<MatX> lu_pred(pred_cov);
        if (!lu_pred.isInvertible())
            throw NumericalError("kalman_info_recursion: singular predicted covariance");
        l = lu_pred.solve(MatX::Identity(l.rows(), l.cols())) + obs_info;
        l = symmetrize(l);
        out.push_back(l);
    }
    return out;
}

enum class ObsKind { raw, quantized };

// One step of the conditional-FIM recursion evaluated at a single fusion
// centre over the pooled sensors, written out directly rather than through
// the fim module. The quantized branch assembles the per-level score sum
// from level_probs / per-level densities.
template <class Model, class Sensor>
MatX centralized_fim_step(const MatX& l_k, const ParticleSet& particles_k,
                          const ParticleSet& particles_pred, const std::vector<Sensor>& sensors,
                          const Model& model, ObsKind kind, const QuantizerSpec* spec) {
    const MatX& qinv = model.noise_information();
    const Eigen::Index n = qinv.rows();

    MatX b11 = MatX::Zero(n, n);
    MatX f_bar = MatX::Zero(n, n);
    for (int i = 0; i < particles_k.count(); ++i) {
        const MatX f = model.jacobian(particles_k.states.col(i));
        b11.noalias() += particles_k.weights[i] * f.transpose() * qinv * f;
        f_bar.noalias() += particles_k.weights[i] * f;
    }
    const MatX b12 = -f_bar.transpose() * qinv;

    MatX j = MatX::Zero(n, n);
    for (int i = 0; i < particles_pred.count(); ++i) {
        const VecX x = particles_pred.states.col(i);
        const double w = particles_pred.weights[i];
        for (const Sensor& s : sensors) {
            const double r = s.variance(x);
            const VecX grad = s.gradient(x);
            if (kind == ObsKind::raw) {
                j.noalias() += (w / r) * grad * grad.transpose();
            } else {
                const double g = s.mean(x);
                const double sigma = std::sqrt(r);
                const VecX probs = level_probs(g, r, *spec);
                double coeff = 0.0;
                for (int level = 0; level < spec->levels(); ++level) {
                    if (probs[level] < kScoreFloor) continue;
                    const double lo = spec->extended_threshold(level);
                    const double hi = spec->extended_threshold(level + 1);
                    const double pdf_lo = std::isinf(lo) ? 0.0 : normal_pdf((lo - g) / sigma);
                    const double pdf_hi = std::isinf(hi) ? 0.0 : normal_pdf((hi - g) / sigma);
                    coeff += sq(pdf_lo - pdf_hi) / probs[level];
                }
                j.noalias() += (w * coeff / r) * grad * grad.transpose();
            }
        }
    }

    Eigen::FullPivLU<MatX> lu(l_k + b11);
    if (!lu.isInvertible())
        throw NumericalError("centralized_fim_step: singular (L + B11)");
    return symmetrize(qinv + j - b12.transpose() * lu.solve(b12));
}

struct ScoreFimEstimate {
    MatX fim;
    MatX standard_error;  // per-entry standard error of the Monte-Carlo mean
};

// Empirical score-variance FIM at a fixed state: samples quantized
// observations, evaluates grad log h of the observed level by central finite
// differences of log level_probs, and averages the outer products.
template <class Sensor>
ScoreFimEstimate brute_force_score_fim(const Sensor& sensor, const QuantizerSpec& spec,
                                       const VecX& x0, int n_samples, Rng& rng,
                                       double fd_step = 1e-5) {
    if (n_samples < 10000) throw ConfigError("brute_force_score_fim: need at least 1e4 samples");
    const Eigen::Index n = x0.size();
    const int n_levels = spec.levels();

    // Per-level score vectors, cached; sampling then only bins levels.
    MatX scores(n, n_levels);
    for (Eigen::Index u = 0; u < n; ++u) {
        VecX xp = x0, xm = x0;
        xp[u] += fd_step;
        xm[u] -= fd_step;
        const VecX hp = level_probs(sensor.mean(xp), sensor.variance(xp), spec);
        const VecX hm = level_probs(sensor.mean(xm), sensor.variance(xm), spec);
        for (int i = 0; i < n_levels; ++i)
            scores(u, i) = (std::log(std::max(hp[i], kProbClamp)) -
                            std::log(std::max(hm[i], kProbClamp))) /
                           (2.0 * fd_step);
    }

    const double g0 = sensor.mean(x0);
    const double sigma0 = std::sqrt(sensor.variance(x0));
    VecX counts = VecX::Zero(n_levels);
    for (int s = 0; s < n_samples; ++s)
        counts[quantize(g0 + sigma0 * rng.normal(), spec)] += 1.0;
    counts /= static_cast<double>(n_samples);

    ScoreFimEstimate est;
    est.fim = MatX::Zero(n, n);
    MatX second_moment = MatX::Zero(n, n);
    for (int i = 0; i < n_levels; ++i) {
        if (counts[i] == 0.0) continue;
        const MatX outer = scores.col(i) * scores.col(i).transpose();
        est.fim += counts[i] * outer;
        second_moment += counts[i] * outer.cwiseProduct(outer);
    }
    est.standard_error =
        ((second_moment - est.fim.cwiseProduct(est.fim)).cwiseMax(0.0) / n_samples).cwiseSqrt();
    return est;
}

}  // namespace cqbound::oracle
