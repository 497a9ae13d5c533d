#pragma once

#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "cqbound/common.hpp"
#include "cqbound/particles.hpp"
#include "cqbound/quantizer.hpp"

namespace cqbound {

// Transition blocks of the information recursion. b21 is b12 transposed by
// construction; b22_transition holds only the state-model term, so it is
// also the predictive-variant block.
struct BBlocks {
    FimMatrix b11;
    FimMatrix b12;
    FimMatrix b22_transition;

    FimMatrix b21() const { return b12.transpose(); }
};

// Same structure for the global fusion step; c22 is assembled by the caller
// from the consensus sums.
struct CBlocks {
    FimMatrix c11;
    FimMatrix c12;
    FimMatrix c22;

    FimMatrix c21() const { return c12.transpose(); }
};

// a22 - a21 a11^{-1} a12: the inverse of the lower-right block of the
// inverse of the assembled 2x2 block matrix.
inline FimMatrix schur_lower_right(const FimMatrix& a11, const FimMatrix& a12,
                                   const FimMatrix& a21, const FimMatrix& a22) {
    Eigen::FullPivLU<MatX> lu(a11);
    if (!lu.isInvertible() || lu.rcond() < 1e-12)
        throw NumericalError("schur_lower_right: upper-left block is singular");
    return a22 - a21 * lu.solve(a12);
}

// Transition-model blocks under additive Gaussian noise, with the
// expectation over the state replaced by a weighted particle average:
//   b11 = sum_i w_i F_i^T Qinv F_i,  b12 = -(sum_i w_i F_i^T) Qinv,
//   b22_transition = Qinv,           F_i = jacobian at particle i.
template <class Model>
BBlocks b_blocks_state(const ParticleSet& particles, const Model& model) {
    if (particles.count() == 0) throw ConfigError("b_blocks_state: empty particle set");
    const MatX& qinv = model.noise_information();
    const Eigen::Index n = qinv.rows();
    MatX b11 = MatX::Zero(n, n);
    MatX f_bar = MatX::Zero(n, n);
    for (int i = 0; i < particles.count(); ++i) {
        const MatX f = model.jacobian(particles.states.col(i));
        b11.noalias() += particles.weights[i] * f.transpose() * qinv * f;
        f_bar.noalias() += particles.weights[i] * f;
    }
    BBlocks blocks;
    blocks.b11 = symmetrize(b11);
    blocks.b12 = -f_bar.transpose() * qinv;
    blocks.b22_transition = qinv;
    return blocks;
}

// Raw-observation information: sum_i w_i sum_m grad_m grad_m^T / r_m.
template <class Sensor>
FimMatrix j_raw(const ParticleSet& particles_pred, const std::vector<Sensor>& sensors) {
    if (particles_pred.count() == 0) throw ConfigError("j_raw: empty particle set");
    const Eigen::Index n = particles_pred.dim();
    MatX j = MatX::Zero(n, n);
    for (int i = 0; i < particles_pred.count(); ++i) {
        const VecX x = particles_pred.states.col(i);
        const double w = particles_pred.weights[i];
        for (const Sensor& s : sensors) {
            const VecX grad = s.gradient(x);
            j.noalias() += (w / s.variance(x)) * grad * grad.transpose();
        }
    }
    return symmetrize(j);
}

// Quantized-observation information in score-variance form: for each sensor
// the sum over all levels of grad(h) grad(h)^T / h collapses to a scalar
// coefficient times grad_g grad_g^T, since every level gradient is parallel
// to grad_g.
template <class Sensor>
FimMatrix j_quantized(const ParticleSet& particles_pred, const std::vector<Sensor>& sensors,
                      const QuantizerSpec& spec) {
    if (particles_pred.count() == 0) throw ConfigError("j_quantized: empty particle set");
    const Eigen::Index n = particles_pred.dim();
    MatX j = MatX::Zero(n, n);
    for (int i = 0; i < particles_pred.count(); ++i) {
        const VecX x = particles_pred.states.col(i);
        const double w = particles_pred.weights[i];
        for (const Sensor& s : sensors) {
            const double coeff = quantized_score_coeff(s.mean(x), s.variance(x), spec);
            const VecX grad = s.gradient(x);
            j.noalias() += (w * coeff) * grad * grad.transpose();
        }
    }
    return symmetrize(j);
}

// One Schur update serves the raw, quantized and predictive recursions:
//   L(k+1) = (b22_transition + j_obs) - b21 (L(k) + b11)^{-1} b12.
// Pass j_obs = 0 for the predictive FIM L(k+1|k).
inline FimMatrix local_fim_update(const FimMatrix& l_k, const BBlocks& blocks,
                                  const FimMatrix& j_obs) {
    return symmetrize(
        schur_lower_right(l_k + blocks.b11, blocks.b12, blocks.b21(), blocks.b22_transition + j_obs));
}

inline FimMatrix predictive_fim_update(const FimMatrix& l_k, const BBlocks& blocks) {
    return local_fim_update(l_k, blocks, MatX::Zero(l_k.rows(), l_k.cols()));
}

// Global fusion step: G(k+1) = c22 - c21 (G(k) + c11)^{-1} c12.
inline FimMatrix global_fusion(const FimMatrix& g_k, const CBlocks& c) {
    return symmetrize(schur_lower_right(g_k + c.c11, c.c12, c.c21(), c.c22));
}

// sqrt(trace of the position sub-block of fim^{-1}), in meters.
inline double rmse_bound(const FimMatrix& fim, const std::vector<int>& position_indices = {0, 2}) {
    Eigen::FullPivLU<MatX> lu(fim);
    if (!lu.isInvertible() || lu.rcond() < 1e-14)
        throw NumericalError("rmse_bound: FIM is singular");
    const MatX cov = lu.solve(MatX::Identity(fim.rows(), fim.cols()));
    double trace = 0.0;
    for (int idx : position_indices) trace += cov(idx, idx);
    return std::sqrt(trace);
}

}  // namespace cqbound
