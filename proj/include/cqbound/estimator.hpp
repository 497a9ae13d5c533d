#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "cqbound/common.hpp"
#include "cqbound/consensus.hpp"
#include "cqbound/particles.hpp"
#include "cqbound/quantizer.hpp"
#include "cqbound/rng.hpp"

namespace cqbound {

template <class Model>
ParticleSet predict(const ParticleSet& particles, const Model& model, Rng& rng) {
    ParticleSet out = particles;
    for (int i = 0; i < particles.count(); ++i)
        out.states.col(i) = model.propagate_mean(particles.states.col(i)) + model.sample_noise(rng);
    return out;
}

namespace detail {
// Shared log-weight update: normalizes in place, throwing if every weight
// collapsed to zero.
inline void apply_log_likelihood(ParticleSet& particles, const VecX& log_lik) {
    double max_log = -std::numeric_limits<double>::infinity();
    VecX logw(particles.count());
    for (int i = 0; i < particles.count(); ++i) {
        logw[i] = std::log(particles.weights[i]) + log_lik[i];
        max_log = std::max(max_log, logw[i]);
    }
    if (!std::isfinite(max_log))
        throw DivergenceError("measurement update: all particle weights vanished");
    for (int i = 0; i < particles.count(); ++i) particles.weights[i] = std::exp(logw[i] - max_log);
    particles.normalize();
}
}  // namespace detail

// Multiplies each weight by the product over sensors of the observed level's
// likelihood h_{level}(g(x_i), r(x_i)), then renormalizes.
template <class Sensor>
ParticleSet weight_quantized(const ParticleSet& particles, const std::vector<int>& levels,
                             const std::vector<Sensor>& sensors, const QuantizerSpec& spec) {
    if (levels.size() != sensors.size())
        throw ConfigError("weight_quantized: one observed level per sensor required");
    ParticleSet out = particles;
    VecX log_lik = VecX::Zero(particles.count());
    for (int i = 0; i < particles.count(); ++i) {
        const VecX x = particles.states.col(i);
        for (std::size_t m = 0; m < sensors.size(); ++m) {
            const double h = level_prob(levels[m], sensors[m].mean(x), sensors[m].variance(x), spec);
            log_lik[i] += std::log(std::max(h, kProbClamp));
        }
    }
    detail::apply_log_likelihood(out, log_lik);
    return out;
}

// Raw-observation counterpart: Gaussian likelihood of each raw bearing.
template <class Sensor>
ParticleSet weight_raw(const ParticleSet& particles, const std::vector<double>& raw,
                       const std::vector<Sensor>& sensors) {
    if (raw.size() != sensors.size())
        throw ConfigError("weight_raw: one observation per sensor required");
    ParticleSet out = particles;
    VecX log_lik = VecX::Zero(particles.count());
    for (int i = 0; i < particles.count(); ++i) {
        const VecX x = particles.states.col(i);
        for (std::size_t m = 0; m < sensors.size(); ++m) {
            const double r = sensors[m].variance(x);
            double err = raw[m] - sensors[m].mean(x);
            // bearings wrap; compare on the circle
            err = std::remainder(err, 2.0 * kPi);
            log_lik[i] += -0.5 * err * err / r - 0.5 * std::log(2.0 * kPi * r);
        }
    }
    detail::apply_log_likelihood(out, log_lik);
    return out;
}

inline double effective_sample_size(const ParticleSet& particles) {
    return 1.0 / particles.weights.squaredNorm();
}

// Systematic resampling, triggered only when ESS < threshold_fraction * N_p.
inline ParticleSet resample_systematic(const ParticleSet& particles, Rng& rng,
                                       double threshold_fraction = 0.5) {
    const int n = particles.count();
    if (effective_sample_size(particles) >= threshold_fraction * n) return particles;
    ParticleSet out;
    out.states.resize(particles.dim(), n);
    out.weights = VecX::Constant(n, 1.0 / n);
    const double start = rng.uniform() / n;
    double cum = particles.weights[0];
    int src = 0;
    for (int i = 0; i < n; ++i) {
        const double u = start + static_cast<double>(i) / n;
        while (u > cum && src + 1 < n) cum += particles.weights[++src];
        out.states.col(i) = particles.states.col(src);
    }
    return out;
}

// Weighted mean and covariance; the covariance is symmetrized and its
// spectrum floored at 1e-12 so downstream information-form inversions hold.
inline GaussApprox gauss_approx(const ParticleSet& particles) {
    if (particles.count() < 2) throw ConfigError("gauss_approx: need at least 2 particles");
    GaussApprox g;
    g.mean = particles.states * particles.weights;
    const MatX centered = particles.states.colwise() - g.mean;
    g.cov = symmetrize(centered * particles.weights.asDiagonal() * centered.transpose());
    Eigen::SelfAdjointEigenSolver<MatX> eig(g.cov);
    const double floor = 1e-12;
    if (eig.eigenvalues().minCoeff() < floor) {
        VecX lifted = eig.eigenvalues().cwiseMax(floor);
        g.cov = symmetrize(eig.eigenvectors() * lifted.asDiagonal() * eig.eigenvectors().transpose());
    }
    return g;
}

struct FusionResult {
    ParticleSet particles;
    GaussApprox fused;
    int consensus_rounds = 0;
};

// Information-form fusion of the local posteriors with common-prior
// correction:
//   Lambda_G = sum_l Lambda_l - (N_f - 1) Lambda_prior
//   eta_G    = sum_l Lambda_l mu_l - (N_f - 1) Lambda_prior mu_prior
// The network sums come from average consensus scaled by N_f (one matrix and
// one vector payload per node per round); the global particle set is drawn
// from N(Lambda_G^{-1} eta_G, Lambda_G^{-1}).
inline FusionResult fuse_locals(const std::vector<GaussApprox>& locals, const GaussApprox& prior,
                                const NodeGraph& graph, const ConsensusConfig& config, Rng& rng,
                                int n_particles) {
    const int n_nodes = graph.size();
    if (static_cast<int>(locals.size()) != n_nodes)
        throw ConfigError("fuse_locals: one local posterior per node required");
    const Eigen::Index n = locals[0].mean.size();

    // stacked [information matrix | information vector] per node
    std::vector<MatX> stacked(locals.size());
    for (std::size_t l = 0; l < locals.size(); ++l) {
        Eigen::LLT<MatX> llt(symmetrize(locals[l].cov));
        if (llt.info() != Eigen::Success)
            throw FusionError("fuse_locals: local covariance not positive definite");
        const MatX info = llt.solve(MatX::Identity(n, n));
        stacked[l].resize(n, n + 1);
        stacked[l].leftCols(n) = info;
        stacked[l].col(n) = info * locals[l].mean;
    }
    const auto consensus = average_consensus(stacked, graph, config);
    const MatX sums = static_cast<double>(n_nodes) * consensus.values[0];

    Eigen::LLT<MatX> prior_llt(symmetrize(prior.cov));
    if (prior_llt.info() != Eigen::Success)
        throw FusionError("fuse_locals: prior covariance not positive definite");
    const MatX prior_info = prior_llt.solve(MatX::Identity(n, n));

    const MatX fused_info = symmetrize(sums.leftCols(n) - (n_nodes - 1) * prior_info);
    const VecX fused_vec = sums.col(n) - (n_nodes - 1) * prior_info * prior.mean;

    Eigen::LLT<MatX> fused_llt(fused_info);
    if (fused_llt.info() != Eigen::Success)
        throw FusionError("fuse_locals: fused information matrix not positive definite");

    FusionResult result;
    result.consensus_rounds = consensus.rounds;
    result.fused.mean = fused_llt.solve(fused_vec);
    result.fused.cov = symmetrize(fused_llt.solve(MatX::Identity(n, n)));
    result.particles = sample_gaussian(result.fused, n_particles, rng);
    return result;
}

}  // namespace cqbound
