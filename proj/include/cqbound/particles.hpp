#pragma once

#include "cqbound/common.hpp"
#include "cqbound/rng.hpp"

#include <Eigen/Cholesky>

namespace cqbound {

// Weighted Monte-Carlo representation of a posterior. Column i of `states`
// is particle i; weights are kept normalized to sum 1.
struct ParticleSet {
    MatX states;   // n_x x N_p
    VecX weights;  // N_p

    int dim() const { return static_cast<int>(states.rows()); }
    int count() const { return static_cast<int>(states.cols()); }

    void normalize() {
        const double total = weights.sum();
        if (!(total > 0.0) || !std::isfinite(total))
            throw DivergenceError("ParticleSet: weights sum to zero");
        weights /= total;
    }
};

struct GaussApprox {
    VecX mean;
    MatX cov;
};

inline ParticleSet sample_gaussian(const GaussApprox& g, int n_particles, Rng& rng) {
    if (n_particles < 2) throw ConfigError("sample_gaussian: need at least 2 particles");
    Eigen::LLT<MatX> llt(symmetrize(g.cov));
    if (llt.info() != Eigen::Success)
        throw NumericalError("sample_gaussian: covariance not positive definite");
    const MatX chol = llt.matrixL();
    ParticleSet p;
    p.states.resize(g.mean.size(), n_particles);
    for (int i = 0; i < n_particles; ++i)
        p.states.col(i) = g.mean + chol * rng.normal_vec(g.mean.size());
    p.weights = VecX::Constant(n_particles, 1.0 / n_particles);
    return p;
}

}  // namespace cqbound
