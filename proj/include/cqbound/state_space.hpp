#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Cholesky>

#include "cqbound/common.hpp"
#include "cqbound/rng.hpp"

namespace cqbound {

// State layout: [X, Xdot, Y, Ydot] (n_x = 4): position in meters, velocity in m/s.
// Both built-in motion models are linear, so the transition matrix doubles as
// the Jacobian everywhere.
class ProcessModel {
public:
    enum class Kind { constant_velocity, coordinated_turn };

    static ProcessModel constant_velocity(double step_s, MatX q_proc) {
        return ProcessModel(Kind::constant_velocity, 0.0, step_s, std::move(q_proc));
    }

    // Clockwise turn at rate omega (rad/s): velocity rotates from +X towards -Y.
    static ProcessModel coordinated_turn(double omega, double step_s, MatX q_proc) {
        return ProcessModel(Kind::coordinated_turn, omega, step_s, std::move(q_proc));
    }

    Kind kind() const { return kind_; }
    double step() const { return step_s_; }
    double turn_rate() const { return omega_; }
    int state_dim() const { return static_cast<int>(transition_.rows()); }

    const MatX& transition() const { return transition_; }
    const MatX& noise_covariance() const { return q_proc_; }
    const MatX& noise_information() const { return q_inv_; }

    StateVec propagate_mean(const StateVec& x) const { return transition_ * x; }
    MatX jacobian(const StateVec& /*x*/) const { return transition_; }

    StateVec sample_noise(Rng& rng) const { return noise_chol_ * rng.normal_vec(q_proc_.rows()); }

private:
    ProcessModel(Kind kind, double omega, double step_s, MatX q_proc)
        : kind_(kind), omega_(omega), step_s_(step_s), q_proc_(std::move(q_proc)) {
        if (step_s_ <= 0.0) throw ConfigError("ProcessModel: step must be positive");
        if (q_proc_.rows() != q_proc_.cols() || q_proc_.rows() != 4)
            throw ConfigError("ProcessModel: Q must be 4x4");
        if (!q_proc_.isApprox(q_proc_.transpose(), 1e-10))
            throw ConfigError("ProcessModel: Q must be symmetric");
        Eigen::LLT<MatX> llt(q_proc_);
        if (llt.info() != Eigen::Success)
            throw ConfigError("ProcessModel: Q must be positive definite");
        noise_chol_ = llt.matrixL();
        q_inv_ = llt.solve(MatX::Identity(4, 4));
        transition_ = make_transition();
    }

    MatX make_transition() const {
        const double t = step_s_;
        MatX f = MatX::Identity(4, 4);
        if (kind_ == Kind::constant_velocity || omega_ == 0.0) {
            f(0, 1) = t;
            f(2, 3) = t;
            return f;
        }
        const double wt = omega_ * t;
        const double s = std::sin(wt) / omega_;        // -> t as omega -> 0
        const double c = (1.0 - std::cos(wt)) / omega_;  // -> 0 as omega -> 0
        f(0, 1) = s;
        f(0, 3) = c;
        f(1, 1) = std::cos(wt);
        f(1, 3) = std::sin(wt);
        f(2, 1) = -c;
        f(2, 3) = s;
        f(3, 1) = -std::sin(wt);
        f(3, 3) = std::cos(wt);
        return f;
    }

    Kind kind_;
    double omega_;
    double step_s_;
    MatX q_proc_;
    MatX q_inv_;
    MatX noise_chol_;
    MatX transition_;
};

struct SensorPos {
    double x = 0.0;
    double y = 0.0;
};

// Bearing noise variance grows with target-sensor distance:
//   r(d) = max(r_min, r0 * (1 + (d/d0)^2)).
struct BearingObsModel {
    double base_variance = 1e-3;       // r0, rad^2
    double reference_distance = 500.0;  // d0, meters
    double variance_floor = 1e-6;       // r_min, rad^2

    void validate() const {
        if (base_variance <= 0.0 || reference_distance <= 0.0 || variance_floor <= 0.0)
            throw ConfigError("BearingObsModel: r0, d0, r_min must all be positive");
    }
};

// Angle of the target as seen from the sensor, measured from the +Y axis
// towards +X: atan2(dX, dY), in (-pi, pi].
inline double bearing(const StateVec& state, const SensorPos& sensor) {
    const double dx = state[0] - sensor.x;
    const double dy = state[2] - sensor.y;
    if (dx == 0.0 && dy == 0.0)
        throw NumericalError("bearing: target coincides with sensor");
    return std::atan2(dx, dy);
}

// d(bearing)/dx = (dY/d^2, 0, -dX/d^2, 0); velocities never enter.
inline VecX bearing_gradient(const StateVec& state, const SensorPos& sensor) {
    const double dx = state[0] - sensor.x;
    const double dy = state[2] - sensor.y;
    const double d2 = dx * dx + dy * dy;
    if (d2 == 0.0)
        throw NumericalError("bearing_gradient: target coincides with sensor");
    VecX g = VecX::Zero(state.size());
    g[0] = dy / d2;
    g[2] = -dx / d2;
    return g;
}

inline double obs_noise_variance(const StateVec& state, const SensorPos& sensor,
                                 const BearingObsModel& model) {
    const double dx = state[0] - sensor.x;
    const double dy = state[2] - sensor.y;
    const double d2 = dx * dx + dy * dy;
    const double r = model.base_variance * (1.0 + d2 / sq(model.reference_distance));
    return std::max(model.variance_floor, r);
}

// One bearing sensor bundled with its noise model. Satisfies the scalar
// sensor interface the information computations are templated over:
// mean(x), variance(x), gradient(x).
struct BearingSensor {
    SensorPos pos;
    BearingObsModel model;

    double mean(const StateVec& x) const { return bearing(x, pos); }
    double variance(const StateVec& x) const { return obs_noise_variance(x, pos, model); }
    VecX gradient(const StateVec& x) const { return bearing_gradient(x, pos); }
};

}  // namespace cqbound
