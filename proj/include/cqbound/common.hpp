#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace cqbound {

using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

// Information matrices (the L, B, C, G symbols) are plain dense matrices;
// symmetry/PSD are maintained by the update routines, not by the type.
using FimMatrix = MatX;
using StateVec = VecX;

// Bad user input: malformed config, invalid ranges, mismatched shapes.
// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure at runtime: singular blocks, diverged filters.
// The CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// All particle weights vanished in a measurement update.
struct DivergenceError : NumericalError {
    explicit DivergenceError(const std::string& msg) : NumericalError(msg) {}
};

// Fused information matrix came out non-positive-definite.
struct FusionError : NumericalError {
    explicit FusionError(const std::string& msg) : NumericalError(msg) {}
};

inline MatX symmetrize(const MatX& m) { return 0.5 * (m + m.transpose()); }

inline bool all_finite(const MatX& m) { return m.allFinite(); }

inline double sq(double x) { return x * x; }

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace cqbound
