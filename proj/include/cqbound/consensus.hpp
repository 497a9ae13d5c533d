#pragma once

#include <cmath>
#include <type_traits>
#include <vector>

#include "cqbound/common.hpp"
#include "cqbound/graph.hpp"

namespace cqbound {

// Fixed-step linear average consensus: v_i <- v_i + eps * sum_j (v_j - v_i).
// epsilon <= 0 selects 1/(deg_max + 1). tolerance > 0 enables early exit once
// the largest per-node update falls below it; 0 runs all iterations.
struct ConsensusConfig {
    int iterations = 100;
    double epsilon = 0.0;
    double tolerance = 1e-9;
};

inline double default_epsilon(const NodeGraph& graph) {
    if (graph.size() == 0) throw ConfigError("default_epsilon: empty graph");
    return 1.0 / (graph.max_degree() + 1);
}

template <class T>
struct ConsensusResult {
    std::vector<T> values;  // per-node estimates of the network average
    int rounds = 0;         // rounds actually executed (early exit counts)
};

namespace detail {
inline double max_abs(double v) { return std::abs(v); }
template <class Derived>
double max_abs(const Eigen::MatrixBase<Derived>& v) {
    return v.cwiseAbs().maxCoeff();
}
}  // namespace detail

// Returns per-node estimates of the average of the inputs; callers wanting
// the network sum multiply by the node count.
template <class T>
ConsensusResult<T> average_consensus(const std::vector<T>& values, const NodeGraph& graph,
                                     const ConsensusConfig& config) {
    const int n = graph.size();
    if (n == 0 || static_cast<int>(values.size()) != n)
        throw ConfigError("average_consensus: values and graph sizes differ");
    if (!graph.connected()) throw ConfigError("average_consensus: graph is not connected");
    if constexpr (!std::is_arithmetic_v<T>) {
        for (const auto& v : values)
            if (v.rows() != values[0].rows() || v.cols() != values[0].cols())
                throw ConfigError("average_consensus: value shapes differ");
    }
    const double eps = config.epsilon > 0.0 ? config.epsilon : default_epsilon(graph);
    if (graph.max_degree() > 0 && eps * graph.max_degree() >= 1.0)
        throw ConfigError("average_consensus: epsilon * max_degree must be < 1");

    ConsensusResult<T> result{values, 0};
    std::vector<T> next = values;
    for (int round = 0; round < config.iterations; ++round) {
        double max_delta = 0.0;
        for (int i = 0; i < n; ++i) {
            T delta = result.values[i];
            delta -= result.values[i];  // zero of the right shape
            for (int j : graph.neighbors[i]) delta += result.values[j] - result.values[i];
            delta = eps * delta;
            max_delta = std::max(max_delta, detail::max_abs(delta));
            next[i] = result.values[i] + delta;
        }
        result.values.swap(next);
        ++result.rounds;
        if (config.tolerance > 0.0 && max_delta < config.tolerance) break;
    }
    return result;
}

}  // namespace cqbound
