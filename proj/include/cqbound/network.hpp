#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <vector>

#include "cqbound/common.hpp"
#include "cqbound/graph.hpp"
#include "cqbound/rng.hpp"
#include "cqbound/state_space.hpp"

namespace cqbound {

// Geometry parameters; defaults reproduce the 225-sensor / 9-node layout
// over a 1500 m square with nodes linked within 550 m.
struct TopologyConfig {
    double region_width = 1500.0;
    double region_height = 1500.0;
    int sensor_grid_x = 15;
    int sensor_grid_y = 15;
    int node_grid_x = 3;
    int node_grid_y = 3;
    double comm_radius = 550.0;
};

// Sensors on a uniform grid, one processing node at the centre of each node
// cell, each sensor owned by the node whose cell contains it.
struct Topology {
    std::vector<SensorPos> sensors;
    std::vector<int> sensor_node;                 // owning node per sensor
    std::vector<std::vector<int>> node_sensors;   // observation neighbourhood per node
    std::vector<SensorPos> nodes;
    NodeGraph graph;

    int sensor_count() const { return static_cast<int>(sensors.size()); }
    int node_count() const { return static_cast<int>(nodes.size()); }
};

inline Topology build_grid_topology(const TopologyConfig& config) {
    if (config.region_width <= 0 || config.region_height <= 0 || config.sensor_grid_x < 1 ||
        config.sensor_grid_y < 1 || config.node_grid_x < 1 || config.node_grid_y < 1)
        throw ConfigError("build_grid_topology: dimensions must be positive");

    Topology topo;
    const double cell_w = config.region_width / config.node_grid_x;
    const double cell_h = config.region_height / config.node_grid_y;
    for (int j = 0; j < config.node_grid_y; ++j)
        for (int i = 0; i < config.node_grid_x; ++i)
            topo.nodes.push_back({(i + 0.5) * cell_w, (j + 0.5) * cell_h});

    topo.node_sensors.resize(topo.nodes.size());
    const double sx = config.region_width / config.sensor_grid_x;
    const double sy = config.region_height / config.sensor_grid_y;
    for (int j = 0; j < config.sensor_grid_y; ++j) {
        for (int i = 0; i < config.sensor_grid_x; ++i) {
            const SensorPos pos{(i + 0.5) * sx, (j + 0.5) * sy};
            const int ci = std::min(config.node_grid_x - 1, static_cast<int>(pos.x / cell_w));
            const int cj = std::min(config.node_grid_y - 1, static_cast<int>(pos.y / cell_h));
            const int node = cj * config.node_grid_x + ci;
            topo.sensor_node.push_back(node);
            topo.node_sensors[node].push_back(static_cast<int>(topo.sensors.size()));
            topo.sensors.push_back(pos);
        }
    }

    topo.graph.neighbors.resize(topo.nodes.size());
    for (std::size_t a = 0; a < topo.nodes.size(); ++a) {
        for (std::size_t b = a + 1; b < topo.nodes.size(); ++b) {
            const double d = std::hypot(topo.nodes[a].x - topo.nodes[b].x,
                                        topo.nodes[a].y - topo.nodes[b].y);
            if (d <= config.comm_radius) {
                topo.graph.neighbors[a].push_back(static_cast<int>(b));
                topo.graph.neighbors[b].push_back(static_cast<int>(a));
            }
        }
    }
    if (!topo.graph.connected())
        throw ConfigError("build_grid_topology: node graph is disconnected; increase comm_radius");
    return topo;
}

// Active sensors per node for one iteration.
struct ActiveSet {
    std::vector<std::vector<int>> per_node;  // sensor ids

    int total() const {
        int n = 0;
        for (const auto& v : per_node) n += static_cast<int>(v.size());
        return n;
    }
};

// Uniform sample of k sensors per node without replacement (partial
// Fisher-Yates over each node's neighbourhood).
inline ActiveSet select_active(const Topology& topo, int k_per_node, Rng& rng) {
    ActiveSet active;
    active.per_node.resize(topo.node_count());
    for (int l = 0; l < topo.node_count(); ++l) {
        std::vector<int> pool = topo.node_sensors[l];
        if (k_per_node > static_cast<int>(pool.size()))
            throw ConfigError("select_active: node owns fewer sensors than requested");
        for (int k = 0; k < k_per_node; ++k) {
            const auto j = k + static_cast<int>(rng.bounded(pool.size() - k));
            std::swap(pool[k], pool[j]);
        }
        pool.resize(k_per_node);
        std::sort(pool.begin(), pool.end());
        active.per_node[l] = std::move(pool);
    }
    return active;
}

inline void write_topology_csv(std::ostream& out, const Topology& topo) {
    out << "sensor_id,node_id,x_m,y_m\n";
    for (int s = 0; s < topo.sensor_count(); ++s)
        out << s << ',' << topo.sensor_node[s] << ',' << topo.sensors[s].x << ','
            << topo.sensors[s].y << '\n';
}

// Abstract message counts for one simulated iteration. Quantized sensor
// reports cost N_L bits; a raw report is metered as one 64-bit scalar.
struct StepTraffic {
    long long sensor_messages = 0;
    long long sensor_bits = 0;
    long long fim_matrices = 0;      // node->node payloads of the bound recursion
    long long fusion_matrices = 0;   // node->node covariance payloads of the fusion filter
    long long fusion_vectors = 0;    // node->node mean payloads of the fusion filter
    long long consensus_rounds = 0;

    StepTraffic& operator+=(const StepTraffic& o) {
        sensor_messages += o.sensor_messages;
        sensor_bits += o.sensor_bits;
        fim_matrices += o.fim_matrices;
        fusion_matrices += o.fusion_matrices;
        fusion_vectors += o.fusion_vectors;
        consensus_rounds += o.consensus_rounds;
        return *this;
    }
};

struct CommLedger {
    std::vector<StepTraffic> steps;

    StepTraffic totals() const {
        StepTraffic t;
        for (const auto& s : steps) t += s;
        return t;
    }
};

// The scheme this one replaces fuses an auxiliary FIM alongside the
// conditional FIM, doubling the node->node FIM payload per consensus round.
inline CommLedger model_aux_ledger(const CommLedger& cq) {
    CommLedger aux = cq;
    for (auto& s : aux.steps) s.fim_matrices *= 2;
    return aux;
}

// Node->node FIM-payload ratio between the two schemes.
inline double ledger_compare(const CommLedger& cq, const CommLedger& aux_model) {
    if (cq.steps.size() != aux_model.steps.size())
        throw ConfigError("ledger_compare: ledgers cover different iteration ranges");
    const auto cq_fim = cq.totals().fim_matrices;
    const auto aux_fim = aux_model.totals().fim_matrices;
    if (cq_fim == 0)
        throw ConfigError("ledger_compare: no node->node FIM traffic recorded");
    return static_cast<double>(aux_fim) / static_cast<double>(cq_fim);
}

}  // namespace cqbound
