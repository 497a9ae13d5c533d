#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "cqbound/common.hpp"
#include "cqbound/consensus.hpp"
#include "cqbound/network.hpp"
#include "cqbound/quantizer.hpp"
#include "cqbound/state_space.hpp"

namespace cqbound {

enum class RunMode { raw, quantized, centralized_raw, centralized_quantized };

inline std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::raw: return "raw";
        case RunMode::quantized: return "quantized";
        case RunMode::centralized_raw: return "centralized_raw";
        case RunMode::centralized_quantized: return "centralized_quantized";
    }
    throw ConfigError("unknown run mode");
}

inline RunMode mode_from_string(const std::string& s) {
    if (s == "raw") return RunMode::raw;
    if (s == "quantized") return RunMode::quantized;
    if (s == "centralized_raw") return RunMode::centralized_raw;
    if (s == "centralized_quantized") return RunMode::centralized_quantized;
    throw ConfigError("unknown mode '" + s + "'");
}

inline bool is_quantized(RunMode mode) {
    return mode == RunMode::quantized || mode == RunMode::centralized_quantized;
}

inline bool is_centralized(RunMode mode) {
    return mode == RunMode::centralized_raw || mode == RunMode::centralized_quantized;
}

// Every free parameter of a run. The defaults are the desk-scale scenario:
// large enough to show the trends, small enough to finish in minutes.
struct ScenarioConfig {
    TopologyConfig topology;
    int active_per_node = 3;
    bool reselect_active_each_step = true;

    // motion: clockwise coordinated turn unless turn_rate == 0
    double turn_rate = 0.05;          // rad/s
    double step_s = 1.0;
    double process_noise_intensity = 0.1;  // m^2/s^3, white-noise acceleration

    BearingObsModel observation;

    VecX init_state;   // true initial state; defaults to the prior mean
    VecX prior_mean;
    MatX prior_cov;

    int bits = 8;
    double quantizer_lo = -kPi;
    double quantizer_hi = kPi;

    int particles = 500;
    double resample_threshold = 0.5;
    ConsensusConfig consensus;
    bool fusion_feedback = false;  // restart local filters from the fused posterior

    int trials = 20;
    int steps = 50;
    std::uint64_t seed = 7;
    RunMode mode = RunMode::quantized;

    static ScenarioConfig desk_default() {
        ScenarioConfig c;
        c.prior_mean = VecX(4);
        c.prior_mean << 400.0, 12.0, 600.0, 8.0;
        c.prior_cov = VecX{{10000.0, 25.0, 10000.0, 25.0}}.asDiagonal();
        c.init_state = c.prior_mean;
        return c;
    }

    ProcessModel make_process_model() const {
        // discretized white-noise acceleration per axis
        const double t = step_s, q = process_noise_intensity;
        MatX qp = MatX::Zero(4, 4);
        qp(0, 0) = qp(2, 2) = q * t * t * t / 3.0;
        qp(0, 1) = qp(1, 0) = qp(2, 3) = qp(3, 2) = q * t * t / 2.0;
        qp(1, 1) = qp(3, 3) = q * t;
        return turn_rate == 0.0 ? ProcessModel::constant_velocity(t, qp)
                                : ProcessModel::coordinated_turn(turn_rate, t, qp);
    }

    QuantizerSpec make_quantizer() const {
        return QuantizerSpec::uniform(bits, quantizer_lo, quantizer_hi);
    }

    void validate() const {
        if (trials < 1 || steps < 1 || particles < 2)
            throw ConfigError("config: trials, steps, particles must be positive");
        if (active_per_node < 1) throw ConfigError("config: active_per_node must be positive");
        if (step_s <= 0) throw ConfigError("config: step_s must be positive");
        if (process_noise_intensity <= 0)
            throw ConfigError("config: process_noise_intensity must be positive");
        if (is_quantized(mode) && (bits < 1 || bits > 16))
            throw ConfigError("config: bits must be in [1, 16]");
        if (!(quantizer_lo < quantizer_hi)) throw ConfigError("config: empty quantizer range");
        if (prior_mean.size() != 4 || init_state.size() != 4 || prior_cov.rows() != 4 ||
            prior_cov.cols() != 4)
            throw ConfigError("config: state dimension must be 4");
        observation.validate();
        Eigen::LLT<MatX> llt(prior_cov);
        if (llt.info() != Eigen::Success)
            throw ConfigError("config: prior covariance must be positive definite");
    }
};

namespace detail {
inline VecX vec_from_json(const nlohmann::json& j) {
    VecX v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
    return v;
}
inline nlohmann::json vec_to_json(const VecX& v) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}
}  // namespace detail

inline ScenarioConfig config_from_json(const nlohmann::json& j) {
    ScenarioConfig c = ScenarioConfig::desk_default();
    try {
        if (j.contains("region")) {
            c.topology.region_width = j["region"].value("width_m", c.topology.region_width);
            c.topology.region_height = j["region"].value("height_m", c.topology.region_height);
        }
        if (j.contains("sensor_grid")) {
            c.topology.sensor_grid_x = j["sensor_grid"].value("nx", c.topology.sensor_grid_x);
            c.topology.sensor_grid_y = j["sensor_grid"].value("ny", c.topology.sensor_grid_y);
        }
        if (j.contains("node_grid")) {
            c.topology.node_grid_x = j["node_grid"].value("nx", c.topology.node_grid_x);
            c.topology.node_grid_y = j["node_grid"].value("ny", c.topology.node_grid_y);
        }
        c.topology.comm_radius = j.value("node_comm_radius_m", c.topology.comm_radius);
        c.active_per_node = j.value("active_sensors_per_node", c.active_per_node);
        c.reselect_active_each_step =
            j.value("reselect_active_each_step", c.reselect_active_each_step);

        if (j.contains("motion")) {
            const auto& m = j["motion"];
            c.turn_rate = m.value("turn_rate_rad_s", c.turn_rate);
            c.step_s = m.value("step_s", c.step_s);
            c.process_noise_intensity =
                m.value("process_noise_intensity", c.process_noise_intensity);
        }
        if (j.contains("observation")) {
            const auto& o = j["observation"];
            c.observation.base_variance = o.value("base_variance_rad2", c.observation.base_variance);
            c.observation.reference_distance =
                o.value("reference_distance_m", c.observation.reference_distance);
            c.observation.variance_floor =
                o.value("variance_floor_rad2", c.observation.variance_floor);
        }
        if (j.contains("prior")) {
            const auto& p = j["prior"];
            if (p.contains("mean")) c.prior_mean = detail::vec_from_json(p["mean"]);
            if (p.contains("cov_diag"))
                c.prior_cov = MatX(detail::vec_from_json(p["cov_diag"]).asDiagonal());
            if (p.contains("cov")) {
                const auto& rows = p["cov"];
                c.prior_cov.resize(rows.size(), rows.size());
                for (std::size_t r = 0; r < rows.size(); ++r)
                    for (std::size_t col = 0; col < rows[r].size(); ++col)
                        c.prior_cov(r, col) = rows[r][col].get<double>();
            }
            c.init_state = c.prior_mean;
        }
        if (j.contains("init_state")) c.init_state = detail::vec_from_json(j["init_state"]);
        if (j.contains("quantizer")) {
            const auto& q = j["quantizer"];
            c.bits = q.value("bits", c.bits);
            if (q.contains("range")) {
                c.quantizer_lo = q["range"][0].get<double>();
                c.quantizer_hi = q["range"][1].get<double>();
            }
        }
        c.particles = j.value("particles", c.particles);
        c.resample_threshold = j.value("resample_threshold", c.resample_threshold);
        if (j.contains("consensus")) {
            const auto& cc = j["consensus"];
            c.consensus.iterations = cc.value("iterations", c.consensus.iterations);
            c.consensus.epsilon = cc.value("epsilon", c.consensus.epsilon);
            c.consensus.tolerance = cc.value("tolerance", c.consensus.tolerance);
        }
        c.fusion_feedback = j.value("fusion_feedback", c.fusion_feedback);
        c.trials = j.value("trials", c.trials);
        c.steps = j.value("steps", c.steps);
        c.seed = j.value("seed", c.seed);
        if (j.contains("mode")) c.mode = mode_from_string(j["mode"].get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline nlohmann::json config_to_json(const ScenarioConfig& c) {
    nlohmann::json j;
    j["region"] = {{"width_m", c.topology.region_width}, {"height_m", c.topology.region_height}};
    j["sensor_grid"] = {{"nx", c.topology.sensor_grid_x}, {"ny", c.topology.sensor_grid_y}};
    j["node_grid"] = {{"nx", c.topology.node_grid_x}, {"ny", c.topology.node_grid_y}};
    j["node_comm_radius_m"] = c.topology.comm_radius;
    j["active_sensors_per_node"] = c.active_per_node;
    j["reselect_active_each_step"] = c.reselect_active_each_step;
    j["motion"] = {{"turn_rate_rad_s", c.turn_rate},
                   {"step_s", c.step_s},
                   {"process_noise_intensity", c.process_noise_intensity}};
    j["observation"] = {{"base_variance_rad2", c.observation.base_variance},
                        {"reference_distance_m", c.observation.reference_distance},
                        {"variance_floor_rad2", c.observation.variance_floor}};
    nlohmann::json cov = nlohmann::json::array();
    for (Eigen::Index r = 0; r < c.prior_cov.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index col = 0; col < c.prior_cov.cols(); ++col)
            row.push_back(c.prior_cov(r, col));
        cov.push_back(row);
    }
    j["prior"] = {{"mean", detail::vec_to_json(c.prior_mean)}, {"cov", cov}};
    j["init_state"] = detail::vec_to_json(c.init_state);
    j["quantizer"] = {{"bits", c.bits},
                      {"range", nlohmann::json::array({c.quantizer_lo, c.quantizer_hi})}};
    j["particles"] = c.particles;
    j["resample_threshold"] = c.resample_threshold;
    j["consensus"] = {{"iterations", c.consensus.iterations},
                      {"epsilon", c.consensus.epsilon},
                      {"tolerance", c.consensus.tolerance}};
    j["fusion_feedback"] = c.fusion_feedback;
    j["trials"] = c.trials;
    j["steps"] = c.steps;
    j["seed"] = c.seed;
    j["mode"] = to_string(c.mode);
    return j;
}

inline ScenarioConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return config_from_json(j);
}

}  // namespace cqbound
