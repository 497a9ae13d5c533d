#pragma once

#include <atomic>
#include <cstdio>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cqbound/common.hpp"
#include "cqbound/consensus.hpp"
#include "cqbound/estimator.hpp"
#include "cqbound/fim.hpp"
#include "cqbound/network.hpp"
#include "cqbound/oracle.hpp"
#include "cqbound/scenario.hpp"

namespace cqbound {

struct StepRecord {
    int step = 0;
    double bound_m = 0.0;
    double rmse_m = 0.0;
    int trials_used = 0;
    int diverged = 0;
    StepTraffic traffic;  // summed over the trials that completed
};

struct RunRecord {
    std::string mode_label;
    int bits = 0;  // 0 in raw modes
    int trials_requested = 0;
    int trials_used = 0;
    int diverged = 0;
    int fusion_failures = 0;
    std::uint64_t seed = 0;
    std::vector<StepRecord> steps;

    CommLedger ledger() const {
        CommLedger l;
        for (const auto& s : steps) l.steps.push_back(s.traffic);
        return l;
    }
};

namespace harness_detail {

// RNG stream tags, fixed so that the truth, selection and observation
// sequences coincide across modes under one seed.
inline constexpr std::uint32_t kTruthTag = 1;
inline constexpr std::uint32_t kObsTag = 2;
inline constexpr std::uint32_t kSelectTag = 3;
inline constexpr std::uint32_t kGlobalTag = 4;
inline constexpr std::uint32_t kPooledTag = 5;
inline constexpr std::uint32_t kNodeTagBase = 100;

struct TrialOutput {
    bool diverged = false;
    int fusion_failures = 0;
    std::vector<double> bound;
    std::vector<double> sq_err;
    std::vector<StepTraffic> traffic;
};

inline MatX information_of(const MatX& cov) {
    Eigen::LLT<MatX> llt(symmetrize(cov));
    if (llt.info() != Eigen::Success)
        throw NumericalError("information_of: covariance not positive definite");
    return llt.solve(MatX::Identity(cov.rows(), cov.cols()));
}

// Equal-weight mixture moments of per-node Gaussians, the common-prior
// approximation used when the fused posterior does not feed back.
inline GaussApprox mixture_moments(const MatX& avg_second_moment, const VecX& avg_mean) {
    GaussApprox g;
    g.mean = avg_mean;
    g.cov = symmetrize(avg_second_moment - avg_mean * avg_mean.transpose());
    return g;
}

inline VecX weighted_mean(const ParticleSet& p) { return p.states * p.weights; }

inline double position_sq_err(const VecX& estimate, const VecX& truth) {
    return sq(estimate[0] - truth[0]) + sq(estimate[2] - truth[2]);
}

// One Monte-Carlo trial of the decentralized pipeline (raw or quantized).
inline TrialOutput run_decentralized_trial(const ScenarioConfig& config, const Topology& topo,
                                           int trial) {
    const ProcessModel model = config.make_process_model();
    const QuantizerSpec spec = is_quantized(config.mode)
                                   ? config.make_quantizer()
                                   : QuantizerSpec::from_thresholds({});
    const int n_nodes = topo.node_count();
    const int n_p = config.particles;
    const GaussApprox prior0{config.prior_mean, config.prior_cov};
    const MatX l0 = information_of(config.prior_cov);

    Rng truth_rng = Rng::stream(config.seed, kTruthTag, trial);
    Rng obs_rng = Rng::stream(config.seed, kObsTag, trial);
    Rng select_rng = Rng::stream(config.seed, kSelectTag, trial);
    Rng global_rng = Rng::stream(config.seed, kGlobalTag, trial);
    std::vector<Rng> node_rng;
    for (int l = 0; l < n_nodes; ++l)
        node_rng.push_back(Rng::stream(config.seed, kNodeTagBase + l, trial));

    VecX truth = config.init_state;
    std::vector<ParticleSet> local(n_nodes);
    std::vector<MatX> local_fim(n_nodes, l0);
    for (int l = 0; l < n_nodes; ++l) local[l] = sample_gaussian(prior0, n_p, node_rng[l]);
    ParticleSet global = sample_gaussian(prior0, n_p, global_rng);
    MatX global_fim = l0;

    TrialOutput out;
    ActiveSet active;
    for (int step = 1; step <= config.steps; ++step) {
        StepTraffic traffic;
        truth = model.propagate_mean(truth) + model.sample_noise(truth_rng);
        if (config.reselect_active_each_step || step == 1)
            active = select_active(topo, config.active_per_node, select_rng);

        // sensor reports
        std::vector<std::vector<BearingSensor>> sensors(n_nodes);
        std::vector<std::vector<double>> raw_obs(n_nodes);
        std::vector<std::vector<int>> levels(n_nodes);
        for (int l = 0; l < n_nodes; ++l) {
            for (int s : active.per_node[l]) {
                const BearingSensor sensor{topo.sensors[s], config.observation};
                const double raw =
                    sensor.mean(truth) + std::sqrt(sensor.variance(truth)) * obs_rng.normal();
                sensors[l].push_back(sensor);
                raw_obs[l].push_back(raw);
                if (is_quantized(config.mode)) levels[l].push_back(quantize(raw, spec));
                traffic.sensor_messages += 1;
                traffic.sensor_bits += is_quantized(config.mode) ? config.bits : 64;
            }
        }

        // local filters and local FIM recursions
        std::vector<MatX> fim_delta(n_nodes);
        std::vector<GaussApprox> locals_gauss(n_nodes);
        std::vector<MatX> pred_second_moment(n_nodes);
        std::vector<VecX> pred_mean(n_nodes);
        try {
            for (int l = 0; l < n_nodes; ++l) {
                const BBlocks blocks = b_blocks_state(local[l], model);
                const ParticleSet pred = predict(local[l], model, node_rng[l]);
                const MatX j = is_quantized(config.mode)
                                   ? j_quantized(pred, sensors[l], spec)
                                   : j_raw(pred, sensors[l]);
                const MatX fim_next = local_fim_update(local_fim[l], blocks, j);
                fim_delta[l] = fim_next - predictive_fim_update(local_fim[l], blocks);
                local_fim[l] = fim_next;

                const GaussApprox pred_gauss = gauss_approx(pred);
                pred_second_moment[l] =
                    pred_gauss.cov + pred_gauss.mean * pred_gauss.mean.transpose();
                pred_mean[l] = pred_gauss.mean;

                const ParticleSet weighted =
                    is_quantized(config.mode)
                        ? weight_quantized(pred, levels[l], sensors[l], spec)
                        : weight_raw(pred, raw_obs[l], sensors[l]);
                local[l] = resample_systematic(weighted, node_rng[l], config.resample_threshold);
                locals_gauss[l] = gauss_approx(local[l]);
            }
        } catch (const DivergenceError&) {
            out.diverged = true;
            return out;
        }

        // network sum of (filtering - predictive) local FIMs via consensus;
        // one matrix payload per node per round delivers both sums
        const auto fim_consensus = average_consensus(fim_delta, topo.graph, config.consensus);
        const MatX delta_sum = static_cast<double>(n_nodes) * fim_consensus.values[0];
        traffic.fim_matrices += static_cast<long long>(n_nodes) * fim_consensus.rounds;
        traffic.consensus_rounds += fim_consensus.rounds;

        // global blocks come from the global particles of the previous step
        const BBlocks global_blocks = b_blocks_state(global, model);
        const ParticleSet global_pred = predict(global, model, global_rng);

        // common prior for the fusion: the fused predictive when feedback is
        // on (all local filters share it), otherwise the consensus-averaged
        // mixture of the per-node predictive priors
        GaussApprox fusion_prior;
        if (config.fusion_feedback) {
            fusion_prior = gauss_approx(global_pred);
        } else {
            std::vector<MatX> stacked(n_nodes);
            for (int l = 0; l < n_nodes; ++l) {
                stacked[l].resize(4, 5);
                stacked[l].leftCols(4) = pred_second_moment[l];
                stacked[l].col(4) = pred_mean[l];
            }
            const auto prior_consensus = average_consensus(stacked, topo.graph, config.consensus);
            traffic.fusion_matrices += static_cast<long long>(n_nodes) * prior_consensus.rounds;
            traffic.fusion_vectors += static_cast<long long>(n_nodes) * prior_consensus.rounds;
            traffic.consensus_rounds += prior_consensus.rounds;
            fusion_prior = mixture_moments(prior_consensus.values[0].leftCols(4),
                                           prior_consensus.values[0].col(4));
        }

        try {
            const FusionResult fusion = fuse_locals(locals_gauss, fusion_prior, topo.graph,
                                                    config.consensus, global_rng, n_p);
            traffic.fusion_matrices += static_cast<long long>(n_nodes) * fusion.consensus_rounds;
            traffic.fusion_vectors += static_cast<long long>(n_nodes) * fusion.consensus_rounds;
            traffic.consensus_rounds += fusion.consensus_rounds;
            global = fusion.particles;
        } catch (const FusionError&) {
            ++out.fusion_failures;
            global = global_pred;
        }

        CBlocks c;
        c.c11 = global_blocks.b11;
        c.c12 = global_blocks.b12;
        c.c22 = delta_sum + model.noise_information();
        global_fim = global_fusion(global_fim, c);

        if (config.fusion_feedback)
            for (int l = 0; l < n_nodes; ++l) local[l] = global;

        out.bound.push_back(rmse_bound(global_fim));
        out.sq_err.push_back(position_sq_err(weighted_mean(global), truth));
        out.traffic.push_back(traffic);
    }
    return out;
}

// One trial of the centralized counterpart: every active sensor reports to a
// single centre running one filter and one FIM recursion (oracle arithmetic).
inline TrialOutput run_centralized_trial(const ScenarioConfig& config, const Topology& topo,
                                         int trial) {
    const ProcessModel model = config.make_process_model();
    const QuantizerSpec spec = is_quantized(config.mode)
                                   ? config.make_quantizer()
                                   : QuantizerSpec::from_thresholds({});
    const GaussApprox prior0{config.prior_mean, config.prior_cov};

    Rng truth_rng = Rng::stream(config.seed, kTruthTag, trial);
    Rng obs_rng = Rng::stream(config.seed, kObsTag, trial);
    Rng select_rng = Rng::stream(config.seed, kSelectTag, trial);
    Rng filter_rng = Rng::stream(config.seed, kPooledTag, trial);

    VecX truth = config.init_state;
    ParticleSet pooled = sample_gaussian(prior0, config.particles, filter_rng);
    MatX fim = information_of(config.prior_cov);

    TrialOutput out;
    ActiveSet active;
    for (int step = 1; step <= config.steps; ++step) {
        StepTraffic traffic;
        truth = model.propagate_mean(truth) + model.sample_noise(truth_rng);
        if (config.reselect_active_each_step || step == 1)
            active = select_active(topo, config.active_per_node, select_rng);

        std::vector<BearingSensor> sensors;
        std::vector<double> raw_obs;
        std::vector<int> levels;
        for (int l = 0; l < topo.node_count(); ++l) {
            for (int s : active.per_node[l]) {
                const BearingSensor sensor{topo.sensors[s], config.observation};
                const double raw =
                    sensor.mean(truth) + std::sqrt(sensor.variance(truth)) * obs_rng.normal();
                sensors.push_back(sensor);
                raw_obs.push_back(raw);
                if (is_quantized(config.mode)) levels.push_back(quantize(raw, spec));
                traffic.sensor_messages += 1;
                traffic.sensor_bits += is_quantized(config.mode) ? config.bits : 64;
            }
        }

        const ParticleSet prior_particles = pooled;
        const ParticleSet pred = predict(pooled, model, filter_rng);
        fim = oracle::centralized_fim_step(
            fim, prior_particles, pred, sensors, model,
            is_quantized(config.mode) ? oracle::ObsKind::quantized : oracle::ObsKind::raw,
            is_quantized(config.mode) ? &spec : nullptr);

        try {
            const ParticleSet weighted = is_quantized(config.mode)
                                             ? weight_quantized(pred, levels, sensors, spec)
                                             : weight_raw(pred, raw_obs, sensors);
            pooled = resample_systematic(weighted, filter_rng, config.resample_threshold);
        } catch (const DivergenceError&) {
            out.diverged = true;
            return out;
        }

        out.bound.push_back(rmse_bound(fim));
        out.sq_err.push_back(position_sq_err(weighted_mean(pooled), truth));
        out.traffic.push_back(traffic);
    }
    return out;
}

inline TrialOutput run_trial(const ScenarioConfig& config, const Topology& topo, int trial) {
    return is_centralized(config.mode) ? run_centralized_trial(config, topo, trial)
                                       : run_decentralized_trial(config, topo, trial);
}

}  // namespace harness_detail

inline RunRecord run_scenario(const ScenarioConfig& config) {
    config.validate();
    const Topology topo = build_grid_topology(config.topology);

    std::vector<harness_detail::TrialOutput> outputs(config.trials);
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (int t; (t = next.fetch_add(1)) < config.trials;) {
            try {
                outputs[t] = harness_detail::run_trial(config, topo, t);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    const int n_threads =
        std::max(1, std::min<int>(config.trials, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    RunRecord record;
    record.mode_label = to_string(config.mode);
    record.bits = is_quantized(config.mode) ? config.bits : 0;
    record.trials_requested = config.trials;
    record.seed = config.seed;
    for (const auto& o : outputs) {
        if (o.diverged)
            ++record.diverged;
        else
            record.fusion_failures += o.fusion_failures;
    }
    record.trials_used = config.trials - record.diverged;
    if (record.trials_used == 0) throw NumericalError("run_scenario: every trial diverged");

    record.steps.resize(config.steps);
    for (int k = 0; k < config.steps; ++k) {
        StepRecord& row = record.steps[k];
        row.step = k + 1;
        row.trials_used = record.trials_used;
        row.diverged = record.diverged;
        double bound_sum = 0.0, err_sum = 0.0;
        for (const auto& o : outputs) {
            if (o.diverged) continue;
            bound_sum += o.bound[k];
            err_sum += o.sq_err[k];
            row.traffic += o.traffic[k];
        }
        row.bound_m = bound_sum / record.trials_used;
        row.rmse_m = std::sqrt(err_sum / record.trials_used);
    }
    return record;
}

// One run per bit depth under a shared seed, preceded by the raw baseline.
inline std::vector<RunRecord> sweep_bits(const ScenarioConfig& config,
                                         const std::vector<int>& bit_list) {
    if (bit_list.empty()) throw ConfigError("sweep_bits: empty bit list");
    std::vector<RunRecord> records;
    ScenarioConfig raw = config;
    raw.mode = is_centralized(config.mode) ? RunMode::centralized_raw : RunMode::raw;
    records.push_back(run_scenario(raw));
    for (int bits : bit_list) {
        ScenarioConfig c = config;
        c.mode = is_centralized(config.mode) ? RunMode::centralized_quantized : RunMode::quantized;
        c.bits = bits;
        records.push_back(run_scenario(c));
    }
    return records;
}

// ---- CSV + report emission ----

inline const char* kRunCsvSchema = "cqbound-run-csv v1";

namespace harness_detail {
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}
}  // namespace harness_detail

inline void write_run_csv(std::ostream& out, const std::vector<RunRecord>& records) {
    out << "# " << kRunCsvSchema << "\n";
    out << "mode,bits,step,bound_m,rmse_m,trials_used,diverged,sensor_msgs,sensor_bits,"
           "fim_matrices,fusion_matrices,fusion_vectors,consensus_rounds\n";
    for (const auto& r : records) {
        out << "# group mode=" << r.mode_label << " bits=" << r.bits
            << " trials=" << r.trials_requested << " used=" << r.trials_used
            << " diverged=" << r.diverged << " fusion_failures=" << r.fusion_failures
            << " seed=" << r.seed << "\n";
        for (const auto& s : r.steps) {
            out << r.mode_label << ',' << r.bits << ',' << s.step << ','
                << harness_detail::fmt_double(s.bound_m) << ','
                << harness_detail::fmt_double(s.rmse_m) << ',' << s.trials_used << ','
                << s.diverged << ',' << s.traffic.sensor_messages << ','
                << s.traffic.sensor_bits << ',' << s.traffic.fim_matrices << ','
                << s.traffic.fusion_matrices << ',' << s.traffic.fusion_vectors << ','
                << s.traffic.consensus_rounds << "\n";
        }
    }
}

inline std::vector<RunRecord> read_run_csv(std::istream& in) {
    std::vector<RunRecord> records;
    std::string line;
    bool schema_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# group", 0) == 0) {
            RunRecord r;
            std::istringstream fields(line.substr(7));
            std::string kv;
            try {
                while (fields >> kv) {
                    const auto eq = kv.find('=');
                    if (eq == std::string::npos) continue;
                    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
                    if (key == "mode") r.mode_label = value;
                    else if (key == "bits") r.bits = std::stoi(value);
                    else if (key == "trials") r.trials_requested = std::stoi(value);
                    else if (key == "used") r.trials_used = std::stoi(value);
                    else if (key == "diverged") r.diverged = std::stoi(value);
                    else if (key == "fusion_failures") r.fusion_failures = std::stoi(value);
                    else if (key == "seed") r.seed = std::stoull(value);
                }
            } catch (const std::exception&) {
                throw ConfigError("run csv: malformed group header '" + line + "'");
            }
            records.push_back(std::move(r));
            continue;
        }
        if (line[0] == '#') {
            if (line.find(kRunCsvSchema) != std::string::npos) schema_seen = true;
            continue;
        }
        if (line.rfind("mode,", 0) == 0) continue;  // column header
        if (records.empty()) throw ConfigError("run csv: row before any group header");
        std::istringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() != 13) throw ConfigError("run csv: expected 13 columns");
        StepRecord s;
        try {
            s.step = std::stoi(cells[2]);
            s.bound_m = std::stod(cells[3]);
            s.rmse_m = std::stod(cells[4]);
            s.trials_used = std::stoi(cells[5]);
            s.diverged = std::stoi(cells[6]);
            s.traffic.sensor_messages = std::stoll(cells[7]);
            s.traffic.sensor_bits = std::stoll(cells[8]);
            s.traffic.fim_matrices = std::stoll(cells[9]);
            s.traffic.fusion_matrices = std::stoll(cells[10]);
            s.traffic.fusion_vectors = std::stoll(cells[11]);
            s.traffic.consensus_rounds = std::stoll(cells[12]);
        } catch (const std::exception&) {
            throw ConfigError("run csv: malformed row '" + line + "'");
        }
        records.back().steps.push_back(s);
    }
    if (!schema_seen) throw ConfigError("run csv: missing schema line");
    return records;
}

// Per-iteration payload table for each record, with the factor-two FIM
// payload comparison against the modeled auxiliary-FIM scheme.
inline void report_ledger(std::ostream& out, const std::vector<RunRecord>& records) {
    for (const auto& r : records) {
        out << "# ledger mode=" << r.mode_label << " bits=" << r.bits << "\n";
        out << "step,sensor_msgs,sensor_bits,fim_matrices_cq,fim_matrices_aux,fusion_matrices,"
               "fusion_vectors,consensus_rounds\n";
        if (r.steps.empty()) continue;

        const CommLedger cq = r.ledger();
        const CommLedger aux = model_aux_ledger(cq);
        for (std::size_t k = 0; k < cq.steps.size(); ++k) {
            const auto& t = cq.steps[k];
            out << r.steps[k].step << ',' << t.sensor_messages << ',' << t.sensor_bits << ','
                << t.fim_matrices << ',' << aux.steps[k].fim_matrices << ','
                << t.fusion_matrices << ',' << t.fusion_vectors << ',' << t.consensus_rounds
                << "\n";
        }
        const StepTraffic total = cq.totals();
        out << "total," << total.sensor_messages << ',' << total.sensor_bits << ','
            << total.fim_matrices << ',' << aux.totals().fim_matrices << ','
            << total.fusion_matrices << ',' << total.fusion_vectors << ','
            << total.consensus_rounds << "\n";

        if (total.fim_matrices > 0) {
            const double ratio = ledger_compare(cq, aux);
            if (ratio != 2.0)
                throw NumericalError("report_ledger: FIM payload ratio is not 2.0");
            out << "# fim_payload_ratio_aux_over_cq=" << harness_detail::fmt_double(ratio) << "\n";
        } else {
            out << "# no node->node FIM traffic (centralized run)\n";
        }
        if (total.sensor_messages > 0)
            out << "# bits_per_observation="
                << harness_detail::fmt_double(static_cast<double>(total.sensor_bits) /
                                              static_cast<double>(total.sensor_messages))
                << "\n";
    }
}

}  // namespace cqbound
