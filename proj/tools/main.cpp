// cqbound: conditional distributed PCRLB simulator for quantized
// decentralized sensor networks.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cqbound/cqbound.hpp"

namespace {

using namespace cqbound;

ScenarioConfig load_or_default(const std::string& config_path) {
    if (config_path.empty()) return ScenarioConfig::desk_default();
    return load_config_file(config_path);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file '" + path + "'");
    return out;
}

std::vector<int> parse_bits_list(const std::string& csv) {
    std::vector<int> bits;
    std::istringstream in(csv);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (tok.empty()) continue;
        try {
            bits.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw ConfigError("bad bit depth '" + tok + "'");
        }
    }
    if (bits.empty()) throw ConfigError("empty bit list");
    return bits;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional distributed PCRLB (CQ/dPCRLB) simulator"};
    app.require_subcommand(1);

    std::string config_path, out_path, in_path, mode_str, bits_csv = "4,5,6,7,8";
    std::optional<int> bits_override;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> trials_override, steps_override;

    auto* run = app.add_subcommand("run", "run one scenario and write the per-step CSV");
    run->add_option("--config", config_path, "scenario JSON (defaults to the built-in scenario)");
    run->add_option("--mode", mode_str, "raw|quantized|centralized_raw|centralized_quantized");
    run->add_option("--bits", bits_override, "quantizer bit depth override");
    run->add_option("--seed", seed_override, "master seed override");
    run->add_option("--trials", trials_override, "trial count override");
    run->add_option("--steps", steps_override, "step count override");
    run->add_option("--out", out_path, "output CSV path")->required();

    auto* sweep = app.add_subcommand("sweep-bits", "run a bit-depth sweep plus the raw baseline");
    sweep->add_option("--config", config_path, "scenario JSON");
    sweep->add_option("--bits", bits_csv, "comma-separated bit depths");
    sweep->add_option("--seed", seed_override, "master seed override");
    sweep->add_option("--trials", trials_override, "trial count override");
    sweep->add_option("--steps", steps_override, "step count override");
    sweep->add_option("--out", out_path, "output CSV path")->required();

    auto* topo = app.add_subcommand("topology", "dump the sensor/node layout as CSV");
    topo->add_option("--config", config_path, "scenario JSON");
    topo->add_option("--out", out_path, "output CSV path")->required();

    auto* ledger = app.add_subcommand("ledger", "communication report from a run CSV");
    ledger->add_option("--in", in_path, "run CSV produced by `run` or `sweep-bits`")->required();
    ledger->add_option("--out", out_path, "write the report here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        ScenarioConfig config = load_or_default(config_path);
        if (seed_override) config.seed = *seed_override;
        if (trials_override) config.trials = *trials_override;
        if (steps_override) config.steps = *steps_override;
        if (bits_override) config.bits = *bits_override;
        if (!mode_str.empty()) config.mode = mode_from_string(mode_str);
        config.validate();

        if (run->parsed()) {
            const RunRecord record = run_scenario(config);
            auto out = open_out(out_path);
            write_run_csv(out, {record});
            std::cerr << "wrote " << out_path << " (" << record.trials_used << "/"
                      << record.trials_requested << " trials, " << record.diverged
                      << " diverged)\n";
        } else if (sweep->parsed()) {
            const auto records = sweep_bits(config, parse_bits_list(bits_csv));
            auto out = open_out(out_path);
            write_run_csv(out, records);
            std::cerr << "wrote " << out_path << " (" << records.size() << " curves)\n";
        } else if (topo->parsed()) {
            const Topology topology = build_grid_topology(config.topology);
            auto out = open_out(out_path);
            write_topology_csv(out, topology);
            std::cerr << "wrote " << out_path << " (" << topology.sensor_count() << " sensors, "
                      << topology.node_count() << " nodes)\n";
        } else if (ledger->parsed()) {
            std::ifstream in(in_path);
            if (!in) throw ConfigError("cannot open '" + in_path + "'");
            const auto records = read_run_csv(in);
            if (out_path.empty()) {
                report_ledger(std::cout, records);
            } else {
                auto out = open_out(out_path);
                report_ledger(out, records);
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
