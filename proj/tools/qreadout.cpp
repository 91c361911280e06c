// Batch driver for the two-qubit readout laboratory: runs named scenarios
// end to end and writes machine-readable reports.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qreadout/scenario.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitRuntime = 4;

struct CliOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    int shots = 0;
    int reps = 0;
    bool dump_shots = false;
    std::string noise;
    std::string circuit;
};

void add_common_options(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--config", opt.config_path, "key-value config file");
    cmd->add_option("--seed", opt.seed, "master RNG seed")->capture_default_str();
    cmd->add_option("--out", opt.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--shots", opt.shots, "shots per prepared state (default 760)");
    cmd->add_option("--reps", opt.reps, "repetitions (default per scenario)");
    cmd->add_flag("--dump-shots", opt.dump_shots, "also write shots_rep<k>.csv");
    cmd->add_option("--noise", opt.noise, "readout noise: off, default or custom")
        ->check(CLI::IsMember({"off", "default", "custom"}));
    cmd->add_option("--circuit", opt.circuit, "gate file for the single-qubit scenario");
}

qreadout::ScenarioConfig build_config(qreadout::Scenario scenario, const CLI::App* cmd,
                                      const CliOptions& opt) {
    qreadout::ScenarioConfig cfg;
    cfg.scenario = scenario;
    if (!opt.config_path.empty()) qreadout::load_config_file(opt.config_path, cfg);
    // explicit flags override the config file
    if (cmd->count("--seed") > 0) cfg.seed = opt.seed;
    if (cmd->count("--shots") > 0) cfg.n_shots = opt.shots;
    if (cmd->count("--reps") > 0) cfg.repetitions = opt.reps;
    if (cmd->count("--dump-shots") > 0) cfg.dump_shots = true;
    if (cmd->count("--noise") > 0) cfg.noise_mode = qreadout::noise_mode_from_name(opt.noise);
    if (cmd->count("--circuit") > 0) cfg.circuit_file = opt.circuit;
    return cfg;
}

int run_one(qreadout::Scenario scenario, const CLI::App* cmd, const CliOptions& opt) {
    const qreadout::ScenarioConfig cfg = build_config(scenario, cmd, opt);
    const qreadout::ScenarioResult result = qreadout::run_scenario(cfg);
    const std::vector<std::string> manifest = qreadout::emit_outputs(result, opt.out_dir);
    for (const std::string& path : manifest) std::cout << path << "\n";
    return 0;
}

nlohmann::ordered_json load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw qreadout::IoError("cannot open report '" + path + "'");
    try {
        return nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw qreadout::ParseError(path + ": " + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-qubit gate circuit simulator with single-shot readout analysis"};
    app.require_subcommand(1);

    CliOptions opt;
    std::vector<std::pair<qreadout::Scenario, CLI::App*>> scenario_cmds;
    for (const auto& [scenario, name] : qreadout::scenario_names()) {
        std::string help;
        switch (scenario) {
            case qreadout::Scenario::Calibrate:
                help = "single-shot readout calibration of both qubits";
                break;
            case qreadout::Scenario::Init:
                help = "basis-state initialization matrix";
                break;
            case qreadout::Scenario::SingleQubit:
                help = "random single-qubit gate circuit";
                break;
            case qreadout::Scenario::Cnot:
                help = "CNOT circuit over the four basis states";
                break;
            case qreadout::Scenario::Bell:
                help = "Bell circuit over the four basis states";
                break;
            case qreadout::Scenario::Chevron:
                help = "two-level exchange population map";
                break;
            case qreadout::Scenario::AlcFit:
                help = "avoided-level-crossing coupling fit";
                break;
            case qreadout::Scenario::CondOsc:
                help = "conditional-oscillation phase and leakage extraction";
                break;
        }
        CLI::App* cmd = app.add_subcommand(name, help);
        add_common_options(cmd, opt);
        scenario_cmds.emplace_back(scenario, cmd);
    }

    std::string report_a, report_b;
    CLI::App* compare = app.add_subcommand("compare", "per-state fidelity deltas of two reports");
    compare->add_option("report_a", report_a, "first report.json")->required();
    compare->add_option("report_b", report_b, "second report.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (compare->parsed()) {
            std::cout << qreadout::compare_reports(load_report(report_a), load_report(report_b));
            return 0;
        }
        for (const auto& [scenario, cmd] : scenario_cmds) {
            if (cmd->parsed()) return run_one(scenario, cmd, opt);
        }
        std::cerr << "no scenario selected\n";
        return kExitUsage;
    } catch (const qreadout::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
