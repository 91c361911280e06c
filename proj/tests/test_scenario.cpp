#include "catch_amalgamated.hpp"

#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <numbers>
#include <sstream>

#include "qreadout/scenario.hpp"

using namespace qreadout;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("qreadout_test_" + tag);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string strip_timestamp(std::string text) {
    return std::regex_replace(text, std::regex("\"timestamp\": \"[^\"]*\""),
                              "\"timestamp\": \"X\"");
}

}  // namespace

TEST_CASE("config parsing") {
    SECTION("all keys load and override the defaults") {
        ScenarioConfig cfg;
        std::istringstream in(
            "# comment line\n"
            "q0.t1_us = 30\n"
            "pair.j_ghz = 0.010\n"
            "readout.sigma_v = 0.25\n"
            "readout.correlated_flip = 0.05\n"
            "shots = 500\n"
            "repetitions = 3\n"
            "seed = 99\n"
            "condosc.theta_deg = 180\n");
        load_config(in, cfg);
        REQUIRE(cfg.device.q0.t1_us == Catch::Approx(30.0));
        REQUIRE(cfg.device.j_ghz == Catch::Approx(0.010));
        REQUIRE(cfg.n_shots == 500);
        REQUIRE(cfg.repetitions == 3);
        REQUIRE(cfg.seed == 99);
        REQUIRE(cfg.condosc_theta_deg == Catch::Approx(180.0));
        const ReadoutModel m = cfg.resolved_readout();  // custom mode applies overrides
        REQUIRE(m.qubit[0].sigma_v == Catch::Approx(0.25));
        REQUIRE(m.correlated_flip_probability == Catch::Approx(0.05));
    }
    SECTION("unknown keys and malformed lines carry line numbers") {
        auto expect_line = [](const std::string& text, std::size_t line) {
            ScenarioConfig cfg;
            std::istringstream in(text);
            try {
                load_config(in, cfg);
                FAIL("expected ParseError");
            } catch (const ParseError& e) {
                REQUIRE(e.line() == line);
            }
        };
        expect_line("shots = 100\nq9.t1_us = 3\n", 2);
        expect_line("shots = abc\n", 1);
        expect_line("shots 100\n", 1);
        expect_line("seed = -4\n", 1);
    }
    SECTION("missing file") {
        ScenarioConfig cfg;
        REQUIRE_THROWS_AS(load_config_file("/nonexistent/qreadout.cfg", cfg), ParseError);
    }
    SECTION("bundled sample config loads cleanly") {
        const fs::path sample = fs::path(__FILE__).parent_path().parent_path() / "data" /
                                "default_config.cfg";
        ScenarioConfig cfg;
        load_config_file(sample.string(), cfg);
        REQUIRE(cfg.n_shots == 760);
        cfg.validate();
    }
}

TEST_CASE("noise modes") {
    ScenarioConfig cfg;
    cfg.readout.sigma_v = 0.2;
    cfg.noise_mode = NoiseMode::Off;
    REQUIRE(cfg.resolved_readout().qubit[0].decay_probability == 0.0);
    cfg.noise_mode = NoiseMode::Default;
    REQUIRE(cfg.resolved_readout().qubit[0].sigma_v == Catch::Approx(0.5));
    cfg.noise_mode = NoiseMode::Custom;
    REQUIRE(cfg.resolved_readout().qubit[0].sigma_v == Catch::Approx(0.2));
}

TEST_CASE("config hash tracks effective settings") {
    ScenarioConfig a, b;
    REQUIRE(config_hash(a) == config_hash(b));
    b.seed = 2;
    REQUIRE(config_hash(a) != config_hash(b));
}

TEST_CASE("scenario gate lists") {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::SingleQubit;
    REQUIRE(scenario_gates(cfg).size() == 3);
    cfg.scenario = Scenario::Bell;
    REQUIRE(scenario_gates(cfg).size() == 2);
    cfg.scenario = Scenario::Init;
    REQUIRE(scenario_gates(cfg).empty());

    cfg.scenario = Scenario::SingleQubit;
    cfg.circuit_file = "/nonexistent/circuit.txt";
    REQUIRE_THROWS_AS(scenario_gates(cfg), ParseError);

    const fs::path bundled = fs::path(__FILE__).parent_path().parent_path() / "data" /
                             "single_qubit_circuit.txt";
    cfg.circuit_file = bundled.string();
    const auto gates = scenario_gates(cfg);
    REQUIRE(gates.size() == 3);
    REQUIRE(gates[0].kind == GateKind::H);
}

TEST_CASE("bell scenario with noiseless readout") {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::Bell;
    cfg.noise_mode = NoiseMode::Off;
    cfg.n_shots = 760;
    cfg.repetitions = 2;
    cfg.seed = 17;
    const RunReport report = run_circuit_scenario(cfg);

    REQUIRE(report.basis == std::vector<std::string>{"00", "01", "10", "11"});
    // ideal matrix rows carry the maximally entangled patterns
    REQUIRE(report.ideal.at(0, 0) == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(report.ideal.at(0, 3) == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(report.ideal.at(1, 1) == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(report.ideal.at(1, 2) == Catch::Approx(0.5).margin(1e-12));

    for (std::size_t r = 0; r < 4; ++r) {
        REQUIRE(report.fidelity_agg.multiplied_mean[r] == Catch::Approx(0.5).margin(0.03));
        REQUIRE(report.fidelity_agg.conditional_mean[r] >= 0.97);
        REQUIRE(report.fidelity_agg.advantage_abs[r] > 0.4);
    }
    // conditional matrix keeps the correlations
    for (int r = 0; r < 4; ++r) {
        const auto row = report.repetitions[0].conditional.row(r);
        double corner_mass = 0.0;
        for (int c = 0; c < 4; ++c)
            if (report.ideal.at(r, c) > 0.0) corner_mass += row[static_cast<std::size_t>(c)];
        REQUIRE(corner_mass == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("init scenario structure under default noise") {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::Init;
    cfg.noise_mode = NoiseMode::Default;
    cfg.n_shots = 760;
    cfg.repetitions = 3;
    cfg.seed = 23;
    const RunReport report = run_circuit_scenario(cfg);

    // diagonal dominance everywhere, worst diagonal when the control starts excited
    double worst = 2.0;
    int worst_row = -1;
    for (int r = 0; r < 4; ++r) {
        const double diag = report.conditional_agg.mean[static_cast<std::size_t>(r * 4 + r)];
        for (int c = 0; c < 4; ++c)
            if (c != r)
                REQUIRE(diag > report.conditional_agg.mean[static_cast<std::size_t>(r * 4 + c)]);
        if (diag < worst) {
            worst = diag;
            worst_row = r;
        }
    }
    REQUIRE(worst_row >= 2);  // rows 10 and 11 start with the control excited
    REQUIRE(report.conditional_agg.mean[0] > 0.6);
    REQUIRE(report.conditional_agg.mean[5] > 0.6);
}

TEST_CASE("semi-dispersion is zero for a single repetition and non-negative otherwise") {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::Cnot;
    cfg.n_shots = 120;
    cfg.repetitions = 1;
    cfg.seed = 5;
    const RunReport single = run_circuit_scenario(cfg);
    for (double v : single.conditional_agg.semi_dispersion) REQUIRE(v == 0.0);
    for (double v : single.fidelity_agg.conditional_semi) REQUIRE(v == 0.0);

    cfg.repetitions = 4;
    const RunReport multi = run_circuit_scenario(cfg);
    bool any_positive = false;
    for (double v : multi.conditional_agg.semi_dispersion) {
        REQUIRE(v >= 0.0);
        any_positive = any_positive || v > 0.0;
    }
    REQUIRE(any_positive);
}

TEST_CASE("emit_outputs writes the documented file set") {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::Bell;
    cfg.n_shots = 60;
    cfg.repetitions = 2;
    cfg.seed = 11;

    SECTION("default file set") {
        const fs::path dir = temp_dir("emit");
        const auto manifest = emit_outputs(run_scenario(cfg), dir);
        std::set<std::string> names;
        for (const std::string& path : manifest) names.insert(fs::path(path).filename().string());
        REQUIRE(names == std::set<std::string>{"report.json", "matrix_ideal.csv",
                                               "matrix_multiplied.csv", "matrix_conditional.csv",
                                               "fidelity_table.csv"});
        for (const std::string& path : manifest) {
            REQUIRE(fs::exists(path));
            REQUIRE(fs::file_size(path) > 0);
        }
        fs::remove_all(dir);
    }
    SECTION("a report without repetitions is rejected before any file is written") {
        ScenarioResult empty = run_scenario(cfg);
        empty.circuit_report->repetitions.clear();
        const fs::path dir = temp_dir("emit_empty");
        REQUIRE_THROWS_AS(emit_outputs(empty, dir), ArgumentError);
        REQUIRE_FALSE(fs::exists(dir / "report.json"));
        fs::remove_all(dir);
    }
    SECTION("shot dumps are opt-in") {
        cfg.dump_shots = true;
        const fs::path dir = temp_dir("emit_dump");
        const auto manifest = emit_outputs(run_scenario(cfg), dir);
        std::set<std::string> names;
        for (const std::string& path : manifest) names.insert(fs::path(path).filename().string());
        REQUIRE(names.count("shots_rep0.csv") == 1);
        REQUIRE(names.count("shots_rep1.csv") == 1);
        REQUIRE(names.size() == 7);
        fs::remove_all(dir);
    }
}

TEST_CASE("identical seeds give byte-identical reports up to the timestamp") {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::Bell;
    cfg.n_shots = 200;
    cfg.repetitions = 2;
    cfg.seed = 31;

    const ScenarioResult run_a = run_scenario(cfg);
    const ScenarioResult run_b = run_scenario(cfg);
    REQUIRE(run_a.report.dump() == run_b.report.dump());  // timestamp-free payloads

    const fs::path dir_a = temp_dir("det_a"), dir_b = temp_dir("det_b");
    emit_outputs(run_a, dir_a);
    emit_outputs(run_b, dir_b);
    REQUIRE(strip_timestamp(slurp(dir_a / "report.json")) ==
            strip_timestamp(slurp(dir_b / "report.json")));
    REQUIRE(slurp(dir_a / "fidelity_table.csv") == slurp(dir_b / "fidelity_table.csv"));

    cfg.seed = 32;
    const ScenarioResult run_c = run_scenario(cfg);
    REQUIRE(run_a.report.dump() != run_c.report.dump());
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("chevron scenario") {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::Chevron;
    cfg.chevron_detuning_steps = 11;
    cfg.chevron_duration_steps = 21;
    const ScenarioResult result = run_scenario(cfg);
    REQUIRE(result.report["first_full_transfer_ns"].get<double>() ==
            Catch::Approx(14.7314).margin(1e-3));
    REQUIRE(result.tables.size() == 1);
    // header + one row per grid point
    REQUIRE(std::count(result.tables[0].content.begin(), result.tables[0].content.end(), '\n') ==
            1 + 11 * 21);
}

TEST_CASE("alc-fit scenario recovers the planted coupling") {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::AlcFit;
    cfg.seed = 12;
    const ScenarioResult result = run_scenario(cfg);
    const double j_mhz = result.report["fit"]["j_mhz"].get<double>();
    REQUIRE(j_mhz == Catch::Approx(12.0).margin(2.0));
    REQUIRE(result.report["planted"]["j_ghz"].get<double>() == Catch::Approx(0.012));

    // external dataset path: write the synthetic table and fit it back
    const fs::path dir = temp_dir("alc");
    fs::create_directories(dir);
    for (const CsvTable& table : result.tables) {
        if (table.filename == "alc_data.csv") {
            std::ofstream out(dir / "data.csv");
            out << table.content;
        }
    }
    ScenarioConfig file_cfg = cfg;
    file_cfg.alc_data_file = (dir / "data.csv").string();
    const ScenarioResult from_file = run_scenario(file_cfg);
    REQUIRE(from_file.report["fit"]["j_mhz"].get<double>() == Catch::Approx(j_mhz).margin(1e-6));
    REQUIRE_FALSE(from_file.report.contains("planted"));
    fs::remove_all(dir);
}

TEST_CASE("cond-osc scenario extracts the planted phase and leakage") {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::CondOsc;
    cfg.seed = 13;
    const ScenarioResult result = run_scenario(cfg);
    REQUIRE(result.report["extracted"]["theta_2q_deg"].get<double>() ==
            Catch::Approx(191.0).margin(1.0));
    REQUIRE(result.report["extracted"]["leakage_mv"].get<double>() ==
            Catch::Approx(9.66).margin(0.5));
}

TEST_CASE("cond-osc accepts measured fringe files") {
    // write On/Off fringes with a planted 120 degree shift and re-analyze them
    const fs::path dir = temp_dir("fringes");
    fs::create_directories(dir);
    for (const std::string which : {"on", "off"}) {
        std::ofstream out(dir / (which + ".csv"));
        out.precision(17);
        out << "phase_rad,target_v,control_v\n";
        const double shift = which == "on" ? 120.0 * std::numbers::pi / 180.0 : 0.0;
        for (int i = 0; i < 36; ++i) {
            const double phi = 2.0 * std::numbers::pi * i / 36.0;
            out << phi << ',' << 10.0 * std::cos(phi + shift) << ','
                << (which == "on" ? 5.5 : 2.0) + std::cos(phi) << "\n";
        }
    }
    ScenarioConfig cfg;
    cfg.scenario = Scenario::CondOsc;
    cfg.condosc_on_file = (dir / "on.csv").string();
    cfg.condosc_off_file = (dir / "off.csv").string();
    const ScenarioResult result = run_scenario(cfg);
    REQUIRE(result.report["extracted"]["theta_2q_deg"].get<double>() ==
            Catch::Approx(120.0).margin(1e-6));
    REQUIRE(result.report["extracted"]["leakage_mv"].get<double>() ==
            Catch::Approx(3.5).margin(1e-6));
    REQUIRE_FALSE(result.report.contains("planted"));

    cfg.condosc_off_file.clear();
    REQUIRE_THROWS_AS(run_scenario(cfg), ParseError);
    fs::remove_all(dir);
}

TEST_CASE("calibrate scenario") {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::Calibrate;
    cfg.noise_mode = NoiseMode::Off;
    cfg.n_shots = 200;
    cfg.seed = 14;
    const ScenarioResult result = run_scenario(cfg);
    const auto q0 = result.report["aggregate"]["q0"]["mean"];
    REQUIRE(q0[0][0].get<double>() == 1.0);
    REQUIRE(q0[1][1].get<double>() == 1.0);
    const auto combined = result.report["aggregate"]["combined"]["mean"];
    REQUIRE(combined[2][2].get<double>() == 1.0);
    REQUIRE(result.report["repetitions"][0]["thresholds"]["q0"].contains("iq_intercept"));
}

TEST_CASE("compare_reports") {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::Bell;
    cfg.n_shots = 150;
    cfg.repetitions = 2;
    cfg.seed = 41;
    const ScenarioResult a = run_scenario(cfg);
    cfg.seed = 42;
    const ScenarioResult b = run_scenario(cfg);

    SECTION("a report against itself has zero deltas") {
        const std::string table = compare_reports(a.report, a.report);
        REQUIRE(table.find("+0.000000") != std::string::npos);
        REQUIRE(table.find("00") != std::string::npos);
    }
    SECTION("different seeds produce a table without throwing") {
        const std::string table = compare_reports(a.report, b.report);
        REQUIRE(table.find("state") != std::string::npos);
    }
    SECTION("the conditional advantage is positive on every Bell row") {
        for (const auto& row : a.report["aggregate"]["fidelity"])
            REQUIRE(row["advantage_abs"].get<double>() > 0.0);
    }
    SECTION("scenario mismatch is rejected") {
        ScenarioConfig other = cfg;
        other.scenario = Scenario::Cnot;
        const ScenarioResult c = run_scenario(other);
        REQUIRE_THROWS_AS(compare_reports(a.report, c.report), ArgumentError);
    }
}
