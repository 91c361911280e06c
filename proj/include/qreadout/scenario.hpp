#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

#include "qreadout/analysis.hpp"
#include "qreadout/circuit.hpp"
#include "qreadout/device.hpp"
#include "qreadout/errors.hpp"
#include "qreadout/io_util.hpp"
#include "qreadout/readout_sim.hpp"
#include "qreadout/rng.hpp"

namespace qreadout {

using json = nlohmann::ordered_json;

enum class Scenario { Calibrate, Init, SingleQubit, Cnot, Bell, Chevron, AlcFit, CondOsc };

inline const std::vector<std::pair<Scenario, std::string>>& scenario_names() {
    static const std::vector<std::pair<Scenario, std::string>> names = {
        {Scenario::Calibrate, "calibrate"}, {Scenario::Init, "init"},
        {Scenario::SingleQubit, "single-qubit"}, {Scenario::Cnot, "cnot"},
        {Scenario::Bell, "bell"}, {Scenario::Chevron, "chevron"},
        {Scenario::AlcFit, "alc-fit"}, {Scenario::CondOsc, "cond-osc"}};
    return names;
}

inline std::string scenario_name(Scenario s) {
    for (const auto& [sc, name] : scenario_names())
        if (sc == s) return name;
    throw ArgumentError("unknown scenario");
}

inline Scenario scenario_from_name(const std::string& name) {
    for (const auto& [sc, n] : scenario_names())
        if (n == name) return sc;
    throw ArgumentError("unknown scenario '" + name + "'");
}

enum class NoiseMode { Off, Default, Custom };

inline std::string noise_mode_name(NoiseMode m) {
    switch (m) {
        case NoiseMode::Off: return "off";
        case NoiseMode::Default: return "default";
        case NoiseMode::Custom: return "custom";
    }
    throw ArgumentError("unknown noise mode");
}

inline NoiseMode noise_mode_from_name(const std::string& name) {
    if (name == "off") return NoiseMode::Off;
    if (name == "default") return NoiseMode::Default;
    if (name == "custom") return NoiseMode::Custom;
    throw ArgumentError("noise mode must be off, default or custom");
}

/// Config-file adjustments applied on top of the default readout model when
/// the noise mode is `custom`.
struct ReadoutOverrides {
    std::optional<double> sigma_v;
    std::array<std::optional<double>, 2> sigma_qubit;
    std::array<std::optional<double>, 2> angle_deg;
    std::array<std::optional<double>, 2> decay;
    std::array<std::optional<double>, 2> excitation;
    std::optional<double> correlated_flip;
};

struct ScenarioConfig {
    Scenario scenario = Scenario::Bell;
    DeviceParams device = DeviceParams::defaults();
    NoiseMode noise_mode = NoiseMode::Custom;
    ReadoutOverrides readout;
    int n_shots = 760;
    int repetitions = 0;  // 0 picks the scenario default
    std::uint64_t seed = 1;
    bool dump_shots = false;
    std::string circuit_file;  // single-qubit gate assignment override

    // synthetic-dataset knobs for the physics scenarios
    std::string alc_data_file;
    double alc_noise_mhz = 0.5;
    int alc_points_per_branch = 21;
    double alc_span_ghz = 0.08;
    double chevron_detuning_span_ghz = 0.08;
    int chevron_detuning_steps = 41;
    double chevron_max_duration_ns = 120.0;
    int chevron_duration_steps = 61;
    double condosc_theta_deg = 191.0;
    double condosc_leakage_mv = 9.66;
    int condosc_points = 48;
    double condosc_noise_mv = 0.2;
    std::string condosc_on_file;   // measured fringe CSVs override the synthesis
    std::string condosc_off_file;

    int resolved_repetitions() const {
        if (repetitions > 0) return repetitions;
        switch (scenario) {
            case Scenario::Init:
            case Scenario::SingleQubit:
            case Scenario::Cnot:
                return 10;
            case Scenario::Bell:
                return 5;
            default:
                return 1;
        }
    }

    ReadoutModel resolved_readout() const {
        if (noise_mode == NoiseMode::Off) return ReadoutModel::noiseless(device);
        ReadoutModel m = ReadoutModel::defaults(device);
        if (noise_mode == NoiseMode::Default) return m;
        if (readout.sigma_v) m.qubit[0].sigma_v = m.qubit[1].sigma_v = *readout.sigma_v;
        for (int q = 0; q < 2; ++q) {
            auto& qm = m.qubit[static_cast<std::size_t>(q)];
            const auto& ov = readout;
            const auto idx = static_cast<std::size_t>(q);
            if (ov.sigma_qubit[idx]) qm.sigma_v = *ov.sigma_qubit[idx];
            if (ov.decay[idx]) qm.decay_probability = *ov.decay[idx];
            if (ov.excitation[idx]) qm.excitation_probability = *ov.excitation[idx];
            if (ov.angle_deg[idx]) qm.rotate_blobs(*ov.angle_deg[idx] * std::numbers::pi / 180.0);
        }
        if (readout.correlated_flip) m.correlated_flip_probability = *readout.correlated_flip;
        return m;
    }

    void validate() const {
        device.validate();
        resolved_readout().validate();
        if (n_shots < 1) throw ArgumentError("shots must be >= 1");
        if (repetitions < 0) throw ArgumentError("repetitions must be >= 1");
        for (int v : {alc_points_per_branch, chevron_detuning_steps, chevron_duration_steps,
                      condosc_points})
            if (v < 3) throw ArgumentError("grid sizes must be >= 3");
    }
};

// --- flat key-value config files ----------------------------------------------

namespace detail {

inline double config_number(const std::string& value, std::size_t line) {
    double out = 0.0;
    if (!parse_double(value, out)) throw ParseError(line, "expected a number, got '" + value + "'");
    return out;
}

inline int config_int(const std::string& value, std::size_t line) {
    int out = 0;
    if (!parse_int(value, out)) throw ParseError(line, "expected an integer, got '" + value + "'");
    return out;
}

inline std::uint64_t config_u64(const std::string& value, std::size_t line) {
    // stoull would happily wrap a negative literal around
    if (!value.empty() && value[0] != '-') {
        try {
            std::size_t pos = 0;
            const std::uint64_t out = std::stoull(value, &pos);
            if (pos == value.size()) return out;
        } catch (const std::exception&) {
        }
    }
    throw ParseError(line, "expected an unsigned integer, got '" + value + "'");
}

inline void apply_config_entry(ScenarioConfig& cfg, const std::string& key,
                               const std::string& value, std::size_t line) {
    auto num = [&] { return config_number(value, line); };
    auto integer = [&] { return config_int(value, line); };

    if (key == "q0.nu01_ghz") cfg.device.q0.nu01_ghz = num();
    else if (key == "q0.ec_ghz") cfg.device.q0.ec_ghz = num();
    else if (key == "q0.t1_us") cfg.device.q0.t1_us = num();
    else if (key == "q0.t2echo_us") cfg.device.q0.t2echo_us = num();
    else if (key == "q2.nu01_ghz") cfg.device.q2.nu01_ghz = num();
    else if (key == "q2.ec_ghz") cfg.device.q2.ec_ghz = num();
    else if (key == "q2.t1_us") cfg.device.q2.t1_us = num();
    else if (key == "q2.t2echo_us") cfg.device.q2.t2echo_us = num();
    else if (key == "pair.j_ghz") cfg.device.j_ghz = num();
    else if (key == "pair.readout_ns") cfg.device.readout_ns = num();
    else if (key == "readout.sigma_v") cfg.readout.sigma_v = num();
    else if (key == "readout.q0.sigma_v") cfg.readout.sigma_qubit[0] = num();
    else if (key == "readout.q2.sigma_v") cfg.readout.sigma_qubit[1] = num();
    else if (key == "readout.q0.angle_deg") cfg.readout.angle_deg[0] = num();
    else if (key == "readout.q2.angle_deg") cfg.readout.angle_deg[1] = num();
    else if (key == "readout.q0.decay") cfg.readout.decay[0] = num();
    else if (key == "readout.q2.decay") cfg.readout.decay[1] = num();
    else if (key == "readout.q0.excitation") cfg.readout.excitation[0] = num();
    else if (key == "readout.q2.excitation") cfg.readout.excitation[1] = num();
    else if (key == "readout.correlated_flip") cfg.readout.correlated_flip = num();
    else if (key == "shots") {
        cfg.n_shots = integer();
        if (cfg.n_shots < 1) throw ParseError(line, "shots must be >= 1");
    } else if (key == "repetitions") {
        cfg.repetitions = integer();
        if (cfg.repetitions < 0) throw ParseError(line, "repetitions must be >= 1");
    }
    else if (key == "seed") cfg.seed = config_u64(value, line);
    else if (key == "circuit") cfg.circuit_file = value;
    else if (key == "alc.data") cfg.alc_data_file = value;
    else if (key == "alc.noise_mhz") cfg.alc_noise_mhz = num();
    else if (key == "alc.points_per_branch") cfg.alc_points_per_branch = integer();
    else if (key == "alc.span_ghz") cfg.alc_span_ghz = num();
    else if (key == "chevron.detuning_span_ghz") cfg.chevron_detuning_span_ghz = num();
    else if (key == "chevron.detuning_steps") cfg.chevron_detuning_steps = integer();
    else if (key == "chevron.max_duration_ns") cfg.chevron_max_duration_ns = num();
    else if (key == "chevron.duration_steps") cfg.chevron_duration_steps = integer();
    else if (key == "condosc.theta_deg") cfg.condosc_theta_deg = num();
    else if (key == "condosc.leakage_mv") cfg.condosc_leakage_mv = num();
    else if (key == "condosc.points") cfg.condosc_points = integer();
    else if (key == "condosc.noise_mv") cfg.condosc_noise_mv = num();
    else if (key == "condosc.on_file") cfg.condosc_on_file = value;
    else if (key == "condosc.off_file") cfg.condosc_off_file = value;
    else throw ParseError(line, "unknown config key '" + key + "'");
}

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace detail

/// Applies `key = value` lines onto `cfg`. Unknown keys and malformed
/// values are reported with their line number.
inline void load_config(std::istream& in, ScenarioConfig& cfg) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string stripped = detail::trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value'");
        const std::string key = detail::trim(stripped.substr(0, eq));
        const std::string value = detail::trim(stripped.substr(eq + 1));
        if (key.empty() || value.empty()) throw ParseError(line_no, "expected 'key = value'");
        detail::apply_config_entry(cfg, key, value, line_no);
    }
}

inline void load_config_file(const std::string& path, ScenarioConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file '" + path + "'");
    try {
        load_config(in, cfg);
    } catch (const ParseError& e) {
        throw ParseError(e.line(), path + ": " + e.message());
    }
}

/// Canonical flat dump of every effective setting; hashing it gives the
/// config fingerprint recorded in reports.
inline std::string canonical_config_text(const ScenarioConfig& cfg) {
    const ReadoutModel m = cfg.resolved_readout();
    std::ostringstream out;
    out << "scenario=" << scenario_name(cfg.scenario) << "\n"
        << "seed=" << cfg.seed << "\n"
        << "shots=" << cfg.n_shots << "\n"
        << "repetitions=" << cfg.resolved_repetitions() << "\n"
        << "noise=" << noise_mode_name(cfg.noise_mode) << "\n";
    out << "q0=" << format_number(cfg.device.q0.nu01_ghz) << ',' << format_number(cfg.device.q0.ec_ghz)
        << ',' << format_number(cfg.device.q0.t1_us) << ',' << format_number(cfg.device.q0.t2echo_us)
        << "\n";
    out << "q2=" << format_number(cfg.device.q2.nu01_ghz) << ',' << format_number(cfg.device.q2.ec_ghz)
        << ',' << format_number(cfg.device.q2.t1_us) << ',' << format_number(cfg.device.q2.t2echo_us)
        << "\n";
    out << "pair=" << format_number(cfg.device.j_ghz) << ',' << format_number(cfg.device.readout_ns)
        << "\n";
    for (int q = 0; q < 2; ++q) {
        const auto& qm = m.qubit[static_cast<std::size_t>(q)];
        out << "readout" << q << '=' << format_number(qm.center0.i_v) << ','
            << format_number(qm.center0.q_v) << ',' << format_number(qm.center1.i_v) << ','
            << format_number(qm.center1.q_v) << ',' << format_number(qm.sigma_v) << ','
            << format_number(qm.decay_probability) << ','
            << format_number(qm.excitation_probability) << "\n";
    }
    out << "correlated_flip=" << format_number(m.correlated_flip_probability) << "\n"
        << "circuit=" << cfg.circuit_file << "\n"
        << "alc=" << cfg.alc_data_file << ',' << format_number(cfg.alc_noise_mhz) << ','
        << cfg.alc_points_per_branch << ',' << format_number(cfg.alc_span_ghz) << "\n"
        << "chevron=" << format_number(cfg.chevron_detuning_span_ghz) << ','
        << cfg.chevron_detuning_steps << ',' << format_number(cfg.chevron_max_duration_ns) << ','
        << cfg.chevron_duration_steps << "\n"
        << "condosc=" << format_number(cfg.condosc_theta_deg) << ','
        << format_number(cfg.condosc_leakage_mv) << ',' << cfg.condosc_points << ','
        << format_number(cfg.condosc_noise_mv) << "\n";
    return out.str();
}

inline std::string config_hash(const ScenarioConfig& cfg) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a(canonical_config_text(cfg))));
    return buf;
}

// --- circuit scenarios -----------------------------------------------------------

/// Built-in assignment of the bundled three-gate random circuit: Hadamard on
/// the control, both x-rotations on the target.
inline std::vector<GateOp> default_single_qubit_gates() {
    using std::numbers::pi;
    return {{GateKind::H, kControlQubit, -1, 0.0},
            {GateKind::RX, kTargetQubit, -1, pi / 4.0},
            {GateKind::RX, kTargetQubit, -1, pi}};
}

inline std::vector<GateOp> scenario_gates(const ScenarioConfig& cfg) {
    switch (cfg.scenario) {
        case Scenario::Init:
            return {};
        case Scenario::Cnot:
            return {{GateKind::CNOT, kControlQubit, kTargetQubit, 0.0}};
        case Scenario::Bell:
            return {{GateKind::H, kControlQubit, -1, 0.0},
                    {GateKind::CNOT, kControlQubit, kTargetQubit, 0.0}};
        case Scenario::SingleQubit: {
            if (cfg.circuit_file.empty()) return default_single_qubit_gates();
            std::ifstream in(cfg.circuit_file);
            if (!in) throw ParseError("cannot open circuit file '" + cfg.circuit_file + "'");
            return parse_circuit(in);
        }
        default:
            throw ArgumentError("scenario has no gate circuit");
    }
}

/// One repetition of a circuit scenario: calibration products plus the three
/// probability matrices and their fidelity table.
struct RepetitionOutcome {
    Threshold threshold_target, threshold_control;
    ProbabilityMatrix single_q0{2}, single_q2{2};
    ProbabilityMatrix multiplied{4}, conditional{4};
    FidelityTable fidelity;
    std::vector<ShotSet> experiment_shots;
};

struct MatrixAggregate {
    int dim = 4;
    std::vector<double> mean, semi_dispersion;  // row-major
};

struct FidelityAggregate {
    std::vector<std::string> states;
    std::vector<double> multiplied_mean, multiplied_semi;
    std::vector<double> conditional_mean, conditional_semi;
    std::vector<double> advantage_abs, advantage_rel;
};

struct RunReport {
    Scenario scenario = Scenario::Bell;
    std::vector<std::string> basis;
    ProbabilityMatrix ideal{4};
    std::vector<RepetitionOutcome> repetitions;
    MatrixAggregate multiplied_agg, conditional_agg;
    FidelityAggregate fidelity_agg;
};

namespace detail {

/// Entry-wise mean and semi-dispersion (max - min)/2 over repetitions.
inline MatrixAggregate aggregate_matrices(const std::vector<const ProbabilityMatrix*>& ms) {
    MatrixAggregate agg;
    agg.dim = ms.front()->dim;
    const std::size_t size = ms.front()->p.size();
    agg.mean.assign(size, 0.0);
    agg.semi_dispersion.assign(size, 0.0);
    for (std::size_t k = 0; k < size; ++k) {
        double lo = ms.front()->p[k], hi = lo, sum = 0.0;
        for (const ProbabilityMatrix* m : ms) {
            const double v = m->p[k];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            sum += v;
        }
        agg.mean[k] = sum / static_cast<double>(ms.size());
        agg.semi_dispersion[k] = (hi - lo) / 2.0;
    }
    return agg;
}

inline FidelityAggregate aggregate_fidelity(const std::vector<RepetitionOutcome>& reps) {
    FidelityAggregate agg;
    const std::size_t rows = reps.front().fidelity.rows.size();
    for (std::size_t r = 0; r < rows; ++r) {
        agg.states.push_back(reps.front().fidelity.rows[r].state);
        double m_lo = 1e300, m_hi = -1e300, m_sum = 0.0;
        double c_lo = 1e300, c_hi = -1e300, c_sum = 0.0;
        for (const RepetitionOutcome& rep : reps) {
            const FidelityRow& row = rep.fidelity.rows[r];
            m_lo = std::min(m_lo, row.multiplied);
            m_hi = std::max(m_hi, row.multiplied);
            m_sum += row.multiplied;
            c_lo = std::min(c_lo, row.conditional);
            c_hi = std::max(c_hi, row.conditional);
            c_sum += row.conditional;
        }
        const double n = static_cast<double>(reps.size());
        const double m_mean = m_sum / n, c_mean = c_sum / n;
        agg.multiplied_mean.push_back(m_mean);
        agg.multiplied_semi.push_back((m_hi - m_lo) / 2.0);
        agg.conditional_mean.push_back(c_mean);
        agg.conditional_semi.push_back((c_hi - c_lo) / 2.0);
        agg.advantage_abs.push_back(c_mean - m_mean);
        agg.advantage_rel.push_back(m_mean > 1e-12 ? (c_mean - m_mean) / m_mean : 0.0);
    }
    return agg;
}

}  // namespace detail

/// Full circuit-scenario pipeline: per repetition, calibrate both qubits,
/// fit thresholds, run the circuit from all four basis states, sample
/// simultaneous shots and score both paradigms against the ideal output.
inline RunReport run_circuit_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    const ReadoutModel model = cfg.resolved_readout();
    const std::vector<GateOp> gates = scenario_gates(cfg);

    RunReport report;
    report.scenario = cfg.scenario;
    report.ideal = ProbabilityMatrix(4);
    std::array<QuantumState, 4> outputs{QuantumState(2), QuantumState(2), QuantumState(2),
                                        QuantumState(2)};
    for (int r = 0; r < 4; ++r) {
        const std::string label = basis_label(static_cast<std::size_t>(r), 2);
        report.basis.push_back(label);
        outputs[static_cast<std::size_t>(r)] = run_circuit(gates, label);
        const ProbabilityVector pv = ideal_probabilities(outputs[static_cast<std::size_t>(r)]);
        for (int c = 0; c < 4; ++c) report.ideal.at(r, c) = pv.entries[static_cast<std::size_t>(c)];
    }

    const int reps = cfg.resolved_repetitions();
    for (int k = 0; k < reps; ++k) {
        RngStream rng = RngStream::derived(cfg.seed, static_cast<std::uint64_t>(k));
        RepetitionOutcome rep;

        std::array<std::array<ShotSet, 2>, 2> cal;  // [qubit][prepared]
        for (int q = 0; q < 2; ++q)
            for (int prepared = 0; prepared < 2; ++prepared)
                cal[static_cast<std::size_t>(q)][static_cast<std::size_t>(prepared)] =
                    calibration_run(q, prepared, cfg.n_shots, model, rng, cfg.seed);
        rep.threshold_target = fit_threshold(cal[0][0], cal[0][1]);
        rep.threshold_control = fit_threshold(cal[1][0], cal[1][1]);
        rep.single_q0 = single_qubit_matrix(cal[0][0], cal[0][1], rep.threshold_target);
        rep.single_q2 = single_qubit_matrix(cal[1][0], cal[1][1], rep.threshold_control);

        std::vector<ShotSet> experiments;
        for (int r = 0; r < 4; ++r)
            experiments.push_back(experiment_run(outputs[static_cast<std::size_t>(r)], cfg.n_shots,
                                                 model, rng,
                                                 basis_label(static_cast<std::size_t>(r), 2),
                                                 cfg.seed));
        rep.conditional = conditional_paradigm(experiments, rep.threshold_target,
                                               rep.threshold_control);
        rep.multiplied = multiplied_from_shots(experiments, rep.threshold_target,
                                               rep.threshold_control);
        rep.fidelity = paradigm_report(report.ideal, rep.multiplied, rep.conditional);
        rep.experiment_shots = std::move(experiments);
        report.repetitions.push_back(std::move(rep));
    }

    std::vector<const ProbabilityMatrix*> mult, cond;
    for (const RepetitionOutcome& rep : report.repetitions) {
        mult.push_back(&rep.multiplied);
        cond.push_back(&rep.conditional);
    }
    report.multiplied_agg = detail::aggregate_matrices(mult);
    report.conditional_agg = detail::aggregate_matrices(cond);
    report.fidelity_agg = detail::aggregate_fidelity(report.repetitions);
    return report;
}

// --- synthetic datasets for the physics scenarios ---------------------------------

inline ALCDataset synthetic_alc_dataset(double nu_fixed_ghz, double j_ghz, double span_ghz,
                                        int points_per_branch, double noise_ghz, RngStream& rng) {
    ALCDataset data;
    for (int i = 0; i < points_per_branch; ++i) {
        const double x = nu_fixed_ghz - span_ghz +
                         2.0 * span_ghz * static_cast<double>(i) /
                             static_cast<double>(points_per_branch - 1);
        const auto [upper, lower] = dressed_frequencies(x, nu_fixed_ghz, j_ghz);
        data.points.push_back({x, upper + noise_ghz * rng.normal(), Branch::Upper});
        data.points.push_back({x, lower + noise_ghz * rng.normal(), Branch::Lower});
    }
    return data;
}

/// On/Off oscillation pair with a planted phase shift (degrees) between the
/// target fringes and a planted offset difference on the control channel.
/// Voltages are in millivolts.
inline std::pair<FringeScan, FringeScan> synthetic_fringes(double theta_deg, double leakage_mv,
                                                           int points, double noise_mv,
                                                           RngStream& rng) {
    constexpr double kTargetAmp = 50.0, kOffPhase = 0.4;
    constexpr double kControlAmp = 2.0, kControlPhase = 0.3, kControlOffset = 100.0;
    const double theta_rad = theta_deg * std::numbers::pi / 180.0;
    FringeScan on, off;
    for (int i = 0; i < points; ++i) {
        const double phi = 2.0 * std::numbers::pi * static_cast<double>(i) /
                           static_cast<double>(points);
        off.phase_rad.push_back(phi);
        on.phase_rad.push_back(phi);
        off.target_v.push_back(kTargetAmp * std::cos(phi + kOffPhase) + noise_mv * rng.normal());
        on.target_v.push_back(kTargetAmp * std::cos(phi + kOffPhase + theta_rad) +
                              noise_mv * rng.normal());
        off.control_v.push_back(kControlAmp * std::cos(phi + kControlPhase) + kControlOffset +
                                noise_mv * rng.normal());
        on.control_v.push_back(kControlAmp * std::cos(phi + kControlPhase) + kControlOffset +
                               leakage_mv + noise_mv * rng.normal());
    }
    return {std::move(on), std::move(off)};
}

// --- report assembly and output files ------------------------------------------

struct CsvTable {
    std::string filename;
    std::string content;
};

struct ScenarioResult {
    Scenario scenario = Scenario::Bell;
    json report;
    std::vector<CsvTable> tables;
    std::optional<RunReport> circuit_report;
};

namespace detail {

inline json json_number(double v) { return round_for_output(v); }

inline json matrix_to_json(const std::vector<double>& values, int dim) {
    json rows = json::array();
    for (int i = 0; i < dim; ++i) {
        json row = json::array();
        for (int j = 0; j < dim; ++j)
            row.push_back(json_number(values[static_cast<std::size_t>(i) * dim + j]));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json matrix_to_json(const ProbabilityMatrix& m) { return matrix_to_json(m.p, m.dim); }

inline json threshold_to_json(const Threshold& t) {
    json j;
    j["a"] = json_number(t.a);
    j["b"] = json_number(t.b);
    j["c"] = json_number(t.c);
    if (t.is_iq_representable()) {
        j["iq_intercept"] = json_number(t.iq_intercept());
        j["iq_slope"] = json_number(t.iq_slope());
    }
    return j;
}

inline std::string matrix_csv(const std::vector<double>& values, int dim,
                              const std::vector<std::string>& labels) {
    std::ostringstream out;
    out << "prepared";
    for (const std::string& l : labels) out << ',' << l;
    out << "\n";
    for (int i = 0; i < dim; ++i) {
        out << labels[static_cast<std::size_t>(i)];
        for (int j = 0; j < dim; ++j)
            out << ',' << format_number(values[static_cast<std::size_t>(i) * dim + j]);
        out << "\n";
    }
    return out.str();
}

inline json provenance_json(const ScenarioConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["config_hash"] = config_hash(cfg);
    j["n_shots"] = cfg.n_shots;
    j["repetitions"] = cfg.resolved_repetitions();
    j["noise"] = noise_mode_name(cfg.noise_mode);
    return j;
}

}  // namespace detail

/// JSON payload plus the plot-ready CSV tables for a circuit scenario.
inline ScenarioResult package_circuit_report(const RunReport& run, const ScenarioConfig& cfg) {
    ScenarioResult result;
    result.scenario = cfg.scenario;
    result.circuit_report = run;

    json j;
    j["scenario"] = scenario_name(cfg.scenario);
    j["basis"] = run.basis;
    j["provenance"] = detail::provenance_json(cfg);

    json reps = json::array();
    for (const RepetitionOutcome& rep : run.repetitions) {
        json r;
        r["thresholds"]["q0"] = detail::threshold_to_json(rep.threshold_target);
        r["thresholds"]["q2"] = detail::threshold_to_json(rep.threshold_control);
        r["single_qubit"]["q0"] = detail::matrix_to_json(rep.single_q0);
        r["single_qubit"]["q2"] = detail::matrix_to_json(rep.single_q2);
        r["ideal"] = detail::matrix_to_json(run.ideal);
        r["multiplied"] = detail::matrix_to_json(rep.multiplied);
        r["conditional"] = detail::matrix_to_json(rep.conditional);
        json fid = json::array();
        for (const FidelityRow& row : rep.fidelity.rows) {
            json f;
            f["state"] = row.state;
            f["multiplied"] = detail::json_number(row.multiplied);
            f["conditional"] = detail::json_number(row.conditional);
            f["advantage_abs"] = detail::json_number(row.advantage_abs);
            f["advantage_rel"] = detail::json_number(row.advantage_rel);
            fid.push_back(std::move(f));
        }
        r["fidelity"] = std::move(fid);
        reps.push_back(std::move(r));
    }
    j["repetitions"] = std::move(reps);

    json agg;
    agg["ideal"] = detail::matrix_to_json(run.ideal);
    agg["multiplied"]["mean"] = detail::matrix_to_json(run.multiplied_agg.mean, 4);
    agg["multiplied"]["semi_dispersion"] =
        detail::matrix_to_json(run.multiplied_agg.semi_dispersion, 4);
    agg["conditional"]["mean"] = detail::matrix_to_json(run.conditional_agg.mean, 4);
    agg["conditional"]["semi_dispersion"] =
        detail::matrix_to_json(run.conditional_agg.semi_dispersion, 4);
    json fid = json::array();
    const FidelityAggregate& fa = run.fidelity_agg;
    for (std::size_t r = 0; r < fa.states.size(); ++r) {
        json f;
        f["state"] = fa.states[r];
        f["multiplied"] = detail::json_number(fa.multiplied_mean[r]);
        f["multiplied_semi_dispersion"] = detail::json_number(fa.multiplied_semi[r]);
        f["conditional"] = detail::json_number(fa.conditional_mean[r]);
        f["conditional_semi_dispersion"] = detail::json_number(fa.conditional_semi[r]);
        f["advantage_abs"] = detail::json_number(fa.advantage_abs[r]);
        f["advantage_rel"] = detail::json_number(fa.advantage_rel[r]);
        fid.push_back(std::move(f));
    }
    agg["fidelity"] = std::move(fid);
    j["aggregate"] = std::move(agg);
    result.report = std::move(j);

    std::vector<double> ideal_values = run.ideal.p;
    result.tables.push_back({"matrix_ideal.csv", detail::matrix_csv(ideal_values, 4, run.basis)});
    result.tables.push_back(
        {"matrix_multiplied.csv", detail::matrix_csv(run.multiplied_agg.mean, 4, run.basis)});
    result.tables.push_back(
        {"matrix_conditional.csv", detail::matrix_csv(run.conditional_agg.mean, 4, run.basis)});
    std::ostringstream fid_csv;
    fid_csv << "state,multiplied,multiplied_semi_dispersion,conditional,"
               "conditional_semi_dispersion,advantage_abs,advantage_rel\n";
    for (std::size_t r = 0; r < fa.states.size(); ++r) {
        fid_csv << fa.states[r] << ',' << format_number(fa.multiplied_mean[r]) << ','
                << format_number(fa.multiplied_semi[r]) << ','
                << format_number(fa.conditional_mean[r]) << ','
                << format_number(fa.conditional_semi[r]) << ','
                << format_number(fa.advantage_abs[r]) << ','
                << format_number(fa.advantage_rel[r]) << "\n";
    }
    result.tables.push_back({"fidelity_table.csv", fid_csv.str()});

    if (cfg.dump_shots) {
        for (std::size_t k = 0; k < run.repetitions.size(); ++k) {
            std::ostringstream dump;
            for (const ShotSet& set : run.repetitions[k].experiment_shots)
                write_shots_csv(set, dump);
            result.tables.push_back({"shots_rep" + std::to_string(k) + ".csv", dump.str()});
        }
    }
    return result;
}

namespace detail {

inline ScenarioResult run_calibrate(const ScenarioConfig& cfg) {
    cfg.validate();
    const ReadoutModel model = cfg.resolved_readout();
    const int reps = cfg.resolved_repetitions();

    std::vector<ProbabilityMatrix> q0s, q2s, combined;
    json rep_json = json::array();
    for (int k = 0; k < reps; ++k) {
        RngStream rng = RngStream::derived(cfg.seed, static_cast<std::uint64_t>(k));
        std::array<std::array<ShotSet, 2>, 2> cal;
        for (int q = 0; q < 2; ++q)
            for (int prepared = 0; prepared < 2; ++prepared)
                cal[static_cast<std::size_t>(q)][static_cast<std::size_t>(prepared)] =
                    calibration_run(q, prepared, cfg.n_shots, model, rng, cfg.seed);
        const Threshold t0 = fit_threshold(cal[0][0], cal[0][1]);
        const Threshold t2 = fit_threshold(cal[1][0], cal[1][1]);
        q0s.push_back(single_qubit_matrix(cal[0][0], cal[0][1], t0));
        q2s.push_back(single_qubit_matrix(cal[1][0], cal[1][1], t2));
        combined.push_back(multiplied_paradigm(q2s.back(), q0s.back()));
        json r;
        r["thresholds"]["q0"] = threshold_to_json(t0);
        r["thresholds"]["q2"] = threshold_to_json(t2);
        r["q0"] = matrix_to_json(q0s.back());
        r["q2"] = matrix_to_json(q2s.back());
        r["combined"] = matrix_to_json(combined.back());
        rep_json.push_back(std::move(r));
    }

    auto agg = [](const std::vector<ProbabilityMatrix>& ms) {
        std::vector<const ProbabilityMatrix*> ptrs;
        for (const ProbabilityMatrix& m : ms) ptrs.push_back(&m);
        return aggregate_matrices(ptrs);
    };
    const MatrixAggregate agg0 = agg(q0s), agg2 = agg(q2s), aggc = agg(combined);

    ScenarioResult result;
    result.scenario = cfg.scenario;
    json j;
    j["scenario"] = scenario_name(cfg.scenario);
    j["basis"] = std::vector<std::string>{"00", "01", "10", "11"};
    j["provenance"] = provenance_json(cfg);
    j["repetitions"] = std::move(rep_json);
    j["aggregate"]["q0"]["mean"] = matrix_to_json(agg0.mean, 2);
    j["aggregate"]["q0"]["semi_dispersion"] = matrix_to_json(agg0.semi_dispersion, 2);
    j["aggregate"]["q2"]["mean"] = matrix_to_json(agg2.mean, 2);
    j["aggregate"]["q2"]["semi_dispersion"] = matrix_to_json(agg2.semi_dispersion, 2);
    j["aggregate"]["combined"]["mean"] = matrix_to_json(aggc.mean, 4);
    j["aggregate"]["combined"]["semi_dispersion"] = matrix_to_json(aggc.semi_dispersion, 4);
    result.report = std::move(j);

    const std::vector<std::string> bits{"0", "1"};
    const std::vector<std::string> basis{"00", "01", "10", "11"};
    result.tables.push_back({"matrix_q0.csv", matrix_csv(agg0.mean, 2, bits)});
    result.tables.push_back({"matrix_q2.csv", matrix_csv(agg2.mean, 2, bits)});
    result.tables.push_back({"matrix_combined.csv", matrix_csv(aggc.mean, 4, basis)});
    return result;
}

inline ScenarioResult run_chevron(const ScenarioConfig& cfg) {
    cfg.validate();
    const double j_ghz = cfg.device.j_ghz;
    std::ostringstream csv;
    csv << "detuning_ghz,duration_ns,population\n";
    for (int di = 0; di < cfg.chevron_detuning_steps; ++di) {
        const double detuning = -cfg.chevron_detuning_span_ghz +
                                2.0 * cfg.chevron_detuning_span_ghz * static_cast<double>(di) /
                                    static_cast<double>(cfg.chevron_detuning_steps - 1);
        for (int ti = 0; ti < cfg.chevron_duration_steps; ++ti) {
            const double t = cfg.chevron_max_duration_ns * static_cast<double>(ti) /
                             static_cast<double>(cfg.chevron_duration_steps - 1);
            csv << format_number(detuning) << ',' << format_number(t) << ','
                << format_number(chevron_population(j_ghz, detuning, t)) << "\n";
        }
    }

    ScenarioResult result;
    result.scenario = cfg.scenario;
    json j;
    j["scenario"] = scenario_name(cfg.scenario);
    j["provenance"] = provenance_json(cfg);
    j["j_ghz"] = json_number(j_ghz);
    j["effective_coupling_ghz"] = json_number(2.0 * std::numbers::sqrt2 * j_ghz);
    j["first_full_transfer_ns"] = json_number(chevron_full_transfer_ns(j_ghz));
    j["grid"]["detuning_span_ghz"] = json_number(cfg.chevron_detuning_span_ghz);
    j["grid"]["detuning_steps"] = cfg.chevron_detuning_steps;
    j["grid"]["max_duration_ns"] = json_number(cfg.chevron_max_duration_ns);
    j["grid"]["duration_steps"] = cfg.chevron_duration_steps;
    result.report = std::move(j);
    result.tables.push_back({"chevron.csv", csv.str()});
    return result;
}

inline ScenarioResult run_alc_fit(const ScenarioConfig& cfg) {
    cfg.validate();
    ALCDataset data;
    json planted;
    if (!cfg.alc_data_file.empty()) {
        std::ifstream in(cfg.alc_data_file);
        if (!in) throw ParseError("cannot open ALC data file '" + cfg.alc_data_file + "'");
        data = load_alc_csv(in);
    } else {
        RngStream rng = RngStream::derived(cfg.seed, 0);
        data = synthetic_alc_dataset(cfg.device.q0.nu01_ghz, cfg.device.j_ghz, cfg.alc_span_ghz,
                                     cfg.alc_points_per_branch, cfg.alc_noise_mhz * 1e-3, rng);
        planted["nu_fixed_ghz"] = json_number(cfg.device.q0.nu01_ghz);
        planted["j_ghz"] = json_number(cfg.device.j_ghz);
        planted["noise_mhz"] = json_number(cfg.alc_noise_mhz);
    }
    const ALCFit fit = fit_avoided_crossing(data);

    std::ostringstream data_csv;
    data_csv << "swept_ghz,freq_ghz,branch\n";
    for (const ALCPoint& p : data.points)
        data_csv << format_number(p.swept_ghz) << ',' << format_number(p.freq_ghz) << ','
                 << (p.branch == Branch::Upper ? "upper" : "lower") << "\n";

    const auto [xmin, xmax] = std::minmax_element(
        data.points.begin(), data.points.end(),
        [](const ALCPoint& a, const ALCPoint& b) { return a.swept_ghz < b.swept_ghz; });
    std::ostringstream curve_csv;
    curve_csv << "swept_ghz,upper_ghz,lower_ghz\n";
    constexpr int kCurvePoints = 101;
    for (int i = 0; i < kCurvePoints; ++i) {
        const double x = xmin->swept_ghz + (xmax->swept_ghz - xmin->swept_ghz) *
                                               static_cast<double>(i) / (kCurvePoints - 1);
        const auto [upper, lower] = dressed_frequencies(x, fit.nu_fixed_ghz, fit.j_ghz);
        curve_csv << format_number(x) << ',' << format_number(upper) << ','
                  << format_number(lower) << "\n";
    }

    ScenarioResult result;
    result.scenario = cfg.scenario;
    json j;
    j["scenario"] = scenario_name(cfg.scenario);
    j["provenance"] = provenance_json(cfg);
    if (!planted.is_null()) j["planted"] = std::move(planted);
    j["fit"]["nu_fixed_ghz"] = json_number(fit.nu_fixed_ghz);
    j["fit"]["j_ghz"] = json_number(fit.j_ghz);
    j["fit"]["j_mhz"] = json_number(fit.j_ghz * 1e3);
    j["fit"]["rms_residual_ghz"] = json_number(fit.rms_residual_ghz);
    j["fit"]["iterations"] = fit.iterations;
    result.report = std::move(j);
    result.tables.push_back({"alc_data.csv", data_csv.str()});
    result.tables.push_back({"alc_fit_curve.csv", curve_csv.str()});
    return result;
}

inline FringeScan load_fringe_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open fringe file '" + path + "'");
    return load_fringe_csv(in);
}

inline ScenarioResult run_cond_osc(const ScenarioConfig& cfg) {
    cfg.validate();
    const bool from_files = !cfg.condosc_on_file.empty() || !cfg.condosc_off_file.empty();
    if (from_files && (cfg.condosc_on_file.empty() || cfg.condosc_off_file.empty()))
        throw ParseError("cond-osc needs both condosc.on_file and condosc.off_file");
    FringeScan on, off;
    if (from_files) {
        on = load_fringe_file(cfg.condosc_on_file);
        off = load_fringe_file(cfg.condosc_off_file);
    } else {
        RngStream rng = RngStream::derived(cfg.seed, 0);
        std::tie(on, off) = synthetic_fringes(cfg.condosc_theta_deg, cfg.condosc_leakage_mv,
                                              cfg.condosc_points, cfg.condosc_noise_mv, rng);
    }
    const ConditionalPhaseResult extracted = conditional_phase(on, off);

    std::ostringstream csv;
    csv << "phase_rad,on_target_mv,off_target_mv,on_control_mv,off_control_mv\n";
    for (std::size_t i = 0; i < on.phase_rad.size(); ++i)
        csv << format_number(on.phase_rad[i]) << ',' << format_number(on.target_v[i]) << ','
            << format_number(off.target_v[i]) << ',' << format_number(on.control_v[i]) << ','
            << format_number(off.control_v[i]) << "\n";

    ScenarioResult result;
    result.scenario = cfg.scenario;
    json j;
    j["scenario"] = scenario_name(cfg.scenario);
    j["provenance"] = provenance_json(cfg);
    if (!from_files) {
        j["planted"]["theta_2q_deg"] = json_number(cfg.condosc_theta_deg);
        j["planted"]["leakage_mv"] = json_number(cfg.condosc_leakage_mv);
        j["planted"]["noise_mv"] = json_number(cfg.condosc_noise_mv);
    }
    j["extracted"]["theta_2q_deg"] = json_number(extracted.theta_2q_deg);
    j["extracted"]["leakage_mv"] = json_number(extracted.leakage);
    j["extracted"]["on_amplitude_mv"] = json_number(extracted.on_target.amplitude);
    j["extracted"]["off_amplitude_mv"] = json_number(extracted.off_target.amplitude);
    result.report = std::move(j);
    result.tables.push_back({"fringes.csv", csv.str()});
    return result;
}

}  // namespace detail

/// Runs one named scenario end to end and packages its report and tables.
inline ScenarioResult run_scenario(const ScenarioConfig& cfg) {
    switch (cfg.scenario) {
        case Scenario::Calibrate:
            return detail::run_calibrate(cfg);
        case Scenario::Chevron:
            return detail::run_chevron(cfg);
        case Scenario::AlcFit:
            return detail::run_alc_fit(cfg);
        case Scenario::CondOsc:
            return detail::run_cond_osc(cfg);
        default:
            return package_circuit_report(run_circuit_scenario(cfg), cfg);
    }
}

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Writes report.json and every table into `out_dir`; returns the manifest
/// of created paths. The timestamp is injected here so that run results
/// themselves stay deterministic.
inline std::vector<std::string> emit_outputs(const ScenarioResult& result,
                                             const std::filesystem::path& out_dir) {
    if (result.report.is_null()) throw ArgumentError("empty scenario result");
    if (result.circuit_report && result.circuit_report->repetitions.empty())
        throw ArgumentError("report holds no repetitions");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string());

    auto write_file = [&](const std::string& name, const std::string& content) {
        const std::filesystem::path path = out_dir / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write " + path.string());
        out << content;
        if (!out) throw IoError("short write on " + path.string());
        return path.string();
    };

    std::vector<std::string> manifest;
    json report = result.report;
    report["provenance"]["timestamp"] = utc_timestamp();
    manifest.push_back(write_file("report.json", report.dump(2) + "\n"));
    for (const CsvTable& table : result.tables)
        manifest.push_back(write_file(table.filename, table.content));
    return manifest;
}

// --- report comparison --------------------------------------------------------

/// Per-state fidelity deltas between two circuit reports of the same
/// scenario, absolute and relative, plus each report's own
/// conditional-over-multiplied advantage.
inline std::string compare_reports(const json& a, const json& b) {
    for (const json* r : {&a, &b}) {
        if (!r->contains("aggregate") || !(*r)["aggregate"].contains("fidelity"))
            throw ArgumentError("report lacks an aggregate fidelity table");
    }
    if (a["scenario"] != b["scenario"])
        throw ArgumentError("cannot compare different scenarios: " +
                            a["scenario"].get<std::string>() + " vs " +
                            b["scenario"].get<std::string>());
    if (a["basis"] != b["basis"]) throw ArgumentError("basis labels differ between reports");

    const json& fa = a["aggregate"]["fidelity"];
    const json& fb = b["aggregate"]["fidelity"];
    if (fa.size() != fb.size()) throw ArgumentError("fidelity tables differ in size");

    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-6s %9s %9s %9s %9s %9s %9s %9s %9s %9s %9s\n", "state",
                  "mult_a", "mult_b", "d_mult", "rel_mult", "cond_a", "cond_b", "d_cond",
                  "rel_cond", "adv_a", "adv_b");
    out << line;
    for (std::size_t r = 0; r < fa.size(); ++r) {
        if (fa[r]["state"] != fb[r]["state"]) throw ArgumentError("state rows differ");
        const double ma = fa[r]["multiplied"].get<double>();
        const double mb = fb[r]["multiplied"].get<double>();
        const double ca = fa[r]["conditional"].get<double>();
        const double cb = fb[r]["conditional"].get<double>();
        const double dm = mb - ma, dc = cb - ca;
        std::snprintf(line, sizeof(line),
                      "%-6s %9.6f %9.6f %+9.6f %+9.6f %9.6f %9.6f %+9.6f %+9.6f %+9.6f %+9.6f\n",
                      fa[r]["state"].get<std::string>().c_str(), ma, mb, dm,
                      ma > 1e-12 ? dm / ma : 0.0, ca, cb, dc, ca > 1e-12 ? dc / ca : 0.0,
                      fa[r]["advantage_abs"].get<double>(), fb[r]["advantage_abs"].get<double>());
        out << line;
    }
    return out.str();
}

}  // namespace qreadout
