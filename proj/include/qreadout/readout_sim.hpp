#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "qreadout/circuit.hpp"
#include "qreadout/device.hpp"
#include "qreadout/errors.hpp"
#include "qreadout/io_util.hpp"
#include "qreadout/rng.hpp"

namespace qreadout {

/// Demodulated readout voltage, in-phase and quadrature components (volts).
struct IQPoint {
    double i_v = 0.0;
    double q_v = 0.0;
};

/// Blob geometry and error channels of one qubit's dispersive readout.
struct QubitReadoutModel {
    IQPoint center0{1.0, 0.0};   // voltage emitted for |0>
    IQPoint center1{-1.0, 0.0};  // voltage emitted for |1>
    double sigma_v = 0.5;        // isotropic blob standard deviation
    double decay_probability = 0.0;       // |1> relaxes before the blob is chosen
    double excitation_probability = 0.0;  // |0> -> |1>, off by default

    void validate() const {
        if (center0.i_v == center1.i_v && center0.q_v == center1.q_v)
            throw ArgumentError("blob centers must be distinct");
        if (sigma_v <= 0.0) throw ArgumentError("sigma must be positive");
        for (double p : {decay_probability, excitation_probability})
            if (p < 0.0 || p > 1.0) throw ArgumentError("probabilities must lie in [0, 1]");
    }

    /// Rotates both blob centers about the origin, making the fitted
    /// threshold an oblique line.
    void rotate_blobs(double angle_rad) {
        const double c = std::cos(angle_rad), s = std::sin(angle_rad);
        for (IQPoint* p : {&center0, &center1}) {
            const double i = p->i_v, q = p->q_v;
            p->i_v = c * i - s * q;
            p->q_v = s * i + c * q;
        }
    }
};

/// Register-level readout model. Index 0 is the target (device Q0), index 1
/// the control (device Q2); their default blob orientations are opposite so
/// the two per-qubit discrimination inequalities point in opposite
/// directions, as on the real pair.
struct ReadoutModel {
    std::array<QubitReadoutModel, 2> qubit;
    double correlated_flip_probability = 0.0;  // both outcomes flip together

    /// Blobs at (+-1, 0) V with sigma giving a separation/sigma ratio of 4,
    /// decay probabilities 1 - exp(-t_ro/T1) from the device constants.
    static ReadoutModel defaults(const DeviceParams& device = DeviceParams::defaults()) {
        ReadoutModel m;
        m.qubit[0].center0 = {1.0, 0.0};
        m.qubit[0].center1 = {-1.0, 0.0};
        m.qubit[1].center0 = {-1.0, 0.0};
        m.qubit[1].center1 = {1.0, 0.0};
        m.qubit[0].decay_probability = decay_during_readout(device.q0.t1_us, device.readout_ns);
        m.qubit[1].decay_probability = decay_during_readout(device.q2.t1_us, device.readout_ns);
        return m;
    }

    /// Same geometry, every stochastic channel switched off. sigma keeps a
    /// tiny positive value so the model stays valid; it is far below any
    /// blob separation and never flips a classification.
    static ReadoutModel noiseless(const DeviceParams& device = DeviceParams::defaults()) {
        ReadoutModel m = defaults(device);
        for (QubitReadoutModel& q : m.qubit) {
            q.sigma_v = 1e-12;
            q.decay_probability = 0.0;
            q.excitation_probability = 0.0;
        }
        m.correlated_flip_probability = 0.0;
        return m;
    }

    void validate() const {
        for (const QubitReadoutModel& q : qubit) q.validate();
        if (correlated_flip_probability < 0.0 || correlated_flip_probability > 1.0)
            throw ArgumentError("correlated_flip_probability must lie in [0, 1]");
    }

    /// Stable digest of the model values, recorded in shot CSV headers.
    std::uint64_t hash() const {
        std::string text;
        for (const QubitReadoutModel& q : qubit) {
            for (double v : {q.center0.i_v, q.center0.q_v, q.center1.i_v, q.center1.q_v,
                             q.sigma_v, q.decay_probability, q.excitation_probability})
                text += format_number(v) + ",";
        }
        text += format_number(correlated_flip_probability);
        return detail::fnv1a(text);
    }
};

/// One simultaneous measurement: an IQ sample per covered register qubit.
struct ShotRecord {
    std::vector<IQPoint> iq;  // parallel to ShotSet::qubits
    int shot_index = 0;       // 1-based
};

/// All shots of one prepared state, plus the provenance needed to
/// regenerate them.
struct ShotSet {
    std::string prepared_label;  // "0"/"1" for calibration, "00".."11" for experiments
    std::vector<int> qubits;     // register qubit index per IQ column
    std::vector<ShotRecord> records;
    std::uint64_t seed = 0;
    std::uint64_t model_hash = 0;

    std::size_t n_shots() const { return records.size(); }

    int column_of(int qubit) const {
        for (std::size_t k = 0; k < qubits.size(); ++k)
            if (qubits[k] == qubit) return static_cast<int>(k);
        throw IndexError("qubit " + std::to_string(qubit) + " not covered by this shot set");
    }
};

/// Draws one basis state with Born probabilities and unpacks it into
/// per-qubit bits (bit k of the index is qubit k). Sampling at the joint
/// level is what preserves the outcome correlations of entangled states.
inline std::vector<int> joint_outcome(const QuantumState& state, RngStream& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t drawn = state.dimension() - 1;
    for (std::size_t k = 0; k < state.dimension(); ++k) {
        acc += std::norm(state.amplitudes[k]);
        if (u < acc) {
            drawn = k;
            break;
        }
    }
    std::vector<int> bits(static_cast<std::size_t>(state.num_qubits));
    for (int q = 0; q < state.num_qubits; ++q)
        bits[static_cast<std::size_t>(q)] = static_cast<int>((drawn >> q) & 1u);
    return bits;
}

/// Voltage record for given true outcomes. Draw order is fixed for
/// reproducibility: joint-flip Bernoulli (multi-qubit records only), then
/// per qubit one state-flip Bernoulli and one Gaussian pair.
inline ShotRecord sample_shot(std::vector<int> outcome_bits, const std::vector<int>& qubits,
                              const ReadoutModel& model, int shot_index, RngStream& rng) {
    if (outcome_bits.size() != qubits.size())
        throw ArgumentError("one outcome bit per sampled qubit required");
    if (qubits.size() > 1 && rng.bernoulli(model.correlated_flip_probability)) {
        for (int& b : outcome_bits) b ^= 1;
    }
    ShotRecord rec;
    rec.shot_index = shot_index;
    rec.iq.reserve(qubits.size());
    for (std::size_t k = 0; k < qubits.size(); ++k) {
        const QubitReadoutModel& qm = model.qubit[static_cast<std::size_t>(qubits[k])];
        int emitted = outcome_bits[k];
        if (emitted == 1) {
            if (rng.bernoulli(qm.decay_probability)) emitted = 0;
        } else {
            if (rng.bernoulli(qm.excitation_probability)) emitted = 1;
        }
        const IQPoint& center = emitted == 1 ? qm.center1 : qm.center0;
        const auto [n1, n2] = rng.normal_pair();
        rec.iq.push_back({center.i_v + qm.sigma_v * n1, center.q_v + qm.sigma_v * n2});
    }
    return rec;
}

/// Repeatedly prepares one qubit in a known basis state and measures it.
inline ShotSet calibration_run(int qubit, int prepared, int n_shots, const ReadoutModel& model,
                               RngStream& rng, std::uint64_t seed_tag = 0) {
    if (qubit < 0 || qubit >= static_cast<int>(model.qubit.size()))
        throw IndexError("no readout model for qubit " + std::to_string(qubit));
    if (prepared != 0 && prepared != 1) throw ArgumentError("prepared state must be 0 or 1");
    if (n_shots < 1) throw ArgumentError("need at least one shot");
    model.validate();
    ShotSet set;
    set.prepared_label = prepared ? "1" : "0";
    set.qubits = {qubit};
    set.seed = seed_tag;
    set.model_hash = model.hash();
    set.records.reserve(static_cast<std::size_t>(n_shots));
    for (int m = 1; m <= n_shots; ++m)
        set.records.push_back(sample_shot({prepared}, set.qubits, model, m, rng));
    return set;
}

/// Simultaneous two-qubit measurement of a circuit output state.
inline ShotSet experiment_run(const QuantumState& state, int n_shots, const ReadoutModel& model,
                              RngStream& rng, const std::string& prepared_label,
                              std::uint64_t seed_tag = 0) {
    if (state.num_qubits != 2) throw ArgumentError("experiment_run needs a two-qubit state");
    if (n_shots < 1) throw ArgumentError("need at least one shot");
    model.validate();
    ShotSet set;
    set.prepared_label = prepared_label;
    set.qubits = {0, 1};
    set.seed = seed_tag;
    set.model_hash = model.hash();
    set.records.reserve(static_cast<std::size_t>(n_shots));
    for (int m = 1; m <= n_shots; ++m) {
        std::vector<int> bits = joint_outcome(state, rng);
        set.records.push_back(sample_shot(std::move(bits), set.qubits, model, m, rng));
    }
    return set;
}

/// CSV dump, one row per (shot, qubit); the comment header carries the seed
/// and model digest so a dump can be regenerated bit-for-bit.
inline void write_shots_csv(const ShotSet& set, std::ostream& out) {
    out << "# seed=" << set.seed << " model=" << std::hex << set.model_hash << std::dec << "\n";
    out << "shot,qubit,I,Q,prepared_label\n";
    for (const ShotRecord& rec : set.records) {
        for (std::size_t k = 0; k < set.qubits.size(); ++k) {
            out << rec.shot_index << ',' << set.qubits[k] << ',' << format_number(rec.iq[k].i_v)
                << ',' << format_number(rec.iq[k].q_v) << ',' << set.prepared_label << "\n";
        }
    }
}

}  // namespace qreadout
