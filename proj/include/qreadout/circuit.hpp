#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <complex>
#include <cstddef>
#include <istream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "qreadout/errors.hpp"
#include "qreadout/io_util.hpp"

namespace qreadout {

using cdouble = std::complex<double>;

// Basis convention, used by every module: qubit k occupies bit k of the
// basis index, so an n-qubit index reads MSB-first as |q_{n-1} ... q1 q0>.
// The two-qubit register places the control (device Q2) on qubit 1 and the
// target (device Q0) on qubit 0; basis label "10" therefore means
// control excited, target ground.
inline constexpr int kControlQubit = 1;
inline constexpr int kTargetQubit = 0;

/// MSB-first bit string for basis index `index` of an n-qubit register.
inline std::string basis_label(std::size_t index, int num_qubits) {
    std::string s(static_cast<std::size_t>(num_qubits), '0');
    for (int q = 0; q < num_qubits; ++q) {
        if (index & (std::size_t{1} << q)) s[static_cast<std::size_t>(num_qubits - 1 - q)] = '1';
    }
    return s;
}

/// Parses an MSB-first bit string ("10" -> index 2). Throws ArgumentError.
inline std::size_t basis_index(const std::string& label) {
    if (label.empty() || label.size() > 60) throw ArgumentError("bad basis label '" + label + "'");
    std::size_t index = 0;
    for (char ch : label) {
        if (ch != '0' && ch != '1') throw ArgumentError("bad basis label '" + label + "'");
        index = (index << 1) | static_cast<std::size_t>(ch - '0');
    }
    return index;
}

/// Complex amplitude vector over an n-qubit register.
struct QuantumState {
    int num_qubits = 0;
    std::vector<cdouble> amplitudes;

    QuantumState() = default;

    explicit QuantumState(int n, std::size_t index = 0)
        : num_qubits(n), amplitudes(std::size_t{1} << n, cdouble{0.0, 0.0}) {
        if (n < 1) throw ArgumentError("register needs at least one qubit");
        if (index >= amplitudes.size()) throw IndexError("basis index out of range");
        amplitudes[index] = 1.0;
    }

    /// Basis state from an MSB-first label, e.g. "10".
    static QuantumState from_label(const std::string& label) {
        return QuantumState(static_cast<int>(label.size()), basis_index(label));
    }

    std::size_t dimension() const { return amplitudes.size(); }

    double norm_squared() const {
        double s = 0.0;
        for (const cdouble& a : amplitudes) s += std::norm(a);
        return s;
    }
};

enum class Axis { X, Y, Z };

/// Single-qubit rotation exp(-i*angle/2 * sigma_axis).
struct Rotation {
    Axis axis;
    double angle;  // radians

    /// Row-major 2x2 matrix {u00, u01, u10, u11}.
    std::array<cdouble, 4> matrix() const {
        if (!std::isfinite(angle)) throw ArgumentError("rotation angle must be finite");
        const double c = std::cos(angle / 2.0);
        const double s = std::sin(angle / 2.0);
        switch (axis) {
            case Axis::X:
                return {cdouble{c, 0}, cdouble{0, -s}, cdouble{0, -s}, cdouble{c, 0}};
            case Axis::Y:
                return {cdouble{c, 0}, cdouble{-s, 0}, cdouble{s, 0}, cdouble{c, 0}};
            case Axis::Z:
                return {cdouble{c, -s}, cdouble{0, 0}, cdouble{0, 0}, cdouble{c, s}};
        }
        throw ArgumentError("unknown rotation axis");
    }
};

/// Born-rule outcome distribution over the computational basis.
struct ProbabilityVector {
    std::vector<double> entries;

    void validate(double tol = 1e-9) const {
        double sum = 0.0;
        for (double p : entries) {
            if (p < -tol || p > 1.0 + tol) throw ArgumentError("probability entry outside [0, 1]");
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol) throw ArgumentError("probabilities do not sum to 1");
    }
};

namespace detail {

inline void check_qubit(const QuantumState& state, int qubit) {
    if (qubit < 0 || qubit >= state.num_qubits)
        throw IndexError("qubit index " + std::to_string(qubit) + " outside register of " +
                         std::to_string(state.num_qubits));
}

}  // namespace detail

/// Applies a 2x2 unitary (row-major) to one tensor factor.
inline QuantumState apply_gate_1q(const QuantumState& state, int qubit,
                                  const std::array<cdouble, 4>& u) {
    detail::check_qubit(state, qubit);
    QuantumState out = state;
    const std::size_t stride = std::size_t{1} << qubit;
    const std::size_t dim = state.dimension();
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
        for (std::size_t k = 0; k < stride; ++k) {
            const std::size_t i0 = base + k;
            const std::size_t i1 = i0 + stride;
            const cdouble a0 = state.amplitudes[i0];
            const cdouble a1 = state.amplitudes[i1];
            out.amplitudes[i0] = u[0] * a0 + u[1] * a1;
            out.amplitudes[i1] = u[2] * a0 + u[3] * a1;
        }
    }
    return out;
}

inline QuantumState apply_rotation(const QuantumState& state, int qubit, const Rotation& rot) {
    return apply_gate_1q(state, qubit, rot.matrix());
}

/// Hadamard as the native-gate sequence Ry(pi/2) then Rx(pi); equals the
/// textbook H matrix up to a global phase.
inline QuantumState apply_hadamard(const QuantumState& state, int qubit) {
    using std::numbers::pi;
    QuantumState out = apply_rotation(state, qubit, {Axis::Y, pi / 2.0});
    return apply_rotation(out, qubit, {Axis::X, pi});
}

/// Controlled-Z: negates every amplitude with both qubits excited. Symmetric
/// in its arguments.
inline QuantumState apply_cz(const QuantumState& state, int qubit_a, int qubit_b) {
    detail::check_qubit(state, qubit_a);
    detail::check_qubit(state, qubit_b);
    if (qubit_a == qubit_b) throw ArgumentError("CZ needs two distinct qubits");
    QuantumState out = state;
    const std::size_t mask = (std::size_t{1} << qubit_a) | (std::size_t{1} << qubit_b);
    for (std::size_t i = 0; i < out.dimension(); ++i) {
        if ((i & mask) == mask) out.amplitudes[i] = -out.amplitudes[i];
    }
    return out;
}

/// CNOT built as H(target) CZ H(target).
inline QuantumState apply_cnot(const QuantumState& state, int control, int target) {
    detail::check_qubit(state, control);
    detail::check_qubit(state, target);
    if (control == target) throw ArgumentError("CNOT needs two distinct qubits");
    QuantumState out = apply_hadamard(state, target);
    out = apply_cz(out, control, target);
    return apply_hadamard(out, target);
}

/// H on the control, then CNOT; maps the four two-qubit basis states onto
/// the four maximally entangled states.
inline QuantumState bell_circuit(const std::string& initial_label) {
    if (initial_label.size() != 2) throw ArgumentError("Bell circuit needs a two-qubit label");
    QuantumState state = QuantumState::from_label(initial_label);
    state = apply_hadamard(state, kControlQubit);
    return apply_cnot(state, kControlQubit, kTargetQubit);
}

inline ProbabilityVector ideal_probabilities(const QuantumState& state) {
    ProbabilityVector pv;
    pv.entries.reserve(state.dimension());
    for (const cdouble& a : state.amplitudes) pv.entries.push_back(std::norm(a));
    return pv;
}

/// Rescales so the first entry with |z| > tol is real positive: the canonical
/// representative of a ray. Works on flattened matrices as well.
inline std::vector<cdouble> align_global_phase(std::vector<cdouble> v, double tol = 1e-12) {
    for (const cdouble& z : v) {
        if (std::abs(z) > tol) {
            const cdouble phase = z / std::abs(z);
            for (cdouble& w : v) w /= phase;
            break;
        }
    }
    return v;
}

// --- gate lists and the line-oriented circuit format ---------------------
//
//   # comment
//   H 1
//   RY 0 1.5707963268
//   CZ 0 1
//   CNOT 1 0        (control first)

enum class GateKind { H, RX, RY, RZ, CZ, CNOT };

struct GateOp {
    GateKind kind;
    int qubit_a = 0;  // single-qubit target, or control for CNOT
    int qubit_b = -1;
    double angle = 0.0;
};

inline std::vector<GateOp> parse_circuit(std::istream& in) {
    std::vector<GateOp> gates;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream tokens(line);
        std::string name;
        if (!(tokens >> name)) continue;  // blank or comment-only line
        for (char& ch : name) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));

        auto next_int = [&](const char* what) {
            std::string tok;
            int value = 0;
            if (!(tokens >> tok) || !detail::parse_int(tok, value) || value < 0)
                throw ParseError(line_no, std::string("expected ") + what + " for gate " + name);
            return value;
        };

        GateOp op;
        if (name == "H") {
            op = {GateKind::H, next_int("qubit index")};
        } else if (name == "RX" || name == "RY" || name == "RZ") {
            op.kind = name == "RX" ? GateKind::RX : (name == "RY" ? GateKind::RY : GateKind::RZ);
            op.qubit_a = next_int("qubit index");
            std::string tok;
            if (!(tokens >> tok) || !detail::parse_double(tok, op.angle))
                throw ParseError(line_no, "expected angle in radians for gate " + name);
        } else if (name == "CZ" || name == "CNOT") {
            op.kind = name == "CZ" ? GateKind::CZ : GateKind::CNOT;
            op.qubit_a = next_int("first qubit index");
            op.qubit_b = next_int("second qubit index");
            if (op.qubit_a == op.qubit_b)
                throw ParseError(line_no, name + " needs two distinct qubits");
        } else {
            throw ParseError(line_no, "unknown gate '" + name + "'");
        }
        std::string extra;
        if (tokens >> extra) throw ParseError(line_no, "unexpected token '" + extra + "'");
        gates.push_back(op);
    }
    return gates;
}

inline std::vector<GateOp> parse_circuit_text(const std::string& text) {
    std::istringstream in(text);
    return parse_circuit(in);
}

inline QuantumState apply_gate(const QuantumState& state, const GateOp& op) {
    using std::numbers::pi;
    switch (op.kind) {
        case GateKind::H:
            return apply_hadamard(state, op.qubit_a);
        case GateKind::RX:
            return apply_rotation(state, op.qubit_a, {Axis::X, op.angle});
        case GateKind::RY:
            return apply_rotation(state, op.qubit_a, {Axis::Y, op.angle});
        case GateKind::RZ:
            return apply_rotation(state, op.qubit_a, {Axis::Z, op.angle});
        case GateKind::CZ:
            return apply_cz(state, op.qubit_a, op.qubit_b);
        case GateKind::CNOT:
            return apply_cnot(state, op.qubit_a, op.qubit_b);
    }
    throw ArgumentError("unknown gate kind");
}

inline QuantumState run_circuit(const std::vector<GateOp>& gates, QuantumState state) {
    for (const GateOp& op : gates) state = apply_gate(state, op);
    return state;
}

inline QuantumState run_circuit(const std::vector<GateOp>& gates, const std::string& initial_label) {
    return run_circuit(gates, QuantumState::from_label(initial_label));
}

}  // namespace qreadout
