#pragma once

// Test-only oracles, independent of the library's gate implementations:
// dense matrix algebra on small complex matrices and a Taylor-series
// matrix exponential.

#include <complex>
#include <functional>
#include <vector>

#include "qreadout/circuit.hpp"
#include "qreadout/rng.hpp"

namespace testutil {

using qreadout::cdouble;

struct CMatrix {
    std::size_t n = 0;
    std::vector<cdouble> m;  // row-major

    explicit CMatrix(std::size_t dim) : n(dim), m(dim * dim, cdouble{0, 0}) {}
    cdouble& at(std::size_t r, std::size_t c) { return m[r * n + c]; }
    cdouble at(std::size_t r, std::size_t c) const { return m[r * n + c]; }

    static CMatrix identity(std::size_t dim) {
        CMatrix out(dim);
        for (std::size_t i = 0; i < dim; ++i) out.at(i, i) = 1.0;
        return out;
    }
};

inline CMatrix multiply(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.n);
    for (std::size_t r = 0; r < a.n; ++r)
        for (std::size_t k = 0; k < a.n; ++k)
            for (std::size_t c = 0; c < a.n; ++c) out.at(r, c) += a.at(r, k) * b.at(k, c);
    return out;
}

inline CMatrix dagger(const CMatrix& a) {
    CMatrix out(a.n);
    for (std::size_t r = 0; r < a.n; ++r)
        for (std::size_t c = 0; c < a.n; ++c) out.at(r, c) = std::conj(a.at(c, r));
    return out;
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.n * b.n);
    for (std::size_t ar = 0; ar < a.n; ++ar)
        for (std::size_t ac = 0; ac < a.n; ++ac)
            for (std::size_t br = 0; br < b.n; ++br)
                for (std::size_t bc = 0; bc < b.n; ++bc)
                    out.at(ar * b.n + br, ac * b.n + bc) = a.at(ar, ac) * b.at(br, bc);
    return out;
}

/// Scaling-free Taylor series; plenty accurate for the gate-sized
/// arguments used in tests.
inline CMatrix matrix_exp(const CMatrix& a, int terms = 40) {
    CMatrix sum = CMatrix::identity(a.n);
    CMatrix term = CMatrix::identity(a.n);
    for (int k = 1; k <= terms; ++k) {
        term = multiply(term, a);
        for (cdouble& z : term.m) z /= static_cast<double>(k);
        for (std::size_t i = 0; i < sum.m.size(); ++i) sum.m[i] += term.m[i];
    }
    return sum;
}

inline CMatrix pauli(char which) {
    CMatrix p(2);
    switch (which) {
        case 'x':
            p.at(0, 1) = 1.0;
            p.at(1, 0) = 1.0;
            break;
        case 'y':
            p.at(0, 1) = cdouble{0, -1};
            p.at(1, 0) = cdouble{0, 1};
            break;
        case 'z':
            p.at(0, 0) = 1.0;
            p.at(1, 1) = -1.0;
            break;
    }
    return p;
}

/// exp(-i*theta/2 * sigma) straight from the series definition.
inline CMatrix rotation_oracle(char axis, double theta) {
    CMatrix arg = pauli(axis);
    for (cdouble& z : arg.m) z *= cdouble{0, -theta / 2.0};
    return matrix_exp(arg);
}

/// Builds the dense matrix of a state transformation by applying it to
/// every basis state (columns).
inline CMatrix gate_matrix(int num_qubits,
                           const std::function<qreadout::QuantumState(
                               const qreadout::QuantumState&)>& apply) {
    const std::size_t dim = std::size_t{1} << num_qubits;
    CMatrix out(dim);
    for (std::size_t col = 0; col < dim; ++col) {
        const qreadout::QuantumState result = apply(qreadout::QuantumState(num_qubits, col));
        for (std::size_t row = 0; row < dim; ++row) out.at(row, col) = result.amplitudes[row];
    }
    return out;
}

inline double max_deviation(const std::vector<cdouble>& a, const std::vector<cdouble>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

inline qreadout::QuantumState random_state(int num_qubits, qreadout::RngStream& rng) {
    qreadout::QuantumState state(num_qubits);
    double norm = 0.0;
    for (cdouble& a : state.amplitudes) {
        const auto [re, im] = rng.normal_pair();
        a = cdouble{re, im};
        norm += std::norm(a);
    }
    for (cdouble& a : state.amplitudes) a /= std::sqrt(norm);
    return state;
}

}  // namespace testutil
