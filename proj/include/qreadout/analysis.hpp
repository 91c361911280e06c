#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qreadout/errors.hpp"
#include "qreadout/readout_sim.hpp"

namespace qreadout {

/// State-discrimination line a*I + b*Q + c = 0 in the IQ plane, stored in
/// general form so vertical bisectors are representable. (a, b) is unit
/// length and the sign is fixed so that signed_value > 0 on the ground
/// side.
struct Threshold {
    double a = 1.0;
    double b = 0.0;
    double c = 0.0;

    double signed_value(const IQPoint& p) const { return a * p.i_v + b * p.q_v + c; }

    void validate() const {
        if (std::abs(std::hypot(a, b) - 1.0) > 1e-9)
            throw ArgumentError("threshold normal must be unit length");
    }

    /// True when the line can be written as I(Q) = A + B*Q.
    bool is_iq_representable() const { return std::abs(a) > 1e-12; }
    double iq_intercept() const { return -c / a; }  // A
    double iq_slope() const { return -b / a; }      // B
};

namespace detail {

inline IQPoint shot_mean(const ShotSet& set, int column) {
    if (set.records.empty()) throw ArgumentError("empty shot set");
    IQPoint m{0.0, 0.0};
    for (const ShotRecord& rec : set.records) {
        m.i_v += rec.iq[static_cast<std::size_t>(column)].i_v;
        m.q_v += rec.iq[static_cast<std::size_t>(column)].q_v;
    }
    const double n = static_cast<double>(set.records.size());
    return {m.i_v / n, m.q_v / n};
}

}  // namespace detail

/// Perpendicular bisector of the segment joining the two calibration blob
/// means, oriented so the ground mean is on the positive side.
inline Threshold fit_threshold(const ShotSet& ground, const ShotSet& excited) {
    const IQPoint m0 = detail::shot_mean(ground, 0);
    const IQPoint m1 = detail::shot_mean(excited, 0);
    const double ni = m0.i_v - m1.i_v;
    const double nq = m0.q_v - m1.q_v;
    const double len = std::hypot(ni, nq);
    if (len < 1e-12)
        throw ArgumentError("degenerate geometry: calibration blob means coincide");
    Threshold t;
    t.a = ni / len;
    t.b = nq / len;
    const IQPoint mid{(m0.i_v + m1.i_v) / 2.0, (m0.q_v + m1.q_v) / 2.0};
    t.c = -(t.a * mid.i_v + t.b * mid.q_v);
    return t;
}

/// 0 on the ground side, 1 otherwise; exact ties resolve to 0 so
/// classification is deterministic.
inline int classify(const IQPoint& shot, const Threshold& threshold) {
    return threshold.signed_value(shot) >= 0.0 ? 0 : 1;
}

/// Raw assignment counts; first index = measured state, second = prepared
/// state, so each column sums to the shots taken for that preparation.
struct CountVector {
    int dim = 2;
    std::vector<long> n;  // row-major [measured][prepared]

    explicit CountVector(int d) : dim(d), n(static_cast<std::size_t>(d) * d, 0) {}
    long& at(int measured, int prepared) {
        return n[static_cast<std::size_t>(measured) * dim + prepared];
    }
    long at(int measured, int prepared) const {
        return n[static_cast<std::size_t>(measured) * dim + prepared];
    }
    long column_sum(int prepared) const {
        long s = 0;
        for (int m = 0; m < dim; ++m) s += at(m, prepared);
        return s;
    }
};

/// Row-stochastic readout matrix; rows are prepared states, columns
/// measured states (2x2 for one qubit, 4x4 for the register).
struct ProbabilityMatrix {
    int dim = 2;
    std::vector<double> p;  // row-major [prepared][measured]

    explicit ProbabilityMatrix(int d) : dim(d), p(static_cast<std::size_t>(d) * d, 0.0) {}
    double& at(int prepared, int measured) {
        return p[static_cast<std::size_t>(prepared) * dim + measured];
    }
    double at(int prepared, int measured) const {
        return p[static_cast<std::size_t>(prepared) * dim + measured];
    }
    std::vector<double> row(int prepared) const {
        const auto begin = p.begin() + static_cast<std::ptrdiff_t>(prepared) * dim;
        return {begin, begin + dim};
    }

    static ProbabilityMatrix identity(int d) {
        ProbabilityMatrix m(d);
        for (int i = 0; i < d; ++i) m.at(i, i) = 1.0;
        return m;
    }

    void validate(double tol = 1e-9) const {
        for (int i = 0; i < dim; ++i) {
            double sum = 0.0;
            for (int j = 0; j < dim; ++j) {
                const double v = at(i, j);
                if (v < -tol || v > 1.0 + tol)
                    throw ArgumentError("matrix entry outside [0, 1]");
                sum += v;
            }
            if (std::abs(sum - 1.0) > tol) throw ArgumentError("matrix row does not sum to 1");
        }
    }
};

/// Normalizes each prepared-state column of a count vector into matrix rows.
inline ProbabilityMatrix probabilities_from_counts(const CountVector& counts) {
    ProbabilityMatrix m(counts.dim);
    for (int prepared = 0; prepared < counts.dim; ++prepared) {
        const long total = counts.column_sum(prepared);
        if (total <= 0) throw ArgumentError("no shots for a prepared state");
        for (int measured = 0; measured < counts.dim; ++measured)
            m.at(prepared, measured) =
                static_cast<double>(counts.at(measured, prepared)) / static_cast<double>(total);
    }
    return m;
}

/// Single-qubit readout matrix from the two calibration shot sets.
inline ProbabilityMatrix single_qubit_matrix(const ShotSet& prepared0, const ShotSet& prepared1,
                                             const Threshold& threshold) {
    CountVector counts(2);
    const ShotSet* sets[2] = {&prepared0, &prepared1};
    for (int prepared = 0; prepared < 2; ++prepared) {
        for (const ShotRecord& rec : sets[prepared]->records)
            counts.at(classify(rec.iq[0], threshold), prepared) += 1;
    }
    return probabilities_from_counts(counts);
}

/// Tensor-product composition of two single-qubit matrices; the first factor
/// (the control) supplies the high bit of both indices. Valid only when the
/// register state is separable.
inline ProbabilityMatrix multiplied_paradigm(const ProbabilityMatrix& p_control,
                                             const ProbabilityMatrix& p_target) {
    for (const ProbabilityMatrix* m : {&p_control, &p_target}) {
        if (m->dim != 2) throw ArgumentError("expected 2x2 single-qubit matrices");
        m->validate();
    }
    ProbabilityMatrix joint(4);
    for (int ic = 0; ic < 2; ++ic)
        for (int it = 0; it < 2; ++it)
            for (int jc = 0; jc < 2; ++jc)
                for (int jt = 0; jt < 2; ++jt)
                    joint.at(ic * 2 + it, jc * 2 + jt) =
                        p_control.at(ic, jc) * p_target.at(it, jt);
    return joint;
}

/// Outcome distribution of one register qubit within a two-qubit shot set,
/// ignoring the other qubit.
inline std::array<double, 2> marginal_distribution(const ShotSet& set, int qubit,
                                                   const Threshold& threshold) {
    const int column = set.column_of(qubit);
    std::array<long, 2> counts{0, 0};
    for (const ShotRecord& rec : set.records)
        counts[static_cast<std::size_t>(
            classify(rec.iq[static_cast<std::size_t>(column)], threshold))] += 1;
    const double n = static_cast<double>(set.records.size());
    return {static_cast<double>(counts[0]) / n, static_cast<double>(counts[1]) / n};
}

namespace detail {

inline int row_for_label(const std::string& label) {
    if (label.size() != 2) throw ArgumentError("expected a two-qubit prepared label");
    return static_cast<int>(basis_index(label));
}

}  // namespace detail

/// Joint per-shot counting over the four threshold quadrants: each shot
/// contributes to exactly one measured label (control bit, target bit).
/// This is the paradigm that stays valid for entangled outputs.
inline ProbabilityMatrix conditional_paradigm(const std::vector<ShotSet>& experiments,
                                              const Threshold& threshold_target,
                                              const Threshold& threshold_control) {
    if (experiments.size() != 4) throw ArgumentError("need one shot set per prepared basis state");
    CountVector counts(4);
    std::array<bool, 4> seen{false, false, false, false};
    for (const ShotSet& set : experiments) {
        const int prepared = detail::row_for_label(set.prepared_label);
        if (seen[static_cast<std::size_t>(prepared)])
            throw ArgumentError("duplicate prepared state " + set.prepared_label);
        seen[static_cast<std::size_t>(prepared)] = true;
        const int col_t = set.column_of(kTargetQubit);
        const int col_c = set.column_of(kControlQubit);
        for (const ShotRecord& rec : set.records) {
            const int bit_c = classify(rec.iq[static_cast<std::size_t>(col_c)], threshold_control);
            const int bit_t = classify(rec.iq[static_cast<std::size_t>(col_t)], threshold_target);
            counts.at(bit_c * 2 + bit_t, prepared) += 1;
        }
    }
    return probabilities_from_counts(counts);
}

/// Row-wise tensor product of the per-qubit marginal distributions taken
/// from the same experiment shots. Coincides with the joint counting for
/// separable outputs but discards every correlation.
inline ProbabilityMatrix multiplied_from_shots(const std::vector<ShotSet>& experiments,
                                               const Threshold& threshold_target,
                                               const Threshold& threshold_control) {
    if (experiments.size() != 4) throw ArgumentError("need one shot set per prepared basis state");
    ProbabilityMatrix joint(4);
    std::array<bool, 4> seen{false, false, false, false};
    for (const ShotSet& set : experiments) {
        const int prepared = detail::row_for_label(set.prepared_label);
        if (seen[static_cast<std::size_t>(prepared)])
            throw ArgumentError("duplicate prepared state " + set.prepared_label);
        seen[static_cast<std::size_t>(prepared)] = true;
        const auto marg_c = marginal_distribution(set, kControlQubit, threshold_control);
        const auto marg_t = marginal_distribution(set, kTargetQubit, threshold_target);
        for (int jc = 0; jc < 2; ++jc)
            for (int jt = 0; jt < 2; ++jt)
                joint.at(prepared, jc * 2 + jt) = marg_c[static_cast<std::size_t>(jc)] *
                                                  marg_t[static_cast<std::size_t>(jt)];
    }
    return joint;
}

// --- Hellinger fidelity ------------------------------------------------------

namespace detail {

inline void check_distribution_pair(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size() || p.empty()) throw ArgumentError("distribution dimension mismatch");
    for (std::span<const double> d : {p, q}) {
        double sum = 0.0;
        for (double v : d) {
            if (v < -1e-12) throw ArgumentError("negative probability entry");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-6) throw ArgumentError("distribution is not normalized");
    }
}

}  // namespace detail

/// Similarity of two discrete distributions, [sum_i sqrt(p_i q_i)]^2
/// (the squared Bhattacharyya coefficient): 1 for identical distributions,
/// 0 for disjoint supports.
inline double hellinger_fidelity(std::span<const double> p, std::span<const double> q) {
    detail::check_distribution_pair(p, q);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        s += std::sqrt(std::max(p[i], 0.0) * std::max(q[i], 0.0));
    return s * s;
}

/// Hellinger distance (1/sqrt(2)) * sqrt(sum (sqrt p - sqrt q)^2).
inline double hellinger_distance(std::span<const double> p, std::span<const double> q) {
    detail::check_distribution_pair(p, q);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = std::sqrt(std::max(p[i], 0.0)) - std::sqrt(std::max(q[i], 0.0));
        s += d * d;
    }
    return std::sqrt(s / 2.0);
}

/// The algebraically equivalent fidelity route through the distance,
/// (1 - D^2)^2.
inline double hellinger_fidelity_from_distance(double distance) {
    return (1.0 - distance * distance) * (1.0 - distance * distance);
}

// --- paradigm comparison ------------------------------------------------------

struct FidelityRow {
    std::string state;
    double multiplied = 0.0;
    double conditional = 0.0;
    double advantage_abs = 0.0;  // conditional - multiplied
    double advantage_rel = 0.0;  // advantage_abs / multiplied
};

struct FidelityTable {
    std::vector<FidelityRow> rows;
};

/// Hellinger fidelity of each paradigm's rows against the ideal rows, one
/// table row per prepared basis state. The conditional-over-multiplied gain
/// is reported both as an absolute and as a relative delta.
inline FidelityTable paradigm_report(const ProbabilityMatrix& ideal,
                                     const ProbabilityMatrix& multiplied,
                                     const ProbabilityMatrix& conditional) {
    if (ideal.dim != multiplied.dim || ideal.dim != conditional.dim)
        throw ArgumentError("matrix dimension mismatch");
    const int num_qubits = ideal.dim == 2 ? 1 : 2;
    FidelityTable table;
    for (int prepared = 0; prepared < ideal.dim; ++prepared) {
        FidelityRow row;
        row.state = basis_label(static_cast<std::size_t>(prepared), num_qubits);
        const auto ideal_row = ideal.row(prepared);
        row.multiplied = hellinger_fidelity(ideal_row, multiplied.row(prepared));
        row.conditional = hellinger_fidelity(ideal_row, conditional.row(prepared));
        row.advantage_abs = row.conditional - row.multiplied;
        row.advantage_rel = row.multiplied > 1e-12 ? row.advantage_abs / row.multiplied : 0.0;
        table.rows.push_back(row);
    }
    return table;
}

}  // namespace qreadout
