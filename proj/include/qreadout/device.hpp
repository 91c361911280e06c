#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qreadout/errors.hpp"
#include "qreadout/io_util.hpp"

namespace qreadout {

/// Physical constants of one flux-tunable transmon.
struct QubitParams {
    double nu01_ghz;    // |0>-|1> transition at the flux sweet spot
    double ec_ghz;      // charging energy
    double t1_us;       // relaxation time
    double t2echo_us;   // Hahn-echo dephasing time
};

/// Two-qubit subregister constants. `defaults()` describes the bundled
/// demo pair: a lower-frequency target (q0) and a higher-frequency,
/// better-connected control (q2) coupled through a bus resonator.
struct DeviceParams {
    QubitParams q0{4.5546, 0.340, 24.0, 10.0};
    QubitParams q2{5.6503, 0.274, 8.0, 6.0};
    double j_ghz = 0.012;       // effective qubit-qubit coupling
    double readout_ns = 200.0;  // readout pulse duration

    static DeviceParams defaults() { return DeviceParams{}; }

    void validate() const {
        for (const QubitParams* q : {&q0, &q2}) {
            if (q->nu01_ghz <= 0 || q->ec_ghz <= 0 || q->t1_us <= 0 || q->t2echo_us <= 0)
                throw ArgumentError("device parameters must be strictly positive");
            if (q->t2echo_us > 2.0 * q->t1_us + 1e-12)
                throw ArgumentError("T2echo cannot exceed 2*T1");
        }
        if (j_ghz <= 0 || readout_ns <= 0)
            throw ArgumentError("device parameters must be strictly positive");
    }
};

/// Probability that an excited qubit relaxes during one readout pulse.
inline double decay_during_readout(double t1_us, double readout_ns) {
    return 1.0 - std::exp(-readout_ns / (t1_us * 1e3));
}

/// Flux-tuned Josephson energy EJ0 * cos(pi * phi/phi0). May go negative;
/// callers restrict the flux window.
inline double josephson_energy(double ej0_ghz, double flux_ratio) {
    return ej0_ghz * std::cos(std::numbers::pi * flux_ratio);
}

/// Transmon transition frequency sqrt(8*EJ*EC) - EC.
inline double transmon_frequency(double ej_ghz, double ec_ghz) {
    if (ej_ghz <= 0 || ec_ghz <= 0) throw ArgumentError("EJ and EC must be positive");
    return std::sqrt(8.0 * ej_ghz * ec_ghz) - ec_ghz;
}

/// Dispersive shift g^2 / Delta of a qubit-coupled resonator.
inline double dispersive_shift(double g_ghz, double delta_ghz) {
    if (delta_ghz == 0.0) throw ArgumentError("dispersive shift undefined at zero detuning");
    return g_ghz * g_ghz / delta_ghz;
}

/// Hybridized one-excitation frequencies of two coupled qubits,
/// ((nu1+nu2) +- sqrt((nu1-nu2)^2 + 4 J^2)) / 2, upper branch first.
/// The lower branch is computed as (nu1+nu2) - upper so the sum rule
/// upper + lower == nu1 + nu2 holds to the last bit.
inline std::pair<double, double> dressed_frequencies(double nu1_ghz, double nu2_ghz,
                                                     double j_ghz) {
    const double sum = nu1_ghz + nu2_ghz;
    const double split = std::hypot(nu1_ghz - nu2_ghz, 2.0 * j_ghz);
    const double upper = (sum + split) / 2.0;
    return {upper, sum - upper};
}

// --- coupled two-transmon + bus-resonator model ---------------------------

/// Two anharmonic (Kerr) modes exchange-coupled to one resonator mode.
struct CoupledSystemModel {
    double nu1_ghz;
    double nu2_ghz;
    double ec1_ghz;
    double ec2_ghz;
    double resonator_ghz;
    double g1r_ghz;
    double g2r_ghz;
    int levels_q1 = 3;
    int levels_q2 = 3;
    int levels_r = 3;

    /// True when both qubits are far detuned from the resonator relative to
    /// their couplings (ratio > 10).
    bool dispersive() const {
        const double r1 = std::abs(nu1_ghz - resonator_ghz) / std::max(g1r_ghz, 1e-300);
        const double r2 = std::abs(nu2_ghz - resonator_ghz) / std::max(g2r_ghz, 1e-300);
        return r1 > 10.0 && r2 > 10.0;
    }
};

namespace detail {

// Mode index layout: flat = (n1 * L2 + n2) * Lr + nr.
struct ModeIndexer {
    int l1, l2, lr;
    int dim() const { return l1 * l2 * lr; }
    int flat(int n1, int n2, int nr) const { return (n1 * l2 + n2) * lr + nr; }
};

}  // namespace detail

/// Dense Hermitian matrix (GHz units) of
///   sum_i [nu_i n_i - EC_i/2 n_i(n_i - 1)] + nu_r n_r
///   + sum_i g_ir (b_i^dag a_r + b_i a_r^dag),
/// real symmetric by construction. Basis: |n1 n2 nr> with n1 slowest.
inline Eigen::MatrixXd build_hamiltonian(const CoupledSystemModel& m) {
    if (m.levels_q1 < 2 || m.levels_q2 < 2 || m.levels_r < 2)
        throw ArgumentError("every mode needs at least two levels");
    const detail::ModeIndexer idx{m.levels_q1, m.levels_q2, m.levels_r};
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(idx.dim(), idx.dim());

    auto kerr = [](double nu, double ec, int n) {
        return nu * n - 0.5 * ec * n * (n - 1);
    };

    for (int n1 = 0; n1 < m.levels_q1; ++n1) {
        for (int n2 = 0; n2 < m.levels_q2; ++n2) {
            for (int nr = 0; nr < m.levels_r; ++nr) {
                const int row = idx.flat(n1, n2, nr);
                h(row, row) = kerr(m.nu1_ghz, m.ec1_ghz, n1) + kerr(m.nu2_ghz, m.ec2_ghz, n2) +
                              m.resonator_ghz * nr;
                // b1^dag a_r : |n1+1, nr-1> <n1, nr|
                if (n1 + 1 < m.levels_q1 && nr > 0) {
                    const int col = idx.flat(n1 + 1, n2, nr - 1);
                    const double amp = m.g1r_ghz * std::sqrt(double(n1 + 1)) * std::sqrt(double(nr));
                    h(col, row) += amp;
                    h(row, col) += amp;
                }
                if (n2 + 1 < m.levels_q2 && nr > 0) {
                    const int col = idx.flat(n1, n2 + 1, nr - 1);
                    const double amp = m.g2r_ghz * std::sqrt(double(n2 + 1)) * std::sqrt(double(nr));
                    h(col, row) += amp;
                    h(row, col) += amp;
                }
            }
        }
    }
    return h;
}

// --- avoided-level-crossing fit -------------------------------------------

enum class Branch { Upper, Lower };

/// One spectroscopy point: swept bare frequency of the tuned qubit (GHz),
/// measured dressed frequency (GHz), branch label.
struct ALCPoint {
    double swept_ghz;
    double freq_ghz;
    Branch branch;
};

struct ALCDataset {
    std::vector<ALCPoint> points;

    void validate() const {
        std::size_t upper = 0, lower = 0;
        for (const ALCPoint& p : points) (p.branch == Branch::Upper ? upper : lower) += 1;
        if (upper > 0 && upper < 3) throw ArgumentError("upper branch needs at least 3 points");
        if (lower > 0 && lower < 3) throw ArgumentError("lower branch needs at least 3 points");
        if (upper + lower == 0) throw ArgumentError("empty dataset");
    }
};

struct ALCFit {
    double nu_fixed_ghz;
    double j_ghz;            // reported non-negative
    double rms_residual_ghz;
    int iterations;
};

namespace detail {

inline double alc_model(double x, double nu_fixed, double j, Branch b) {
    const auto [upper, lower] = dressed_frequencies(x, nu_fixed, j);
    return b == Branch::Upper ? upper : lower;
}

inline double alc_cost(const ALCDataset& data, double nu_fixed, double j) {
    double c = 0.0;
    for (const ALCPoint& p : data.points) {
        const double r = alc_model(p.swept_ghz, nu_fixed, j, p.branch) - p.freq_ghz;
        c += r * r;
    }
    return c;
}

struct GaussNewtonResult {
    double nu_fixed, j, cost;
    int iterations;
    bool converged;
};

// Damped Gauss-Newton on (nu_fixed, J); the model is smooth and the
// Jacobian is analytic. J enters squared, so its sign is irrelevant and the
// result is folded to |J|.
inline GaussNewtonResult alc_gauss_newton(const ALCDataset& data, double nu0, double j0) {
    double nu = nu0, j = j0;
    double cost = alc_cost(data, nu, j);
    int used = 0;
    bool converged = false;
    constexpr int kMaxIterations = 200;
    for (int it = 0; it < kMaxIterations && !converged; ++it) {
        used = it + 1;
        Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
        Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
        for (const ALCPoint& p : data.points) {
            const double s = p.branch == Branch::Upper ? 1.0 : -1.0;
            const double split = std::hypot(p.swept_ghz - nu, 2.0 * j);
            const double safe = std::max(split, 1e-300);
            const double r = alc_model(p.swept_ghz, nu, j, p.branch) - p.freq_ghz;
            const Eigen::Vector2d grad{0.5 + s * (nu - p.swept_ghz) / (2.0 * safe),
                                       s * 2.0 * j / safe};
            jtj += grad * grad.transpose();
            jtr += grad * r;
        }
        double lambda = 1e-12;
        bool stepped = false;
        for (int damp = 0; damp < 12; ++damp) {
            const Eigen::Matrix2d lhs = jtj + lambda * Eigen::Matrix2d::Identity();
            const Eigen::Vector2d delta = lhs.ldlt().solve(-jtr);
            if (delta.allFinite()) {
                const double nu_try = nu + delta(0);
                const double j_try = j + delta(1);
                const double cost_try = alc_cost(data, nu_try, j_try);
                if (cost_try <= cost) {
                    const double drop = cost - cost_try;
                    nu = nu_try;
                    j = j_try;
                    cost = cost_try;
                    stepped = true;
                    if (drop <= 1e-30 + 1e-14 * cost) converged = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if (!stepped) converged = true;  // damping exhausted at a (local) minimum
    }
    return {nu, std::abs(j), cost, used, converged};
}

}  // namespace detail

/// Least-squares fit of the dressed-frequency model over (nu_fixed, J).
/// Multi-start over J in {1, 5, 10, 20, 50} MHz guards against the
/// branch-assignment bimodality of the loss.
inline ALCFit fit_avoided_crossing(const ALCDataset& data) {
    data.validate();
    if (data.points.size() < 4)
        throw FitError("need at least 4 points spanning the crossing");
    const auto [xmin, xmax] = std::minmax_element(
        data.points.begin(), data.points.end(),
        [](const ALCPoint& a, const ALCPoint& b) { return a.swept_ghz < b.swept_ghz; });
    if (xmax->swept_ghz - xmin->swept_ghz < 1e-12)
        throw FitError("degenerate dataset: all swept values identical");

    // Plausible fixed-frequency starts: the sweep midpoint and the mean
    // measured frequency.
    double mean_f = 0.0;
    for (const ALCPoint& p : data.points) mean_f += p.freq_ghz;
    mean_f /= static_cast<double>(data.points.size());
    const double mid_x = 0.5 * (xmin->swept_ghz + xmax->swept_ghz);

    detail::GaussNewtonResult best{0, 0, std::numeric_limits<double>::infinity(), 0, false};
    for (double nu0 : {mid_x, mean_f}) {
        for (double j0 : {0.001, 0.005, 0.010, 0.020, 0.050}) {
            const auto r = detail::alc_gauss_newton(data, nu0, j0);
            if (r.converged && r.cost < best.cost) best = r;
        }
    }
    if (!std::isfinite(best.cost))
        throw FitError("avoided-crossing fit did not converge from any start (" +
                       std::to_string(data.points.size()) + " points)");
    const double rms = std::sqrt(best.cost / static_cast<double>(data.points.size()));
    return {best.nu_fixed, best.j, rms, best.iterations};
}

// --- flux-pulse exchange dynamics ------------------------------------------

/// Population transferred out of the doubly excited state by the two-level
/// exchange with the adjacent non-computational level (|11> <-> |02>, also
/// written |20> depending on which qubit hosts the second excitation).
/// Two-level Rabi formula with effective coupling Omega = 2*sqrt(2)*J:
///   P(t) = Omega^2/(Omega^2 + delta^2) * sin^2(pi * sqrt(Omega^2+delta^2) * t).
inline double chevron_population(double j_ghz, double detuning_ghz, double duration_ns) {
    const double omega = 2.0 * std::numbers::sqrt2 * j_ghz;
    const double general = std::hypot(omega, detuning_ghz);
    if (general == 0.0) return 0.0;
    const double amp = (omega * omega) / (general * general);
    const double s = std::sin(std::numbers::pi * general * duration_ns);
    return amp * s * s;
}

/// Time of the first complete population transfer on resonance, 1/(4*sqrt(2)*J).
inline double chevron_full_transfer_ns(double j_ghz) {
    if (j_ghz <= 0) throw ArgumentError("coupling must be positive");
    return 1.0 / (4.0 * std::numbers::sqrt2 * j_ghz);
}

// --- conditional-oscillation analysis ---------------------------------------

/// Phase sweep of one oscillation experiment: readout voltage on the target
/// and control channels versus the sweep phase.
struct FringeScan {
    std::vector<double> phase_rad;
    std::vector<double> target_v;
    std::vector<double> control_v;
};

struct CosineFit {
    double amplitude;
    double phase_rad;  // v = amplitude * cos(phase_sweep + phase_rad) + offset
    double offset;
    double rms_residual;
};

/// Linear least squares of v = a cos(phi) + b sin(phi) + C, reported as
/// amplitude/phase/offset. Flat data is a valid fit (amplitude ~ 0, phase
/// meaningless); callers that need the phase must reject small amplitudes.
inline CosineFit fit_cosine(std::span<const double> phase, std::span<const double> value) {
    if (phase.size() != value.size()) throw ArgumentError("phase/value size mismatch");
    if (phase.size() < 3) throw FitError("cosine fit needs at least 3 samples");
    Eigen::MatrixXd design(phase.size(), 3);
    Eigen::VectorXd rhs(value.size());
    for (std::size_t i = 0; i < phase.size(); ++i) {
        design(i, 0) = std::cos(phase[i]);
        design(i, 1) = std::sin(phase[i]);
        design(i, 2) = 1.0;
    }
    for (std::size_t i = 0; i < value.size(); ++i) rhs(i) = value[i];
    const Eigen::Vector3d coeff = design.colPivHouseholderQr().solve(rhs);
    if (!coeff.allFinite()) throw FitError("cosine fit is singular (degenerate phase values)");
    const double a = coeff(0), b = coeff(1), c = coeff(2);
    const double rms = std::sqrt((design * coeff - rhs).squaredNorm() /
                                 static_cast<double>(value.size()));
    return {std::hypot(a, b), std::atan2(-b, a), c, rms};
}

struct ConditionalPhaseResult {
    double theta_2q_deg;  // wrapped to [0, 360)
    double leakage;       // offset difference on the control channel, input units
    CosineFit on_target, off_target;
};

namespace detail {

inline void check_full_period(const FringeScan& scan, const char* which) {
    const std::size_t n = scan.phase_rad.size();
    if (n < 3 || scan.target_v.size() != n || scan.control_v.size() != n)
        throw ArgumentError(std::string(which) + " fringe: need >=3 aligned samples");
    const auto [lo, hi] = std::minmax_element(scan.phase_rad.begin(), scan.phase_rad.end());
    const double span = *hi - *lo;
    // Accept a uniform grid over [0, 2*pi) whose last point stops one step
    // short of the full turn.
    if (span * static_cast<double>(n) / static_cast<double>(n - 1) <
        2.0 * std::numbers::pi - 1e-9)
        throw ArgumentError(std::string(which) + " fringe spans less than one full period");
}

}  // namespace detail

/// Conditional phase and leakage from the On/Off oscillation pair. The
/// target channels provide the fitted phases, theta = On - Off wrapped to
/// [0, 360) degrees; the control channels provide the leakage as the signed
/// difference of fitted offsets.
inline ConditionalPhaseResult conditional_phase(const FringeScan& fringe_on,
                                                const FringeScan& fringe_off) {
    detail::check_full_period(fringe_on, "On");
    detail::check_full_period(fringe_off, "Off");
    const CosineFit on = fit_cosine(fringe_on.phase_rad, fringe_on.target_v);
    const CosineFit off = fit_cosine(fringe_off.phase_rad, fringe_off.target_v);
    for (const CosineFit* f : {&on, &off}) {
        if (f->amplitude < 1e-9 * (std::abs(f->offset) + 1.0))
            throw FitError("flat target fringe: oscillation phase is undefined");
    }
    double theta = (on.phase_rad - off.phase_rad) * 180.0 / std::numbers::pi;
    theta = std::fmod(theta, 360.0);
    if (theta < 0) theta += 360.0;
    const CosineFit on_ctl = fit_cosine(fringe_on.phase_rad, fringe_on.control_v);
    const CosineFit off_ctl = fit_cosine(fringe_off.phase_rad, fringe_off.control_v);
    return {theta, on_ctl.offset - off_ctl.offset, on, off};
}

// --- CSV ingestion -----------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        const auto begin = field.find_first_not_of(" \t\r");
        const auto end = field.find_last_not_of(" \t\r");
        out.push_back(begin == std::string::npos ? "" : field.substr(begin, end - begin + 1));
    }
    return out;
}

}  // namespace detail

/// CSV with header `swept_ghz,freq_ghz,branch`; branch is upper/lower (or +/-).
inline ALCDataset load_alc_csv(std::istream& in) {
    ALCDataset data;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;  // first non-comment row is the header
            continue;
        }
        const auto fields = detail::split_csv_row(line);
        if (fields.size() != 3) throw ParseError(line_no, "expected swept_ghz,freq_ghz,branch");
        ALCPoint p{};
        if (!detail::parse_double(fields[0], p.swept_ghz) ||
            !detail::parse_double(fields[1], p.freq_ghz))
            throw ParseError(line_no, "bad numeric field");
        if (fields[2] == "upper" || fields[2] == "+")
            p.branch = Branch::Upper;
        else if (fields[2] == "lower" || fields[2] == "-")
            p.branch = Branch::Lower;
        else
            throw ParseError(line_no, "branch must be upper/lower/+/-");
        data.points.push_back(p);
    }
    return data;
}

/// CSV with header `phase_rad,target_v,control_v`.
inline FringeScan load_fringe_csv(std::istream& in) {
    FringeScan scan;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        const auto fields = detail::split_csv_row(line);
        if (fields.size() != 3) throw ParseError(line_no, "expected phase_rad,target_v,control_v");
        double phase, target, control;
        if (!detail::parse_double(fields[0], phase) || !detail::parse_double(fields[1], target) ||
            !detail::parse_double(fields[2], control))
            throw ParseError(line_no, "bad numeric field");
        scan.phase_rad.push_back(phase);
        scan.target_v.push_back(target);
        scan.control_v.push_back(control);
    }
    return scan;
}

}  // namespace qreadout
