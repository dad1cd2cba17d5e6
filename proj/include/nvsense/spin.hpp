#pragma once

// Spin-1 algebra and the NV ground-state Hamiltonians.
//
// Basis ordering is fixed to (|+1>, |0>, |-1>) everywhere. Every frequency,
// rate and gamma_e * B product is a linear frequency in Hz; conversion to
// angular units happens only at the boundary of the time-domain integrator.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <tuple>

#include <Eigen/Dense>

#include "nvsense/error.hpp"

namespace nvsense {

using Complex = std::complex<double>;
using SpinMatrix = Eigen::Matrix3cd;
using SpinVector = Eigen::Vector3cd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Index of each magnetic sublevel in the fixed basis.
enum class Level : int { Plus = 0, Zero = 1, Minus = 2 };

constexpr int index(Level l) { return static_cast<int>(l); }

struct NVParameters {
    double D = 2.882e9;          ///< zero-field splitting, Hz
    double Ex = 4.235e6;         ///< strain along x, Hz
    double gamma_e = 28.0e9;     ///< gyromagnetic ratio, Hz/T
    double Bx = 0.0;             ///< perpendicular DC field, T
    double Gamma_b = 0.5e6;      ///< bright-state effective decay rate, Hz
    double Gamma_d = 0.5e6;      ///< dark-state effective decay rate, Hz

    /// Throws InvalidArgument when an invariant is violated.
    void validate() const {
        if (!(D > 0.0)) throw InvalidArgument("nv.D must be > 0");
        if (!(Ex >= 0.0)) throw InvalidArgument("nv.Ex must be >= 0");
        if (!(gamma_e > 0.0)) throw InvalidArgument("nv.gamma_e must be > 0");
        if (!(Bx >= 0.0)) throw InvalidArgument("nv.Bx must be >= 0");
        if (!(Gamma_b > 0.0)) throw InvalidArgument("nv.Gamma_b must be > 0");
        if (!(Gamma_d > 0.0)) throw InvalidArgument("nv.Gamma_d must be > 0");
        if (!(gamma_e * Bx < D / 10.0))
            throw InvalidArgument("nv: gamma_e*Bx must stay below D/10 for the second-order expansion");
    }
};

/// Zero-field splitting and strain after absorbing the perpendicular Zeeman term.
struct EffectiveZFS {
    double D_prime = 0.0;
    double Ex_prime = 0.0;
};

enum class MwAxis { X, Y, XY };

inline std::string to_string(MwAxis a) {
    switch (a) {
    case MwAxis::X: return "x";
    case MwAxis::Y: return "y";
    case MwAxis::XY: return "xy";
    }
    return "?";
}

/// The three drive tones. Amplitudes in tesla, frequencies in Hz.
///
/// mw_axis selects which bare transition the microwave addresses: X couples
/// |0> to |B>, Y couples |0> to |D>, XY drives both quadratures with the
/// full amplitude each (the usual situation for an antenna-driven ensemble).
struct DriveConfig {
    double B_RFc = 0.0;
    double omega_RFc = 0.0;
    double B_RFt = 0.0;
    double omega_RFt = 0.0;
    double B_MW = 0.0;
    double omega_MW = 0.0;
    MwAxis mw_axis = MwAxis::XY;

    void validate() const {
        if (B_RFc < 0.0 || B_RFt < 0.0 || B_MW < 0.0)
            throw InvalidArgument("drive: amplitudes must be >= 0");
        if (B_RFc > 0.0 && !(omega_RFc > 0.0))
            throw InvalidArgument("drive: omega_RFc must be > 0 when B_RFc > 0");
        if (B_RFt > 0.0 && !(omega_RFt > 0.0))
            throw InvalidArgument("drive: omega_RFt must be > 0 when B_RFt > 0");
        if (B_MW > 0.0 && !(omega_MW > 0.0))
            throw InvalidArgument("drive: omega_MW must be > 0 when B_MW > 0");
    }
};

struct SpinOperators {
    SpinMatrix Sx;
    SpinMatrix Sy;
    SpinMatrix Sz;
};

/// Spin-1 operators with Sz = diag(+1, 0, -1).
inline SpinOperators spin_operators() {
    const double r = 1.0 / std::numbers::sqrt2;
    const Complex i(0.0, 1.0);
    SpinOperators s;
    s.Sx << 0, r, 0,
            r, 0, r,
            0, r, 0;
    s.Sy << 0, -i * r, 0,
            i * r, 0, -i * r,
            0, i * r, 0;
    s.Sz << 1, 0, 0,
            0, 0, 0,
            0, 0, -1;
    return s;
}

/// |B> = (|+1> + |-1>)/sqrt2.
inline SpinVector bright_state() {
    const double r = 1.0 / std::numbers::sqrt2;
    return SpinVector(r, 0.0, r);
}

/// |D> = (|+1> - |-1>)/sqrt2.
inline SpinVector dark_state() {
    const double r = 1.0 / std::numbers::sqrt2;
    return SpinVector(r, 0.0, -r);
}

/// Columns are |0>, |B>, |D> expressed in the (|+1>, |0>, |-1>) basis.
inline SpinMatrix bright_dark_basis() {
    SpinMatrix U;
    U.col(0) = SpinVector(0.0, 1.0, 0.0);
    U.col(1) = bright_state();
    U.col(2) = dark_state();
    return U;
}

inline EffectiveZFS effective_zfs(const NVParameters& p) {
    p.validate();
    const double zeeman = p.gamma_e * p.Bx;
    const double shift = zeeman * zeeman / (p.D + p.Ex);
    return {p.D + 1.5 * shift, p.Ex + 0.5 * shift};
}

/// H = D' Sz^2 + E'x (Sx^2 - Sy^2).
inline SpinMatrix build_bare_hamiltonian(const EffectiveZFS& zfs) {
    const auto s = spin_operators();
    return zfs.D_prime * s.Sz * s.Sz + zfs.Ex_prime * (s.Sx * s.Sx - s.Sy * s.Sy);
}

/// Bare Hamiltonian with the perpendicular Zeeman term kept explicitly.
/// Used to cross-check the second-order effective parameters.
inline SpinMatrix build_full_zeeman_hamiltonian(const NVParameters& p) {
    const auto s = spin_operators();
    return p.D * s.Sz * s.Sz + p.Ex * (s.Sx * s.Sx - s.Sy * s.Sy) + p.gamma_e * p.Bx * s.Sx;
}

/// Microwave coupling operator for the selected axis.
inline SpinMatrix mw_operator(MwAxis axis) {
    const auto s = spin_operators();
    switch (axis) {
    case MwAxis::X: return s.Sx;
    case MwAxis::Y: return s.Sy;
    case MwAxis::XY: return s.Sx + s.Sy;
    }
    return s.Sx;
}

/// Lab-frame Hamiltonian with every drive term kept (no rotating-wave
/// approximation). The perpendicular Zeeman term is already contained in
/// D' and E'x, so it is not added again.
inline SpinMatrix build_lab_hamiltonian(const NVParameters& params, const DriveConfig& drive, double t) {
    const auto zfs = effective_zfs(params);
    const auto s = spin_operators();
    const double rf = params.gamma_e * (drive.B_RFc * std::cos(kTwoPi * drive.omega_RFc * t) +
                                        drive.B_RFt * std::cos(kTwoPi * drive.omega_RFt * t));
    const double mw = params.gamma_e * drive.B_MW * std::cos(kTwoPi * drive.omega_MW * t);
    return build_bare_hamiltonian(zfs) + rf * s.Sz + mw * mw_operator(drive.mw_axis);
}

inline bool is_hermitian(const SpinMatrix& m, double rel_tol = 1e-12) {
    const double scale = std::max(m.norm(), 1e-300);
    return (m - m.adjoint()).norm() <= rel_tol * scale;
}

} // namespace nvsense
