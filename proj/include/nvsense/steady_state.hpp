#pragma once

// Two-mode coupled-oscillator reduction of the driven NV spin and the
// continuous-wave ODMR spectra built from it.

#include <cmath>
#include <complex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nvsense/error.hpp"
#include "nvsense/linewidth.hpp"
#include "nvsense/parallel.hpp"
#include "nvsense/spin.hpp"

namespace nvsense {

/// Reduced steady-state model: a driven mode b and a mode d coupled to it.
struct OscillatorModel {
    double omega_b = 0.0; ///< detuning of the driven mode, Hz
    double omega_d = 0.0; ///< detuning of the coupled mode, Hz
    double lambda = 0.0;  ///< microwave drive strength, Hz
    double J = 0.0;       ///< mode-mode coupling, Hz
    double Gamma_b = 1.0;
    double Gamma_d = 1.0;

    void validate() const {
        if (!(Gamma_b > 0.0) || !(Gamma_d > 0.0)) throw InvalidArgument("oscillator: decay rates must be > 0");
        if (!(lambda >= 0.0)) throw InvalidArgument("oscillator: lambda must be >= 0");
    }

    /// Outside the weak-drive regime the linearized populations lose accuracy.
    bool strong_drive() const { return lambda > 0.5 * std::min(Gamma_b, Gamma_d); }
};

struct Populations {
    double p0 = 1.0;
    double pb = 0.0;
    double pd = 0.0;
};

/// Closed-form steady-state populations of the two-mode model.
inline Populations population_p0(const OscillatorModel& m) {
    m.validate();
    const std::complex<double> zb(m.omega_b, -m.Gamma_b);
    const std::complex<double> zd(m.omega_d, -m.Gamma_d);
    const std::complex<double> den = zb * zd - m.J * m.J;
    const double pb = std::norm(-m.lambda * zd / den);
    const double pd = std::norm(m.lambda * m.J / den);
    const double p0 = 1.0 - pb - pd;
    if (p0 < 0.0) {
        std::ostringstream os;
        os << "p0 = " << p0 << " < 0 (lambda = " << m.lambda << " Hz too strong for the linearized model)";
        throw WeakDriveViolation(os.str());
    }
    return {p0, pb, pd};
}

/// The four second rotating frames: Plus/Minus names the dressed level the
/// microwave drives, Low/High the target resonance the frame keeps
/// (omega_RFt near 2E'x - gamma_e B_RFc or 2E'x + gamma_e B_RFc).
enum class Branch { PlusLow, MinusLow, PlusHigh, MinusHigh };

/// Which bare transition the microwave probes: |0>-|B> (x axis) or |0>-|D> (y axis).
enum class MwFamily { Bright, Dark };

enum class Scheme { Bare, Dressed, DoubleDressed, PreviousSingleRF };

inline std::string to_string(Branch b) {
    switch (b) {
    case Branch::PlusLow: return "plus_low";
    case Branch::MinusLow: return "minus_low";
    case Branch::PlusHigh: return "plus_high";
    case Branch::MinusHigh: return "minus_high";
    }
    return "?";
}

inline std::string to_string(Scheme s) {
    switch (s) {
    case Scheme::Bare: return "bare";
    case Scheme::Dressed: return "dressed";
    case Scheme::DoubleDressed: return "double_dressed";
    case Scheme::PreviousSingleRF: return "previous";
    }
    return "?";
}

inline std::string to_string(MwFamily f) { return f == MwFamily::Bright ? "bright" : "dark"; }

/// Mode energies of a reduction at omega_MW = 0: at microwave frequency w the
/// detunings are omega_b = level_b - w and omega_d = level_d - w. The normal
/// modes of [[level_b, J], [J, level_d]] are the resonant microwave frequencies.
struct ModeLevels {
    double level_b = 0.0;
    double level_d = 0.0;
    double lambda = 0.0;
    double J = 0.0;

    OscillatorModel at(double omega_MW, double Gamma_b, double Gamma_d) const {
        return {level_b - omega_MW, level_d - omega_MW, lambda, J, Gamma_b, Gamma_d};
    }

    /// Microwave frequencies of the dips this reduction produces (the driven
    /// level alone when J = 0, since the other mode is then dark).
    std::vector<double> resonances() const {
        if (J == 0.0) return {level_b};
        const double mean = 0.5 * (level_b + level_d);
        const double half = 0.5 * std::hypot(level_b - level_d, 2.0 * J);
        return {mean - half, mean + half};
    }
};

inline constexpr double kDefaultResonanceTolerance = 1e3;

inline void require_resonant_control(const EffectiveZFS& zfs, const DriveConfig& drive, double tol_res) {
    const double off = std::abs(drive.omega_RFc - 2.0 * zfs.Ex_prime);
    if (off > tol_res) {
        std::ostringstream os;
        os << "control RF at " << drive.omega_RFc << " Hz is " << off << " Hz away from 2E'x = "
           << 2.0 * zfs.Ex_prime << " Hz (tolerance " << tol_res << " Hz)";
        throw ControlOffResonance(os.str());
    }
}

/// Mode levels of one dressed-state reduction. The dark family is the bright
/// one with the microwave shifted up by one control photon.
inline ModeLevels branch_levels(const NVParameters& params, const EffectiveZFS& zfs, const DriveConfig& drive,
                                Branch branch, MwFamily family = MwFamily::Bright,
                                double tol_res = kDefaultResonanceTolerance) {
    require_resonant_control(zfs, drive, tol_res);
    const double center = zfs.D_prime + zfs.Ex_prime - (family == MwFamily::Dark ? drive.omega_RFc : 0.0);
    const double c = 0.5 * params.gamma_e * drive.B_RFc;
    const double delta = 2.0 * zfs.Ex_prime - drive.omega_RFt;
    ModeLevels m;
    m.lambda = params.gamma_e * drive.B_MW / (2.0 * std::numbers::sqrt2);
    m.J = 0.25 * params.gamma_e * drive.B_RFt;
    switch (branch) {
    case Branch::PlusLow:
        m.level_b = center + c;
        m.level_d = center - c + delta;
        break;
    case Branch::MinusLow:
        m.level_b = center - c;
        m.level_d = center + c - delta;
        break;
    case Branch::PlusHigh:
        m.level_b = center + c;
        m.level_d = center - c - delta;
        break;
    case Branch::MinusHigh:
        m.level_b = center - c;
        m.level_d = center + c + delta;
        break;
    }
    return m;
}

inline OscillatorModel branch_model(const NVParameters& params, const EffectiveZFS& zfs, const DriveConfig& drive,
                                    Branch branch, MwFamily family = MwFamily::Bright,
                                    double tol_res = kDefaultResonanceTolerance) {
    return branch_levels(params, zfs, drive, branch, family, tol_res)
        .at(drive.omega_MW, params.Gamma_b, params.Gamma_d);
}

/// Single-RF reduction: the RF both dresses |B>,|D> and is the sensed field.
/// B_RFc/omega_RFc carry that field. For the dark family the driven mode is |D>.
inline ModeLevels previous_levels(const EffectiveZFS& zfs, const NVParameters& params, const DriveConfig& drive,
                                  MwFamily family) {
    ModeLevels m;
    m.lambda = 0.5 * params.gamma_e * drive.B_MW;
    m.J = 0.5 * params.gamma_e * drive.B_RFc;
    if (family == MwFamily::Bright) {
        m.level_b = zfs.D_prime + zfs.Ex_prime;
        m.level_d = zfs.D_prime - zfs.Ex_prime + drive.omega_RFc;
    } else {
        m.level_b = zfs.D_prime - zfs.Ex_prime;
        m.level_d = zfs.D_prime + zfs.Ex_prime - drive.omega_RFc;
    }
    return m;
}

/// Branches whose frame keeps the near-resonant rotating component of the
/// target: the Low pair for omega_RFt <= 2E'x, the High pair above.
inline std::array<Branch, 2> resonant_branches(const EffectiveZFS& zfs, const DriveConfig& drive) {
    if (drive.omega_RFt <= 2.0 * zfs.Ex_prime) return {Branch::PlusLow, Branch::MinusLow};
    return {Branch::PlusHigh, Branch::MinusHigh};
}

inline std::vector<MwFamily> families(MwAxis axis) {
    switch (axis) {
    case MwAxis::X: return {MwFamily::Bright};
    case MwAxis::Y: return {MwFamily::Dark};
    case MwAxis::XY: return {MwFamily::Bright, MwFamily::Dark};
    }
    return {};
}

struct SpectrumOptions {
    double contrast_scale = 0.02;
    double tol_res = kDefaultResonanceTolerance;
    /// Replaces the NV decay rates for the dressed schemes when present.
    std::optional<LinewidthModel> linewidth;
    unsigned threads = 1;
};

/// One additive contribution to the spectrum.
struct SpectrumTerm {
    ModeLevels levels;
    double weight = 0.0;
    double Gamma_b = 1.0;
    double Gamma_d = 1.0;
    MwFamily family = MwFamily::Bright;
    std::optional<Branch> branch;
};

/// The reductions that make up a scheme's spectrum, equally weighted.
inline std::vector<SpectrumTerm> spectrum_terms(const NVParameters& params, const DriveConfig& drive, Scheme scheme,
                                                const SpectrumOptions& opt = {}) {
    params.validate();
    drive.validate();
    const auto zfs = effective_zfs(params);
    std::vector<SpectrumTerm> terms;
    switch (scheme) {
    case Scheme::Bare:
    case Scheme::PreviousSingleRF: {
        DriveConfig d = drive;
        if (scheme == Scheme::Bare) d.B_RFc = 0.0;
        for (auto fam : families(drive.mw_axis)) {
            SpectrumTerm t;
            t.levels = previous_levels(zfs, params, d, fam);
            t.family = fam;
            t.Gamma_b = fam == MwFamily::Bright ? params.Gamma_b : params.Gamma_d;
            t.Gamma_d = fam == MwFamily::Bright ? params.Gamma_d : params.Gamma_b;
            terms.push_back(t);
        }
        break;
    }
    case Scheme::Dressed:
    case Scheme::DoubleDressed: {
        if (!(drive.B_RFc > 0.0)) throw InvalidArgument("dressed schemes require B_RFc > 0");
        DriveConfig d = drive;
        if (scheme == Scheme::Dressed) d.B_RFt = 0.0;
        double gb = params.Gamma_b;
        double gd = params.Gamma_d;
        if (opt.linewidth) {
            gb = gd = (*opt.linewidth)(d.B_RFc, params.gamma_e);
        }
        for (auto fam : families(drive.mw_axis)) {
            for (auto br : resonant_branches(zfs, d)) {
                SpectrumTerm t;
                t.levels = branch_levels(params, zfs, d, br, fam, opt.tol_res);
                t.family = fam;
                t.branch = br;
                t.Gamma_b = gb;
                t.Gamma_d = gd;
                terms.push_back(t);
            }
        }
        break;
    }
    }
    for (auto& t : terms) t.weight = 1.0 / static_cast<double>(terms.size());
    return terms;
}

/// Contrast (photoluminescence change, <= 0 at dips) at one microwave frequency.
inline double contrast_at(const std::vector<SpectrumTerm>& terms, double omega_MW, double contrast_scale) {
    double depletion = 0.0;
    for (const auto& t : terms) {
        const auto m = t.levels.at(omega_MW, t.Gamma_b, t.Gamma_d);
        Populations p;
        try {
            p = population_p0(m);
        } catch (const WeakDriveViolation& e) {
            std::ostringstream os;
            os << e.what() << " at omega_MW = " << omega_MW << " Hz";
            throw WeakDriveViolation(os.str());
        }
        depletion += t.weight * (1.0 - p.p0);
    }
    return -contrast_scale * depletion;
}

struct GridSpec {
    double start = 0.0;
    double stop = 0.0;
    std::size_t points = 0;

    void validate() const {
        if (points == 0) throw InvalidArgument("grid: points must be >= 1");
        if (points > 1 && !(stop > start)) throw InvalidArgument("grid: stop must exceed start");
        if (!std::isfinite(start) || !std::isfinite(stop)) throw InvalidArgument("grid: bounds must be finite");
    }

    std::vector<double> values() const {
        validate();
        std::vector<double> v(points);
        if (points == 1) {
            v[0] = start;
            return v;
        }
        const double step = (stop - start) / static_cast<double>(points - 1);
        for (std::size_t i = 0; i < points; ++i) v[i] = start + step * static_cast<double>(i);
        v.back() = stop;
        return v;
    }

    double step() const { return points > 1 ? (stop - start) / static_cast<double>(points - 1) : 0.0; }
};

/// 2001 points spanning D' +- 3E'x.
inline GridSpec default_grid(const EffectiveZFS& zfs) {
    return {zfs.D_prime - 3.0 * zfs.Ex_prime, zfs.D_prime + 3.0 * zfs.Ex_prime, 2001};
}

struct SpectrumMeta {
    NVParameters params;
    DriveConfig drive;
    Scheme scheme = Scheme::Bare;
    GridSpec grid;
};

struct Spectrum {
    std::vector<double> mw_frequencies;
    std::vector<double> contrast;
    SpectrumMeta meta;

    void validate() const {
        if (mw_frequencies.size() != contrast.size()) throw InvalidArgument("spectrum: length mismatch");
        for (std::size_t i = 1; i < mw_frequencies.size(); ++i)
            if (!(mw_frequencies[i] > mw_frequencies[i - 1]))
                throw InvalidArgument("spectrum: frequencies must be strictly increasing");
        for (double c : contrast)
            if (!std::isfinite(c)) throw InvalidArgument("spectrum: non-finite contrast");
    }
};

inline Spectrum simulate_spectrum(const NVParameters& params, const DriveConfig& drive, const GridSpec& grid,
                                  Scheme scheme, const SpectrumOptions& opt = {}) {
    const auto terms = spectrum_terms(params, drive, scheme, opt);
    Spectrum s;
    s.mw_frequencies = grid.values();
    s.contrast = parallel_map(s.mw_frequencies.size(), opt.threads, [&](std::size_t i) {
        return contrast_at(terms, s.mw_frequencies[i], opt.contrast_scale);
    });
    s.meta = {params, drive, scheme, grid};
    return s;
}

} // namespace nvsense
