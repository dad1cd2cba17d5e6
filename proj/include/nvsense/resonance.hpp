#pragma once

// Closed-form resonance frequencies, resonant target conditions and
// splitting-slope regression.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nvsense/error.hpp"
#include "nvsense/fit.hpp"
#include "nvsense/spin.hpp"
#include "nvsense/steady_state.hpp"

namespace nvsense {

struct ResonanceEntry {
    std::string tag; ///< e.g. "res2+"
    double frequency = 0.0;
    bool electric_noise_sensitive = false;
    MwFamily family = MwFamily::Bright;
};

struct ResonanceSet {
    Scheme scheme = Scheme::Bare;
    std::vector<ResonanceEntry> entries;

    const ResonanceEntry& find(const std::string& tag) const {
        for (const auto& e : entries)
            if (e.tag == tag) return e;
        throw InvalidArgument("resonance set has no entry " + tag);
    }
};

/// The eight double-dressed resonances res1..res4 (+/-) for the x-axis microwave.
/// res1 and res4 move directly with E'x and are flagged as electric-noise sensitive.
inline ResonanceSet resonances_double_dressed(const NVParameters& params, const EffectiveZFS& zfs,
                                              const DriveConfig& drive,
                                              double tol_res = kDefaultResonanceTolerance) {
    require_resonant_control(zfs, drive, tol_res);
    const double Dp = zfs.D_prime;
    const double Ex = zfs.Ex_prime;
    const double wt = drive.omega_RFt;
    const double gc = params.gamma_e * drive.B_RFc;
    const double gt = params.gamma_e * drive.B_RFt;
    const double low = -2.0 * Ex + wt + gc;
    const double high = 2.0 * Ex - wt + gc;
    const double r_low = 0.25 * std::sqrt(4.0 * low * low + gt * gt);
    const double r_high = 0.25 * std::sqrt(4.0 * high * high + gt * gt);
    const double c14 = Dp + 2.0 * Ex - 0.5 * wt;
    const double c23 = Dp + 0.5 * wt;

    ResonanceSet set{Scheme::DoubleDressed, {}};
    auto add = [&](std::string tag, double f, bool noisy) {
        set.entries.push_back({std::move(tag), f, noisy, MwFamily::Bright});
    };
    add("res1+", c14 + r_low, true);
    add("res1-", c14 - r_low, true);
    add("res2+", c23 + r_low, false);
    add("res2-", c23 - r_low, false);
    add("res3+", c23 + r_high, false);
    add("res3-", c23 - r_high, false);
    add("res4+", c14 + r_high, true);
    add("res4-", c14 - r_high, true);
    return set;
}

/// Single-RF scheme: res1 (x-axis microwave) and res2 (y-axis microwave).
/// B_RFc/omega_RFc hold the RF field; B_RFt is ignored.
inline ResonanceSet resonances_previous(const NVParameters& params, const EffectiveZFS& zfs,
                                        const DriveConfig& drive) {
    const double w = drive.omega_RFc;
    const double radical = 0.5 * std::hypot(2.0 * zfs.Ex_prime - w, params.gamma_e * drive.B_RFc);
    ResonanceSet set{Scheme::PreviousSingleRF, {}};
    set.entries.push_back({"res1+", zfs.D_prime + 0.5 * w + radical, false, MwFamily::Bright});
    set.entries.push_back({"res1-", zfs.D_prime + 0.5 * w - radical, false, MwFamily::Bright});
    set.entries.push_back({"res2+", zfs.D_prime - 0.5 * w + radical, false, MwFamily::Dark});
    set.entries.push_back({"res2-", zfs.D_prime - 0.5 * w - radical, false, MwFamily::Dark});
    return set;
}

inline ResonanceSet resonances_bare(const EffectiveZFS& zfs) {
    ResonanceSet set{Scheme::Bare, {}};
    set.entries.push_back({"B", zfs.D_prime + zfs.Ex_prime, true, MwFamily::Bright});
    set.entries.push_back({"D", zfs.D_prime - zfs.Ex_prime, true, MwFamily::Dark});
    return set;
}

/// Sorted dip frequencies of every reduction that contributes to a scheme's
/// spectrum; coincident entries (within merge Hz) are reported once.
inline std::vector<double> spectrum_resonances(const NVParameters& params, const DriveConfig& drive, Scheme scheme,
                                               const SpectrumOptions& opt = {}, double merge = 1.0) {
    std::vector<double> f;
    for (const auto& t : spectrum_terms(params, drive, scheme, opt)) {
        const auto r = t.levels.resonances();
        f.insert(f.end(), r.begin(), r.end());
    }
    std::sort(f.begin(), f.end());
    std::vector<double> out;
    for (double v : f)
        if (out.empty() || v - out.back() > merge) out.push_back(v);
    return out;
}

/// Target RF frequencies resonant with the dressed-state splitting:
/// (2E'x - gamma_e B_RFc, 2E'x + gamma_e B_RFc).
inline std::pair<double, double> resonant_target_condition(const NVParameters& params, const EffectiveZFS& zfs,
                                                           double B_RFc) {
    if (B_RFc < 0.0) throw InvalidArgument("resonant_target_condition: B_RFc must be >= 0");
    const double lo = 2.0 * zfs.Ex_prime - params.gamma_e * B_RFc;
    const double hi = 2.0 * zfs.Ex_prime + params.gamma_e * B_RFc;
    if (!(lo > 0.0))
        throw NegativeFrequency("resonant_target_condition: control amplitude too large for this strain");
    return {lo, hi};
}

struct SlopeFit {
    double slope = 0.0;        ///< Hz/T
    double slope_stderr = 0.0; ///< Hz/T
    double intercept = 0.0;    ///< Hz
};

/// Least-squares splitting-vs-amplitude slope with a fitted intercept.
inline SlopeFit splitting_slope(std::span<const std::pair<double, double>> sweep) {
    std::vector<double> a;
    std::vector<double> s;
    for (const auto& [amp, split] : sweep) {
        a.push_back(amp);
        s.push_back(split);
    }
    std::vector<double> distinct = a;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 3) throw DegenerateSweep("splitting_slope: need at least 3 distinct amplitudes");
    const auto f = ordinary_least_squares(a, s);
    return {f.slope, f.slope_stderr, f.intercept};
}

/// Fits a spectrum's dips, seeding from the closed-form resonances when given.
inline DipFitResult fit_spectrum_dips(const Spectrum& spec, std::size_t n_dips,
                                      const std::optional<std::vector<double>>& init = std::nullopt,
                                      const FitOptions& opt = {}) {
    return fit_dips(spec.mw_frequencies, spec.contrast, n_dips, init, opt);
}

} // namespace nvsense
