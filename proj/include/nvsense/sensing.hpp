#pragma once

// Contrast-response curves, sensitivity, bandwidth and scheme selection for
// target-field detection.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nvsense/error.hpp"
#include "nvsense/fit.hpp"
#include "nvsense/linewidth.hpp"
#include "nvsense/parallel.hpp"
#include "nvsense/resonance.hpp"
#include "nvsense/spin.hpp"
#include "nvsense/steady_state.hpp"

namespace nvsense {

enum class Side { Low, High };

inline std::string to_string(Side s) { return s == Side::Low ? "low" : "high"; }

/// Microwave frequency on a dressed level: D' + E'x -+ gamma_e B_RFc / 2.
inline double mw_operating_point(const NVParameters& params, const EffectiveZFS& zfs, double B_RFc, Side side) {
    if (B_RFc < 0.0) throw InvalidArgument("mw_operating_point: B_RFc must be >= 0");
    const double half = 0.5 * params.gamma_e * B_RFc;
    return zfs.D_prime + zfs.Ex_prime + (side == Side::Low ? -half : half);
}

struct QuadraticFit {
    double a = 0.0;  ///< contrast / T^2
    double S0 = 0.0; ///< contrast
    double rms_residual = 0.0;
};

struct ResponseCurve {
    std::vector<double> amplitudes; ///< T
    std::vector<double> S;          ///< contrast change relative to zero amplitude
    double fixed_mw = 0.0;          ///< Hz
    Scheme scheme = Scheme::DoubleDressed;
    QuadraticFit fit;
};

/// Least-squares S = a B^2 + S0.
inline QuadraticFit fit_quadratic(std::span<const double> B, std::span<const double> S) {
    std::vector<double> x(B.size());
    for (std::size_t i = 0; i < B.size(); ++i) x[i] = B[i] * B[i];
    const bool flat = std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
    QuadraticFit q;
    if (flat) {
        double mean = 0.0;
        for (double s : S) mean += s;
        mean /= static_cast<double>(S.size());
        q.S0 = mean;
        for (double s : S) q.rms_residual += (s - mean) * (s - mean);
        q.rms_residual = std::sqrt(q.rms_residual / static_cast<double>(S.size()));
        return q;
    }
    const auto f = ordinary_least_squares(x, S);
    q.a = f.slope;
    q.S0 = f.intercept;
    q.rms_residual = f.rms_residual;
    return q;
}

namespace detail {

/// Contrast at a fixed microwave frequency with the sensed amplitude B; the
/// sign of B enters the mode coupling J, which the populations see only as J^2.
template <class Terms>
double signed_contrast(Terms terms, double B, double omega_MW, double contrast_scale) {
    if (B < 0.0)
        for (auto& t : terms) t.levels.J = -t.levels.J;
    return contrast_at(terms, omega_MW, contrast_scale);
}

} // namespace detail

/// Single Lorentzian-dip response to the sensed amplitude at a fixed microwave
/// frequency. For DoubleDressed the grid varies B_RFt; for PreviousSingleRF it
/// varies the single RF amplitude B_RFc. The zero-amplitude contrast is subtracted.
inline ResponseCurve contrast_response(const NVParameters& params, const DriveConfig& drive_template, Scheme scheme,
                                       double fixed_mw, const std::vector<double>& amplitude_grid,
                                       const SpectrumOptions& opt = {}) {
    if (scheme != Scheme::DoubleDressed && scheme != Scheme::PreviousSingleRF)
        throw InvalidArgument("contrast_response: scheme must be double_dressed or previous");
    if (amplitude_grid.empty()) throw InvalidArgument("contrast_response: empty amplitude grid");
    auto terms_for = [&](double B) {
        DriveConfig d = drive_template;
        d.omega_MW = fixed_mw;
        (scheme == Scheme::DoubleDressed ? d.B_RFt : d.B_RFc) = std::abs(B);
        return spectrum_terms(params, d, scheme, opt);
    };
    const double ref = contrast_at(terms_for(0.0), fixed_mw, opt.contrast_scale);
    ResponseCurve c;
    c.amplitudes = amplitude_grid;
    c.fixed_mw = fixed_mw;
    c.scheme = scheme;
    c.S = parallel_map(amplitude_grid.size(), opt.threads, [&](std::size_t i) {
        const double B = amplitude_grid[i];
        return detail::signed_contrast(terms_for(B), B, fixed_mw, opt.contrast_scale) - ref;
    });
    c.fit = fit_quadratic(c.amplitudes, c.S);
    return c;
}

/// Symmetric grid of n points on [-bias, bias].
inline std::vector<double> symmetric_grid(double bias, std::size_t n) {
    if (n < 3) throw InvalidArgument("symmetric_grid: need at least 3 points");
    return GridSpec{-bias, bias, n}.values();
}

struct SensitivityReport {
    double target_frequency = 0.0; ///< Hz
    double delta_S = 0.0;          ///< contrast / sqrt(Hz)
    double slope = 0.0;            ///< contrast / T
    double sensitivity = 0.0;      ///< T / sqrt(Hz)
    double bias_amplitude = 0.0;   ///< T
    Scheme scheme = Scheme::DoubleDressed;
    bool valid = true;
    double quadratic_a = 0.0;      ///< contrast / T^2
    double linewidth = 0.0;        ///< Hz
    double mw_frequency = 0.0;     ///< Hz
    double control_amplitude = 0.0; ///< T
};

/// slope = |2 a bias|, sensitivity = delta_S / slope.
inline SensitivityReport sensitivity(const QuadraticFit& fit, double delta_S, double bias_amplitude) {
    if (!(bias_amplitude > 0.0)) throw InvalidArgument("sensitivity: bias_amplitude must be > 0");
    if (!(delta_S >= 0.0)) throw InvalidArgument("sensitivity: delta_S must be >= 0");
    const double slope = std::abs(2.0 * fit.a * bias_amplitude);
    if (!(slope > 0.0)) throw ZeroSlope("sensitivity: a * bias_amplitude = 0");
    SensitivityReport r;
    r.delta_S = delta_S;
    r.slope = slope;
    r.sensitivity = delta_S / slope;
    r.bias_amplitude = bias_amplitude;
    r.quadratic_a = fit.a;
    return r;
}

/// (E'x, 3E'x): target frequencies between half and one-and-a-half times 2E'x.
inline std::pair<double, double> rwa_valid_range(const EffectiveZFS& zfs) {
    if (!(zfs.Ex_prime > 0.0)) throw InvalidArgument("rwa_valid_range: E'x must be > 0");
    return {zfs.Ex_prime, 3.0 * zfs.Ex_prime};
}

inline constexpr double kDefaultDeadZoneHalfwidth = 0.71e6;

inline bool in_dead_zone(double omega, const EffectiveZFS& zfs, double halfwidth) {
    return std::abs(omega - 2.0 * zfs.Ex_prime) < halfwidth;
}

enum class SchemeChoice { DoubleDressed, PreviousSingleRF, Unsupported };

inline std::string to_string(SchemeChoice c) {
    switch (c) {
    case SchemeChoice::DoubleDressed: return "double_dressed";
    case SchemeChoice::PreviousSingleRF: return "previous";
    case SchemeChoice::Unsupported: return "unsupported";
    }
    return "?";
}

inline SchemeChoice choose_scheme(double omega_target, const EffectiveZFS& zfs,
                                  double dead_zone_halfwidth = kDefaultDeadZoneHalfwidth) {
    if (!(omega_target > 0.0)) throw InvalidArgument("choose_scheme: omega_target must be > 0");
    const auto [lo, hi] = rwa_valid_range(zfs);
    if (omega_target <= lo || omega_target >= hi) return SchemeChoice::Unsupported;
    if (in_dead_zone(omega_target, zfs, dead_zone_halfwidth)) return SchemeChoice::PreviousSingleRF;
    return SchemeChoice::DoubleDressed;
}

struct SenseConfig {
    LinewidthModel linewidth;
    double B_MW = 0.0;              ///< T
    double dead_zone_halfwidth = kDefaultDeadZoneHalfwidth;
    std::size_t response_points = 21;
    /// Bias amplitude as a fraction of the default (splitting = half linewidth).
    double bias_scale = 1.0;
    double contrast_scale = 0.02;
    double tol_res = kDefaultResonanceTolerance;
    unsigned threads = 1;
};

namespace detail {

inline SensitivityReport sense_double_dressed(const NVParameters& params, const EffectiveZFS& zfs,
                                              const SenseConfig& cfg, double delta_S, double omega) {
    SensitivityReport best;
    best.target_frequency = omega;
    best.scheme = Scheme::DoubleDressed;
    best.delta_S = delta_S;
    const double off = 2.0 * zfs.Ex_prime - omega;
    const double B_RFc = std::abs(off) / params.gamma_e;
    if (!(B_RFc > 0.0)) {
        // Degenerate with the single-RF scheme: no dressing field is applied.
        best.valid = false;
        best.sensitivity = std::numeric_limits<double>::infinity();
        return best;
    }
    const double gamma = cfg.linewidth(B_RFc, params.gamma_e);
    const double bias = cfg.bias_scale * gamma / params.gamma_e;
    DriveConfig d;
    d.B_RFc = B_RFc;
    d.omega_RFc = 2.0 * zfs.Ex_prime;
    d.omega_RFt = omega;
    d.B_MW = cfg.B_MW;
    d.omega_MW = zfs.D_prime;
    SpectrumOptions so;
    so.contrast_scale = cfg.contrast_scale;
    so.tol_res = cfg.tol_res;
    so.linewidth = cfg.linewidth;
    // The E'x-insensitive pair sits on the Low point below 2E'x and the High point above;
    // both dressed points are evaluated and the insensitive one wins ties.
    const Side preferred = off > 0.0 ? Side::Low : Side::High;
    const Side other = preferred == Side::Low ? Side::High : Side::Low;
    bool have = false;
    for (Side side : {preferred, other}) {
        const double mw = mw_operating_point(params, zfs, B_RFc, side);
        const auto curve = contrast_response(params, d, Scheme::DoubleDressed, mw,
                                             symmetric_grid(bias, cfg.response_points), so);
        auto r = sensitivity(curve.fit, delta_S, bias);
        if (!have || r.slope > best.slope) {
            r.target_frequency = omega;
            r.scheme = Scheme::DoubleDressed;
            r.linewidth = gamma;
            r.mw_frequency = mw;
            r.control_amplitude = B_RFc;
            best = r;
            have = true;
        }
    }
    const auto [lo, hi] = rwa_valid_range(zfs);
    best.valid = omega > lo && omega < hi && !in_dead_zone(omega, zfs, cfg.dead_zone_halfwidth);
    return best;
}

inline SensitivityReport sense_previous(const NVParameters& params, const EffectiveZFS& zfs, const SenseConfig& cfg,
                                        double delta_S, double omega) {
    const double gamma = std::min(params.Gamma_b, params.Gamma_d);
    const double bias = cfg.bias_scale * 0.5 * gamma / params.gamma_e;
    DriveConfig d;
    d.omega_RFc = omega;
    d.B_MW = cfg.B_MW;
    d.omega_MW = zfs.D_prime;
    SpectrumOptions so;
    so.contrast_scale = cfg.contrast_scale;
    SensitivityReport best;
    bool have = false;
    for (Side side : {Side::High, Side::Low}) {
        const double mw = zfs.D_prime + (side == Side::High ? 0.5 : -0.5) * omega;
        const auto curve = contrast_response(params, d, Scheme::PreviousSingleRF, mw,
                                             symmetric_grid(bias, cfg.response_points), so);
        auto r = sensitivity(curve.fit, delta_S, bias);
        if (!have || r.slope > best.slope) {
            r.linewidth = gamma;
            r.mw_frequency = mw;
            best = r;
            have = true;
        }
    }
    best.target_frequency = omega;
    best.scheme = Scheme::PreviousSingleRF;
    const auto [lo, hi] = rwa_valid_range(zfs);
    best.valid = omega > lo && omega < hi;
    return best;
}

} // namespace detail

/// One report per target frequency, in the order of the grid.
inline std::vector<SensitivityReport> sensitivity_vs_frequency(const NVParameters& params, const SenseConfig& cfg,
                                                               double delta_S, const std::vector<double>& frequencies,
                                                               Scheme scheme) {
    params.validate();
    cfg.linewidth.validate();
    if (scheme != Scheme::DoubleDressed && scheme != Scheme::PreviousSingleRF)
        throw InvalidArgument("sensitivity_vs_frequency: scheme must be double_dressed or previous");
    if (!(cfg.B_MW > 0.0)) throw InvalidArgument("sense: B_MW must be > 0");
    for (double f : frequencies)
        if (!(f > 0.0)) throw InvalidArgument("sensitivity_vs_frequency: frequencies must be > 0");
    const auto zfs = effective_zfs(params);
    return parallel_map(frequencies.size(), cfg.threads, [&](std::size_t i) {
        return scheme == Scheme::DoubleDressed ? detail::sense_double_dressed(params, zfs, cfg, delta_S, frequencies[i])
                                               : detail::sense_previous(params, zfs, cfg, delta_S, frequencies[i]);
    });
}

struct Bandwidth {
    double band_low = 0.0;
    double band_high = 0.0;
    double width = 0.0;
    double optimum_frequency = 0.0;
    double optimum_sensitivity = 0.0;
};

/// Contiguous region around the best (smallest) sensitivity where the value
/// stays within 2x of it. Invalid reports are skipped over; edges are
/// interpolated linearly between the bracketing valid points.
inline Bandwidth bandwidth(const std::vector<SensitivityReport>& reports) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : reports)
        if (r.valid && std::isfinite(r.sensitivity)) pts.emplace_back(r.target_frequency, r.sensitivity);
    std::sort(pts.begin(), pts.end());
    if (pts.size() < 3) throw NoOptimum("bandwidth: fewer than 3 valid reports");
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (pts[i].second < pts[best].second) best = i;
    const double thr = 2.0 * pts[best].second;

    auto edge = [&](int dir) {
        std::size_t i = best;
        while (true) {
            const bool at_end = dir < 0 ? i == 0 : i + 1 == pts.size();
            if (at_end) return pts[i].first;
            const std::size_t j = dir < 0 ? i - 1 : i + 1;
            if (pts[j].second > thr) {
                const double f = (thr - pts[i].second) / (pts[j].second - pts[i].second);
                return pts[i].first + f * (pts[j].first - pts[i].first);
            }
            i = j;
        }
    };
    Bandwidth b;
    b.band_low = edge(-1);
    b.band_high = edge(+1);
    b.width = b.band_high - b.band_low;
    b.optimum_frequency = pts[best].first;
    b.optimum_sensitivity = pts[best].second;
    return b;
}

struct HybridEntry {
    double frequency = 0.0;
    SchemeChoice choice = SchemeChoice::Unsupported;
    SensitivityReport report;
};

/// Per-frequency scheme selection; the new and previous report lists must
/// share the frequency grid.
inline std::vector<HybridEntry> hybrid_map(const EffectiveZFS& zfs, const std::vector<SensitivityReport>& dd,
                                           const std::vector<SensitivityReport>& prev,
                                           double dead_zone_halfwidth = kDefaultDeadZoneHalfwidth) {
    if (dd.size() != prev.size()) throw InvalidArgument("hybrid_map: report lists differ in length");
    std::vector<HybridEntry> out;
    for (std::size_t i = 0; i < dd.size(); ++i) {
        if (dd[i].target_frequency != prev[i].target_frequency)
            throw InvalidArgument("hybrid_map: report lists use different frequency grids");
        HybridEntry e;
        e.frequency = dd[i].target_frequency;
        e.choice = choose_scheme(e.frequency, zfs, dead_zone_halfwidth);
        e.report = e.choice == SchemeChoice::PreviousSingleRF ? prev[i] : dd[i];
        if (e.choice == SchemeChoice::Unsupported) e.report.valid = false;
        out.push_back(e);
    }
    return out;
}

inline std::vector<SensitivityReport> hybrid_reports(const std::vector<HybridEntry>& map) {
    std::vector<SensitivityReport> out;
    for (const auto& e : map) out.push_back(e.report);
    return out;
}

} // namespace nvsense
