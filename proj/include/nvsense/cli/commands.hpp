#pragma once

// Subcommand implementations. Each command renders its full output into a
// string so that files are only written after the computation succeeded.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nvsense/cli/config.hpp"
#include "nvsense/cli/csv.hpp"
#include "nvsense/cli/svg.hpp"
#include "nvsense/error.hpp"
#include "nvsense/fit.hpp"
#include "nvsense/oracle.hpp"
#include "nvsense/resonance.hpp"
#include "nvsense/sensing.hpp"

namespace nvsense::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitComputation = 3;
inline constexpr int kExitValidation = 4;

struct CommandContext {
    unsigned threads = 1;
    std::uint64_t seed = 0;
    std::optional<std::string> svg_path;
    std::optional<std::string> input_path;
    std::ostream* log = &std::cerr;
};

struct CommandResult {
    std::string csv;
    int exit_code = kExitOk;
    std::optional<SvgPlot> plot;
};

namespace detail {

inline std::string fmt(double v) { return format_double(v); }

inline std::string kv(const std::string& k, double v) { return k + "=" + fmt(v); }

} // namespace detail

// ---------------------------------------------------------------- spectrum

inline Spectrum run_spectrum(const RunConfig& c, const CommandContext& ctx) {
    auto spec = simulate_spectrum(c.nv, c.drive, c.mw_grid(), c.scheme, c.spectrum_options(ctx.threads));
    if (c.noise_sigma > 0.0) {
        std::mt19937_64 rng(ctx.seed);
        std::normal_distribution<double> noise(0.0, c.noise_sigma);
        for (double& y : spec.contrast) y += noise(rng);
    }
    return spec;
}

inline CommandResult cmd_spectrum(const RunConfig& c, const CommandContext& ctx) {
    const auto spec = run_spectrum(c, ctx);
    std::ostringstream os;
    CsvWriter w(os);
    w.header({"mw_frequency_hz", "contrast"});
    for (std::size_t i = 0; i < spec.mw_frequencies.size(); ++i)
        w.row({detail::fmt(spec.mw_frequencies[i]), detail::fmt(spec.contrast[i])});
    CommandResult r;
    r.csv = os.str();
    SvgPlot p;
    p.title = "ODMR spectrum (" + to_string(c.scheme) + ")";
    p.x_label = "microwave frequency (Hz)";
    p.y_label = "contrast";
    p.series.push_back({spec.mw_frequencies, spec.contrast});
    p.markers = spectrum_resonances(c.nv, c.drive, c.scheme, c.spectrum_options(ctx.threads));
    r.plot = std::move(p);
    return r;
}

// ------------------------------------------------------------------- sweep

struct SweepPoint {
    double amplitude = 0.0;
    std::vector<double> centers;
    std::vector<double> closed;
};

/// Drive for one sweep amplitude; a symbolic target condition follows the control.
inline DriveConfig sweep_drive(const RunConfig& c, double amplitude) {
    DriveConfig d = c.drive;
    if (c.sweep_axis == SweepAxis::ControlAmplitude) d.B_RFc = amplitude;
    else d.B_RFt = amplitude;
    if (c.omega_rft_condition) {
        const auto [lo, hi] = resonant_target_condition(c.nv, c.zfs(), d.B_RFc);
        d.omega_RFt = *c.omega_rft_condition == Side::Low ? lo : hi;
    }
    return d;
}

inline std::vector<SweepPoint> run_sweep(const RunConfig& c, const CommandContext& ctx) {
    const auto amps = GridSpec{c.sweep_start, c.sweep_stop, c.sweep_points}.values();
    const auto opt = c.spectrum_options(ctx.threads);
    std::vector<SweepPoint> out;
    for (double a : amps) {
        SweepPoint pt;
        pt.amplitude = a;
        try {
            const auto d = sweep_drive(c, a);
            pt.closed = spectrum_resonances(c.nv, d, c.scheme, opt);
            const auto spec = simulate_spectrum(c.nv, d, c.mw_grid(), c.scheme, opt);
            const auto fit = fit_spectrum_dips(spec, pt.closed.size(), pt.closed);
            for (const auto& dip : fit.dips) pt.centers.push_back(dip.center);
        } catch (const ComputationError& e) {
            std::ostringstream os;
            os << "sweep at amplitude " << a << " T: " << e.what();
            throw FitDiverged(os.str());
        }
        if (pt.closed.size() < 2 || pt.closed.size() % 2 != 0) {
            std::ostringstream os;
            os << "sweep at amplitude " << a << " T: expected an even number of dips, found " << pt.closed.size();
            throw FitDiverged(os.str());
        }
        out.push_back(std::move(pt));
    }
    return out;
}

/// Pairs are consecutive fitted dips (0,1), (2,3), ...; the pooled slope
/// regresses every pair splitting against amplitude.
inline std::pair<std::vector<SlopeFit>, SlopeFit> sweep_slopes(const std::vector<SweepPoint>& pts) {
    const std::size_t n_pairs = pts.front().centers.size() / 2;
    std::vector<SlopeFit> pairs;
    std::vector<std::pair<double, double>> pooled;
    for (std::size_t k = 0; k < n_pairs; ++k) {
        std::vector<std::pair<double, double>> s;
        for (const auto& p : pts) {
            if (p.centers.size() != 2 * n_pairs)
                throw FitDiverged("sweep: dip count changes across the sweep");
            s.emplace_back(p.amplitude, p.centers[2 * k + 1] - p.centers[2 * k]);
        }
        pairs.push_back(splitting_slope(s));
        pooled.insert(pooled.end(), s.begin(), s.end());
    }
    return {pairs, splitting_slope(pooled)};
}

inline CommandResult cmd_sweep(const RunConfig& c, const CommandContext& ctx) {
    if (c.scheme != Scheme::Dressed && c.scheme != Scheme::DoubleDressed)
        throw InvalidArgument("sweep: scheme must be dressed or double_dressed");
    if (c.sweep_axis == SweepAxis::TargetAmplitude && c.scheme != Scheme::DoubleDressed)
        throw InvalidArgument("sweep: a target-amplitude sweep needs scheme = double_dressed");
    const auto pts = run_sweep(c, ctx);
    const auto [pairs, pooled] = sweep_slopes(pts);

    std::ostringstream os;
    CsvWriter w(os);
    w.header({"amplitude_tesla", "dip_index", "center_hz", "closed_form_hz"});
    for (const auto& p : pts)
        for (std::size_t i = 0; i < p.centers.size(); ++i)
            w.row({detail::fmt(p.amplitude), std::to_string(i), detail::fmt(p.centers[i]), detail::fmt(p.closed[i])});
    for (std::size_t k = 0; k < pairs.size(); ++k)
        w.comment("pair " + std::to_string(k) + " " + detail::kv("slope_hz_per_t", pairs[k].slope) + " " +
                  detail::kv("stderr_hz_per_t", pairs[k].slope_stderr));
    w.comment(detail::kv("slope_hz_per_t", pooled.slope) + " " + detail::kv("stderr_hz_per_t", pooled.slope_stderr));

    CommandResult r;
    r.csv = os.str();
    SvgPlot plot;
    plot.title = std::string("Dip centers vs ") +
                 (c.sweep_axis == SweepAxis::ControlAmplitude ? "control" : "target") + " amplitude";
    plot.x_label = "amplitude (T)";
    plot.y_label = "center (Hz)";
    for (std::size_t i = 0; i < pts.front().centers.size(); ++i) {
        SvgSeries s;
        for (const auto& p : pts) {
            s.x.push_back(p.amplitude);
            s.y.push_back(p.centers[i]);
        }
        plot.series.push_back(std::move(s));
    }
    r.plot = std::move(plot);
    return r;
}

// ------------------------------------------------------------------- sense

struct SenseRun {
    std::vector<SensitivityReport> double_dressed;
    std::vector<SensitivityReport> previous;
    std::vector<HybridEntry> hybrid;
};

inline SenseConfig sense_config(const RunConfig& c, unsigned threads) {
    SenseConfig s;
    s.linewidth = c.linewidth;
    s.B_MW = c.drive.B_MW;
    s.dead_zone_halfwidth = c.dead_zone_halfwidth;
    s.response_points = c.response_points;
    s.bias_scale = c.bias_scale;
    s.contrast_scale = c.contrast_scale;
    s.tol_res = c.tol_res;
    s.threads = threads;
    return s;
}

inline SenseRun run_sense(const RunConfig& c, const CommandContext& ctx) {
    const auto cfg = sense_config(c, ctx.threads);
    const auto freqs = GridSpec{c.sense_start, c.sense_stop, c.sense_points}.values();
    const double dS = c.effective_delta_S();
    SenseRun r;
    r.double_dressed = sensitivity_vs_frequency(c.nv, cfg, dS, freqs, Scheme::DoubleDressed);
    r.previous = sensitivity_vs_frequency(c.nv, cfg, dS, freqs, Scheme::PreviousSingleRF);
    r.hybrid = hybrid_map(c.zfs(), r.double_dressed, r.previous, c.dead_zone_halfwidth);
    return r;
}

inline CommandResult cmd_sense(const RunConfig& c, const CommandContext& ctx) {
    const auto run = run_sense(c, ctx);
    const auto bw_dd = bandwidth(run.double_dressed);
    const auto bw_prev = bandwidth(run.previous);
    const auto bw_hybrid = bandwidth(hybrid_reports(run.hybrid));

    std::ostringstream os;
    CsvWriter w(os);
    w.header({"frequency_hz", "scheme", "sensitivity_t_per_sqrthz", "valid"});
    for (const auto& e : run.hybrid)
        w.row({detail::fmt(e.frequency), to_string(e.choice), detail::fmt(e.report.sensitivity),
               e.report.valid ? "true" : "false"});
    auto footer = [&](const std::string& name, const Bandwidth& b) {
        w.comment("bandwidth " + name + " " + detail::kv("low_hz", b.band_low) + " " +
                  detail::kv("high_hz", b.band_high) + " " + detail::kv("width_hz", b.width) + " " +
                  detail::kv("optimum_hz", b.optimum_frequency) + " " +
                  detail::kv("optimum_t_per_sqrthz", b.optimum_sensitivity));
    };
    footer("double_dressed", bw_dd);
    footer("previous", bw_prev);
    footer("hybrid", bw_hybrid);
    if (bw_prev.width > 0.0) w.comment(detail::kv("bandwidth_ratio", bw_dd.width / bw_prev.width));

    CommandResult r;
    r.csv = os.str();
    SvgPlot plot;
    plot.title = "Sensitivity vs target frequency";
    plot.x_label = "target frequency (Hz)";
    plot.y_label = "sensitivity (T/sqrt(Hz))";
    auto series = [](const std::vector<SensitivityReport>& reps, const std::string& color) {
        SvgSeries s;
        s.color = color;
        for (const auto& rep : reps)
            if (rep.valid && std::isfinite(rep.sensitivity)) {
                s.x.push_back(rep.target_frequency);
                s.y.push_back(rep.sensitivity);
            }
        return s;
    };
    plot.series.push_back(series(run.double_dressed, "#1f4e9c"));
    plot.series.push_back(series(run.previous, "#c0392b"));
    r.plot = std::move(plot);
    return r;
}

// ---------------------------------------------------------------- validate

struct TimeDomainCheck {
    RwaScanPoint point;
    NVParameters params;
    DriveConfig drive;
    RwaScanOptions options;
};

/// Time-domain comparison of the double-dressed res2 pair with its closed
/// form on the reduced-splitting profile, at the drive strengths in the oracle block.
inline TimeDomainCheck run_time_domain_check(const RunConfig& c, const CommandContext& ctx) {
    TimeDomainCheck t;
    t.params = time_domain_profile();
    t.params.D = c.oracle_D;
    t.params.Ex = c.nv.Ex;
    t.params.gamma_e = c.nv.gamma_e;
    const auto zfs = effective_zfs(t.params);
    t.options.relax_to_zero_rate = c.oracle_relax;
    t.options.dephase_rate = c.oracle_dephase;
    t.options.mw_points = c.oracle_mw_points;
    t.options.threads = ctx.threads;
    const double g = t.params.gamma_e;
    t.drive.omega_RFc = 2.0 * zfs.Ex_prime;
    t.drive.B_RFc = c.oracle_control_fraction * t.drive.omega_RFc / g;
    t.drive.B_RFt = c.oracle_target_hz / g;
    t.drive.omega_RFt = resonant_target_condition(t.params, zfs, t.drive.B_RFc).first;
    t.drive.B_MW = 2.0 * std::numbers::sqrt2 * c.oracle_mw_lambda_hz / g;
    t.drive.mw_axis = MwAxis::X;
    t.point = rwa_scan_point(t.params, t.drive, t.options);
    return t;
}

inline CommandResult cmd_validate(const RunConfig& c, const CommandContext& ctx) {
    std::ostringstream os;
    CsvWriter w(os);
    w.header({"check", "value", "tolerance", "pass"});
    bool all = true;
    std::vector<std::string> notes;

    const auto eq = closed_form_equivalence(c.random_models, ctx.seed);
    const bool eq_ok = eq.max_relative <= c.p0_tolerance;
    all = all && eq_ok;
    w.row({"p0_closed_form_vs_linear_solve", detail::fmt(eq.max_relative), detail::fmt(c.p0_tolerance),
           eq_ok ? "true" : "false"});
    const auto& m = eq.worst;
    notes.push_back("worst oscillator model " + detail::kv("omega_b_hz", m.omega_b) + " " +
                    detail::kv("omega_d_hz", m.omega_d) + " " + detail::kv("lambda_hz", m.lambda) + " " +
                    detail::kv("j_hz", m.J) + " " + detail::kv("gamma_b_hz", m.Gamma_b) + " " +
                    detail::kv("gamma_d_hz", m.Gamma_d));

    if (c.time_domain) {
        const auto t = run_time_domain_check(c, ctx);
        const double rel = t.point.relative();
        const bool ok = rel < c.oracle_tolerance;
        all = all && ok;
        w.row({"time_domain_dip_deviation_over_splitting", detail::fmt(rel), detail::fmt(c.oracle_tolerance),
               ok ? "true" : "false"});
        notes.push_back("time domain " + detail::kv("d_hz", t.params.D) + " " + detail::kv("ex_hz", t.params.Ex) +
                        " " + detail::kv("b_rfc_tesla", t.drive.B_RFc) + " " +
                        detail::kv("omega_rfc_hz", t.drive.omega_RFc) + " " +
                        detail::kv("b_rft_tesla", t.drive.B_RFt) + " " +
                        detail::kv("omega_rft_hz", t.drive.omega_RFt) + " " +
                        detail::kv("deviation_hz", t.point.deviation) + " " +
                        detail::kv("splitting_hz", t.point.splitting));
        for (std::size_t i = 0; i < t.point.fitted.size(); ++i)
            notes.push_back("dip " + std::to_string(i) + " " + detail::kv("fitted_hz", t.point.fitted[i]) + " " +
                            detail::kv("closed_form_hz", t.point.closed[i]));
    }
    for (const auto& n : notes) w.comment(n);

    CommandResult r;
    r.csv = os.str();
    r.exit_code = all ? kExitOk : kExitValidation;
    if (!all && ctx.log) {
        *ctx.log << "validate: tolerance exceeded\n";
        for (const auto& n : notes) *ctx.log << "  " << n << '\n';
    }
    return r;
}

// --------------------------------------------------------------- calibrate

struct CalibrationResult {
    double D_prime = 0.0;
    double Ex_prime = 0.0;
    DipFit low;
    DipFit high;
    double residual_rms = 0.0;
    std::size_t records = 0;
};

/// Reads `mw_frequency_hz,contrast` records, sorted by frequency.
inline std::pair<std::vector<double>, std::vector<double>> read_experiment(const CsvTable& t,
                                                                           const std::string& source) {
    if (t.header.size() != 2 || t.header[0] != "mw_frequency_hz" || t.header[1] != "contrast")
        throw InvalidArgument(source + ": header must be `mw_frequency_hz,contrast`");
    std::vector<std::pair<double, double>> rec;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        double f = 0.0;
        double y = 0.0;
        if (!parse_double(t.rows[i][0], f) || !parse_double(t.rows[i][1], y) || !std::isfinite(f) ||
            !std::isfinite(y)) {
            std::ostringstream os;
            os << source << ":" << t.line_numbers[i] << ": row " << i + 1 << " is not a pair of finite numbers";
            throw InvalidArgument(os.str());
        }
        rec.emplace_back(f, y);
    }
    if (rec.size() < 50) {
        std::ostringstream os;
        os << source << ": need at least 50 records, found " << rec.size();
        throw InvalidArgument(os.str());
    }
    std::stable_sort(rec.begin(), rec.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < rec.size(); ++i)
        if (!(rec[i].first > rec[i - 1].first)) {
            std::ostringstream os;
            os << source << ": duplicate frequency " << rec[i].first << " Hz";
            throw InvalidArgument(os.str());
        }
    std::vector<double> w;
    std::vector<double> y;
    for (const auto& [f, v] : rec) {
        w.push_back(f);
        y.push_back(v);
    }
    return {w, y};
}

inline CalibrationResult calibrate(const std::vector<double>& w, const std::vector<double>& y, const RunConfig& c) {
    const std::size_t n = w.size();
    FitOptions opt;
    opt.smoothing = c.calibrate_smoothing ? c.calibrate_smoothing : std::max<std::size_t>(1, (n / 100) | 1);
    opt.min_separation = c.calibrate_min_separation ? c.calibrate_min_separation : std::max<std::size_t>(2, n / 20);
    opt.min_depth_significance = c.calibrate_significance;
    const auto fit = fit_dips(w, y, 2, std::nullopt, opt);
    CalibrationResult r;
    r.low = fit.dips[0];
    r.high = fit.dips[1];
    const double spacing = (w.back() - w.front()) / static_cast<double>(n - 1);
    for (const auto& d : fit.dips)
        if (d.fwhm < 3.0 * spacing) {
            std::ostringstream os;
            os << "calibrate: fitted dip at " << d.center << " Hz has fwhm " << d.fwhm
               << " Hz, below three sample spacings (unresolved)";
            throw FitDiverged(os.str());
        }
    const double sep = r.high.center - r.low.center;
    if (!(sep >= 0.5 * (r.low.fwhm + r.high.fwhm)))
        throw FitDiverged("calibrate: the two fitted dips are not resolved (separation below the mean fwhm)");
    r.D_prime = 0.5 * (r.low.center + r.high.center);
    r.Ex_prime = 0.5 * sep;
    r.residual_rms = fit.residual_rms;
    r.records = n;
    return r;
}

inline CommandResult cmd_calibrate(const RunConfig& c, const CommandContext& ctx) {
    if (!ctx.input_path) throw InvalidArgument("calibrate: --input PATH is required");
    const auto table = read_csv_file(*ctx.input_path);
    const auto [w, y] = read_experiment(table, *ctx.input_path);
    const auto cal = calibrate(w, y, c);

    std::ostringstream os;
    CsvWriter out(os);
    out.header({"parameter", "value"});
    out.row({"d_prime_hz", detail::fmt(cal.D_prime)});
    out.row({"ex_prime_hz", detail::fmt(cal.Ex_prime)});
    out.row({"center_low_hz", detail::fmt(cal.low.center)});
    out.row({"center_high_hz", detail::fmt(cal.high.center)});
    out.row({"fwhm_low_hz", detail::fmt(cal.low.fwhm)});
    out.row({"fwhm_high_hz", detail::fmt(cal.high.fwhm)});
    out.row({"depth_low", detail::fmt(cal.low.depth)});
    out.row({"depth_high", detail::fmt(cal.high.depth)});
    out.row({"residual_rms", detail::fmt(cal.residual_rms)});

    CommandResult r;
    r.csv = os.str();
    SvgPlot plot;
    plot.title = "Calibration fit";
    plot.x_label = "microwave frequency (Hz)";
    plot.y_label = "contrast";
    plot.series.push_back({w, y});
    plot.markers = {cal.low.center, cal.high.center};
    r.plot = std::move(plot);
    return r;
}

} // namespace nvsense::cli
