#pragma once

// Flat `key = value` run configuration with dotted section prefixes.
// Unknown keys, repeated keys and malformed values are rejected with the
// offending line number.

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "nvsense/cli/csv.hpp"
#include "nvsense/error.hpp"
#include "nvsense/linewidth.hpp"
#include "nvsense/oracle.hpp"
#include "nvsense/sensing.hpp"
#include "nvsense/spin.hpp"
#include "nvsense/steady_state.hpp"

namespace nvsense::cli {

enum class SweepAxis { ControlAmplitude, TargetAmplitude };

struct RunConfig {
    NVParameters nv;
    DriveConfig drive;
    bool omega_rfc_resonant = false;          ///< omega_RFc = 2E'x
    std::optional<Side> omega_rft_condition;  ///< omega_RFt from the resonant target condition
    Scheme scheme = Scheme::Bare;

    std::optional<GridSpec> grid;             ///< default: D' +- 3E'x, 2001 points
    double contrast_scale = 0.02;
    double tol_res = kDefaultResonanceTolerance;
    bool use_linewidth_model = true;
    LinewidthModel linewidth;
    bool linewidth_custom = false;
    bool linewidth_profile_demo = false;      ///< `linewidth.profile = demo` given explicitly

    double noise_sigma = 0.0;

    double delta_S = 1e-6;
    std::optional<double> photon_rate;        ///< if set, delta_S = 1/sqrt(photon_rate)
    double sense_start = 4.3e6;
    double sense_stop = 12.7e6;
    std::size_t sense_points = 85;
    double dead_zone_halfwidth = kDefaultDeadZoneHalfwidth;
    std::size_t response_points = 21;
    double bias_scale = 1.0;

    SweepAxis sweep_axis = SweepAxis::ControlAmplitude;
    double sweep_start = 50e-6;
    double sweep_stop = 150e-6;
    std::size_t sweep_points = 10;

    std::size_t random_models = 10000;
    double p0_tolerance = 1e-12;
    bool time_domain = false;
    double oracle_D = 20e6;
    double oracle_relax = 2.5e3;
    double oracle_dephase = 1.25e3;
    double oracle_control_fraction = 0.05;    ///< gamma_e B_RFc / omega_RFc
    double oracle_target_hz = 20e3;           ///< gamma_e B_RFt
    double oracle_mw_lambda_hz = 500.0;
    std::size_t oracle_mw_points = 31;        ///< 0: automatic spacing
    double oracle_tolerance = 0.01;           ///< fraction of the splitting

    std::size_t calibrate_smoothing = 0;      ///< 0: N/100 (odd)
    std::size_t calibrate_min_separation = 0; ///< 0: N/20
    double calibrate_significance = 5.0;

    EffectiveZFS zfs() const { return effective_zfs(nv); }

    GridSpec mw_grid() const { return grid ? *grid : default_grid(zfs()); }

    SpectrumOptions spectrum_options(unsigned threads) const {
        SpectrumOptions o;
        o.contrast_scale = contrast_scale;
        o.tol_res = tol_res;
        if (use_linewidth_model) o.linewidth = linewidth;
        o.threads = threads;
        return o;
    }

    double effective_delta_S() const { return photon_rate ? 1.0 / std::sqrt(*photon_rate) : delta_S; }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

class ConfigParser {
  public:
    explicit ConfigParser(RunConfig& c) : c_(c) {
        num("nv.d_hz", c.nv.D);
        num("nv.ex_hz", c.nv.Ex);
        num("nv.gamma_e_hz_per_t", c.nv.gamma_e);
        num("nv.bx_tesla", c.nv.Bx);
        num("nv.gamma_b_hz", c.nv.Gamma_b);
        num("nv.gamma_d_hz", c.nv.Gamma_d);

        num("drive.b_rfc_tesla", c.drive.B_RFc);
        on("drive.omega_rfc_hz", [this](const std::string& v) {
            if (v == "resonant") {
                c_.omega_rfc_resonant = true;
                return;
            }
            c_.omega_rfc_resonant = false;
            c_.drive.omega_RFc = number(v);
        });
        num("drive.b_rft_tesla", c.drive.B_RFt);
        on("drive.omega_rft_hz", [this](const std::string& v) {
            if (v == "low") c_.omega_rft_condition = Side::Low;
            else if (v == "high") c_.omega_rft_condition = Side::High;
            else {
                c_.omega_rft_condition.reset();
                c_.drive.omega_RFt = number(v);
            }
        });
        num("drive.b_mw_tesla", c.drive.B_MW);
        num("drive.omega_mw_hz", c.drive.omega_MW);
        on("drive.mw_axis", [this](const std::string& v) {
            if (v == "x") c_.drive.mw_axis = MwAxis::X;
            else if (v == "y") c_.drive.mw_axis = MwAxis::Y;
            else if (v == "xy") c_.drive.mw_axis = MwAxis::XY;
            else bad("expected x, y or xy");
        });

        on("scheme", [this](const std::string& v) {
            if (v == "bare") c_.scheme = Scheme::Bare;
            else if (v == "dressed") c_.scheme = Scheme::Dressed;
            else if (v == "double_dressed") c_.scheme = Scheme::DoubleDressed;
            else if (v == "previous") c_.scheme = Scheme::PreviousSingleRF;
            else bad("expected bare, dressed, double_dressed or previous");
        });

        on("grid.start_hz", [this](const std::string& v) { grid().start = number(v); });
        on("grid.stop_hz", [this](const std::string& v) { grid().stop = number(v); });
        on("grid.points", [this](const std::string& v) { grid().points = count(v); });

        num("spectrum.contrast_scale", c.contrast_scale);
        num("spectrum.tol_res_hz", c.tol_res);
        flag("spectrum.use_linewidth_model", c.use_linewidth_model);

        on("linewidth.profile", [this](const std::string& v) {
            if (v == "demo") c_.linewidth_profile_demo = true;
            else if (v == "custom") c_.linewidth_custom = true;
            else bad("expected demo or custom");
        });
        on("linewidth.gamma_residual_hz", [this](const std::string& v) {
            c_.linewidth.gamma_residual = number(v);
            c_.linewidth_custom = true;
        });
        on("linewidth.gamma_electric_hz", [this](const std::string& v) {
            c_.linewidth.gamma_electric = number(v);
            c_.linewidth_custom = true;
        });
        on("linewidth.suppression_scale_tesla", [this](const std::string& v) {
            c_.linewidth.suppression_scale = number(v);
            c_.linewidth_custom = true;
        });
        on("linewidth.fluctuation_coeff", [this](const std::string& v) {
            c_.linewidth.fluctuation_coeff = number(v);
            c_.linewidth_custom = true;
        });

        num("noise.sigma", c.noise_sigma);

        num("sense.delta_s", c.delta_S);
        on("sense.photon_rate_hz", [this](const std::string& v) { c_.photon_rate = number(v); });
        num("sense.freq_start_hz", c.sense_start);
        num("sense.freq_stop_hz", c.sense_stop);
        cnt("sense.freq_points", c.sense_points);
        num("sense.dead_zone_halfwidth_hz", c.dead_zone_halfwidth);
        cnt("sense.response_points", c.response_points);
        num("sense.bias_scale", c.bias_scale);

        on("sweep.axis", [this](const std::string& v) {
            if (v == "control") c_.sweep_axis = SweepAxis::ControlAmplitude;
            else if (v == "target") c_.sweep_axis = SweepAxis::TargetAmplitude;
            else bad("expected control or target");
        });
        num("sweep.start_tesla", c.sweep_start);
        num("sweep.stop_tesla", c.sweep_stop);
        cnt("sweep.points", c.sweep_points);

        cnt("validate.random_models", c.random_models);
        num("validate.p0_tolerance", c.p0_tolerance);
        flag("validate.time_domain", c.time_domain);
        num("oracle.d_hz", c.oracle_D);
        num("oracle.relax_hz", c.oracle_relax);
        num("oracle.dephase_hz", c.oracle_dephase);
        num("oracle.control_fraction", c.oracle_control_fraction);
        num("oracle.target_hz", c.oracle_target_hz);
        num("oracle.mw_lambda_hz", c.oracle_mw_lambda_hz);
        cnt("oracle.mw_points", c.oracle_mw_points);
        num("oracle.tolerance", c.oracle_tolerance);

        cnt("calibrate.smoothing", c.calibrate_smoothing);
        cnt("calibrate.min_separation", c.calibrate_min_separation);
        num("calibrate.significance", c.calibrate_significance);
    }

    void parse(std::istream& is, const std::string& source) {
        std::string raw;
        std::set<std::string> seen;
        line_ = 0;
        source_ = source;
        while (std::getline(is, raw)) {
            ++line_;
            const auto hash = raw.find('#');
            const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
            if (text.empty()) continue;
            const auto eq = text.find('=');
            if (eq == std::string::npos) fail("expected `key = value`");
            key_ = trim(text.substr(0, eq));
            const std::string value = trim(text.substr(eq + 1));
            if (key_.empty()) fail("empty key");
            if (value.empty()) fail("empty value for key '" + key_ + "'");
            const auto it = setters_.find(key_);
            if (it == setters_.end()) fail("unknown key '" + key_ + "'");
            if (!seen.insert(key_).second) fail("duplicate key '" + key_ + "'");
            it->second(value);
        }
    }

  private:
    using Setter = std::function<void(const std::string&)>;

    void on(const std::string& key, Setter s) { setters_[key] = std::move(s); }
    void num(const std::string& key, double& target) {
        on(key, [this, &target](const std::string& v) { target = number(v); });
    }
    void cnt(const std::string& key, std::size_t& target) {
        on(key, [this, &target](const std::string& v) { target = count(v); });
    }
    void flag(const std::string& key, bool& target) {
        on(key, [this, &target](const std::string& v) {
            if (v == "true") target = true;
            else if (v == "false") target = false;
            else bad("expected true or false");
        });
    }

    GridSpec& grid() {
        if (!c_.grid) c_.grid = GridSpec{};
        return *c_.grid;
    }

    double number(const std::string& v) const {
        double d = 0.0;
        if (!parse_double(v, d) || !std::isfinite(d)) bad("expected a finite number, got '" + v + "'");
        return d;
    }

    std::size_t count(const std::string& v) const {
        std::uint64_t n = 0;
        const auto r = std::from_chars(v.data(), v.data() + v.size(), n);
        if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad("expected a non-negative integer, got '" + v + "'");
        return static_cast<std::size_t>(n);
    }

    [[noreturn]] void bad(const std::string& what) const { fail("key '" + key_ + "': " + what); }

    [[noreturn]] void fail(const std::string& what) const {
        std::ostringstream os;
        os << source_ << ":" << line_ << ": " << what;
        throw InvalidArgument(os.str());
    }

    RunConfig& c_;
    std::map<std::string, Setter> setters_;
    std::size_t line_ = 0;
    std::string key_;
    std::string source_;
};

} // namespace detail

/// Resolves symbolic frequencies and checks every block's invariants.
inline void finalize(RunConfig& c) {
    auto block = [](const std::string& name, auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            throw InvalidArgument("config block " + name + ": " + e.what());
        }
    };
    block("nv", [&] { c.nv.validate(); });
    const auto zfs = c.zfs();
    if (c.linewidth_custom && c.linewidth_profile_demo)
        throw InvalidArgument("config block linewidth: the demo profile cannot be combined with explicit coefficients");
    if (!c.linewidth_custom) {
        const double g = c.nv.gamma_e;
        c.linewidth = demo_linewidth_model(g);
    }
    block("linewidth", [&] { c.linewidth.validate(); });
    if (c.omega_rfc_resonant) c.drive.omega_RFc = 2.0 * zfs.Ex_prime;
    if (c.omega_rft_condition) {
        block("drive", [&] {
            const auto [lo, hi] = resonant_target_condition(c.nv, zfs, c.drive.B_RFc);
            c.drive.omega_RFt = *c.omega_rft_condition == Side::Low ? lo : hi;
        });
    }
    if (c.drive.omega_MW == 0.0) c.drive.omega_MW = zfs.D_prime;
    block("drive", [&] { c.drive.validate(); });
    block("grid", [&] { c.mw_grid().validate(); });
    if (!(c.contrast_scale > 0.0)) throw InvalidArgument("config: spectrum.contrast_scale must be > 0");
    if (!(c.tol_res > 0.0)) throw InvalidArgument("config: spectrum.tol_res_hz must be > 0");
    if (!(c.noise_sigma >= 0.0)) throw InvalidArgument("config: noise.sigma must be >= 0");
    if (!(c.delta_S >= 0.0)) throw InvalidArgument("config: sense.delta_s must be >= 0");
    if (c.photon_rate && !(*c.photon_rate > 0.0)) throw InvalidArgument("config: sense.photon_rate_hz must be > 0");
    if (c.sense_points < 1 || (c.sense_points > 1 && !(c.sense_stop > c.sense_start)) || !(c.sense_start > 0.0))
        throw InvalidArgument("config: sense frequency grid needs 0 < freq_start_hz < freq_stop_hz and points >= 1");
    if (!(c.dead_zone_halfwidth >= 0.0)) throw InvalidArgument("config: sense.dead_zone_halfwidth_hz must be >= 0");
    if (c.response_points < 3) throw InvalidArgument("config: sense.response_points must be >= 3");
    if (!(c.bias_scale > 0.0)) throw InvalidArgument("config: sense.bias_scale must be > 0");
    if (c.sweep_points < 1 || !(c.sweep_start > 0.0) || (c.sweep_points > 1 && !(c.sweep_stop > c.sweep_start)))
        throw InvalidArgument("config: sweep range needs 0 < start_tesla < stop_tesla and points >= 1");
    if (!(c.p0_tolerance > 0.0) || !(c.oracle_tolerance > 0.0))
        throw InvalidArgument("config: tolerances must be > 0");
    if (!(c.oracle_control_fraction > 0.0) || !(c.oracle_control_fraction < 1.0))
        throw InvalidArgument("config: oracle.control_fraction must lie in (0, 1)");
    if (!(c.oracle_D > 0.0) || !(c.oracle_relax > 0.0) || !(c.oracle_dephase >= 0.0) || !(c.oracle_target_hz > 0.0) ||
        !(c.oracle_mw_lambda_hz > 0.0) || (c.oracle_mw_points != 0 && c.oracle_mw_points < 7))
        throw InvalidArgument("config: oracle block needs positive rates and amplitudes and mw_points 0 or >= 7");
    if (!(c.calibrate_significance >= 0.0)) throw InvalidArgument("config: calibrate.significance must be >= 0");
}

inline RunConfig parse_config(std::istream& is, const std::string& source = "config") {
    RunConfig c;
    detail::ConfigParser p(c);
    p.parse(is, source);
    finalize(c);
    return c;
}

inline RunConfig parse_config_string(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidArgument("cannot open config " + path);
    return parse_config(f, path);
}

} // namespace nvsense::cli
