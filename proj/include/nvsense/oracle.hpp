#pragma once

// Independent numerical checks of the closed forms: a direct 2x2 solve of the
// oscillator steady state, and fixed-step Lindblad integration of the full
// lab-frame Hamiltonian (no rotating-wave approximation).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "nvsense/error.hpp"
#include "nvsense/fit.hpp"
#include "nvsense/parallel.hpp"
#include "nvsense/resonance.hpp"
#include "nvsense/spin.hpp"
#include "nvsense/steady_state.hpp"

namespace nvsense {

/// Solves (w_b - i G_b) b + J d = -lambda, J b + (w_d - i G_d) d = 0.
inline Populations steady_state_linear_solve(const OscillatorModel& m) {
    m.validate();
    Eigen::Matrix2cd A;
    A << Complex(m.omega_b, -m.Gamma_b), m.J, m.J, Complex(m.omega_d, -m.Gamma_d);
    if (std::abs(A.determinant()) < 1e-300) throw SingularSystem("steady_state_linear_solve: singular system");
    const Eigen::Vector2cd rhs(-m.lambda, 0.0);
    const Eigen::Vector2cd x = A.partialPivLu().solve(rhs);
    const double pb = std::norm(x[0]);
    const double pd = std::norm(x[1]);
    return {1.0 - pb - pd, pb, pd};
}

struct EquivalenceReport {
    double max_relative = 0.0; ///< over p0, pb, pd
    OscillatorModel worst;
    std::size_t models = 0;
};

/// Closed form vs direct solve on random weak-drive models (detunings within
/// +-5 MHz, couplings up to 2 MHz, decay rates 10 kHz to 1 MHz).
inline EquivalenceReport closed_form_equivalence(std::size_t n, std::uint64_t seed) {
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); };
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> det(-5e6, 5e6);
    std::uniform_real_distribution<double> coup(0.0, 2e6);
    std::uniform_real_distribution<double> gam(1e4, 1e6);
    std::uniform_real_distribution<double> frac(0.0, 1.0);
    EquivalenceReport r;
    r.models = n;
    for (std::size_t i = 0; i < n; ++i) {
        OscillatorModel m;
        m.omega_b = det(rng);
        m.omega_d = det(rng);
        m.J = coup(rng);
        m.Gamma_b = gam(rng);
        m.Gamma_d = gam(rng);
        m.lambda = 0.5 * std::min(m.Gamma_b, m.Gamma_d) * frac(rng);
        const auto a = steady_state_linear_solve(m);
        const auto b = population_p0(m);
        const double e = std::max({rel(a.p0, b.p0), rel(a.pb, b.pb), rel(a.pd, b.pd)});
        if (e > r.max_relative || i == 0) {
            r.max_relative = e;
            r.worst = m;
        }
    }
    return r;
}

struct IntegrationConfig {
    double t_end = 0.0;              ///< s
    double dt = 0.0;                 ///< s
    double relax_to_zero_rate = 0.0; ///< Hz, repolarization of each of |+1>,|-1> into |0>
    double dephase_rate = 0.0;       ///< Hz, decay of the 0/+-1 coherences from pure dephasing
    double average_window = 0.0;     ///< s
    std::size_t positivity_check_every = 1000;

    /// Effective closed-form linewidth of this relaxation model.
    double effective_gamma() const { return dephase_rate + 0.5 * relax_to_zero_rate; }

    void validate(double f_max) const {
        if (!(dt > 0.0)) throw InvalidArgument("integration: dt must be > 0");
        if (!(average_window > 0.0)) throw InvalidArgument("integration: average_window must be > 0");
        if (!(t_end >= 10.0 * average_window)) throw InvalidArgument("integration: t_end must be >= 10*average_window");
        if (relax_to_zero_rate < 0.0 || dephase_rate < 0.0) throw InvalidArgument("integration: rates must be >= 0");
        if (dt > 1.0 / (50.0 * f_max)) {
            std::ostringstream os;
            os << "integration: dt = " << dt << " s exceeds 1/(50 f_max) with f_max = " << f_max << " Hz";
            throw StepTooLarge(os.str());
        }
    }
};

/// Largest frequency present in the lab Hamiltonian.
inline double lab_max_frequency(const NVParameters& params, const DriveConfig& drive) {
    const auto zfs = effective_zfs(params);
    return std::max({zfs.D_prime + zfs.Ex_prime, drive.omega_RFc, drive.omega_RFt, drive.omega_MW});
}

/// dt = 1/(200 f_max); t_end = 20 and average_window = 2 relaxation times of
/// the slowest process (coherence decay or population recovery).
inline IntegrationConfig default_integration_config(const NVParameters& params, const DriveConfig& drive,
                                                    double relax_to_zero_rate, double dephase_rate) {
    IntegrationConfig c;
    c.relax_to_zero_rate = relax_to_zero_rate;
    c.dephase_rate = dephase_rate;
    const double slow = std::min(c.effective_gamma(), relax_to_zero_rate > 0.0 ? relax_to_zero_rate : c.effective_gamma());
    if (!(slow > 0.0)) throw InvalidArgument("integration: at least one relaxation rate must be > 0");
    const double tau = 1.0 / (kTwoPi * slow);
    c.dt = 1.0 / (200.0 * lab_max_frequency(params, drive));
    c.t_end = 20.0 * tau;
    c.average_window = 2.0 * tau;
    return c;
}

struct LabFrameResult {
    double p0 = 0.0;
    double p_plus = 0.0;
    double p_minus = 0.0;
    double max_trace_error = 0.0;
    double max_hermiticity_error = 0.0;
    double min_eigenvalue = 1.0;
    std::size_t steps = 0;
};

namespace detail {

class LindbladRhs {
  public:
    LindbladRhs(const NVParameters& params, const DriveConfig& drive, const IntegrationConfig& cfg)
        : drive_(drive), relax_(kTwoPi * cfg.relax_to_zero_rate) {
        const auto s = spin_operators();
        h0_ = kTwoPi * build_bare_hamiltonian(effective_zfs(params));
        sz_ = kTwoPi * params.gamma_e * s.Sz;
        sa_ = kTwoPi * params.gamma_e * mw_operator(drive.mw_axis);
        gc_ = drive.B_RFc;
        gt_ = drive.B_RFt;
        gm_ = drive.B_MW;
        // Elementwise decay of rho_ij: relaxation removes population from the
        // +-1 manifold, pure dephasing damps the coherences between 0 and +-1.
        const double n[3] = {1.0, 0.0, 1.0};
        const double kappa = 2.0 * kTwoPi * cfg.dephase_rate;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                decay_(i, j) = -0.5 * relax_ * (n[i] + n[j]) - (n[i] != n[j] ? 0.5 * kappa : 0.0);
    }

    SpinMatrix hamiltonian(double t) const {
        const double rf = gc_ * std::cos(kTwoPi * drive_.omega_RFc * t) + gt_ * std::cos(kTwoPi * drive_.omega_RFt * t);
        const double mw = gm_ * std::cos(kTwoPi * drive_.omega_MW * t);
        return h0_ + rf * sz_ + mw * sa_;
    }

    /// d rho/dt for a given (angular) Hamiltonian. For Hermitian H and rho,
    /// rho H = (H rho)^dagger, so one product gives the commutator.
    SpinMatrix operator()(const SpinMatrix& h, const SpinMatrix& rho) const {
        const SpinMatrix m = h * rho;
        SpinMatrix d = Complex(0.0, -1.0) * (m - m.adjoint());
        d.array() += decay_.array() * rho.array();
        d(1, 1) += relax_ * (rho(0, 0) + rho(2, 2));
        return d;
    }

  private:
    DriveConfig drive_;
    double relax_;
    double gc_ = 0.0, gt_ = 0.0, gm_ = 0.0;
    SpinMatrix h0_, sz_, sa_;
    Eigen::Matrix3d decay_;
};

} // namespace detail

/// RK4 evolution from |0><0|; populations averaged over the last average_window.
inline LabFrameResult integrate_lab_frame(const NVParameters& params, const DriveConfig& drive,
                                          const IntegrationConfig& cfg) {
    params.validate();
    drive.validate();
    cfg.validate(lab_max_frequency(params, drive));
    const detail::LindbladRhs f(params, drive, cfg);

    SpinMatrix rho = SpinMatrix::Zero();
    rho(1, 1) = 1.0;
    const auto steps = static_cast<std::size_t>(std::ceil(cfg.t_end / cfg.dt));
    const auto avg_steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.average_window / cfg.dt)));
    const std::size_t avg_start = steps > avg_steps ? steps - avg_steps : 0;
    const double h = cfg.dt;

    LabFrameResult res;
    double acc[3] = {0.0, 0.0, 0.0};
    SpinMatrix h_start = f.hamiltonian(0.0);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * h;
        const SpinMatrix h_mid = f.hamiltonian(t + 0.5 * h);
        const SpinMatrix h_end = f.hamiltonian(t + h);
        const SpinMatrix k1 = f(h_start, rho);
        const SpinMatrix k2 = f(h_mid, rho + (0.5 * h) * k1);
        const SpinMatrix k3 = f(h_mid, rho + (0.5 * h) * k2);
        const SpinMatrix k4 = f(h_end, rho + h * k3);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        h_start = h_end;

        const double tr_err = std::abs(rho.trace() - Complex(1.0));
        res.max_trace_error = std::max(res.max_trace_error, tr_err);
        if (tr_err > 1e-6) {
            std::ostringstream os;
            os << "integrate_lab_frame: |tr(rho) - 1| = " << tr_err << " at t = " << t + h << " s";
            throw TraceDrift(os.str());
        }
        if (k >= avg_start)
            for (int i = 0; i < 3; ++i) acc[i] += rho(i, i).real();
        if (cfg.positivity_check_every > 0 && (k + 1) % cfg.positivity_check_every == 0) {
            res.max_hermiticity_error = std::max(res.max_hermiticity_error, (rho - rho.adjoint()).cwiseAbs().maxCoeff());
            const SpinMatrix herm = 0.5 * (rho + rho.adjoint());
            Eigen::SelfAdjointEigenSolver<SpinMatrix> es(herm, Eigen::EigenvaluesOnly);
            res.min_eigenvalue = std::min(res.min_eigenvalue, es.eigenvalues().minCoeff());
        }
    }
    const double n = static_cast<double>(steps - avg_start);
    res.p_plus = acc[index(Level::Plus)] / n;
    res.p0 = acc[index(Level::Zero)] / n;
    res.p_minus = acc[index(Level::Minus)] / n;
    res.steps = steps;
    return res;
}

/// Time-averaged p0 on a microwave grid. cfg_for returns the integration
/// settings for each drive (the default adapts dt to the drive frequencies).
struct TimeDomainSpectrum {
    std::vector<double> mw_frequencies;
    std::vector<double> p0;
    double min_eigenvalue = 1.0;
    double max_trace_error = 0.0;
};

inline TimeDomainSpectrum time_domain_spectrum(const NVParameters& params, const DriveConfig& drive,
                                               const std::vector<double>& mw_grid, double relax_to_zero_rate,
                                               double dephase_rate, unsigned threads = 1) {
    TimeDomainSpectrum s;
    s.mw_frequencies = mw_grid;
    const auto results = parallel_map(mw_grid.size(), threads, [&](std::size_t i) {
        DriveConfig d = drive;
        d.omega_MW = mw_grid[i];
        return integrate_lab_frame(params, d, default_integration_config(params, d, relax_to_zero_rate, dephase_rate));
    });
    for (const auto& r : results) {
        s.p0.push_back(r.p0);
        s.min_eigenvalue = std::min(s.min_eigenvalue, r.min_eigenvalue);
        s.max_trace_error = std::max(s.max_trace_error, r.max_trace_error);
    }
    return s;
}

struct TimeDomainDips {
    std::vector<double> fitted;
    std::vector<double> closed;
    double max_deviation = 0.0;
};

/// Fits time-domain dips seeded at the closed-form centers (sorted).
inline TimeDomainDips fit_time_domain_dips(const TimeDomainSpectrum& s, const std::vector<double>& closed) {
    FitOptions opt;
    opt.max_relative_residual = 0.2;
    const auto fit = fit_dips(s.mw_frequencies, s.p0, closed.size(), closed, opt);
    TimeDomainDips out;
    out.closed = closed;
    std::sort(out.closed.begin(), out.closed.end());
    for (const auto& d : fit.dips) out.fitted.push_back(d.center);
    for (std::size_t i = 0; i < out.closed.size(); ++i)
        out.max_deviation = std::max(out.max_deviation, std::abs(out.fitted[i] - out.closed[i]));
    return out;
}

struct RwaScanOptions {
    double relax_to_zero_rate = 8e3; ///< Hz
    double dephase_rate = 6e3;       ///< Hz
    std::size_t mw_points = 0;       ///< 0: spacing of Gamma/4 over the window
    double window_linewidths = 4.0;  ///< MW half-span beyond the pair, in units of Gamma
    unsigned threads = 1;
};

struct RwaScanPoint {
    double amplitude = 0.0;  ///< control amplitude B_RFc, T
    double deviation = 0.0;  ///< max |fitted - closed| over the dip pair, Hz
    double splitting = 0.0;  ///< closed-form pair splitting, Hz
    std::vector<double> fitted;
    std::vector<double> closed;

    double relative() const { return splitting > 0.0 ? deviation / splitting : 0.0; }
};

/// Closed-form dip pair probed by the scan for one drive. With a target
/// field this is the res2 pair of the double-dressed spectrum; without one it
/// is the dressed pair at D'+E' -+ gamma*B_RFc/2.
inline std::vector<double> rwa_scan_pair(const NVParameters& params, const DriveConfig& d) {
    const auto zfs = effective_zfs(params);
    if (d.B_RFt > 0.0) {
        const auto set = resonances_double_dressed(params, zfs, d);
        return {set.find("res2-").frequency, set.find("res2+").frequency};
    }
    const double c = 0.5 * params.gamma_e * d.B_RFc;
    const double a = zfs.D_prime + zfs.Ex_prime;
    return {a - c, a + c};
}

/// Time-domain dip pair for one drive, fitted against rwa_scan_pair.
inline RwaScanPoint rwa_scan_point(const NVParameters& params, const DriveConfig& d, const RwaScanOptions& opt) {
    RwaScanPoint pt;
    pt.amplitude = d.B_RFc;
    pt.closed = rwa_scan_pair(params, d);
    pt.splitting = pt.closed[1] - pt.closed[0];
    const double gamma = opt.dephase_rate + 0.5 * opt.relax_to_zero_rate;
    const double half = 0.5 * pt.splitting + opt.window_linewidths * gamma;
    const double mid = 0.5 * (pt.closed[0] + pt.closed[1]);
    std::size_t n = opt.mw_points;
    if (n == 0) n = static_cast<std::size_t>(std::ceil(2.0 * half / (gamma / 4.0))) + 1;
    const auto grid = GridSpec{mid - half, mid + half, n}.values();
    const auto s = time_domain_spectrum(params, d, grid, opt.relax_to_zero_rate, opt.dephase_rate, opt.threads);
    try {
        const auto dips = fit_time_domain_dips(s, pt.closed);
        pt.fitted = dips.fitted;
        pt.deviation = dips.max_deviation;
    } catch (const ComputationError& e) {
        std::ostringstream os;
        os << "rwa scan at B_RFc = " << d.B_RFc << " T: " << e.what();
        throw FitDiverged(os.str());
    }
    return pt;
}

/// Sweeps the control amplitude at omega_RFc = 2E' (target, if present, held
/// at the low resonant condition; x-axis microwave) and compares the
/// time-domain dip pair with its closed form. Amplitude 0 carries no control
/// field and hence no control counter-rotating term; it is reported as
/// deviation 0 without integrating.
inline std::vector<RwaScanPoint> rwa_error_scan(const NVParameters& params, const DriveConfig& drive_template,
                                                const std::vector<double>& amplitude_grid,
                                                const RwaScanOptions& opt = {}) {
    for (std::size_t i = 1; i < amplitude_grid.size(); ++i)
        if (!(amplitude_grid[i] > amplitude_grid[i - 1]))
            throw InvalidArgument("rwa_error_scan: amplitude grid must be increasing");
    for (double a : amplitude_grid)
        if (a < 0.0) throw InvalidArgument("rwa_error_scan: amplitudes must be >= 0");
    if (drive_template.B_RFt < 0.0) throw InvalidArgument("rwa_error_scan: B_RFt must be >= 0");
    const auto zfs = effective_zfs(params);

    std::vector<RwaScanPoint> out;
    for (double a : amplitude_grid) {
        if (a == 0.0) {
            RwaScanPoint pt;
            out.push_back(pt);
            continue;
        }
        DriveConfig d = drive_template;
        d.B_RFc = a;
        d.omega_RFc = 2.0 * zfs.Ex_prime;
        d.omega_RFt = d.B_RFt > 0.0 ? resonant_target_condition(params, zfs, a).first : 0.0;
        d.mw_axis = MwAxis::X;
        out.push_back(rwa_scan_point(params, d, opt));
    }
    return out;
}

/// Reduced-splitting sensor for time-domain work: the drive structure around
/// the |0>-|B>-|D> system is unchanged while the fastest lab frequency drops
/// from ~2.9 GHz to ~24 MHz, keeping fixed-step integration tractable.
inline NVParameters time_domain_profile() {
    NVParameters p;
    p.D = 20e6;
    p.Ex = 4.235e6;
    p.Bx = 0.0;
    p.Gamma_b = p.Gamma_d = 10e3;
    return p;
}

} // namespace nvsense
