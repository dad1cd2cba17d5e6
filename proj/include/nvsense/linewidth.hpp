#pragma once

#include <cmath>

#include "nvsense/error.hpp"

namespace nvsense {

/// Phenomenological linewidth of the RF-dressed resonances versus control
/// amplitude: electric-noise broadening suppressed by the control field, plus
/// broadening from control-amplitude fluctuations that grows linearly.
///
///   Gamma(B) = gamma_residual + gamma_electric / (1 + (B/suppression_scale)^2)
///              + fluctuation_coeff * gamma_e * B
struct LinewidthModel {
    double gamma_residual = 0.0;    ///< Hz
    double gamma_electric = 0.0;    ///< Hz
    double suppression_scale = 1.0; ///< T
    double fluctuation_coeff = 0.0; ///< dimensionless

    void validate() const {
        if (gamma_residual < 0.0 || gamma_electric < 0.0 || fluctuation_coeff < 0.0)
            throw InvalidArgument("linewidth: coefficients must be >= 0");
        if (!(suppression_scale > 0.0)) throw InvalidArgument("linewidth: suppression_scale must be > 0");
        if (!(gamma_residual + gamma_electric > 0.0))
            throw InvalidArgument("linewidth: Gamma(0) must be > 0");
    }

    /// Half width at half maximum in Hz for control amplitude B (T).
    double operator()(double B, double gamma_e) const {
        const double u = B / suppression_scale;
        return gamma_residual + gamma_electric / (1.0 + u * u) + fluctuation_coeff * gamma_e * std::abs(B);
    }

    double derivative(double B, double gamma_e) const {
        const double u = B / suppression_scale;
        const double q = 1.0 + u * u;
        return -gamma_electric * 2.0 * u / (suppression_scale * q * q) + fluctuation_coeff * gamma_e;
    }

    /// Location of the interior minimum (T). The derivative is negative at 0
    /// and positive at large B whenever both noise terms are present, and the
    /// bisection below locates its sign change.
    double minimum_location(double gamma_e) const {
        if (gamma_electric <= 0.0) return 0.0;
        if (fluctuation_coeff <= 0.0) return INFINITY;
        double lo = 0.0;
        double hi = suppression_scale;
        while (derivative(hi, gamma_e) < 0.0) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (derivative(mid, gamma_e) < 0.0 ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }
};

/// Demo calibration, not a first-principles model: Gamma(0) equals the 0.5 MHz
/// bare linewidth, and fluctuation_coeff is solved so the minimum sits at
/// B_min (33.7 uT by default).
inline LinewidthModel demo_linewidth_model(double gamma_e, double B_min = 33.7e-6) {
    LinewidthModel m;
    m.gamma_residual = 80e3;
    m.gamma_electric = 420e3;
    m.suppression_scale = 4e-6;
    const double u = B_min / m.suppression_scale;
    const double q = 1.0 + u * u;
    m.fluctuation_coeff = m.gamma_electric * 2.0 * u / (m.suppression_scale * q * q) / gamma_e;
    return m;
}

} // namespace nvsense
