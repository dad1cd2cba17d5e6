#pragma once

// Least-squares Lorentzian dip fitting and linear regression helpers.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nvsense/error.hpp"

namespace nvsense {

/// One fitted dip: baseline - depth * (fwhm/2)^2 / ((w - center)^2 + (fwhm/2)^2).
struct DipFit {
    double center = 0.0;
    double fwhm = 0.0;
    double depth = 0.0;
    double residual = 0.0; ///< rms of the whole fit
};

struct DipFitResult {
    std::vector<DipFit> dips; ///< sorted by center
    double baseline = 0.0;
    double residual_rms = 0.0;
    int iterations = 0;
};

struct FitOptions {
    /// Moving-average window (points) used only to locate initial minima.
    std::size_t smoothing = 1;
    /// Minimum spacing between initial minima, in grid points.
    std::size_t min_separation = 2;
    /// Reject fits whose rms residual exceeds this fraction of the deepest dip.
    double max_relative_residual = 0.05;
    /// Reject fits where a dip is shallower than this many residual rms (0 disables).
    double min_depth_significance = 0.0;
    int max_iterations = 500;
};

inline double lorentzian_dip(double w, double center, double fwhm, double depth) {
    const double h = 0.5 * fwhm;
    const double u = w - center;
    return depth * h * h / (u * u + h * h);
}

inline std::vector<double> moving_average(std::span<const double> y, std::size_t window) {
    if (window <= 1) return {y.begin(), y.end()};
    const std::size_t half = window / 2;
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(y.size() - 1, i + half);
        double s = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) s += y[j];
        out[i] = s / static_cast<double>(hi - lo + 1);
    }
    return out;
}

/// Strict interior local minima (plateaus count once, at their left edge).
inline std::vector<std::size_t> local_minima(std::span<const double> y) {
    std::vector<std::size_t> idx;
    if (y.size() < 3) return idx;
    for (std::size_t i = 1; i + 1 < y.size(); ++i) {
        if (!(y[i] < y[i - 1])) continue;
        std::size_t j = i;
        while (j + 1 < y.size() && y[j + 1] == y[i]) ++j;
        if (j + 1 < y.size() && y[j + 1] > y[i]) idx.push_back(i);
        i = j;
    }
    return idx;
}

namespace detail {

/// Parameter layout: [baseline, (center, ln half-width, ln depth) per dip],
/// abscissa scaled to u = (w - origin) / scale.
class LorentzianSum {
  public:
    explicit LorentzianSum(std::size_t n) : n_(n) {}

    std::size_t size() const { return 1 + 3 * n_; }

    double value(double u, const Eigen::VectorXd& p) const {
        double v = p[0];
        for (std::size_t k = 0; k < n_; ++k) {
            const double c = p[1 + 3 * k];
            const double h = std::exp(p[2 + 3 * k]);
            const double d = std::exp(p[3 + 3 * k]);
            const double du = u - c;
            v -= d * h * h / (du * du + h * h);
        }
        return v;
    }

    void gradient(double u, const Eigen::VectorXd& p, Eigen::MatrixXd& jac, Eigen::Index row) const {
        auto g = jac.row(row);
        g[0] = 1.0;
        for (std::size_t k = 0; k < n_; ++k) {
            const double c = p[1 + 3 * k];
            const double h = std::exp(p[2 + 3 * k]);
            const double d = std::exp(p[3 + 3 * k]);
            const double du = u - c;
            const double q = du * du + h * h;
            const double L = h * h / q;
            g[1 + 3 * k] = -d * 2.0 * h * h * du / (q * q);
            g[2 + 3 * k] = -d * 2.0 * h * h * du * du / (q * q);
            g[3 + 3 * k] = -d * L;
        }
    }

  private:
    std::size_t n_;
};

} // namespace detail

/// Fits n_dips Lorentzian dips plus a constant baseline by Levenberg-Marquardt
/// with a fixed damping schedule. Initial centers come from `init` or from the
/// n_dips deepest local minima.
inline DipFitResult fit_dips(std::span<const double> w, std::span<const double> y, std::size_t n_dips,
                             const std::optional<std::vector<double>>& init = std::nullopt,
                             const FitOptions& opt = {}) {
    if (n_dips == 0) throw InvalidArgument("fit_dips: n_dips must be >= 1");
    if (w.size() != y.size() || w.size() < 3 * n_dips + 2)
        throw InsufficientResolution("fit_dips: not enough samples for the requested dips");
    for (std::size_t i = 1; i < w.size(); ++i)
        if (!(w[i] > w[i - 1])) throw InvalidArgument("fit_dips: abscissa must be strictly increasing");

    const double step = (w.back() - w.front()) / static_cast<double>(w.size() - 1);
    const auto smooth = moving_average(y, opt.smoothing);
    const double top = *std::max_element(smooth.begin(), smooth.end());

    // Initial centers as grid indices.
    std::vector<std::size_t> seeds;
    if (init) {
        if (init->size() != n_dips) throw InvalidArgument("fit_dips: init size must equal n_dips");
        for (double c : *init) {
            auto it = std::lower_bound(w.begin(), w.end(), c);
            std::size_t i = static_cast<std::size_t>(std::distance(w.begin(), it));
            if (i >= w.size()) i = w.size() - 1;
            if (i > 0 && std::abs(w[i - 1] - c) < std::abs(w[i] - c)) --i;
            seeds.push_back(i);
        }
    } else {
        auto minima = local_minima(smooth);
        std::stable_sort(minima.begin(), minima.end(),
                         [&](std::size_t a, std::size_t b) { return smooth[a] < smooth[b]; });
        for (std::size_t m : minima) {
            if (seeds.size() == n_dips) break;
            bool far = std::all_of(seeds.begin(), seeds.end(), [&](std::size_t s) {
                return (m > s ? m - s : s - m) >= opt.min_separation;
            });
            if (far) seeds.push_back(m);
        }
        if (seeds.empty()) throw FitDiverged("fit_dips: no local minimum to initialize from");
        // Too few minima: duplicate the deepest ones, one grid step outward.
        std::size_t k = 0;
        const std::size_t found = seeds.size();
        while (seeds.size() < n_dips) {
            const std::size_t s = seeds[k % found];
            const bool left = (k / found) % 2 == 0;
            const std::size_t off = 1 + k / (2 * found);
            seeds.push_back(left ? (s >= off ? s - off : 0) : std::min(w.size() - 1, s + off));
            ++k;
        }
    }

    std::vector<std::size_t> order = seeds;
    std::sort(order.begin(), order.end());
    auto bounds = [&](std::size_t s) {
        const auto pos = static_cast<std::size_t>(std::lower_bound(order.begin(), order.end(), s) - order.begin());
        const std::size_t lb = pos > 0 ? (order[pos - 1] + s + 1) / 2 : 0;
        const std::size_t ub = pos + 1 < order.size() ? (order[pos + 1] + s) / 2 : w.size() - 1;
        return std::pair{lb, ub};
    };
    // A supplied center may sit on a flank; slide it downhill, staying on its
    // side of the midpoints to the other seeds.
    if (init) {
        std::vector<std::size_t> moved = seeds;
        for (std::size_t k = 0; k < seeds.size(); ++k) {
            const auto [lb, ub] = bounds(seeds[k]);
            std::size_t i = seeds[k];
            while (true) {
                if (i > lb && smooth[i - 1] < smooth[i]) --i;
                else if (i < ub && smooth[i + 1] < smooth[i]) ++i;
                else break;
            }
            moved[k] = i;
        }
        seeds = moved;
        order = seeds;
        std::sort(order.begin(), order.end());
    }

    // Width guesses from the half-depth crossing, bounded by the midpoints to
    // neighbouring seeds.
    std::vector<double> widths;
    for (std::size_t s : seeds) {
        const auto [lb, ub] = bounds(s);
        const double half = smooth[s] + 0.5 * (top - smooth[s]);
        std::size_t l = s;
        while (l > lb && smooth[l] < half) --l;
        std::size_t r = s;
        while (r < ub && smooth[r] < half) ++r;
        double fw = std::min(w[s] - w[l], w[r] - w[s]) * 2.0;
        if (!(fw > 0.0)) fw = std::max(w[s] - w[l], w[r] - w[s]) * 2.0;
        widths.push_back(fw);
    }
    for (double fw : widths) {
        if (fw < 5.0 * step) {
            std::ostringstream os;
            os << "fit_dips: initial fwhm guess " << fw << " spans fewer than 5 grid steps of " << step;
            throw InsufficientResolution(os.str());
        }
    }

    const double origin = 0.5 * (w.front() + w.back());
    const double scale = 0.5 * (w.back() - w.front());
    std::vector<double> u(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) u[i] = (w[i] - origin) / scale;

    double ymax = *std::max_element(y.begin(), y.end());
    double ymin = *std::min_element(y.begin(), y.end());
    const double yscale = std::max(ymax - ymin, std::numeric_limits<double>::min());
    std::vector<double> ys(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) ys[i] = (y[i] - ymax) / yscale;

    detail::LorentzianSum model(n_dips);
    Eigen::VectorXd p(model.size());
    p[0] = (top - ymax) / yscale;
    for (std::size_t k = 0; k < n_dips; ++k) {
        p[1 + 3 * k] = u[seeds[k]];
        p[2 + 3 * k] = std::log(0.5 * widths[k] / scale);
        p[3 + 3 * k] = std::log(std::max((top - smooth[seeds[k]]) / yscale, 1e-6));
    }

    const std::size_t m = u.size();
    auto cost_of = [&](const Eigen::VectorXd& q) {
        double c = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double r = ys[i] - model.value(u[i], q);
            c += r * r;
        }
        return c;
    };

    Eigen::MatrixXd Jm(m, model.size());
    Eigen::VectorXd r(m);
    double cost = cost_of(p);
    double mu = 1e-3;
    int it = 0;
    bool converged = false;
    for (; it < opt.max_iterations && !converged; ++it) {
        for (std::size_t i = 0; i < m; ++i) {
            r[i] = ys[i] - model.value(u[i], p);
            model.gradient(u[i], p, Jm, static_cast<Eigen::Index>(i));
        }
        const Eigen::MatrixXd JtJ = Jm.transpose() * Jm;
        const Eigen::VectorXd Jtr = Jm.transpose() * r;
        bool accepted = false;
        for (int inner = 0; inner < 40; ++inner) {
            Eigen::MatrixXd A = JtJ;
            for (Eigen::Index j = 0; j < A.rows(); ++j) A(j, j) += mu * std::max(JtJ(j, j), 1e-30);
            const Eigen::VectorXd delta = A.ldlt().solve(Jtr);
            if (!delta.allFinite()) {
                mu *= 10.0;
                continue;
            }
            const Eigen::VectorXd trial = p + delta;
            const double c = cost_of(trial);
            if (std::isfinite(c) && c <= cost) {
                const double gain = cost - c;
                p = trial;
                cost = c;
                mu = std::max(mu / 10.0, 1e-12);
                accepted = true;
                if (gain <= 1e-16 * std::max(cost, 1e-300) || delta.norm() < 1e-15) converged = true;
                break;
            }
            mu *= 10.0;
        }
        if (!accepted || cost < 1e-30) break;
    }

    DipFitResult res;
    res.iterations = it;
    res.baseline = p[0] * yscale + ymax;
    res.residual_rms = std::sqrt(cost / static_cast<double>(m)) * yscale;
    double deepest = 0.0;
    for (std::size_t k = 0; k < n_dips; ++k) {
        DipFit d;
        d.center = p[1 + 3 * k] * scale + origin;
        d.fwhm = 2.0 * std::exp(p[2 + 3 * k]) * scale;
        d.depth = std::exp(p[3 + 3 * k]) * yscale;
        d.residual = res.residual_rms;
        if (!std::isfinite(d.center) || !std::isfinite(d.fwhm) || !std::isfinite(d.depth) || !(d.fwhm > 0.0) ||
            !(d.depth > 0.0))
            throw FitDiverged("fit_dips: non-finite or non-positive fitted parameters");
        if (d.center < w.front() || d.center > w.back())
            throw FitDiverged("fit_dips: a fitted center left the sampled range");
        deepest = std::max(deepest, d.depth);
        res.dips.push_back(d);
    }
    if (!std::isfinite(res.residual_rms) || res.residual_rms > opt.max_relative_residual * deepest) {
        std::ostringstream os;
        os << "fit_dips: residual rms " << res.residual_rms << " exceeds " << opt.max_relative_residual
           << " of the deepest dip";
        throw FitDiverged(os.str());
    }
    if (opt.min_depth_significance > 0.0) {
        for (const auto& d : res.dips)
            if (d.depth < opt.min_depth_significance * res.residual_rms)
                throw FitDiverged("fit_dips: a fitted dip is not significant against the residual");
    }
    std::sort(res.dips.begin(), res.dips.end(), [](const DipFit& a, const DipFit& b) { return a.center < b.center; });
    return res;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double rms_residual = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
inline LinearFit ordinary_least_squares(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LinearFit f;
    if (sxx == 0.0) return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - (f.slope * x[i] + f.intercept);
        ssr += e * e;
    }
    f.rms_residual = std::sqrt(ssr / static_cast<double>(n));
    f.slope_stderr = n > 2 ? std::sqrt(ssr / static_cast<double>(n - 2) / sxx) : 0.0;
    return f;
}

} // namespace nvsense
