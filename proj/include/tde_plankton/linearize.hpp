#pragma once

// Linearization about an equilibrium and the transcendental characteristic
// function det(sI - A1 - A2 e^{-sT} - A3 (1 - e^{-sT}) / s).

#include "tde_plankton/equilibria.hpp"
#include "tde_plankton/errors.hpp"
#include "tde_plankton/model.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <sstream>
#include <vector>

namespace tde_plankton {

using Complex = std::complex<double>;

struct ResponseCoefficients {
    double a = 0.0;  // f'(N*)
    double b = 0.0;  // h'(P*)
    double c = 0.0;  // f(N*)
    double d = 0.0;  // h(P*)
};

struct LinearizationData {
    Eigen::Matrix3d a1 = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d a2 = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d a3 = Eigen::Matrix3d::Zero();
    double t_delay = 0.0;  // T = m / R(P*)
    ResponseCoefficients coeffs;
    double r_star = 1.0;   // R(P*)
    double delta0 = 0.0;
    StateNPZ at;           // equilibrium the data was built from
};

/// Builds A1, A2, A3 at the point (n, prey, z) with R* = R(P*). No check
/// that the point is an equilibrium; continuation evaluates off the
/// equilibrium manifold.
[[nodiscard]] inline LinearizationData build_linearization_at(double n, double prey, double z,
                                                              const ModelParams& p) {
    const double r = r_growth(prey, p);
    if (!(r >= kRateFloor)) throw Error(ErrorKind::SingularRate, "R(P*) below floor in linearization");
    LinearizationData lin;
    lin.at = {n, prey, z};
    lin.r_star = r;
    lin.delta0 = p.delta0;
    lin.t_delay = p.m / r;
    auto& cf = lin.coeffs;
    cf.a = f_uptake_deriv(n, p);
    cf.b = h_grazing_deriv(prey, p);
    cf.c = f_uptake(n, p);
    cf.d = h_grazing(prey, p);

    const double log_slope = r_growth_deriv(prey, p) / r;  // R'(P*)/R(P*)
    const double survive = std::exp(-p.delta0 * lin.t_delay);
    const double births = p.gamma * p.g * z;

    lin.a1 << -p.mu * prey * cf.a - p.delta0,
        -p.mu * cf.c + p.lambda + (1.0 - p.gamma) * p.g * z * cf.b - p.delta0,
        p.delta - p.delta0 + (1.0 - p.gamma) * p.g * cf.d,
        p.mu * prey * cf.a, p.mu * cf.c - p.lambda - p.g * z * cf.b, -p.g * cf.d,
        0.0, survive * births * cf.d * log_slope, -p.delta;

    lin.a2(2, 1) = survive * births * (cf.b - log_slope * cf.d);
    lin.a2(2, 2) = survive * p.gamma * p.g * cf.d;
    lin.a3(2, 1) = p.delta0 * survive * births * cf.d * log_slope;
    return lin;
}

[[nodiscard]] inline LinearizationData build_linearization(const EquilibriumPoint& eq, const ModelParams& p) {
    if (eq.kind == EquilibriumKind::LimitE0)
        throw Error(ErrorKind::Domain, "e0 is a limit point, not an equilibrium of the delay system");
    return build_linearization_at(eq.n_star, eq.p_star, eq.z_star, p);
}

namespace detail {

/// (1 - e^{-sT}) / s with the removable singularity at s = 0 handled by series.
[[nodiscard]] inline Complex window_kernel(Complex s, double t_delay) {
    if (t_delay == 0.0) return {0.0, 0.0};
    if (std::abs(s) * t_delay < 1e-4) {
        const double t2 = t_delay * t_delay;
        return t_delay - s * t2 / 2.0 + s * s * t2 * t_delay / 6.0 - s * s * s * t2 * t2 / 24.0;
    }
    return (1.0 - std::exp(-s * t_delay)) / s;
}

[[nodiscard]] inline Complex det3(const Eigen::Matrix3cd& m) {
    return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
           m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

[[nodiscard]] inline Eigen::Matrix3cd char_matrix(Complex s, const LinearizationData& lin) {
    const Complex shift = (lin.t_delay == 0.0) ? Complex(1.0) : std::exp(-s * lin.t_delay);
    const Complex kernel = window_kernel(s, lin.t_delay);
    Eigen::Matrix3cd m = -lin.a1.cast<Complex>() - shift * lin.a2.cast<Complex>() - kernel * lin.a3.cast<Complex>();
    m.diagonal().array() += s;
    return m;
}

}  // namespace detail

[[nodiscard]] inline Complex char_fn(Complex s, const LinearizationData& lin) {
    return detail::det3(detail::char_matrix(s, lin));
}

/// Magnitude scale for char_fn(s): product of the row 1-norms of the
/// characteristic matrix (a Hadamard-type bound on |det|), floored at 1.
[[nodiscard]] inline double char_scale(Complex s, const LinearizationData& lin) {
    const Eigen::Matrix3cd m = detail::char_matrix(s, lin);
    double prod = 1.0;
    for (int i = 0; i < 3; ++i) prod *= m.row(i).cwiseAbs().sum();
    return std::max(1.0, prod);
}

struct RootOptions {
    int max_iter = 50;
    double tol = 1e-10;       // |F| <= tol * scale
    double divergence = 1e8;  // |s| beyond this counts as divergence
};

struct RootResult {
    Complex s;
    int iterations = 0;
};

namespace detail {

/// Newton iteration on an entire function with a centred-difference
/// derivative; returns nullopt-equivalent by throwing NoConverge.
template <class F, class Scale>
[[nodiscard]] RootResult newton_complex(F&& fn, Scale&& scale, Complex s, const RootOptions& opts) {
    Complex fs = fn(s);
    for (int it = 0; it <= opts.max_iter; ++it) {
        if (!std::isfinite(fs.real()) || !std::isfinite(fs.imag())) break;
        const double sc = scale(s);
        const double step = 1e-7 * std::max(1.0, std::abs(s));
        if (std::abs(fs) <= opts.tol * sc) {
            // one polishing step, kept only if it lowers the residual
            const Complex deriv = (fn(s + step) - fn(s - step)) / (2.0 * step);
            if (deriv != Complex(0.0)) {
                const Complex polished = s - fs / deriv;
                if (std::abs(fn(polished)) < std::abs(fs)) s = polished;
            }
            return {s, it};
        }
        if (it == opts.max_iter) break;
        const Complex deriv = (fn(s + step) - fn(s - step)) / (2.0 * step);
        if (deriv == Complex(0.0) || !std::isfinite(std::abs(deriv))) break;
        s -= fs / deriv;
        if (!(std::abs(s) < opts.divergence)) break;
        fs = fn(s);
    }
    std::ostringstream os;
    os << "Newton on the characteristic function did not converge (last s = " << s << ")";
    throw Error(ErrorKind::NoConverge, os.str());
}

}  // namespace detail

[[nodiscard]] inline RootResult refine_root(Complex s0, const LinearizationData& lin, const RootOptions& opts = {}) {
    return detail::newton_complex([&](Complex s) { return char_fn(s, lin); },
                                  [&](Complex s) { return char_scale(s, lin); }, s0, opts);
}

struct StabilityOptions {
    double omega_max = 0.0;  // 0 selects 10 max(mu, g, delta, 1/T)
    int grid_n = 512;
};

struct StabilityReport {
    double max_real = -std::numeric_limits<double>::infinity();
    std::vector<Complex> roots;  // distinct converged roots with Im >= 0
    int seeds = 0;
    int converged = 0;
    int unstable_count = 0;      // roots with Re > 0 and Im >= 0
};

[[nodiscard]] inline double default_omega_max(const LinearizationData& lin, const ModelParams& p) {
    double w = std::max({p.mu, p.g, p.delta});
    if (lin.t_delay > 0.0) w = std::max(w, 1.0 / lin.t_delay);
    return 10.0 * w;
}

/// Grid-seeded local root search. The characteristic function is deflated
/// by (s + delta0): that root is the biomass-conservation mode, present at
/// every equilibrium and outside the fixed-N_T phase space.
[[nodiscard]] inline StabilityReport stability_scan(const LinearizationData& lin, const ModelParams& p,
                                                    const StabilityOptions& opts = {}) {
    if (opts.grid_n < 64) throw Error(ErrorKind::Domain, "grid_n must be >= 64");
    const double omega_max = opts.omega_max > 0.0 ? opts.omega_max : default_omega_max(lin, p);
    const Complex cons_root(-lin.delta0, 0.0);
    const auto deflated = [&](Complex s) { return char_fn(s, lin) / (s - cons_root); };
    const auto deflated_scale = [&](Complex s) {
        return char_scale(s, lin) / std::max(1e-300, std::abs(s - cons_root));
    };

    std::vector<Complex> seeds;
    seeds.reserve(2 * static_cast<std::size_t>(opts.grid_n) + 16);
    for (int j = 0; j < opts.grid_n; ++j) {
        const double w = omega_max * j / (opts.grid_n - 1);
        seeds.emplace_back(0.0, w);
        seeds.emplace_back(0.5, w);
    }
    for (double x : {-2.0, -1.0, -0.5, -0.2, -0.05, 0.05, 0.2, 0.5, 1.0, 2.0, 5.0}) seeds.emplace_back(x, 0.0);

    StabilityReport report;
    report.seeds = static_cast<int>(seeds.size());
    for (const Complex& seed : seeds) {
        if (std::abs(seed - cons_root) < 1e-9) continue;
        Complex root;
        try {
            root = detail::newton_complex(deflated, deflated_scale, seed, RootOptions{}).s;
        } catch (const Error&) {
            continue;
        }
        ++report.converged;
        if (std::abs(root - cons_root) < 1e-6 * std::max(1.0, std::abs(cons_root))) continue;
        if (root.imag() < 0.0) root = std::conj(root);
        if (std::fabs(root.imag()) < 1e-12) root.imag(0.0);
        const bool seen = std::any_of(report.roots.begin(), report.roots.end(), [&](const Complex& r) {
            return std::abs(r - root) < 1e-6 * std::max(1.0, std::abs(root));
        });
        if (!seen) report.roots.push_back(root);
    }
    std::sort(report.roots.begin(), report.roots.end(),
              [](const Complex& x, const Complex& y) { return x.real() > y.real(); });
    for (const Complex& r : report.roots) {
        report.max_real = std::max(report.max_real, r.real());
        if (r.real() > 0.0) ++report.unstable_count;
    }
    return report;
}

[[nodiscard]] inline double rightmost_real_part(const LinearizationData& lin, const ModelParams& p,
                                                const StabilityOptions& opts = {}) {
    return stability_scan(lin, p, opts).max_real;
}

/// Remainder ratio of the first-order expansion of the threshold delay
/// tau(m, P) about the constant history P*:
///   |tau(P* + eps h) - tau(P*) + (R'/R) int_{-tau*}^0 eps h| / (eps ||h||).
/// tau is solved from int_{-tau}^0 R(P(u)) du = m by Newton with adaptive
/// Gauss-Kronrod quadrature.
[[nodiscard]] inline double tau_frechet_check(double p_star, const std::function<double(double)>& perturbation,
                                              double eps, const ModelParams& p) {
    const double r_base = r_growth(p_star, p);
    if (!(r_base >= kRateFloor)) throw Error(ErrorKind::SingularRate, "R(P*) below floor");
    if (p.m == 0.0) return 0.0;
    const double tau_base = p.m / r_base;

    double sup = 0.0;
    for (int i = 0; i <= 2000; ++i) sup = std::max(sup, std::fabs(perturbation(-2.0 * tau_base * i / 2000.0)));
    if (sup == 0.0 || eps == 0.0) return 0.0;

    const auto history = [&](double u) { return p_star + eps * perturbation(u); };
    const auto rate = [&](double u) {
        const double prey = history(u);
        if (!(prey > 0.0) || !(r_growth(prey, p) >= kRateFloor))
            throw Error(ErrorKind::Domain, "perturbed history leaves the phase space; threshold bracket fails");
        return r_growth(prey, p);
    };
    using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
    const auto accumulated = [&](double tau) { return Quad::integrate(rate, -tau, 0.0, 15, 1e-15); };

    double tau = tau_base;
    bool converged = false;
    for (int it = 0; it < 60; ++it) {
        const double step = (accumulated(tau) - p.m) / rate(-tau);
        tau -= step;
        if (!(tau > 0.0) || tau > 100.0 * tau_base)
            throw Error(ErrorKind::Domain, "threshold bracket fails for this perturbation size");
        if (std::fabs(step) <= 1e-15 * tau_base) {
            converged = true;
            break;
        }
    }
    if (!converged) throw Error(ErrorKind::NoConverge, "threshold delay did not converge");

    const double linear = r_growth_deriv(p_star, p) / r_base *
                          Quad::integrate([&](double u) { return eps * perturbation(u); }, -tau_base, 0.0, 15, 1e-15);
    return std::fabs(tau - tau_base + linear) / (eps * sup);
}

}  // namespace tde_plankton
