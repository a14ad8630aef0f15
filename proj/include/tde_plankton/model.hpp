#pragma once

// NPZ model with maturity-structured juvenile zooplankton: parameters,
// functional responses, the fixed-delay (transformed time) right-hand side
// and the biomass conservation functional.

#include "tde_plankton/errors.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>

namespace tde_plankton {

/// Phase-space floor for R(P); below it the transformed time scale R*/R(P)
/// is treated as singular.
inline constexpr double kRateFloor = 1e-14;

/// Saturation value of R for both response variants (maturity units/day).
inline constexpr double kRInfinity = 1.0;

enum class ResponseVariant { MichaelisMenten, Constant };

/// Selects the juvenile development rate R(P). Uptake f and grazing h are
/// always Michaelis-Menten.
struct ResponseKind {
    ResponseVariant variant = ResponseVariant::MichaelisMenten;
    double l = 0.159;  // half-saturation for MichaelisMenten (uM); unused for Constant

    [[nodiscard]] static ResponseKind michaelis_menten(double l) {
        return {ResponseVariant::MichaelisMenten, l};
    }
    [[nodiscard]] static ResponseKind constant() { return {ResponseVariant::Constant, 0.0}; }
    [[nodiscard]] bool is_constant() const noexcept { return variant == ResponseVariant::Constant; }
};

struct ModelParams {
    double mu = 5.9;       // phytoplankton max uptake rate (1/day)
    double lambda = 0.017; // phytoplankton mortality (1/day)
    double g = 7.0;        // zooplankton max grazing rate (1/day)
    double gamma = 0.7;    // grazing efficiency
    double delta = 0.17;   // mature zooplankton mortality (1/day)
    double delta0 = 0.0;   // juvenile mortality (1/day)
    double k = 1.0;        // nutrient half-saturation (uM)
    double kk = 1.0;       // grazing half-saturation (uM)
    ResponseKind response{};
    double m = 0.0;        // required maturity
    double n_total = 1.0;  // total biomass N_T (uM)
    std::optional<double> r_star;  // reference growth rate R*; resolved from equilibria when empty

    /// Default parameter set with the requested juvenile mortality and R response.
    [[nodiscard]] static ModelParams table1(double delta0 = 0.0,
                                            ResponseKind response = ResponseKind::michaelis_menten(0.159)) {
        ModelParams p;
        p.delta0 = delta0;
        p.response = response;
        return p;
    }
};

struct StateNPZ {
    double n = 0.0;
    double p = 0.0;
    double z = 0.0;

    friend StateNPZ operator+(StateNPZ a, const StateNPZ& b) noexcept {
        return {a.n + b.n, a.p + b.p, a.z + b.z};
    }
    friend StateNPZ operator*(double s, StateNPZ a) noexcept { return {s * a.n, s * a.p, s * a.z}; }
    [[nodiscard]] double sum() const noexcept { return n + p + z; }
    [[nodiscard]] double max_abs() const noexcept {
        return std::fmax(std::fabs(n), std::fmax(std::fabs(p), std::fabs(z)));
    }
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::InvalidParams, what);
}

inline void require_nonnegative(double x, const char* name) {
    if (!(x >= 0.0)) {
        std::ostringstream os;
        os << name << " must be >= 0 (got " << x << ")";
        throw Error(ErrorKind::Domain, os.str());
    }
}

}  // namespace detail

/// Throws InvalidParams when any model invariant is violated.
inline void validate(const ModelParams& p) {
    using detail::require;
    const auto finite_pos = [](double x) { return std::isfinite(x) && x > 0.0; };
    require(finite_pos(p.mu), "mu must be positive");
    require(finite_pos(p.lambda), "lambda must be positive");
    require(finite_pos(p.g), "g must be positive");
    require(finite_pos(p.gamma) && p.gamma <= 1.0, "gamma must lie in (0, 1]");
    require(finite_pos(p.delta), "delta must be positive");
    require(std::isfinite(p.delta0) && p.delta0 >= 0.0, "delta0 must be >= 0");
    require(finite_pos(p.k), "k must be positive");
    require(finite_pos(p.kk), "kk must be positive");
    require(std::isfinite(p.m) && p.m >= 0.0, "m must be >= 0");
    require(finite_pos(p.n_total), "n_total must be positive");
    require(p.mu > p.lambda, "mu > lambda is required (f^-1(lambda/mu) must exist)");
    require(p.gamma * p.g > p.delta, "gamma*g > delta is required (h^-1(delta/(gamma g)) must exist)");
    if (!p.response.is_constant()) require(finite_pos(p.response.l), "l must be positive");
    if (p.r_star) require(finite_pos(*p.r_star), "r_star must be positive");
}

// --- functional responses -------------------------------------------------

[[nodiscard]] inline double f_uptake(double n, const ModelParams& p) {
    detail::require_nonnegative(n, "n");
    return n / (n + p.k);
}
[[nodiscard]] inline double f_uptake_deriv(double n, const ModelParams& p) {
    detail::require_nonnegative(n, "n");
    return p.k / ((n + p.k) * (n + p.k));
}

[[nodiscard]] inline double h_grazing(double prey, const ModelParams& p) {
    detail::require_nonnegative(prey, "p");
    return prey / (prey + p.kk);
}
[[nodiscard]] inline double h_grazing_deriv(double prey, const ModelParams& p) {
    detail::require_nonnegative(prey, "p");
    return p.kk / ((prey + p.kk) * (prey + p.kk));
}

[[nodiscard]] inline double r_growth(double prey, const ModelParams& p) {
    detail::require_nonnegative(prey, "p");
    if (p.response.is_constant()) return kRInfinity;
    return kRInfinity * prey / (prey + p.response.l);
}
[[nodiscard]] inline double r_growth_deriv(double prey, const ModelParams& p) {
    detail::require_nonnegative(prey, "p");
    if (p.response.is_constant()) return 0.0;
    const double den = prey + p.response.l;
    return kRInfinity * p.response.l / (den * den);
}

namespace detail {
inline double mm_inverse(double y, double half) {
    if (!(y > 0.0 && y < 1.0)) {
        std::ostringstream os;
        os << "inverse response needs y in (0,1), got " << y;
        throw Error(ErrorKind::Domain, os.str());
    }
    return half * y / (1.0 - y);
}
}  // namespace detail

[[nodiscard]] inline double f_inverse(double y, const ModelParams& p) { return detail::mm_inverse(y, p.k); }
[[nodiscard]] inline double h_inverse(double y, const ModelParams& p) { return detail::mm_inverse(y, p.kk); }

/// R*/R(p), the local stretch between physical and transformed time.
[[nodiscard]] inline double rate_ratio(double prey, double r_star, const ModelParams& p) {
    const double r = r_growth(prey, p);
    if (!(r >= kRateFloor)) {
        std::ostringstream os;
        os << "R(P) = " << r << " below floor at P = " << prey;
        throw Error(ErrorKind::SingularRate, os.str());
    }
    return r_star / r;
}

[[nodiscard]] inline double require_r_star(const ModelParams& p) {
    if (!p.r_star) throw Error(ErrorKind::InvalidParams, "r_star must be resolved before use");
    return *p.r_star;
}

/// Delay of the transformed system, T = m / R*.
[[nodiscard]] inline double transformed_delay(const ModelParams& p) { return p.m / require_r_star(p); }

/// Right-hand side of the fixed-delay system in transformed time.
/// `tau_hat_m` is the physical delay tau(m, P_t) accumulated over the window.
[[nodiscard]] inline StateNPZ dde_rhs(const StateNPZ& current, const StateNPZ& delayed, double tau_hat_m,
                                      const ModelParams& p) {
    const double r_star = require_r_star(p);
    const double stretch = rate_ratio(current.p, r_star, p);
    const double stretch_delayed = rate_ratio(delayed.p, r_star, p);

    const double uptake = p.mu * current.p * f_uptake(current.n, p);
    const double grazing = p.g * current.z * h_grazing(current.p, p);
    const double juvenile_loss = p.delta0 * (p.n_total - current.n - current.p - current.z);

    StateNPZ rate;
    rate.n = stretch * (-uptake + p.lambda * current.p + p.delta * current.z + (1.0 - p.gamma) * grazing +
                        juvenile_loss);
    rate.p = stretch * (uptake - p.lambda * current.p - grazing);
    rate.z = p.gamma * p.g * std::exp(-p.delta0 * tau_hat_m) * stretch_delayed * delayed.z *
                 h_grazing(delayed.p, p) -
             stretch * p.delta * current.z;
    return rate;
}

/// Juvenile pool carried by a uniformly sampled window (oldest first, last
/// entry = current time, spacing dt_hat in transformed time). Only the final
/// T/dt_hat panels are used. Returns the pool and the accumulated
/// tau_hat(m) of the same window.
struct JuvenilePool {
    double biomass = 0.0;
    double tau_m = 0.0;
};

[[nodiscard]] inline std::size_t delay_steps_for(double delay, double dt_hat) {
    if (delay == 0.0) return 0;
    const double ratio = delay / dt_hat;
    const double rounded = std::round(ratio);
    if (!(rounded >= 1.0) || std::fabs(ratio - rounded) > 1e-9 * rounded) {
        std::ostringstream os;
        os << "dt_hat = " << dt_hat << " must divide the delay T = " << delay;
        throw Error(ErrorKind::Domain, os.str());
    }
    return static_cast<std::size_t>(rounded);
}

namespace detail {

/// Integrals over [0, 1] of (1 - x) e^{-a x} and x e^{-a x}.
[[nodiscard]] inline std::pair<double, double> exp_panel_weights(double a) {
    if (std::fabs(a) < 1e-3) {
        const double a2 = a * a;
        return {0.5 - a / 6.0 + a2 / 24.0 - a2 * a / 120.0, 0.5 - a / 3.0 + a2 / 8.0 - a2 * a / 30.0};
    }
    const double e = std::exp(-a);
    return {(a - 1.0 + e) / (a * a), (1.0 - (1.0 + a) * e) / (a * a)};
}

}  // namespace detail

/// Panels integrate the survival factor exp(-delta0 tau) exactly for tau
/// linear across the panel and the remaining factor by the trapezoid rule, so
/// constant histories give the exact pool.
[[nodiscard]] inline JuvenilePool juvenile_pool(std::span<const StateNPZ> window, double dt_hat,
                                                const ModelParams& p) {
    const double r_star = require_r_star(p);
    const std::size_t steps = delay_steps_for(p.m / r_star, dt_hat);
    if (steps == 0) return {};
    if (window.size() < steps + 1) {
        std::ostringstream os;
        os << "window holds " << window.size() << " samples, need " << steps + 1;
        throw Error(ErrorKind::InsufficientHistory, os.str());
    }
    const std::size_t last = window.size() - 1;
    // Walk backwards from the current time: age j * dt_hat.
    const auto births = [&](std::size_t j, double ratio) {
        const StateNPZ& s = window[last - j];
        return p.gamma * p.g * s.z * h_grazing(s.p, p) * ratio;
    };
    double tau = 0.0;
    double prev_ratio = rate_ratio(window[last].p, r_star, p);
    double prev_birth = births(0, prev_ratio);
    double sum = 0.0;
    for (std::size_t j = 1; j <= steps; ++j) {
        const double ratio = rate_ratio(window[last - j].p, r_star, p);
        const double birth = births(j, ratio);
        const double dtau = 0.5 * dt_hat * (ratio + prev_ratio);
        const auto [w0, w1] = detail::exp_panel_weights(p.delta0 * dtau);
        sum += std::exp(-p.delta0 * tau) * (w0 * prev_birth + w1 * birth);
        tau += dtau;
        prev_ratio = ratio;
        prev_birth = birth;
    }
    return {sum * dt_hat, tau};
}

/// N + P + Z + juvenile pool for the current (last) sample of the window.
[[nodiscard]] inline double conservation_value(std::span<const StateNPZ> window, double dt_hat,
                                               const ModelParams& p) {
    if (window.empty()) throw Error(ErrorKind::InsufficientHistory, "empty window");
    return window.back().sum() + juvenile_pool(window, dt_hat, p).biomass;
}

}  // namespace tde_plankton
