#pragma once

// Critical biomass thresholds, the equilibria e0 / E1 / E2, the stationary
// juvenile spectrum and total-biomass sweeps.

#include "tde_plankton/errors.hpp"
#include "tde_plankton/model.hpp"
#include "tde_plankton/roots.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string_view>
#include <vector>

namespace tde_plankton {

enum class EquilibriumKind { LimitE0, E1, E2 };

[[nodiscard]] constexpr std::string_view to_string(EquilibriumKind kind) noexcept {
    switch (kind) {
        case EquilibriumKind::LimitE0: return "e0";
        case EquilibriumKind::E1: return "E1";
        case EquilibriumKind::E2: return "E2";
    }
    return "?";
}

struct EquilibriumPoint {
    EquilibriumKind kind = EquilibriumKind::LimitE0;
    double n_star = 0.0;
    double p_star = 0.0;
    double z_star = 0.0;
    double residual = 0.0;  // max |residual| of the three equilibrium equations
    bool exists = false;    // all components nonnegative
};

struct ThresholdReport {
    double nt1 = 0.0;
    std::optional<double> nt2;
    double m_ceiling = std::numeric_limits<double>::infinity();
};

[[nodiscard]] inline double compute_nt1(const ModelParams& p) { return f_inverse(p.lambda / p.mu, p); }

/// Largest maturity admitting coexistence: R_inf ln(gamma g / delta) / delta0.
[[nodiscard]] inline double m_ceiling(const ModelParams& p) {
    if (p.delta0 == 0.0) return std::numeric_limits<double>::infinity();
    return kRInfinity * std::log(p.gamma * p.g / p.delta) / p.delta0;
}

namespace detail {

/// (1 - exp(-delta0 m / R)) / delta0, with the delta0 = 0 limit m / R.
[[nodiscard]] inline double juvenile_residence(double delta0, double m, double r) {
    if (delta0 == 0.0) return m / r;
    return -std::expm1(-delta0 * m / r) / delta0;
}

}  // namespace detail

/// Phytoplankton level at coexistence, defined by
/// m = R(P) ln(gamma g h(P) / delta) / delta0.
[[nodiscard]] inline double solve_p2star(const ModelParams& p) {
    const double base = h_inverse(p.delta / (p.gamma * p.g), p);
    if (p.delta0 == 0.0 || p.m == 0.0) return base;
    const double ceiling = m_ceiling(p);
    if (!(p.m < ceiling)) {
        std::ostringstream os;
        os << "m = " << p.m << " is at or above the maturity ceiling " << ceiling;
        throw Error(ErrorKind::NoCoexistence, os.str());
    }
    const double ratio = p.gamma * p.g / p.delta;
    const auto residual = [&](double prey) {
        return r_growth(prey, p) * std::log(ratio * h_grazing(prey, p)) / p.delta0 - p.m;
    };
    const auto slope = [&](double prey) {
        const double hv = h_grazing(prey, p);
        return (r_growth_deriv(prey, p) * std::log(ratio * hv) + r_growth(prey, p) * h_grazing_deriv(prey, p) / hv) /
               p.delta0;
    };
    const double lo = base;
    double hi = 2.0 * base;
    while (residual(hi) < 0.0) {
        hi *= 2.0;
        if (!std::isfinite(hi) || hi > 1e300) throw Error(ErrorKind::NoCoexistence, "no bracket for P2*");
    }
    return roots::bisect_then_newton(residual, slope, lo, hi);
}

[[nodiscard]] inline double compute_nt2(const ModelParams& p) { return compute_nt1(p) + solve_p2star(p); }

[[nodiscard]] inline ThresholdReport thresholds(const ModelParams& p) {
    ThresholdReport report;
    report.nt1 = compute_nt1(p);
    report.m_ceiling = m_ceiling(p);
    if (p.m < report.m_ceiling) report.nt2 = report.nt1 + solve_p2star(p);
    return report;
}

/// Residuals of the conservation-form equilibrium equations at (n, p, z).
struct EquilibriumResiduals {
    double conservation = 0.0;
    double phyto = 0.0;
    double zoo = 0.0;
    [[nodiscard]] double max_abs() const noexcept {
        return std::fmax(std::fabs(conservation), std::fmax(std::fabs(phyto), std::fabs(zoo)));
    }
};

[[nodiscard]] inline EquilibriumResiduals equilibrium_residuals(double n, double prey, double z,
                                                                const ModelParams& p) {
    const double r = r_growth(prey, p);
    const double hv = h_grazing(prey, p);
    EquilibriumResiduals res;
    res.conservation = n + prey + z + p.gamma * p.g * z * hv * detail::juvenile_residence(p.delta0, p.m, r) - p.n_total;
    res.phyto = p.mu * prey * f_uptake(n, p) - p.lambda * prey - p.g * z * hv;
    res.zoo = p.gamma * p.g * std::exp(-p.delta0 * p.m / r) * z * hv - p.delta * z;
    return res;
}

[[nodiscard]] inline EquilibriumPoint limit_e0(const ModelParams& p) {
    return {EquilibriumKind::LimitE0, p.n_total, 0.0, 0.0, 0.0, true};
}

[[nodiscard]] inline EquilibriumPoint solve_e1(const ModelParams& p) {
    EquilibriumPoint eq;
    eq.kind = EquilibriumKind::E1;
    eq.n_star = compute_nt1(p);
    eq.p_star = p.n_total - eq.n_star;
    eq.z_star = 0.0;
    eq.exists = eq.p_star > 0.0;
    if (!eq.exists) {
        std::ostringstream os;
        os << "E1 needs N_T > nt1 = " << eq.n_star << " (N_T = " << p.n_total << ")";
        throw Error(ErrorKind::NotExist, os.str());
    }
    eq.residual = equilibrium_residuals(eq.n_star, eq.p_star, 0.0, p).max_abs();
    return eq;
}

[[nodiscard]] inline EquilibriumPoint solve_e2(const ModelParams& p) {
    const double prey = solve_p2star(p);
    const double nt1 = compute_nt1(p);
    if (!(p.n_total > nt1 + prey)) {
        std::ostringstream os;
        os << "E2 needs N_T > nt2 = " << nt1 + prey << " (N_T = " << p.n_total << ")";
        throw Error(ErrorKind::NotExist, os.str());
    }
    const double hv = h_grazing(prey, p);
    const double r = r_growth(prey, p);
    const double z_per_growth = prey / (p.g * hv);
    const double pool_factor = 1.0 + p.gamma * p.g * hv * detail::juvenile_residence(p.delta0, p.m, r);
    const auto residual = [&](double n) {
        return n + prey + (p.mu * f_uptake(n, p) - p.lambda) * z_per_growth * pool_factor - p.n_total;
    };
    const auto slope = [&](double n) { return 1.0 + p.mu * f_uptake_deriv(n, p) * z_per_growth * pool_factor; };
    const double n = roots::bisect_then_newton(residual, slope, nt1, p.n_total);

    EquilibriumPoint eq;
    eq.kind = EquilibriumKind::E2;
    eq.n_star = n;
    eq.p_star = prey;
    eq.z_star = (p.mu * f_uptake(n, p) - p.lambda) * z_per_growth;
    eq.residual = equilibrium_residuals(eq.n_star, eq.p_star, eq.z_star, p).max_abs();
    eq.exists = eq.n_star >= 0.0 && eq.p_star >= 0.0 && eq.z_star >= 0.0;
    return eq;
}

/// Stationary juvenile spectrum rho*(s) on [0, m].
[[nodiscard]] inline double equilibrium_spectrum(const EquilibriumPoint& eq, double s, const ModelParams& p) {
    if (!(s >= 0.0 && s <= p.m)) {
        std::ostringstream os;
        os << "maturity s = " << s << " outside [0, " << p.m << "]";
        throw Error(ErrorKind::Domain, os.str());
    }
    if (eq.kind == EquilibriumKind::LimitE0 || eq.z_star == 0.0) return 0.0;
    const double r = r_growth(eq.p_star, p);
    return p.gamma * p.g * eq.z_star * h_grazing(eq.p_star, p) / r * std::exp(-p.delta0 * s / r);
}

/// Default R*: R(P2*) when E2 exists, else R(P1*) when E1 exists, else R(N_T).
[[nodiscard]] inline double default_r_star(const ModelParams& p) {
    const double nt1 = compute_nt1(p);
    if (p.m < m_ceiling(p)) {
        const double p2 = solve_p2star(p);
        if (p.n_total > nt1 + p2) return r_growth(p2, p);
    }
    if (p.n_total > nt1) return r_growth(p.n_total - nt1, p);
    return r_growth(p.n_total, p);
}

/// Copy of `p` with r_star filled in (user value kept when present).
[[nodiscard]] inline ModelParams with_resolved_r_star(ModelParams p) {
    if (!p.r_star) p.r_star = default_r_star(p);
    return p;
}

struct SweepRow {
    double n_total = 0.0;
    EquilibriumPoint point;
    bool degenerate = false;  // within 1e-12 N_T of a threshold
};

[[nodiscard]] inline std::string_view sweep_kind_label(const SweepRow& row) noexcept {
    return row.degenerate ? std::string_view("degenerate") : to_string(row.point.kind);
}

/// For each N_T in the grid, the equilibrium a bifurcation diagram shows:
/// E2 when it exists, else E1, else the limit point e0.
[[nodiscard]] inline std::vector<SweepRow> classify_and_sweep(const ModelParams& base,
                                                              const std::vector<double>& nt_grid) {
    validate(base);
    const double nt1 = compute_nt1(base);
    std::optional<double> nt2;
    if (base.m < m_ceiling(base)) nt2 = nt1 + solve_p2star(base);

    std::vector<SweepRow> rows;
    rows.reserve(nt_grid.size());
    for (std::size_t i = 0; i < nt_grid.size(); ++i) {
        if (i > 0 && !(nt_grid[i] > nt_grid[i - 1])) throw Error(ErrorKind::Domain, "N_T grid must be increasing");
        ModelParams p = base;
        p.n_total = nt_grid[i];
        SweepRow row;
        row.n_total = p.n_total;
        const double tol = 1e-12 * p.n_total;
        if (std::fabs(p.n_total - nt1) <= tol) {
            row.degenerate = true;
            row.point = {EquilibriumKind::E1, nt1, 0.0, 0.0, 0.0, true};
        } else if (nt2 && std::fabs(p.n_total - *nt2) <= tol) {
            row.degenerate = true;
            row.point = {EquilibriumKind::E2, nt1, *nt2 - nt1, 0.0, 0.0, true};
        } else if (nt2 && p.n_total > *nt2) {
            row.point = solve_e2(p);
        } else if (p.n_total > nt1) {
            row.point = solve_e1(p);
        } else {
            row.point = limit_e0(p);
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace tde_plankton
