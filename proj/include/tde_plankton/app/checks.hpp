#pragma once

// Invariant suite behind the `check` subcommand. Each check is independent
// and reports pass, fail or skip with a short detail string.

#include "tde_plankton/app/config.hpp"
#include "tde_plankton/continuation.hpp"
#include "tde_plankton/equilibria.hpp"
#include "tde_plankton/linearize.hpp"
#include "tde_plankton/model.hpp"
#include "tde_plankton/simulate.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace tde_plankton::app {

enum class CheckStatus { Pass, Fail, Skip };

[[nodiscard]] constexpr std::string_view to_string(CheckStatus s) noexcept {
    switch (s) {
        case CheckStatus::Pass: return "pass";
        case CheckStatus::Fail: return "fail";
        case CheckStatus::Skip: return "skip";
    }
    return "?";
}

struct CheckResult {
    std::string name;
    CheckStatus status = CheckStatus::Pass;
    std::string detail;
};

namespace detail {

[[nodiscard]] inline std::string sci(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

[[nodiscard]] inline CheckResult verdict(std::string name, bool ok, std::string detail) {
    return {std::move(name), ok ? CheckStatus::Pass : CheckStatus::Fail, std::move(detail)};
}

/// A maturity for which E2 can exist under `p`.
[[nodiscard]] inline double usable_m(const ModelParams& p) {
    const double ceiling = m_ceiling(p);
    return p.m < ceiling ? p.m : 0.5 * ceiling;
}

[[nodiscard]] inline CheckResult check_responses(const ModelParams& p) {
    double worst = 0.0;
    bool monotone = true;
    double prev_f = -1.0, prev_h = -1.0, prev_r = -1.0;
    for (int i = 1; i <= 400; ++i) {
        const double x = 100.0 * i / 400.0;
        const double h = 1e-4 * x;
        const auto rel = [&](double analytic, double numeric) {
            return std::fabs(analytic - numeric) / std::max(std::fabs(analytic), 1e-12);
        };
        worst = std::max(worst, rel(f_uptake_deriv(x, p), (f_uptake(x + h, p) - f_uptake(x - h, p)) / (2 * h)));
        worst = std::max(worst, rel(h_grazing_deriv(x, p), (h_grazing(x + h, p) - h_grazing(x - h, p)) / (2 * h)));
        if (!p.response.is_constant())
            worst = std::max(worst, rel(r_growth_deriv(x, p), (r_growth(x + h, p) - r_growth(x - h, p)) / (2 * h)));
        const double fv = f_uptake(x, p), hv = h_grazing(x, p), rv = r_growth(x, p);
        monotone = monotone && fv > prev_f && hv > prev_h && (p.response.is_constant() || rv > prev_r) && fv < 1.0 &&
                   hv < 1.0 && rv <= 1.0;
        prev_f = fv;
        prev_h = hv;
        prev_r = rv;
    }
    return verdict("responses_monotone_and_derivatives", monotone && worst <= 1e-6,
                   "max relative derivative error " + sci(worst));
}

[[nodiscard]] inline CheckResult check_inverse(const ModelParams& p) {
    double worst = 0.0;
    for (int i = 1; i < 1000; ++i) {
        const double x = 100.0 * i / 1000.0;
        worst = std::max(worst, std::fabs(f_inverse(f_uptake(x, p), p) - x) / x);
        worst = std::max(worst, std::fabs(h_inverse(h_grazing(x, p), p) - x) / x);
    }
    return verdict("inverse_roundtrip", worst <= 1e-12, "max relative error " + sci(worst));
}

[[nodiscard]] inline CheckResult check_h_over_r(const ModelParams& p) {
    if (p.response.is_constant()) return {"h_over_r_limit", CheckStatus::Skip, "R is constant"};
    const double limit = p.response.l / p.kk;
    double worst = 0.0;
    for (double x = 1e-2; x > 1e-14; x /= 10.0)
        worst = std::max(worst, std::fabs(h_grazing(x, p) / r_growth(x, p) / kRInfinity - (x + p.response.l) / (x + p.kk)));
    const double near = h_grazing(1e-14, p) / r_growth(1e-14, p);
    return verdict("h_over_r_limit", worst <= 1e-12 && std::fabs(near - limit) <= 1e-10 * std::max(1.0, limit),
                   "h/R at p=1e-14 is " + sci(near) + ", limit l/K = " + sci(limit));
}

[[nodiscard]] inline CheckResult check_thresholds(const ModelParams& p) {
    const ThresholdReport th = thresholds(p);
    const double closed = p.k * (p.lambda / p.mu) / (1.0 - p.lambda / p.mu);
    const bool ok = std::fabs(th.nt1 - closed) <= 1e-15 * closed && (!th.nt2 || *th.nt2 > th.nt1);
    return verdict("thresholds_ordered", ok, "nt1 = " + sci(th.nt1) + (th.nt2 ? ", nt2 = " + sci(*th.nt2) : ""));
}

[[nodiscard]] inline CheckResult check_e2_residuals(const ModelParams& base) {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    int solved = 0;
    for (int i = 0; i < 200; ++i) {
        ModelParams p = base;
        p.r_star.reset();
        p.delta0 = unit(rng) < 0.5 ? 0.0 : base.delta * unit(rng);
        if (!p.response.is_constant()) p.response.l = std::pow(10.0, -2.0 + 2.0 * unit(rng));
        const double ceiling = m_ceiling(p);
        p.m = (std::isfinite(ceiling) ? 0.95 * ceiling : 20.0) * unit(rng);
        p.n_total = compute_nt2(p) * std::pow(10.0, 0.01 + 3.0 * unit(rng));
        const EquilibriumPoint eq = solve_e2(p);
        worst = std::max(worst, eq.residual / std::max(1.0, p.n_total));
        ++solved;
    }
    return verdict("e2_residuals", worst <= 1e-10,
                   std::to_string(solved) + " samples, max scaled residual " + sci(worst));
}

[[nodiscard]] inline CheckResult check_rhs_at_equilibrium(const ModelParams& base) {
    ModelParams p = base;
    p.m = usable_m(p);
    p.n_total = 3.0 * compute_nt2(p);
    p.r_star.reset();
    const EquilibriumPoint eq = solve_e2(p);
    p = with_resolved_r_star(p);
    const StateNPZ s{eq.n_star, eq.p_star, eq.z_star};
    const StateNPZ rate = dde_rhs(s, s, p.m / r_growth(eq.p_star, p), p);
    const double norm = rate.max_abs() / std::max(1.0, p.n_total);
    return verdict("dde_rhs_at_equilibrium", norm <= 1e-10, "scaled rate norm " + sci(norm));
}

/// Point with nt1 < N_T < nt2 and the E1 data there.
struct E1Setup {
    ModelParams params;
    EquilibriumPoint eq;
};

[[nodiscard]] inline E1Setup e1_setup(const ModelParams& base) {
    ModelParams p = base;
    p.m = usable_m(p);
    p.r_star.reset();
    p.n_total = 0.5 * (compute_nt1(p) + compute_nt2(p));
    return {p, solve_e1(p)};
}

[[nodiscard]] inline CheckResult check_e1_factorization(const ModelParams& base, bool inject_a2_sign_error) {
    const E1Setup setup = e1_setup(base);
    const ModelParams& p = setup.params;
    LinearizationData lin = build_linearization(setup.eq, p);
    if (inject_a2_sign_error) lin.a2 = -lin.a2;
    const double p1 = setup.eq.p_star;
    const double t = lin.t_delay;
    const double slope = p.mu * f_uptake_deriv(setup.eq.n_star, p) * p1;
    const double gain = p.gamma * p.g * h_grazing(p1, p) * std::exp(-p.delta0 * t);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> re(-2.0, 2.0), im(-10.0, 10.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Complex s(re(rng), im(rng));
        const Complex closed = (s + p.delta0) * (s + slope) * (s + p.delta - gain * std::exp(-s * t));
        worst = std::max(worst, std::abs(char_fn(s, lin) - closed) / std::max(1.0, std::abs(closed)));
    }
    return verdict("e1_factorization", worst <= 1e-10, "max relative gap " + sci(worst));
}

[[nodiscard]] inline CheckResult check_e1_stable(const ModelParams& base) {
    const E1Setup setup = e1_setup(base);
    const double rm = rightmost_real_part(build_linearization(setup.eq, setup.params), setup.params);
    return verdict("e1_stable_between_thresholds", rm < 0.0, "rightmost real part " + sci(rm));
}

[[nodiscard]] inline CheckResult check_periodicity(const ModelParams& base) {
    if (base.delta0 != 0.0)
        return {"periodicity_in_m", CheckStatus::Skip, "needs delta0 = 0 (char_fn is not periodic in m otherwise)"};
    ModelParams p = base;
    p.r_star.reset();
    p.m = 3.0;
    p.n_total = 3.0 * compute_nt2(p);
    const EquilibriumPoint eq = solve_e2(p);
    const double r = r_growth(eq.p_star, p);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> w(0.05, 5.0), mm(0.0, 15.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double omega = w(rng);
        ModelParams a = p;
        a.m = mm(rng);
        ModelParams b = a;
        b.m = a.m + 2.0 * std::numbers::pi * r / omega;
        const Complex ca = char_fn(Complex(0.0, omega), build_linearization_at(eq.n_star, eq.p_star, eq.z_star, a));
        const Complex cb = char_fn(Complex(0.0, omega), build_linearization_at(eq.n_star, eq.p_star, eq.z_star, b));
        worst = std::max(worst, std::abs(ca - cb) / std::max(1.0, std::abs(ca)));
    }
    return verdict("periodicity_in_m", worst <= 1e-12, "max relative gap " + sci(worst));
}

[[nodiscard]] inline CheckResult check_hopf_symmetry(const ModelParams& base) {
    ModelParams p = base;
    p.r_star.reset();
    p.m = usable_m(p);
    p.n_total = 3.0 * compute_nt2(p);
    const EquilibriumPoint eq = solve_e2(p);
    BoundaryPoint u{eq.n_star, eq.p_star, eq.z_star, p.m, p.n_total, 0.7, 0.0};
    const Vector5 a = hopf_residual(u, p);
    u.omega = -u.omega;
    const Vector5 b = hopf_residual(u, p);
    const double gap = std::max((a.head<4>() - b.head<4>()).cwiseAbs().maxCoeff(), std::fabs(a(4) + b(4)));
    return verdict("hopf_conjugate_symmetry", gap <= 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()),
                   "max gap " + sci(gap));
}

[[nodiscard]] inline ModelParams simulation_point(const ModelParams& base) {
    ModelParams p = base;
    p.r_star.reset();
    p.m = std::min(usable_m(p), 3.0);
    if (p.m == 0.0) p.m = 1.0;
    p.n_total = 2.0 * compute_nt2(p);
    return p;
}

[[nodiscard]] inline CheckResult check_conservation_at_equilibrium(const ModelParams& base) {
    const ModelParams p = simulation_point(base);
    const EquilibriumPoint eq = solve_e2(p);
    const HistoryBuffer buf = build_initial(HistorySpec::at_equilibrium(), p);
    const double n0 = buf.ring.state(buf.ring.size() - 1).n;
    const double rel = std::fabs(n0 - eq.n_star) / eq.n_star;
    return verdict("conservation_at_equilibrium", rel <= 1e-9, "relative N(0) error " + sci(rel));
}

[[nodiscard]] inline CheckResult check_simulation_invariants(const ModelParams& base) {
    const ModelParams p = simulation_point(base);
    SimulationOptions opts;
    opts.horizon_hat = 200.0;
    opts.verify_tau = true;
    const Trajectory tr = integrate(build_initial(HistorySpec::at_equilibrium(0.2, -0.2), p), opts);
    bool inside = true;
    double cons = 0.0;
    for (const auto& r : tr.rows) {
        inside = inside && r.n > 0.0 && r.p > 0.0 && r.z >= 0.0 && r.n < p.n_total && r.p < p.n_total &&
                 r.z < p.n_total;
        if (!std::isnan(r.cons_residual)) cons = std::max(cons, std::fabs(r.cons_residual));
    }
    const bool ok = inside && tr.max_tau_drift <= 1e-12 && cons <= 1e-3 * p.n_total;
    return verdict("simulation_positivity_tau_conservation", ok,
                   std::string(inside ? "inside (0, N_T)" : "left (0, N_T)") + ", tau drift " +
                       sci(tr.max_tau_drift) + ", max |cons residual| " + sci(cons));
}

[[nodiscard]] inline CheckResult check_tau_frechet(const ModelParams& base) {
    ModelParams p = simulation_point(base);
    const EquilibriumPoint eq = solve_e2(p);
    if (p.response.is_constant()) return {"tau_frechet_derivative", CheckStatus::Skip, "tau is constant for constant R"};
    const auto shape = [](double u) { return std::sin(0.3 * u) + 0.5; };
    const double coarse = tau_frechet_check(eq.p_star, shape, 1e-3 * eq.p_star, p);
    const double fine = tau_frechet_check(eq.p_star, shape, 1e-4 * eq.p_star, p);
    return verdict("tau_frechet_derivative", fine < coarse && fine <= 0.2 * coarse + 1e-12,
                   "remainder ratio " + sci(coarse) + " -> " + sci(fine));
}

}  // namespace detail

[[nodiscard]] inline std::vector<CheckResult> run_check_suite(const RunConfig& cfg) {
    const ModelParams& p = cfg.model;
    using Fn = std::function<CheckResult()>;
    const std::vector<std::pair<std::string, Fn>> checks = {
        {"responses_monotone_and_derivatives", [&] { return detail::check_responses(p); }},
        {"inverse_roundtrip", [&] { return detail::check_inverse(p); }},
        {"h_over_r_limit", [&] { return detail::check_h_over_r(p); }},
        {"thresholds_ordered", [&] { return detail::check_thresholds(p); }},
        {"e2_residuals", [&] { return detail::check_e2_residuals(p); }},
        {"dde_rhs_at_equilibrium", [&] { return detail::check_rhs_at_equilibrium(p); }},
        {"e1_factorization", [&] { return detail::check_e1_factorization(p, cfg.inject_a2_sign_error); }},
        {"e1_stable_between_thresholds", [&] { return detail::check_e1_stable(p); }},
        {"periodicity_in_m", [&] { return detail::check_periodicity(p); }},
        {"hopf_conjugate_symmetry", [&] { return detail::check_hopf_symmetry(p); }},
        {"conservation_at_equilibrium", [&] { return detail::check_conservation_at_equilibrium(p); }},
        {"simulation_positivity_tau_conservation", [&] { return detail::check_simulation_invariants(p); }},
        {"tau_frechet_derivative", [&] { return detail::check_tau_frechet(p); }},
    };
    std::vector<CheckResult> out;
    for (const auto& [name, fn] : checks) {
        try {
            out.push_back(fn());
        } catch (const std::exception& e) {
            out.push_back({name, CheckStatus::Fail, std::string("threw: ") + e.what()});
        }
    }
    return out;
}

}  // namespace tde_plankton::app
