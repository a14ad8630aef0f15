#pragma once

// Pseudo-arclength tracing of the loci in the (m, N_T) plane where the
// linearization about E2 has a purely imaginary root i*omega.
//
// Unknowns u = (N*, P*, Z*, m, N_T, omega); five equations: the three
// equilibrium equations and Re/Im of the characteristic function at i*omega.
// The tracer works in scaled coordinates
//   x = (N*/N_T, P*/N_T, Z*/N_T, m/m_scale, log10 N_T, omega)
// with m_scale = maturity ceiling (20 when delta0 = 0).

#include "tde_plankton/equilibria.hpp"
#include "tde_plankton/errors.hpp"
#include "tde_plankton/linearize.hpp"
#include "tde_plankton/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string_view>
#include <vector>

namespace tde_plankton {

using Vector5 = Eigen::Matrix<double, 5, 1>;
using Vector6 = Eigen::Matrix<double, 6, 1>;

struct BoundaryPoint {
    double n_star = 0.0;
    double p_star = 0.0;
    double z_star = 0.0;
    double m = 0.0;
    double n_total = 0.0;
    double omega = 0.0;
    double residual = 0.0;  // max |scaled hopf residual|
};

enum class Termination { DomainBound, ClosedLoop, OmegaCollapse, StepFailure, MaxSteps, TargetReached };

[[nodiscard]] constexpr std::string_view to_string(Termination t) noexcept {
    switch (t) {
        case Termination::DomainBound: return "DomainBound";
        case Termination::ClosedLoop: return "ClosedLoop";
        case Termination::OmegaCollapse: return "OmegaCollapse";
        case Termination::StepFailure: return "StepFailure";
        case Termination::MaxSteps: return "MaxSteps";
        case Termination::TargetReached: return "TargetReached";
    }
    return "?";
}

struct BoundaryCurve {
    std::vector<BoundaryPoint> points;
    Termination termination = Termination::StepFailure;
    Vector6 start_tangent = Vector6::Zero();  // scaled coordinates
    Vector6 end_tangent = Vector6::Zero();
};

[[nodiscard]] inline double maturity_scale(const ModelParams& p) {
    const double c = m_ceiling(p);
    return std::isfinite(c) ? c : 20.0;
}

[[nodiscard]] inline Vector6 to_scaled(const BoundaryPoint& b, const ModelParams& p) {
    Vector6 x;
    x << b.n_star / b.n_total, b.p_star / b.n_total, b.z_star / b.n_total, b.m / maturity_scale(p),
        std::log10(b.n_total), b.omega;
    return x;
}

[[nodiscard]] inline BoundaryPoint from_scaled(const Vector6& x, const ModelParams& p) {
    BoundaryPoint b;
    b.n_total = std::pow(10.0, x(4));
    b.n_star = x(0) * b.n_total;
    b.p_star = x(1) * b.n_total;
    b.z_star = x(2) * b.n_total;
    b.m = x(3) * maturity_scale(p);
    b.omega = x(5);
    return b;
}

namespace detail {

inline ModelParams at_point(ModelParams p, double m, double n_total) {
    p.m = m;
    p.n_total = n_total;
    p.r_star.reset();
    return p;
}

}  // namespace detail

/// Raw residual: equilibrium equations (the Z equation divided by Z*) and
/// Re, Im of char_fn(i omega) for the linearization at (N*, P*, Z*).
[[nodiscard]] inline Vector5 hopf_residual(const BoundaryPoint& u, const ModelParams& base) {
    if (!(u.p_star > 0.0) || !(u.n_star >= 0.0) || !(u.m >= 0.0) || !(u.n_total > 0.0))
        throw Error(ErrorKind::Domain, "hopf residual evaluated outside the admissible region");
    const ModelParams p = detail::at_point(base, u.m, u.n_total);
    const double r = r_growth(u.p_star, p);
    if (!(r >= kRateFloor)) throw Error(ErrorKind::SingularRate, "R(P*) below floor");
    const EquilibriumResiduals eqr = equilibrium_residuals(u.n_star, u.p_star, u.z_star, p);
    const double zoo_per_capita =
        p.gamma * p.g * std::exp(-p.delta0 * p.m / r) * h_grazing(u.p_star, p) - p.delta;
    const LinearizationData lin = build_linearization_at(u.n_star, u.p_star, u.z_star, p);
    const Complex ch = char_fn(Complex(0.0, u.omega), lin);
    Vector5 out;
    out << eqr.conservation, eqr.phyto, zoo_per_capita, ch.real(), ch.imag();
    return out;
}

/// Residual normalised by max(1, N_T) for the mass balances and by the
/// characteristic-matrix scale for the last two components.
[[nodiscard]] inline Vector5 scaled_hopf_residual(const BoundaryPoint& u, const ModelParams& base) {
    Vector5 r = hopf_residual(u, base);
    const double mass = std::max(1.0, u.n_total);
    const ModelParams p = detail::at_point(base, u.m, u.n_total);
    const double cs = char_scale(Complex(0.0, u.omega), build_linearization_at(u.n_star, u.p_star, u.z_star, p));
    r(0) /= mass;
    r(1) /= mass;
    r(3) /= cs;
    r(4) /= cs;
    return r;
}

struct ContinuationOptions {
    double h_init = 1e-2;
    double h_min = 1e-6;
    double h_max = 1e-1;
    double tol = 1e-9;
    int max_newton = 25;
    int max_steps = 4000;
    double fd_step = 1e-7;
    double nt_min = 1e-4;
    double nt_max = 1e2;
    double m_min = 0.0;
    std::optional<double> m_max;  // defaults to the maturity ceiling (or 20 when delta0 = 0)
    double omega_min = 1e-4;
    int closed_loop_min_steps = 10;
    int direction = 1;                      // +1 / -1 relative to the canonical orientation
    std::optional<Vector6> initial_tangent; // overrides `direction` when set (scaled)
    std::optional<BoundaryPoint> target;    // stop when landing on this point
};

namespace detail {

struct ScaledSystem {
    const ModelParams& base;

    [[nodiscard]] Vector5 operator()(const Vector6& x) const {
        return scaled_hopf_residual(from_scaled(x, base), base);
    }

    [[nodiscard]] Eigen::Matrix<double, 5, 6> jacobian(const Vector6& x, const Vector5& fx, double step) const {
        Eigen::Matrix<double, 5, 6> jac;
        for (int j = 0; j < 6; ++j) {
            Vector6 xs = x;
            xs(j) += step;
            jac.col(j) = ((*this)(xs) - fx) / step;
        }
        return jac;
    }
};

[[nodiscard]] inline Vector6 null_direction(const Eigen::Matrix<double, 5, 6>& jac) {
    Eigen::JacobiSVD<Eigen::Matrix<double, 5, 6>> svd(jac, Eigen::ComputeFullV);
    Vector6 t = svd.matrixV().col(5);
    return t.normalized();
}

[[nodiscard]] inline Vector6 canonical_orientation(Vector6 t) {
    const double key = std::fabs(t(3)) > 1e-12 ? t(3) : t(4);
    return key < 0.0 ? Vector6(-t) : t;
}

struct CorrectorResult {
    bool ok = false;
    Vector6 x = Vector6::Zero();
    int iterations = 0;
    double residual = 0.0;
};

/// Newton on [F(x); t.(x - x_pred)] = 0.
[[nodiscard]] inline CorrectorResult correct(const ScaledSystem& sys, Vector6 x, const Vector6& tangent,
                                             const ContinuationOptions& opts) {
    const Vector6 predicted = x;
    CorrectorResult res;
    try {
        for (int it = 0; it <= opts.max_newton; ++it) {
            const Vector5 fx = sys(x);
            if (!fx.allFinite()) return res;
            const double norm = fx.cwiseAbs().maxCoeff();
            if (norm <= opts.tol) {
                res.ok = true;
                res.x = x;
                res.iterations = it;
                res.residual = norm;
                return res;
            }
            if (it == opts.max_newton) break;
            Eigen::Matrix<double, 6, 6> a;
            a.topRows<5>() = sys.jacobian(x, fx, opts.fd_step);
            a.row(5) = tangent.transpose();
            Vector6 rhs;
            rhs.head<5>() = -fx;
            rhs(5) = -tangent.dot(x - predicted);
            const Vector6 dx = a.colPivHouseholderQr().solve(rhs);
            if (!dx.allFinite()) return res;
            x += dx;
        }
    } catch (const Error&) {
        res.ok = false;
    }
    return res;
}

}  // namespace detail

/// Unit tangent (scaled coordinates) of the boundary locus at `point`.
[[nodiscard]] inline Vector6 boundary_tangent(const BoundaryPoint& point, const ModelParams& base,
                                              double fd_step = 1e-7) {
    const detail::ScaledSystem sys{base};
    const Vector6 x = to_scaled(point, base);
    return detail::canonical_orientation(detail::null_direction(sys.jacobian(x, sys(x), fd_step)));
}

[[nodiscard]] inline BoundaryCurve trace_curve(const BoundaryPoint& start, const ModelParams& base,
                                               const ContinuationOptions& opts = {}) {
    const detail::ScaledSystem sys{base};
    Vector6 x = to_scaled(start, base);
    const Vector5 f0 = sys(x);
    const double start_res = f0.cwiseAbs().maxCoeff();
    if (!(start_res <= 10.0 * opts.tol)) {
        std::ostringstream os;
        os << "start point residual " << start_res << " exceeds tolerance";
        throw Error(ErrorKind::NewtonFail, os.str());
    }
    const double m_max = opts.m_max.value_or(std::isfinite(m_ceiling(base)) ? m_ceiling(base) : 20.0);

    Vector6 t = detail::null_direction(sys.jacobian(x, f0, opts.fd_step));
    if (opts.initial_tangent) {
        if (t.dot(*opts.initial_tangent) < 0.0) t = -t;
    } else {
        t = detail::canonical_orientation(t);
        if (opts.direction < 0) t = -t;
    }

    BoundaryCurve curve;
    BoundaryPoint first = start;
    first.residual = start_res;
    curve.points.push_back(first);
    curve.start_tangent = t;
    const Vector6 x_start = x;

    double h = std::clamp(opts.h_init, opts.h_min, opts.h_max);
    int steps = 0;
    while (true) {
        if (steps >= opts.max_steps) {
            curve.termination = Termination::MaxSteps;
            break;
        }
        std::optional<Vector6> goal;
        bool goal_is_start = false;
        if (opts.target) {
            goal = to_scaled(*opts.target, base);
        } else if (steps >= opts.closed_loop_min_steps) {
            goal = x_start;
            goal_is_start = true;
        }
        double step = h;
        bool landing = false;
        if (goal) {
            const Vector6 d = *goal - x;
            const double along = t.dot(d);
            const double perp = (d - along * t).norm();
            if (along > 0.0 && along <= 1.5 * h && perp <= 0.25 * along + 10.0 * opts.tol) {
                step = along;
                landing = true;
            }
        }

        const Vector6 predicted = x + step * t;
        const BoundaryPoint guess = from_scaled(predicted, base);
        const bool predicted_outside = guess.m < opts.m_min || guess.m >= m_max || guess.n_total < opts.nt_min ||
                                       guess.n_total > opts.nt_max;
        const detail::CorrectorResult cr = detail::correct(sys, predicted, t, opts);
        bool accept = cr.ok && (cr.x - predicted).norm() <= std::max(step, 1e-12);
        Vector6 t_new = t;
        if (accept) {
            try {
                t_new = detail::null_direction(sys.jacobian(cr.x, sys(cr.x), opts.fd_step));
            } catch (const Error&) {
                accept = false;
            }
            if (accept) {
                if (t_new.dot(t) < 0.0) t_new = -t_new;
                if (t_new.dot(t) < 0.5) accept = false;  // sharp turn: likely a branch jump
            }
        }
        if (!accept) {
            h *= 0.5;
            if (h < opts.h_min) {
                curve.termination = predicted_outside ? Termination::DomainBound : Termination::StepFailure;
                break;
            }
            continue;
        }

        const BoundaryPoint next = from_scaled(cr.x, base);
        const bool in_domain = next.z_star > 0.0 && next.p_star > 0.0 && next.n_star > 0.0 &&
                               next.m >= opts.m_min && next.m < m_max && next.n_total >= opts.nt_min &&
                               next.n_total <= opts.nt_max;
        if (!in_domain) {
            curve.termination = Termination::DomainBound;
            break;
        }
        if (next.omega < opts.omega_min) {
            curve.termination = Termination::OmegaCollapse;
            break;
        }
        BoundaryPoint stored = next;
        stored.residual = cr.residual;
        curve.points.push_back(stored);
        x = cr.x;
        t = t_new;
        ++steps;
        if (landing) {
            curve.termination = goal_is_start ? Termination::ClosedLoop : Termination::TargetReached;
            break;
        }
        if (cr.iterations <= 3) h = std::min(h * 1.3, opts.h_max);
    }
    curve.end_tangent = t;
    return curve;
}

struct FrequencyRow {
    double m = 0.0;
    double n_total = 0.0;
    double omega = 0.0;
};

[[nodiscard]] inline std::vector<FrequencyRow> emit_frequency_profile(const BoundaryCurve& curve) {
    std::vector<FrequencyRow> rows;
    rows.reserve(curve.points.size());
    for (const auto& b : curve.points) rows.push_back({b.m, b.n_total, b.omega});
    return rows;
}

enum class CrossingCriterion { RightmostSign, UnstableCount };

struct StartOptions {
    StabilityOptions stability{};
    double log_width = 1e-7;  // bisection stops at this width in log10 N_T
    double tol = 1e-9;
    int max_newton = 30;
    CrossingCriterion criterion = CrossingCriterion::RightmostSign;
};

namespace detail {

struct ScanPoint {
    double log_nt = 0.0;
    StabilityReport report;
};

[[nodiscard]] inline ScanPoint scan_at(const ModelParams& base, double m, double log_nt,
                                       const StabilityOptions& sopts) {
    const ModelParams p = at_point(base, m, std::pow(10.0, log_nt));
    const EquilibriumPoint eq = solve_e2(p);
    return {log_nt, stability_scan(build_linearization(eq, p), p, sopts)};
}

[[nodiscard]] inline int crossing_key(const StabilityReport& r, CrossingCriterion c) {
    return c == CrossingCriterion::RightmostSign ? (r.max_real > 0.0 ? 1 : 0) : r.unstable_count;
}

/// Newton on the five unknowns (N*/N_T, P*/N_T, Z*/N_T, log10 N_T, omega) with m frozen.
[[nodiscard]] inline std::optional<Vector6> polish_fixed_m(const ModelParams& base, Vector6 x, double tol,
                                                           int max_newton, double fd_step = 1e-7) {
    const ScaledSystem sys{base};
    constexpr int free_idx[5] = {0, 1, 2, 4, 5};
    try {
        for (int it = 0; it <= max_newton; ++it) {
            const Vector5 fx = sys(x);
            if (!fx.allFinite()) return std::nullopt;
            if (fx.cwiseAbs().maxCoeff() <= tol) return x;
            const Eigen::Matrix<double, 5, 6> full = sys.jacobian(x, fx, fd_step);
            Eigen::Matrix<double, 5, 5> jac;
            for (int j = 0; j < 5; ++j) jac.col(j) = full.col(free_idx[j]);
            const Vector5 dx = jac.colPivHouseholderQr().solve(-fx);
            if (!dx.allFinite()) return std::nullopt;
            for (int j = 0; j < 5; ++j) x(free_idx[j]) += dx(j);
        }
    } catch (const Error&) {
    }
    return std::nullopt;
}

}  // namespace detail

/// First point on a boundary at fixed m: bisect log10 N_T on the crossing
/// criterion, then polish the full vector with m frozen.
[[nodiscard]] inline BoundaryPoint find_start(const ModelParams& base, double m_fixed, double nt_lo, double nt_hi,
                                              const StartOptions& opts = {}) {
    ModelParams pm = detail::at_point(base, m_fixed, base.n_total);
    validate(pm);
    if (!(m_fixed < m_ceiling(pm))) throw Error(ErrorKind::NoCoexistence, "m at or above the maturity ceiling");
    const double nt2 = compute_nt2(pm);
    double lo = std::log10(std::max(nt_lo, nt2 * (1.0 + 1e-6)));
    double hi = std::log10(nt_hi);
    if (!(lo < hi)) throw Error(ErrorKind::NoSignChange, "bracket lies below the coexistence threshold");

    detail::ScanPoint a = detail::scan_at(base, m_fixed, lo, opts.stability);
    detail::ScanPoint b = detail::scan_at(base, m_fixed, hi, opts.stability);
    const int key_lo = detail::crossing_key(a.report, opts.criterion);
    if (key_lo == detail::crossing_key(b.report, opts.criterion)) {
        std::ostringstream os;
        os << "no stability change over N_T in [" << std::pow(10.0, lo) << ", " << nt_hi << "] at m = " << m_fixed;
        throw Error(ErrorKind::NoSignChange, os.str());
    }
    while (b.log_nt - a.log_nt > opts.log_width) {
        detail::ScanPoint mid = detail::scan_at(base, m_fixed, 0.5 * (a.log_nt + b.log_nt), opts.stability);
        if (detail::crossing_key(mid.report, opts.criterion) == key_lo)
            a = std::move(mid);
        else
            b = std::move(mid);
    }

    // Root closest to the imaginary axis at the bracket midpoint.
    const detail::ScanPoint mid = detail::scan_at(base, m_fixed, 0.5 * (a.log_nt + b.log_nt), opts.stability);
    std::optional<Complex> crossing;
    for (const Complex& r : mid.report.roots) {
        if (r.imag() <= 1e-4) continue;
        if (opts.criterion == CrossingCriterion::RightmostSign) {
            if (!crossing || r.real() > crossing->real()) crossing = r;
        } else if (!crossing || std::fabs(r.real()) < std::fabs(crossing->real())) {
            crossing = r;
        }
    }
    if (!crossing) throw Error(ErrorKind::NewtonFail, "stability change is not through a complex pair");

    const ModelParams pmid = detail::at_point(base, m_fixed, std::pow(10.0, mid.log_nt));
    const EquilibriumPoint eq = solve_e2(pmid);
    BoundaryPoint guess{eq.n_star, eq.p_star, eq.z_star, m_fixed, pmid.n_total, crossing->imag(), 0.0};
    const auto polished = detail::polish_fixed_m(base, to_scaled(guess, base), opts.tol, opts.max_newton);
    if (!polished) throw Error(ErrorKind::NewtonFail, "Newton polish of the boundary point failed");
    BoundaryPoint out = from_scaled(*polished, base);
    out.m = m_fixed;
    out.residual = scaled_hopf_residual(out, base).cwiseAbs().maxCoeff();
    return out;
}

/// Distance in (m/m_scale, log10 N_T, omega) from a point to a polyline.
[[nodiscard]] inline double distance_to_curve(const BoundaryPoint& b, const BoundaryCurve& curve,
                                              const ModelParams& base) {
    const double ms = maturity_scale(base);
    const auto key = [&](const BoundaryPoint& q) {
        return Eigen::Vector3d(q.m / ms, std::log10(q.n_total), q.omega);
    };
    const Eigen::Vector3d q = key(b);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        const Eigen::Vector3d a = key(curve.points[i]);
        if (i + 1 == curve.points.size()) {
            best = std::min(best, (q - a).norm());
            break;
        }
        const Eigen::Vector3d c = key(curve.points[i + 1]);
        const Eigen::Vector3d seg = c - a;
        const double len2 = seg.squaredNorm();
        const double s = len2 > 0.0 ? std::clamp((q - a).dot(seg) / len2, 0.0, 1.0) : 0.0;
        best = std::min(best, (q - (a + s * seg)).norm());
    }
    return best;
}

/// Drops curves whose points (>= 90%) lie within `tol` of a curve that is
/// kept. Curves are ordered by length (desc) then starting point so the
/// result is deterministic.
[[nodiscard]] inline std::vector<BoundaryCurve> deduplicate_curves(std::vector<BoundaryCurve> curves,
                                                                   const ModelParams& base, double tol = 0.02) {
    std::erase_if(curves, [](const BoundaryCurve& c) { return c.points.empty(); });
    std::stable_sort(curves.begin(), curves.end(), [](const BoundaryCurve& a, const BoundaryCurve& b) {
        if (a.points.size() != b.points.size()) return a.points.size() > b.points.size();
        if (a.points.front().m != b.points.front().m) return a.points.front().m < b.points.front().m;
        return a.points.front().n_total < b.points.front().n_total;
    });
    std::vector<BoundaryCurve> kept;
    for (auto& c : curves) {
        bool duplicate = false;
        for (const auto& k : kept) {
            std::size_t close = 0;
            for (const auto& pt : c.points)
                if (distance_to_curve(pt, k, base) <= tol) ++close;
            if (close >= 0.9 * static_cast<double>(c.points.size())) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) kept.push_back(std::move(c));
    }
    std::stable_sort(kept.begin(), kept.end(), [](const BoundaryCurve& a, const BoundaryCurve& b) {
        if (a.points.front().m != b.points.front().m) return a.points.front().m < b.points.front().m;
        return a.points.front().n_total < b.points.front().n_total;
    });
    return kept;
}

}  // namespace tde_plankton
