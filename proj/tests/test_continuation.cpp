#include "oracles.hpp"

#include "tde_plankton/continuation.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace tde_plankton;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ModelParams mm(double delta0, double l = 0.159) {
    return ModelParams::table1(delta0, ResponseKind::michaelis_menten(l));
}

ModelParams constant_r() { return ModelParams::table1(0.0, ResponseKind::constant()); }

const BoundaryPoint& fig6_start() {
    static const BoundaryPoint b = find_start(mm(0.17), 6.0, std::pow(10.0, 0.4), std::pow(10.0, 0.6));
    return b;
}

// Both halves of the curve through the m = 6 start, joined start to end.
const BoundaryCurve& fig6_curve() {
    static const BoundaryCurve c = [] {
        ContinuationOptions back;
        back.direction = -1;
        BoundaryCurve rev = trace_curve(fig6_start(), mm(0.17), back);
        const BoundaryCurve fwd = trace_curve(fig6_start(), mm(0.17));
        BoundaryCurve joined;
        joined.points.assign(rev.points.rbegin(), rev.points.rend());
        joined.points.insert(joined.points.end(), fwd.points.begin() + 1, fwd.points.end());
        joined.termination = fwd.termination;
        return joined;
    }();
    return c;
}

double cross2(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

}  // namespace

TEST_CASE("hopf residual at an equilibrium with a purely imaginary root", "[continuation]") {
    const BoundaryPoint& b = fig6_start();
    ModelParams p = mm(0.17);
    p.m = b.m;
    p.n_total = b.n_total;
    const EquilibriumPoint eq = solve_e2(p);
    CHECK_THAT(b.p_star, WithinRel(eq.p_star, 1e-8));
    CHECK_THAT(b.z_star, WithinRel(eq.z_star, 1e-8));
    BoundaryPoint u{eq.n_star, eq.p_star, eq.z_star, b.m, b.n_total, b.omega, 0.0};
    CHECK(scaled_hopf_residual(u, mm(0.17)).cwiseAbs().maxCoeff() <= 1e-9);

    const Vector5 a = hopf_residual(u, mm(0.17));
    u.omega = -u.omega;
    const Vector5 c = hopf_residual(u, mm(0.17));
    for (int i = 0; i < 4; ++i) CHECK(a(i) == c(i));
    CHECK(a(4) == -c(4));

    u.p_star = -1.0;
    CHECK_THROWS_AS(hopf_residual(u, mm(0.17)), Error);
}

TEST_CASE("m = 0 start is the ODE Hopf point", "[continuation]") {
    const BoundaryPoint b = find_start(mm(0.0), 0.0, 0.05, 10.0);
    oracle::Table1 q;
    const oracle::OdeHopf ref = oracle::ode_hopf(q, 0.05, 10.0);
    CHECK_THAT(b.n_total, WithinRel(ref.n_total, 1e-6));
    CHECK_THAT(b.omega, WithinRel(ref.omega, 1e-6));
    CHECK(b.residual <= 1e-9);
}

TEST_CASE("start point at m = 6 with juvenile mortality", "[continuation]") {
    const BoundaryPoint& b = fig6_start();
    CHECK_THAT(std::log10(b.n_total), WithinAbs(0.50, 0.02));
    CHECK(b.m == 6.0);
    CHECK(b.omega > 0.0);
    CHECK(b.residual <= 1e-9);
}

TEST_CASE("stable bracket has no sign change", "[continuation]") {
    CHECK_THROWS_AS(find_start(mm(0.17), 6.0, 0.3, std::pow(10.0, 0.4)), Error);
    try {
        (void)find_start(mm(0.17), 6.0, 0.3, std::pow(10.0, 0.4));
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoSignChange);
    }
    CHECK_THROWS_AS(find_start(mm(0.17), 19.9, 1.0, 100.0), Error);
}

TEST_CASE("traced points satisfy the boundary equations", "[continuation][property]") {
    const BoundaryCurve& c = fig6_curve();
    REQUIRE(c.points.size() > 20);
    const ModelParams base = mm(0.17);
    for (const BoundaryPoint& b : c.points) {
        CHECK(scaled_hopf_residual(b, base).cwiseAbs().maxCoeff() <= 1e-9);
        ModelParams p = base;
        p.m = b.m;
        CHECK(b.n_total > compute_nt2(p));
        CHECK(b.z_star > 0.0);
        CHECK(b.m >= 0.0);
        CHECK(b.m < m_ceiling(p));
    }
}

TEST_CASE("steps and tangents are continuous", "[continuation][property]") {
    const BoundaryCurve& c = fig6_curve();
    const ModelParams base = mm(0.17);
    const ContinuationOptions opts;
    Vector6 prev = Vector6::Zero();
    for (std::size_t i = 0; i + 1 < c.points.size(); ++i) {
        const Vector6 d = to_scaled(c.points[i + 1], base) - to_scaled(c.points[i], base);
        CHECK(d.norm() >= opts.h_min);
        CHECK(d.norm() <= 2.0 * opts.h_max);
        const Vector6 unit = d.normalized();
        if (i > 0) CHECK(unit.dot(prev) > 0.0);
        prev = unit;
    }
}

TEST_CASE("retracing from the end returns to the start", "[continuation][property]") {
    const ModelParams base = mm(0.17);
    ContinuationOptions fwd;
    fwd.max_steps = 30;
    const BoundaryCurve there = trace_curve(fig6_start(), base, fwd);
    REQUIRE(there.termination == Termination::MaxSteps);
    ContinuationOptions back;
    back.initial_tangent = -there.end_tangent;
    back.target = there.points.front();
    const BoundaryCurve again = trace_curve(there.points.back(), base, back);
    CHECK(again.termination == Termination::TargetReached);
    const double gap = (to_scaled(again.points.back(), base) - to_scaled(there.points.front(), base)).norm();
    CHECK(gap <= 10.0 * fwd.tol);
}

TEST_CASE("start residual must be small", "[continuation]") {
    BoundaryPoint b = fig6_start();
    b.omega *= 1.1;
    CHECK_THROWS_AS(trace_curve(b, mm(0.17)), Error);
}

TEST_CASE("constant development rate gives a boundary nearly independent of m", "[continuation]") {
    const auto span = [](const ModelParams& base) {
        const BoundaryPoint b = find_start(base, 0.0, 0.05, 10.0);
        ContinuationOptions opts;
        opts.m_max = 19.7;
        const BoundaryCurve c = trace_curve(b, base, opts);
        CHECK(c.termination == Termination::DomainBound);
        double lo = b.n_total, hi = b.n_total;
        for (const auto& q : c.points) {
            lo = std::min(lo, q.n_total);
            hi = std::max(hi, q.n_total);
        }
        return std::log10(hi / lo);
    };
    const double flat = span(constant_r());
    CHECK(flat < 0.6);
    CHECK(span(ModelParams::table1(0.17, ResponseKind::constant())) > 2.0 * flat);
}

TEST_CASE("constant-rate boundary agrees with the reference integrator", "[continuation]") {
    const ModelParams base = constant_r();
    const BoundaryPoint b = find_start(base, 5.0, 0.05, 10.0);
    const auto late_amplitude = [](double n_total) {
        oracle::Table1 q;
        q.l = 0.0;
        q.m = 5.0;
        q.n_total = n_total;
        const oracle::Coexistence c = oracle::e2(q);
        const auto ys = oracle::rk4_constant_r(q, {c.n - 1e-3 * (c.p + c.z), 1.001 * c.p, 1.001 * c.z}, 1.001 * c.p,
                                               1.001 * c.z, 0.01, 1500.0);
        double lo = ys.back().p, hi = lo;
        for (std::size_t i = ys.size() - 20000; i < ys.size(); ++i) {
            lo = std::min(lo, ys[i].p);
            hi = std::max(hi, ys[i].p);
        }
        return (hi - lo) / c.p;
    };
    CHECK(late_amplitude(b.n_total * 0.85) < 1e-4);
    CHECK(late_amplitude(b.n_total * 1.15) > 1e-2);
}

namespace {

// Newton on (n, p, z, m, omega) with N_T frozen.
Eigen::Matrix<double, 5, 1> boundary_at_fixed_nt(const ModelParams& base, double n_total,
                                                 Eigen::Matrix<double, 5, 1> x) {
    const auto f = [&](const Eigen::Matrix<double, 5, 1>& v) {
        return hopf_residual({v(0), v(1), v(2), v(3), n_total, v(4), 0.0}, base);
    };
    for (int it = 0; it < 40; ++it) {
        const Vector5 r = f(x);
        if (r.cwiseAbs().maxCoeff() < 1e-12) break;
        Eigen::Matrix<double, 5, 5> j;
        for (int c = 0; c < 5; ++c) {
            Eigen::Matrix<double, 5, 1> e = Eigen::Matrix<double, 5, 1>::Zero();
            e(c) = 1e-7 * std::max(1e-2, std::fabs(x(c)));
            j.col(c) = (f(x + e) - f(x - e)) / (2 * e(c));
        }
        x -= j.partialPivLu().solve(r);
    }
    CHECK(f(x).cwiseAbs().maxCoeff() < 1e-10);
    return x;
}

}  // namespace

TEST_CASE("boundary copies repeat with period 2 pi R / omega in m", "[continuation]") {
    // Exact only for frozen equilibrium data; here N*, Z* drift with m,
    // which moves the second copy by about 10%.
    const ModelParams base = constant_r();
    const double n_total = 3.0;
    ModelParams p = base;
    p.m = 7.4;
    p.n_total = n_total;
    const EquilibriumPoint eq = solve_e2(p);
    const StabilityReport rep = stability_scan(build_linearization(eq, p), p);
    Complex near_axis = rep.roots.front();
    for (const Complex& r : rep.roots)
        if (r.imag() > 0.0 && std::fabs(r.real()) < std::fabs(near_axis.real())) near_axis = r;
    Eigen::Matrix<double, 5, 1> x;
    x << eq.n_star, eq.p_star, eq.z_star, p.m, near_axis.imag();
    const auto first = boundary_at_fixed_nt(base, n_total, x);
    const double period = 2.0 * std::numbers::pi / first(4);
    x = first;
    x(3) += period;
    const auto second = boundary_at_fixed_nt(base, n_total, x);
    CHECK_THAT(second(3) - first(3), WithinRel(period, 0.15));
    CHECK_THAT(second(4), WithinRel(first(4), 0.05));
}

TEST_CASE("boundary with juvenile mortality crosses itself at distinct frequencies", "[continuation]") {
    const BoundaryCurve& c = fig6_curve();
    const double ms = maturity_scale(mm(0.17));
    bool loop = false;
    const auto& pts = c.points;
    for (std::size_t i = 0; i + 1 < pts.size() && !loop; ++i) {
        const double ax = pts[i].m / ms, ay = std::log10(pts[i].n_total);
        const double bx = pts[i + 1].m / ms - ax, by = std::log10(pts[i + 1].n_total) - ay;
        for (std::size_t j = i + 2; j + 1 < pts.size(); ++j) {
            const double cx = pts[j].m / ms, cy = std::log10(pts[j].n_total);
            const double dx = pts[j + 1].m / ms - cx, dy = std::log10(pts[j + 1].n_total) - cy;
            const double den = cross2(bx, by, dx, dy);
            if (den == 0.0) continue;
            const double s = cross2(cx - ax, cy - ay, dx, dy) / den;
            const double u = cross2(cx - ax, cy - ay, bx, by) / den;
            if (s < 0.0 || s > 1.0 || u < 0.0 || u > 1.0) continue;
            const double wi = pts[i].omega + s * (pts[i + 1].omega - pts[i].omega);
            const double wj = pts[j].omega + u * (pts[j + 1].omega - pts[j].omega);
            if (std::fabs(wi - wj) > 0.05) loop = true;
        }
    }
    CHECK(loop);
}

TEST_CASE("frequency profile mirrors the curve", "[continuation]") {
    const BoundaryCurve& c = fig6_curve();
    const auto rows = emit_frequency_profile(c);
    REQUIRE(rows.size() == c.points.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].omega == c.points[i].omega);
        CHECK(rows[i].m == c.points[i].m);
        CHECK(rows[i].n_total == c.points[i].n_total);
    }
}

TEST_CASE("duplicate curves are dropped deterministically", "[continuation]") {
    const ModelParams base = mm(0.17);
    ContinuationOptions opts;
    opts.max_steps = 20;
    const BoundaryCurve a = trace_curve(fig6_start(), base, opts);
    BoundaryCurve reversed = a;
    std::reverse(reversed.points.begin(), reversed.points.end());
    const BoundaryCurve other = trace_curve(find_start(mm(0.0), 0.0, 0.05, 10.0), mm(0.0), opts);
    const auto kept = deduplicate_curves({reversed, other, a}, base);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].points.front().m <= kept[1].points.front().m);
    CHECK(deduplicate_curves({a, reversed}, base).size() == 1);
    CHECK(deduplicate_curves({}, base).empty());
}
