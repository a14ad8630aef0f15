#include "oracles.hpp"

#include "tde_plankton/continuation.hpp"
#include "tde_plankton/simulate.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace tde_plankton;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ModelParams mm(double delta0, double m, double n_total) {
    ModelParams p = ModelParams::table1(delta0, ResponseKind::michaelis_menten(0.159));
    p.m = m;
    p.n_total = n_total;
    return p;
}

double amplitude(const Trajectory& tr, double from, double to) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& r : tr.rows) {
        if (r.t < from || r.t > to) continue;
        lo = std::min(lo, r.p);
        hi = std::max(hi, r.p);
    }
    return hi - lo;
}

double max_cons(const Trajectory& tr) {
    double worst = 0.0;
    for (const auto& r : tr.rows)
        if (!std::isnan(r.cons_residual)) worst = std::max(worst, std::fabs(r.cons_residual));
    return worst;
}

double delay_of(const ModelParams& p) { return transformed_delay(with_resolved_r_star(p)); }

}  // namespace

TEST_CASE("initial history and conservation", "[simulate]") {
    const ModelParams p = mm(0.17, 5.0, 2.0);
    const EquilibriumPoint eq = solve_e2(p);
    const HistoryBuffer at_eq = build_initial(HistorySpec::at_equilibrium(), p);
    CHECK(at_eq.delay_steps == 200);
    CHECK_THAT(at_eq.ring.state(at_eq.ring.size() - 1).n, WithinRel(eq.n_star, 1e-9));

    const HistoryBuffer no_zoo = build_initial(HistorySpec::constant(0.3, 0.0), p);
    CHECK_THAT(no_zoo.ring.state(no_zoo.ring.size() - 1).n, WithinRel(p.n_total - 0.3, 1e-15));

    const HistoryBuffer flat = build_initial(HistorySpec::constant(0.3, 0.1), p);
    CHECK_THAT(flat.tau_sum, WithinRel(p.m / r_growth(0.3, p), 1e-13));

    CHECK_THROWS_AS(build_initial(HistorySpec::constant(0.3, 1.5), p), Error);
    try {
        (void)build_initial(HistorySpec::constant(0.3, 1.5), p);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InfeasibleBiomass);
    }
    CHECK_THROWS_AS(build_initial(HistorySpec::constant(-0.1, 0.1), p), Error);
    CHECK_THROWS_AS(build_initial(HistorySpec::at_equilibrium(), p, delay_of(p) / 200.5), Error);

    // sampled history matching a constant one gives the same buffer
    const double t = delay_of(p);
    const HistoryBuffer sampled =
        build_initial(HistorySpec::sampled({{-t, 0.3, 0.1}, {-0.5 * t, 0.3, 0.1}, {0.0, 0.3, 0.1}}), p);
    CHECK_THAT(sampled.ring.state(sampled.ring.size() - 1).n,
               WithinRel(flat.ring.state(flat.ring.size() - 1).n, 1e-14));
}

TEST_CASE("an equilibrium start stays put", "[simulate]") {
    for (double d0 : {0.0, 0.17}) {
        const ModelParams p = mm(d0, 6.0, std::pow(10.0, 0.45));
        const EquilibriumPoint eq = solve_e2(p);
        SimulationOptions opts;
        opts.horizon_hat = 1000.0;
        opts.record_every = 10;
        const Trajectory tr = to_physical_time(integrate(build_initial(HistorySpec::at_equilibrium(), p), opts));
        CHECK(tr.termination == SimTermination::HorizonReached);
        CHECK(tr.rows.back().t >= 1000.0 * 0.99 * std::min(1.0, *tr.params.r_star));
        double dev = 0.0;
        for (const auto& r : tr.rows)
            dev = std::max({dev, std::fabs(r.n - eq.n_star), std::fabs(r.p - eq.p_star), std::fabs(r.z - eq.z_star)});
        CHECK(dev <= 1e-8 * p.n_total);
        CHECK(tde_residual(tr) <= 1e-8);
    }
}

TEST_CASE("perturbations decay below the boundary and grow above it", "[simulate]") {
    double omegas[2] = {0.0, 0.0};
    double ratio[2] = {0.0, 0.0};
    for (int k = 0; k < 2; ++k) {
        const ModelParams p = mm(0.17, 6.0, std::pow(10.0, k == 0 ? 0.49 : 0.51));
        SimulationOptions opts;
        opts.horizon_hat = 1200.0;
        opts.record_every = 4;
        const Trajectory tr = to_physical_time(integrate(build_initial(HistorySpec::at_equilibrium(1e-3, 1e-3), p), opts));
        const double end = tr.rows.back().t;
        ratio[k] = amplitude(tr, 0.8 * end, end) / amplitude(tr, 0.1 * end, 0.3 * end);
        const auto f = measure_frequency(tr);
        REQUIRE(f.has_value());
        omegas[k] = f->omega;
    }
    CHECK(ratio[0] < 1.0);
    CHECK(ratio[1] > 1.0);
    const BoundaryPoint b =
        find_start(ModelParams::table1(0.17, ResponseKind::michaelis_menten(0.159)), 6.0, std::pow(10.0, 0.4),
                   std::pow(10.0, 0.6));
    CHECK_THAT(omegas[0], WithinRel(b.omega, 0.05));
    CHECK_THAT(omegas[1], WithinRel(b.omega, 0.05));
}

TEST_CASE("second-order convergence of conservation and TDE residual", "[simulate]") {
    const ModelParams p = mm(0.17, 3.0, 2.0);
    const double t = delay_of(p);
    double prev_cons = 0.0, prev_tde = 0.0;
    for (int k = 0; k < 4; ++k) {
        SimulationOptions opts;
        opts.horizon_hat = 60.0;
        const Trajectory tr =
            to_physical_time(integrate(build_initial(HistorySpec::at_equilibrium(0.3, -0.2), p, t / (50 << k)), opts));
        const double cons = max_cons(tr);
        const double tde = tde_residual(tr);
        if (k > 0) {
            CHECK(prev_cons / cons >= 3.2);
            CHECK(prev_cons / cons <= 4.8);
            CHECK(prev_tde / tde >= 3.2);
            CHECK(prev_tde / tde <= 4.8);
        }
        prev_cons = cons;
        prev_tde = tde;
    }
}

TEST_CASE("physical time", "[simulate]") {
    ModelParams c = ModelParams::table1(0.0, ResponseKind::constant());
    c.m = 2.0;
    c.n_total = 2.0;
    SimulationOptions opts;
    opts.horizon_hat = 20.0;
    const Trajectory tc = to_physical_time(integrate(build_initial(HistorySpec::at_equilibrium(0.2, 0.1), c), opts));
    for (const auto& r : tc.rows) CHECK_THAT(r.t, WithinAbs(r.t_hat, 1e-12));

    const ModelParams p = mm(0.17, 3.0, 2.0);
    const Trajectory eq = to_physical_time(integrate(build_initial(HistorySpec::at_equilibrium(), p), opts));
    const double stretch = *eq.params.r_star / r_growth(solve_e2(p).p_star, p);
    for (const auto& r : eq.rows) CHECK_THAT(r.t, WithinAbs(r.t_hat * stretch, 1e-9 * (1.0 + std::fabs(r.t_hat))));

    // Forward map t_hat(t) = integral R(P)/R* dt recovers t_hat; the gap
    // shrinks with the step.
    double prev = 0.0;
    for (int k = 0; k < 2; ++k) {
        const Trajectory tr = to_physical_time(
            integrate(build_initial(HistorySpec::at_equilibrium(0.3, -0.2), p, delay_of(p) / (100 << k)), opts));
        const std::size_t z = tr.history_rows - 1;
        double forward = 0.0, gap = 0.0;
        for (std::size_t i = z + 1; i < tr.rows.size(); ++i) {
            forward += 0.5 * (tr.rows[i].t - tr.rows[i - 1].t) * (1.0 / tr.rows[i].inv_r + 1.0 / tr.rows[i - 1].inv_r);
            gap = std::max(gap, std::fabs(forward - tr.rows[i].t_hat));
        }
        CHECK(gap <= 1e-3);
        if (k > 0) CHECK(prev / gap >= 3.0);
        prev = gap;
        for (std::size_t i = 1; i < tr.rows.size(); ++i) CHECK(tr.rows[i].t > tr.rows[i - 1].t);
    }
}

TEST_CASE("constant development rate matches a fixed-delay reference integrator", "[simulate]") {
    ModelParams c = ModelParams::table1(0.17, ResponseKind::constant());
    c.m = 3.0;
    c.n_total = 2.0;
    const EquilibriumPoint eq = solve_e2(c);
    const double p0 = 1.2 * eq.p_star, z0 = 0.9 * eq.z_star;
    SimulationOptions opts;
    opts.horizon_hat = 20.0;
    const Trajectory tr =
        to_physical_time(integrate(build_initial(HistorySpec::constant(p0, z0), c, c.m / 6000.0), opts));
    oracle::Table1 q;
    q.l = 0.0;
    q.delta0 = 0.17;
    q.m = c.m;
    q.n_total = c.n_total;
    const TrajectoryRow& start = tr.rows[tr.history_rows - 1];
    const double h = c.m / 6000.0;
    const auto ref = oracle::rk4_constant_r(q, {start.n, p0, z0}, p0, z0, h, 20.0);
    double gap = 0.0;
    for (std::size_t i = tr.history_rows - 1; i < tr.rows.size(); ++i) {
        const auto& r = tr.rows[i];
        const auto& o = ref[static_cast<std::size_t>(std::llround(r.t / h))];
        gap = std::max({gap, std::fabs(r.n - o.n), std::fabs(r.p - o.p), std::fabs(r.z - o.z)});
    }
    CHECK(gap <= 1e-6 * c.n_total);
    CHECK(tde_residual(tr) <= 1e-5);
}

TEST_CASE("juvenile density", "[simulate]") {
    const ModelParams p = mm(0.17, 5.0, 2.0);
    const EquilibriumPoint eq = solve_e2(p);
    SimulationOptions opts;
    opts.horizon_hat = 3.0 * delay_of(p);
    const Trajectory at_eq = to_physical_time(integrate(build_initial(HistorySpec::at_equilibrium(), p), opts));
    std::vector<double> s_grid;
    for (int i = 0; i <= 1000; ++i) s_grid.push_back(p.m * i / 1000.0);
    const double t_late = at_eq.rows.back().t * 0.9;
    const auto rho_eq = reconstruct_rho(at_eq, t_late, s_grid);
    for (std::size_t i = 0; i < s_grid.size(); i += 50)
        CHECK_THAT(rho_eq[i], WithinRel(equilibrium_spectrum(eq, s_grid[i], p), 1e-6));
    CHECK_THROWS_AS(reconstruct_rho(at_eq, 1.0, s_grid), Error);
    try {
        (void)reconstruct_rho(at_eq, 1.0, s_grid);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::OutOfRegion);
    }

    const Trajectory empty = to_physical_time(integrate(build_initial(HistorySpec::constant(0.3, 0.0), p), opts));
    for (double v : reconstruct_rho(empty, empty.rows.back().t * 0.9, s_grid)) CHECK(v == 0.0);

    const Trajectory gen = to_physical_time(integrate(build_initial(HistorySpec::at_equilibrium(0.3, -0.2), p), opts));
    const double t = gen.rows.back().t * 0.9;
    const auto rho = reconstruct_rho(gen, t, s_grid);
    double pool = 0.0;
    for (std::size_t i = 1; i < s_grid.size(); ++i) pool += 0.5 * (s_grid[i] - s_grid[i - 1]) * (rho[i] + rho[i - 1]);
    const auto it = std::lower_bound(gen.rows.begin(), gen.rows.end(), t,
                                     [](const TrajectoryRow& r, double x) { return r.t < x; });
    const auto& a = *(it - 1);
    const auto& b = *it;
    const double w = (t - a.t) / (b.t - a.t);
    const double total = (1 - w) * (a.n + a.p + a.z) + w * (b.n + b.p + b.z) + pool;
    CHECK_THAT(total, WithinAbs(p.n_total, 1e-4 * p.n_total));
}

TEST_CASE("conservation defect decays at the juvenile death rate", "[simulate]") {
    HistorySpec spec = HistorySpec::at_equilibrium(0.05, 0.05);
    spec.n_offset = 0.1;
    const DeltaDecayReport dying = delta_decay_check(spec, mm(0.17, 3.0, 2.0), 200.0);
    CHECK_FALSE(dying.conserved);
    CHECK_THAT(dying.rate, WithinRel(-0.17, 0.02));
    CHECK_THAT(dying.delta_initial, WithinRel(0.1, 1e-9));

    const ModelParams keep = mm(0.0, 3.0, 2.0);
    const double t = delay_of(keep);
    const DeltaDecayReport coarse = delta_decay_check(spec, keep, 200.0, t / 100.0);
    const DeltaDecayReport fine = delta_decay_check(spec, keep, 200.0, t / 200.0);
    CHECK(coarse.conserved);
    CHECK(coarse.max_deviation <= 1e-4 * 0.1);
    CHECK(coarse.max_deviation / fine.max_deviation >= 3.2);
    CHECK(coarse.max_deviation / fine.max_deviation <= 4.8);

    const DeltaDecayReport none = delta_decay_check(HistorySpec::at_equilibrium(0.05, 0.05), mm(0.17, 3.0, 2.0), 50.0);
    CHECK(none.conserved);
    CHECK(std::fabs(none.delta_initial) <= 1e-12);
}

TEST_CASE("below nt1 the plankton die out", "[simulate]") {
    ModelParams c = ModelParams::table1(0.0, ResponseKind::constant());
    c.m = 0.2;
    c.n_total = 0.5 * compute_nt1(c);
    const double p0 = 0.3 * c.n_total;
    const double t = delay_of(c);
    SimulationOptions opts;
    opts.horizon_hat = 3000.0;
    opts.record_every = 100;
    opts.conservation = false;
    const Trajectory tr = to_physical_time(integrate(build_initial(HistorySpec::constant(p0, 0.2 * c.n_total), c, t / 20.0), opts));
    const double growth = c.mu * f_uptake(c.n_total, c) - c.lambda;
    CHECK(growth < 0.0);
    for (std::size_t i = tr.history_rows - 1; i < tr.rows.size(); ++i)
        CHECK(tr.rows[i].p <= p0 * std::exp(growth * tr.rows[i].t) * (1.0 + 1e-6));
    const TrajectoryRow& last = tr.rows.back();
    CHECK(std::fabs(last.n - c.n_total) <= 1e-6 * c.n_total);
    CHECK(last.p <= 1e-6 * c.n_total);
    CHECK(last.z <= 1e-6 * c.n_total);
}

TEST_CASE("the extinction guard stops the run", "[simulate]") {
    ModelParams p = mm(0.17, 0.1, 0.5 * 0.0028896821349651538);
    const double t = delay_of(p);
    SimulationOptions opts;
    opts.horizon_hat = 60.0;
    opts.record_every = 1000;
    opts.conservation = false;
    const Trajectory tr = integrate(build_initial(HistorySpec::constant(4e-4, 3e-4), p, t / 2000.0), opts);
    CHECK(tr.termination == SimTermination::Extinction);
    CHECK(tr.rows.back().p > 0.0);
    CHECK(tr.rows.back().p <= 1e-3 * 4e-4);
}

TEST_CASE("between the thresholds the predator-free state attracts", "[simulate]") {
    ModelParams p = mm(0.17, 6.0, 0.0);
    p.n_total = 0.5 * (compute_nt1(p) + compute_nt2(p));
    const EquilibriumPoint e1 = solve_e1(p);
    const double t = delay_of(p);
    const std::vector<HistorySpec> specs = {
        HistorySpec::constant(0.05, 0.02),
        HistorySpec::constant(0.01, 0.001),
        HistorySpec::sampled({{-t, 0.02, 0.03}, {-0.5 * t, 0.08, 0.01}, {0.0, 0.04, 0.02}}),
    };
    for (const auto& spec : specs) {
        SimulationOptions opts;
        opts.horizon_hat = 4000.0;
        opts.record_every = 50;
        const Trajectory tr = integrate(build_initial(spec, p), opts);
        const TrajectoryRow& last = tr.rows.back();
        CHECK(std::fabs(last.n - e1.n_star) <= 1e-6 * p.n_total);
        CHECK(std::fabs(last.p - e1.p_star) <= 1e-6 * p.n_total);
        CHECK(last.z <= 1e-6 * p.n_total);
    }
}

TEST_CASE("running threshold integral and positivity", "[simulate][property]") {
    for (double d0 : {0.0, 0.17}) {
        const ModelParams p = mm(d0, 4.0, 4.0);
        SimulationOptions opts;
        opts.horizon_hat = 300.0;
        opts.verify_tau = true;
        const Trajectory tr = integrate(build_initial(HistorySpec::at_equilibrium(0.5, -0.4), p), opts);
        CHECK(tr.max_tau_drift <= 1e-12);
        for (std::size_t i = 0; i < tr.rows.size(); ++i) {
            const auto& r = tr.rows[i];
            CHECK(r.n > 0.0);
            CHECK(r.p > 0.0);
            CHECK(r.z > 0.0);
            CHECK(r.n + r.p + r.z < p.n_total);
            if (i + 1 >= tr.history_rows) CHECK(r.tau_m > 0.0);
            else CHECK(std::isnan(r.tau_m));
        }
    }
}

TEST_CASE("no delay runs the plain ODE", "[simulate]") {
    const ModelParams p = mm(0.17, 0.0, 0.8);
    const EquilibriumPoint eq = solve_e2(p);
    SimulationOptions opts;
    opts.horizon_hat = 2000.0;
    const Trajectory tr = integrate(build_initial(HistorySpec::at_equilibrium(0.1, 0.1), p, 0.01), opts);
    CHECK(tr.t_delay == 0.0);
    CHECK_THAT(tr.rows.back().p, WithinAbs(eq.p_star, 1e-6));
    CHECK_THAT(tr.rows.back().z, WithinAbs(eq.z_star, 1e-6));
}
