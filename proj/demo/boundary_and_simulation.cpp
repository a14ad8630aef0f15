// Locates the stability boundary at m = 6, follows it a short way, then
// integrates the model on either side of the boundary.

#include "tde_plankton/tde_plankton.hpp"

#include <cmath>
#include <cstdio>
#include <string>

using namespace tde_plankton;

int main() {
    const ModelParams base = ModelParams::table1(0.17, ResponseKind::michaelis_menten(0.159));
    const BoundaryPoint start = find_start(base, 6.0, std::pow(10.0, 0.4), std::pow(10.0, 0.6));
    std::printf("boundary at m = 6: log10 N_T = %.6f, omega = %.6f\n", std::log10(start.n_total), start.omega);

    ContinuationOptions copts;
    copts.max_steps = 40;
    const BoundaryCurve curve = trace_curve(start, base, copts);
    std::printf("traced %zu points (%s)\n", curve.points.size(), std::string(to_string(curve.termination)).c_str());
    for (std::size_t i = 0; i < curve.points.size(); i += 8) {
        const BoundaryPoint& b = curve.points[i];
        std::printf("  m = %7.4f  log10 N_T = %7.4f  omega = %.4f\n", b.m, std::log10(b.n_total), b.omega);
    }

    for (double log_nt : {0.49, 0.51}) {
        ModelParams p = base;
        p.m = 6.0;
        p.n_total = std::pow(10.0, log_nt);
        SimulationOptions sopts;
        sopts.horizon_hat = 1500.0;
        sopts.record_every = 5;
        const Trajectory tr = to_physical_time(integrate(build_initial(HistorySpec::at_equilibrium(1e-3, 1e-3), p), sopts));
        const auto freq = measure_frequency(tr);
        const TrajectoryRow& last = tr.rows.back();
        std::printf("log10 N_T = %.2f: t = %.1f  P = %.6f  Z = %.6f  omega = %.4f\n", log_nt, last.t, last.p, last.z,
                    freq ? freq->omega : 0.0);
    }
}
