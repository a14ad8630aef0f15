#pragma once

// The four CLI subcommands. Each writes its files under the output directory
// and returns the process exit code.

#include "tde_plankton/app/checks.hpp"
#include "tde_plankton/app/config.hpp"
#include "tde_plankton/app/csv.hpp"
#include "tde_plankton/app/parallel.hpp"
#include "tde_plankton/continuation.hpp"
#include "tde_plankton/equilibria.hpp"
#include "tde_plankton/errors.hpp"
#include "tde_plankton/linearize.hpp"
#include "tde_plankton/simulate.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace tde_plankton::app {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int {
    kExitOk = 0,
    kExitRuntime = 1,
    kExitConfig = 2,
    kExitCheckFailed = 3,
    kExitInfeasibleBiomass = 4,
    kExitSingularRate = 5,
};

[[nodiscard]] inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config:
        case ErrorKind::InvalidParams: return kExitConfig;
        case ErrorKind::InfeasibleBiomass: return kExitInfeasibleBiomass;
        case ErrorKind::SingularRate: return kExitSingularRate;
        default: return kExitRuntime;
    }
}

namespace detail {

inline void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Config, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Config, "cannot write " + path.string());
    out << text;
}

[[nodiscard]] inline std::string tag(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

[[nodiscard]] inline std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> out;
    if (n <= 0) return out;
    if (n == 1) return {lo};
    const double a = std::log10(lo), b = std::log10(hi);
    for (int i = 0; i < n; ++i) out.push_back(std::pow(10.0, a + (b - a) * i / (n - 1)));
    return out;
}

[[nodiscard]] inline json params_json(const ModelParams& p) {
    json j = {{"mu", p.mu},       {"lambda", p.lambda}, {"g", p.g},   {"gamma", p.gamma},
              {"delta", p.delta}, {"delta0", p.delta0}, {"k", p.k},   {"kk", p.kk},
              {"m", p.m},         {"n_total", p.n_total},
              {"response", p.response.is_constant() ? "constant" : "mm"}};
    if (!p.response.is_constant()) j["l"] = p.response.l;
    j["r_star"] = p.r_star ? json(*p.r_star) : json("auto");
    return j;
}

}  // namespace detail

// --- equilibria -------------------------------------------------------------

inline int cmd_equilibria(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    validate(cfg);
    fs::create_directories(out);
    const std::vector<double> ms = cfg.m_values.empty() ? std::vector<double>{cfg.model.m} : cfg.m_values;
    const std::vector<double> d0s =
        cfg.delta0_values.empty() ? std::vector<double>{cfg.model.delta0} : cfg.delta0_values;
    const std::vector<double> grid = detail::log_grid(cfg.nt_min, cfg.nt_max, cfg.nt_points);

    struct Job {
        double m, delta0;
    };
    std::vector<Job> jobs;
    for (double d0 : d0s)
        for (double m : ms) jobs.push_back({m, d0});

    const auto results = parallel_map<json>(jobs.size(), [&](std::size_t i) {
        ModelParams p = cfg.model;
        p.m = jobs[i].m;
        p.delta0 = jobs[i].delta0;
        p.r_star.reset();
        const std::string name = "equilibria_m" + detail::tag(p.m) + "_d0" + detail::tag(p.delta0) + ".csv";
        const auto rows = classify_and_sweep(p, grid);
        CsvWriter csv(out / name, {"n_total", "kind", "n_star", "p_star", "z_star", "residual"});
        for (const auto& r : rows) {
            csv.cell(r.n_total).cell(sweep_kind_label(r)).cell(r.point.n_star).cell(r.point.p_star);
            csv.cell(r.point.z_star).cell(r.point.residual).end_row();
        }
        const ThresholdReport th = thresholds(p);
        json entry = {{"file", name}, {"m", p.m}, {"delta0", p.delta0}, {"nt1", th.nt1}, {"rows", rows.size()}};
        entry["nt2"] = th.nt2 ? json(*th.nt2) : json(nullptr);
        entry["m_ceiling"] = std::isfinite(th.m_ceiling) ? json(th.m_ceiling) : json(nullptr);
        if (!th.nt2) entry["note"] = "m at or above the maturity ceiling: E2 never exists";
        return entry;
    });
    for (const auto& r : results)
        if (r.contains("note")) log << "warning: " << r["file"].get<std::string>() << ": " << r["note"].get<std::string>() << '\n';
    json manifest = {{"command", "equilibria"}, {"params", detail::params_json(cfg.model)}, {"files", results}};
    detail::write_json(out / "equilibria.meta.json", manifest);
    detail::write_text(out / "run.cfg", to_text(cfg));
    log << "wrote " << results.size() << " sweep file(s) to " << out.string() << '\n';
    return kExitOk;
}

// --- trace-boundary ---------------------------------------------------------

struct TracedCurve {
    BoundaryCurve curve;
    BoundaryPoint seed;
    Termination forward = Termination::StepFailure;
    std::optional<Termination> backward;
};

struct TraceSummary {
    std::vector<TracedCurve> curves;
    std::vector<std::string> notes;
    double m_max = 0.0;
    int starts_found = 0;
};

[[nodiscard]] inline ContinuationOptions continuation_options(const RunConfig& cfg, double m_max) {
    ContinuationOptions o;
    o.h_init = cfg.h_init;
    o.h_min = cfg.h_min;
    o.h_max = cfg.h_max;
    o.tol = cfg.tol;
    o.max_steps = cfg.max_steps;
    o.nt_min = cfg.cont_nt_min;
    o.nt_max = cfg.cont_nt_max;
    o.m_min = cfg.cont_m_min;
    o.m_max = m_max;
    return o;
}

/// Seeds find_start on an m-grid, traces each new start in both directions
/// and removes duplicate curves.
[[nodiscard]] inline TraceSummary trace_boundaries(const RunConfig& cfg, std::ostream& log) {
    validate(cfg);
    ModelParams p = cfg.model;
    p.r_star.reset();
    TraceSummary summary;
    const double ceiling = m_ceiling(p);
    double m_max = cfg.cont_m_max.value_or(std::isfinite(ceiling) ? ceiling : 20.0);
    if (m_max >= ceiling) {
        if (cfg.cont_m_max)
            summary.notes.push_back("continuation.m_max clipped to the maturity ceiling " + std::to_string(ceiling));
        m_max = ceiling;
    }
    summary.m_max = m_max;
    for (const auto& n : summary.notes) log << "warning: " << n << '\n';
    if (!(m_max > cfg.cont_m_min)) throw Error(ErrorKind::Config, "continuation m range is empty");

    std::vector<double> seeds_m;
    for (int j = 0; j < cfg.m_seeds; ++j)
        seeds_m.push_back(cfg.cont_m_min + (m_max - cfg.cont_m_min) * j / cfg.m_seeds);

    StartOptions sopts;
    sopts.tol = cfg.tol;
    sopts.criterion =
        cfg.criterion == CrossingKind::Count ? CrossingCriterion::UnstableCount : CrossingCriterion::RightmostSign;

    struct SeedResult {
        std::vector<BoundaryPoint> starts;
        std::vector<std::string> notes;
    };
    const auto seeded = parallel_map<SeedResult>(seeds_m.size(), [&](std::size_t i) {
        SeedResult res;
        const double m = seeds_m[i];
        ModelParams pm = p;
        pm.m = m;
        const double lo = std::max(cfg.cont_nt_min, compute_nt2(pm) * (1.0 + 1e-6));
        if (!(lo < cfg.cont_nt_max)) {
            res.notes.push_back("m = " + std::to_string(m) + ": E2 absent over the N_T range");
            return res;
        }
        const std::vector<double> grid = detail::log_grid(lo, cfg.cont_nt_max, cfg.bracket_points);
        std::vector<int> keys;
        for (double nt : grid) {
            const ModelParams q = [&] {
                ModelParams r = pm;
                r.n_total = nt;
                return r;
            }();
            const StabilityReport rep = stability_scan(build_linearization(solve_e2(q), q), q, sopts.stability);
            keys.push_back(sopts.criterion == CrossingCriterion::UnstableCount ? rep.unstable_count
                                                                               : (rep.max_real > 0.0 ? 1 : 0));
        }
        for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
            if (keys[k] == keys[k + 1]) continue;
            try {
                res.starts.push_back(find_start(p, m, grid[k], grid[k + 1], sopts));
            } catch (const Error& e) {
                res.notes.push_back("m = " + std::to_string(m) + ": " + e.what());
            }
        }
        return res;
    });

    std::vector<BoundaryPoint> starts;
    for (const auto& s : seeded) {
        starts.insert(starts.end(), s.starts.begin(), s.starts.end());
        summary.notes.insert(summary.notes.end(), s.notes.begin(), s.notes.end());
    }
    summary.starts_found = static_cast<int>(starts.size());
    std::stable_sort(starts.begin(), starts.end(), [](const BoundaryPoint& a, const BoundaryPoint& b) {
        return a.m != b.m ? a.m < b.m : a.n_total < b.n_total;
    });

    const ContinuationOptions base_opts = continuation_options(cfg, m_max);
    std::vector<TracedCurve> traced;
    for (const auto& start : starts) {
        const bool known = std::any_of(traced.begin(), traced.end(), [&](const TracedCurve& c) {
            return distance_to_curve(start, c.curve, p) <= cfg.dedupe_tol;
        });
        if (known) continue;
        TracedCurve tc;
        tc.seed = start;
        ContinuationOptions fwd = base_opts;
        BoundaryCurve forward = trace_curve(start, p, fwd);
        tc.forward = forward.termination;
        tc.curve = forward;
        if (forward.termination != Termination::ClosedLoop) {
            ContinuationOptions bwd = base_opts;
            bwd.direction = -1;
            const BoundaryCurve backward = trace_curve(start, p, bwd);
            tc.backward = backward.termination;
            std::vector<BoundaryPoint> joined(backward.points.rbegin(), backward.points.rend());
            joined.insert(joined.end(), forward.points.begin() + 1, forward.points.end());
            tc.curve.points = std::move(joined);
            tc.curve.start_tangent = -backward.end_tangent;
        }
        log << "curve from m = " << start.m << ", N_T = " << start.n_total << ": " << tc.curve.points.size()
            << " points\n";
        traced.push_back(std::move(tc));
    }

    // Deterministic duplicate removal on the joined curves.
    std::vector<BoundaryCurve> plain;
    for (const auto& t : traced) plain.push_back(t.curve);
    const auto kept = deduplicate_curves(plain, p, cfg.dedupe_tol);
    for (const auto& k : kept) {
        const auto it = std::find_if(traced.begin(), traced.end(), [&](const TracedCurve& t) {
            return t.curve.points.size() == k.points.size() && t.curve.points.front().m == k.points.front().m &&
                   t.curve.points.front().n_total == k.points.front().n_total;
        });
        summary.curves.push_back(*it);
    }
    return summary;
}

inline int cmd_trace_boundary(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    validate(cfg);
    fs::create_directories(out);
    const TraceSummary summary = trace_boundaries(cfg, log);

    CsvWriter curves(out / "curves.csv",
                     {"curve_id", "point_index", "m", "n_total", "omega", "n_star", "p_star", "z_star", "residual"});
    CsvWriter freq(out / "frequency.csv", {"curve_id", "point_index", "m", "n_total", "omega"});
    json meta_curves = json::array();
    for (std::size_t c = 0; c < summary.curves.size(); ++c) {
        const auto& tc = summary.curves[c];
        for (std::size_t i = 0; i < tc.curve.points.size(); ++i) {
            const auto& b = tc.curve.points[i];
            const auto id = static_cast<long long>(c);
            const auto idx = static_cast<long long>(i);
            curves.cell(id).cell(idx).cell(b.m).cell(b.n_total).cell(b.omega).cell(b.n_star).cell(b.p_star);
            curves.cell(b.z_star).cell(b.residual).end_row();
        }
        const auto profile = emit_frequency_profile(tc.curve);
        for (std::size_t i = 0; i < profile.size(); ++i)
            freq.cell(static_cast<long long>(c)).cell(static_cast<long long>(i)).cell(profile[i].m)
                .cell(profile[i].n_total).cell(profile[i].omega).end_row();
        json jc = {{"curve_id", c},
                   {"points", tc.curve.points.size()},
                   {"seed", {{"m", tc.seed.m}, {"n_total", tc.seed.n_total}, {"omega", tc.seed.omega}}},
                   {"termination_forward", std::string(to_string(tc.forward))}};
        jc["termination_backward"] = tc.backward ? json(std::string(to_string(*tc.backward))) : json(nullptr);
        meta_curves.push_back(jc);
    }
    json meta = {{"command", "trace-boundary"},
                 {"params", detail::params_json(cfg.model)},
                 {"m_max", summary.m_max},
                 {"starts_found", summary.starts_found},
                 {"curves", meta_curves},
                 {"notes", summary.notes}};
    if (summary.curves.empty()) {
        meta["report"] = "NoSignChange";
        log << "no boundary found (NoSignChange)\n";
    }
    detail::write_json(out / "curves.meta.json", meta);
    detail::write_text(out / "run.cfg", to_text(cfg));
    log << "wrote " << summary.curves.size() << " curve(s) to " << out.string() << '\n';
    return kExitOk;
}

// --- simulate ---------------------------------------------------------------

[[nodiscard]] inline HistorySpec history_spec(const RunConfig& cfg) {
    HistorySpec spec = cfg.history == HistoryKind::Equilibrium ? HistorySpec::at_equilibrium(cfg.eps_p, cfg.eps_z)
                                                               : HistorySpec::constant(cfg.p0, cfg.z0);
    spec.n_offset = cfg.n_offset;
    return spec;
}

[[nodiscard]] inline double simulation_dt(const RunConfig& cfg) {
    if (cfg.dt_hat) return *cfg.dt_hat;
    const double t = transformed_delay(with_resolved_r_star(cfg.model));
    return t > 0.0 ? t / cfg.steps_per_delay : 1e-2;
}

struct SimulationOutcome {
    Trajectory trajectory;
    json diagnostics;
};

[[nodiscard]] inline SimulationOutcome run_simulation(const RunConfig& cfg) {
    validate(cfg);
    const HistoryBuffer buf = build_initial(history_spec(cfg), cfg.model, simulation_dt(cfg));
    SimulationOptions opts;
    opts.horizon_hat = cfg.horizon;
    opts.record_every = static_cast<std::size_t>(cfg.record_every);
    SimulationOutcome out{to_physical_time(integrate(buf, opts)), json::object()};
    const Trajectory& tr = out.trajectory;

    double cons = 0.0;
    for (const auto& r : tr.rows)
        if (!std::isnan(r.cons_residual)) cons = std::max(cons, std::fabs(r.cons_residual));
    json& d = out.diagnostics;
    d["max_abs_cons_residual"] = cons;
    d["max_tau_drift"] = tr.max_tau_drift;
    try {
        d["tde_residual"] = tde_residual(tr);
    } catch (const Error& e) {
        d["tde_residual"] = nullptr;
        d["tde_residual_note"] = e.what();
    }
    if (const auto f = measure_frequency(tr)) {
        d["frequency"] = {{"omega", f->omega}, {"period", f->period}, {"crossings", f->crossings}};
    } else {
        d["frequency"] = nullptr;
    }
    const auto& last = tr.final_row();
    d["final"] = {{"t_hat", last.t_hat}, {"t", last.t}, {"n", last.n}, {"p", last.p}, {"z", last.z}};
    return out;
}

inline int cmd_simulate(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    validate(cfg);
    fs::create_directories(out);
    json meta = {{"command", "simulate"}, {"params", detail::params_json(cfg.model)}};
    SimulationOutcome sim;
    try {
        sim = run_simulation(cfg);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::InfeasibleBiomass) throw;
        meta["termination"] = "InfeasibleBiomass";
        meta["error"] = e.what();
        detail::write_json(out / "trajectory.meta.json", meta);
        detail::write_text(out / "run.cfg", to_text(cfg));
        log << "error: " << e.what() << '\n';
        return kExitInfeasibleBiomass;
    }
    const Trajectory& tr = sim.trajectory;
    CsvWriter csv(out / "trajectory.csv", {"t_hat", "t", "n", "p", "z", "tau_m", "cons_residual"});
    for (const auto& r : tr.rows)
        csv.cell(r.t_hat).cell(r.t).cell(r.n).cell(r.p).cell(r.z).cell(r.tau_m).cell(r.cons_residual).end_row();

    json rho_meta = json::array();
    if (!cfg.rho_times.empty() && tr.params.m > 0.0) {
        CsvWriter rho_csv(out / "rho.csv", {"t", "s", "rho"});
        std::vector<double> s_grid(static_cast<std::size_t>(cfg.rho_points));
        for (std::size_t i = 0; i < s_grid.size(); ++i)
            s_grid[i] = tr.params.m * static_cast<double>(i) / static_cast<double>(s_grid.size() - 1);
        for (double t : cfg.rho_times) {
            try {
                const auto rho = reconstruct_rho(tr, t, s_grid);
                double pool = 0.0;
                for (std::size_t i = 0; i + 1 < rho.size(); ++i) pool += 0.5 * (s_grid[i + 1] - s_grid[i]) * (rho[i] + rho[i + 1]);
                for (std::size_t i = 0; i < rho.size(); ++i) rho_csv.cell(t).cell(s_grid[i]).cell(rho[i]).end_row();
                rho_meta.push_back({{"t", t}, {"pool", pool}});
            } catch (const Error& e) {
                rho_meta.push_back({{"t", t}, {"error", e.what()}});
            }
        }
    }

    meta["termination"] = std::string(to_string(tr.termination));
    meta["r_star"] = *tr.params.r_star;
    meta["dt_hat"] = tr.dt_hat;
    meta["t_delay"] = tr.t_delay;
    meta["rows"] = tr.rows.size();
    meta["history_rows"] = tr.history_rows;
    meta["spec"] = {{"history", cfg.history == HistoryKind::Equilibrium ? "equilibrium" : "constant"},
                    {"eps_p", cfg.eps_p}, {"eps_z", cfg.eps_z}, {"p0", cfg.p0}, {"z0", cfg.z0},
                    {"n_offset", cfg.n_offset}};
    meta["diagnostics"] = sim.diagnostics;
    if (!rho_meta.empty()) meta["rho"] = rho_meta;
    meta["config"] = to_map(cfg);
    detail::write_json(out / "trajectory.meta.json", meta);
    detail::write_text(out / "run.cfg", to_text(cfg));
    log << "simulation finished: " << to_string(tr.termination) << ", " << tr.rows.size() << " rows\n";
    return tr.termination == SimTermination::SingularRate ? kExitSingularRate : kExitOk;
}

// --- check ------------------------------------------------------------------

inline int cmd_check(const RunConfig& cfg, const fs::path& out, std::ostream& report, std::ostream& log) {
    validate(cfg);
    fs::create_directories(out);
    const auto results = run_check_suite(cfg);
    std::ofstream file(out / "check.jsonl");
    bool failed = false;
    for (const auto& r : results) {
        const json line = {{"check", r.name}, {"status", std::string(to_string(r.status))}, {"detail", r.detail}};
        report << line.dump() << '\n';
        file << line.dump() << '\n';
        failed = failed || r.status == CheckStatus::Fail;
    }
    log << (failed ? "check suite FAILED" : "check suite passed") << '\n';
    return failed ? kExitCheckFailed : kExitOk;
}

}  // namespace tde_plankton::app
