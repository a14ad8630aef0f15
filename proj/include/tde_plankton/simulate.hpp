#pragma once

// Fixed-step integration of the DDE form in transformed time, the map back to
// physical time, and trajectory diagnostics (TDE residual, juvenile spectrum,
// conservation defect decay, oscillation frequency).

#include "tde_plankton/equilibria.hpp"
#include "tde_plankton/errors.hpp"
#include "tde_plankton/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

namespace tde_plankton {

/// P below this fraction of N_T ends a run with Extinction.
inline constexpr double kExtinctionFloor = 1e-12;

enum class HistoryVariant { ConstantAtEquilibrium, ConstantValues, Sampled };

struct HistorySample {
    double t_hat = 0.0;
    double p = 0.0;
    double z = 0.0;
};

/// Initial history of (P, Z) on [-T, 0]. N(0) is derived from biomass
/// conservation, shifted by `n_offset` to build deliberately inconsistent data.
struct HistorySpec {
    HistoryVariant variant = HistoryVariant::ConstantAtEquilibrium;
    double eps_p = 0.0;  // relative perturbations for ConstantAtEquilibrium
    double eps_z = 0.0;
    double p0 = 0.0;  // ConstantValues
    double z0 = 0.0;
    std::vector<HistorySample> samples;  // Sampled, increasing t_hat covering [-T, 0]
    double n_offset = 0.0;

    [[nodiscard]] static HistorySpec at_equilibrium(double eps_p = 0.0, double eps_z = 0.0) {
        HistorySpec s;
        s.eps_p = eps_p;
        s.eps_z = eps_z;
        return s;
    }
    [[nodiscard]] static HistorySpec constant(double p0, double z0) {
        HistorySpec s;
        s.variant = HistoryVariant::ConstantValues;
        s.p0 = p0;
        s.z0 = z0;
        return s;
    }
    [[nodiscard]] static HistorySpec sampled(std::vector<HistorySample> samples) {
        HistorySpec s;
        s.variant = HistoryVariant::Sampled;
        s.samples = std::move(samples);
        return s;
    }
};

[[nodiscard]] constexpr std::string_view to_string(HistoryVariant v) noexcept {
    switch (v) {
        case HistoryVariant::ConstantAtEquilibrium: return "equilibrium";
        case HistoryVariant::ConstantValues: return "constant";
        case HistoryVariant::Sampled: return "sampled";
    }
    return "?";
}

/// Fixed-capacity window over the last delay_steps + 1 grid points.
class HistoryRing {
public:
    HistoryRing() = default;
    explicit HistoryRing(std::size_t capacity) : states_(capacity), inv_r_(capacity) {}

    [[nodiscard]] std::size_t size() const noexcept { return states_.size(); }
    /// j = 0 is the oldest sample, j = size() - 1 the newest.
    [[nodiscard]] const StateNPZ& state(std::size_t j) const { return states_[(head_ + j) % states_.size()]; }
    [[nodiscard]] double inv_r(std::size_t j) const { return inv_r_[(head_ + j) % states_.size()]; }

    void assign(std::size_t j, const StateNPZ& s, double inv_r) {
        states_[(head_ + j) % states_.size()] = s;
        inv_r_[(head_ + j) % states_.size()] = inv_r;
    }
    /// Drops the oldest sample and appends `s` as the newest.
    void push(const StateNPZ& s, double inv_r) {
        states_[head_] = s;
        inv_r_[head_] = inv_r;
        head_ = (head_ + 1) % states_.size();
    }
    [[nodiscard]] std::vector<StateNPZ> contiguous() const {
        std::vector<StateNPZ> out(size());
        for (std::size_t j = 0; j < size(); ++j) out[j] = state(j);
        return out;
    }

private:
    std::vector<StateNPZ> states_;
    std::vector<double> inv_r_;
    std::size_t head_ = 0;
};

struct HistoryBuffer {
    ModelParams params;  // r_star resolved
    double dt_hat = 0.0;
    std::size_t delay_steps = 0;  // T / dt_hat
    HistoryRing ring;
    double tau_sum = 0.0;  // running trapezoid sum for tau_hat(m)
    double juvenile_pool = 0.0;
};

enum class SimTermination { HorizonReached, Extinction, SingularRate };

[[nodiscard]] constexpr std::string_view to_string(SimTermination t) noexcept {
    switch (t) {
        case SimTermination::HorizonReached: return "HorizonReached";
        case SimTermination::Extinction: return "Extinction";
        case SimTermination::SingularRate: return "SingularRate";
    }
    return "?";
}

struct TrajectoryRow {
    double t_hat = 0.0;
    double t = 0.0;
    double n = 0.0;
    double p = 0.0;
    double z = 0.0;
    double tau_m = 0.0;
    double cons_residual = 0.0;  // NaN on history rows before t_hat = 0
    double inv_r = 1.0;          // R*/R(P)
};

struct Trajectory {
    std::vector<TrajectoryRow> rows;
    std::size_t history_rows = 0;  // rows with t_hat <= 0; the last of them is t_hat = 0
    SimTermination termination = SimTermination::HorizonReached;
    ModelParams params;
    double dt_hat = 0.0;
    double t_delay = 0.0;
    double max_tau_drift = 0.0;  // max relative gap between running and recomputed tau_hat(m)

    [[nodiscard]] const TrajectoryRow& final_row() const { return rows.back(); }
};

/// Default step: T / 200, or 0.01 days when there is no delay.
[[nodiscard]] inline double default_dt_hat(const ModelParams& resolved) {
    const double t = transformed_delay(resolved);
    return t > 0.0 ? t / 200.0 : 1e-2;
}

namespace detail {

[[nodiscard]] inline double panel(double a, double b, double dt) { return 0.5 * dt * (a + b); }

[[nodiscard]] inline double ring_tau(const HistoryRing& ring, double dt) {
    double sum = 0.0;
    for (std::size_t j = 0; j + 1 < ring.size(); ++j) sum += panel(ring.inv_r(j), ring.inv_r(j + 1), dt);
    return sum;
}

[[nodiscard]] inline std::pair<double, double> interpolate_samples(const std::vector<HistorySample>& s, double t) {
    const auto it = std::lower_bound(s.begin(), s.end(), t,
                                     [](const HistorySample& a, double v) { return a.t_hat < v; });
    if (it == s.begin()) return {it->p, it->z};
    if (it == s.end()) return {s.back().p, s.back().z};
    const HistorySample& hi = *it;
    const HistorySample& lo = *(it - 1);
    const double w = (t - lo.t_hat) / (hi.t_hat - lo.t_hat);
    return {lo.p + w * (hi.p - lo.p), lo.z + w * (hi.z - lo.z)};
}

}  // namespace detail

/// Fills the history grid on [-T, 0] and sets N(0) from the conservation law.
[[nodiscard]] inline HistoryBuffer build_initial(const HistorySpec& spec, const ModelParams& params,
                                                 std::optional<double> dt_hat = std::nullopt) {
    validate(params);
    HistoryBuffer buf;
    buf.params = with_resolved_r_star(params);
    const ModelParams& p = buf.params;
    const double delay = transformed_delay(p);
    buf.dt_hat = dt_hat.value_or(default_dt_hat(p));
    if (!(buf.dt_hat > 0.0)) throw Error(ErrorKind::Domain, "dt_hat must be positive");
    buf.delay_steps = delay_steps_for(delay, buf.dt_hat);

    std::optional<EquilibriumPoint> eq;
    if (spec.variant == HistoryVariant::ConstantAtEquilibrium) {
        const ThresholdReport th = thresholds(p);
        if (th.nt2 && p.n_total > *th.nt2)
            eq = solve_e2(p);
        else
            eq = solve_e1(p);
    }
    if (spec.variant == HistoryVariant::Sampled) {
        const auto& s = spec.samples;
        if (s.empty()) throw Error(ErrorKind::Domain, "sampled history is empty");
        for (std::size_t i = 1; i < s.size(); ++i)
            if (!(s[i].t_hat > s[i - 1].t_hat)) throw Error(ErrorKind::Domain, "sampled history must be increasing");
        const double tol = 1e-9 * std::max(1.0, delay);
        if (s.front().t_hat > -delay + tol || s.back().t_hat < -tol)
            throw Error(ErrorKind::Domain, "sampled history must cover [-T, 0]");
    }

    const std::size_t d = buf.delay_steps;
    buf.ring = HistoryRing(d + 1);
    for (std::size_t j = 0; j <= d; ++j) {
        const double t_hat = -static_cast<double>(d - j) * buf.dt_hat;
        double prey = 0.0;
        double zoo = 0.0;
        switch (spec.variant) {
            case HistoryVariant::ConstantAtEquilibrium:
                prey = eq->p_star * (1.0 + spec.eps_p);
                zoo = eq->z_star * (1.0 + spec.eps_z);
                break;
            case HistoryVariant::ConstantValues:
                prey = spec.p0;
                zoo = spec.z0;
                break;
            case HistoryVariant::Sampled:
                std::tie(prey, zoo) = detail::interpolate_samples(spec.samples, t_hat);
                break;
        }
        if (!(prey > 0.0) || !(zoo >= 0.0) || !std::isfinite(prey) || !std::isfinite(zoo)) {
            std::ostringstream os;
            os << "history must have P > 0 and Z >= 0 (t_hat = " << t_hat << ", P = " << prey << ", Z = " << zoo
               << ")";
            throw Error(ErrorKind::Domain, os.str());
        }
        buf.ring.assign(j, {0.0, prey, zoo}, rate_ratio(prey, *p.r_star, p));
    }

    const std::vector<StateNPZ> window = buf.ring.contiguous();
    const JuvenilePool pool = juvenile_pool(window, buf.dt_hat, p);
    buf.juvenile_pool = pool.biomass;
    buf.tau_sum = pool.tau_m;
    const StateNPZ now = window.back();
    const double n0 = p.n_total - now.p - now.z - pool.biomass + spec.n_offset;
    if (!(n0 > 0.0)) {
        std::ostringstream os;
        os << "history carries more biomass than N_T: N(0) = " << n0;
        throw Error(ErrorKind::InfeasibleBiomass, os.str());
    }
    // N only matters at t_hat = 0; earlier history rows carry the same value for display.
    for (std::size_t j = 0; j <= d; ++j) {
        StateNPZ s = buf.ring.state(j);
        s.n = n0;
        buf.ring.assign(j, s, buf.ring.inv_r(j));
    }
    return buf;
}

struct SimulationOptions {
    double horizon_hat = 1000.0;          // transformed-time horizon
    std::size_t record_every = 1;         // emit every k-th step
    bool conservation = true;             // fill cons_residual on emitted rows
    std::size_t tau_recompute_every = 1000;
    bool verify_tau = false;              // recompute tau_hat(m) every step and track drift
};

namespace detail {

[[nodiscard]] inline TrajectoryRow make_row(double t_hat, double t, const StateNPZ& s, double tau, double inv_r) {
    return {t_hat, t, s.n, s.p, s.z, tau, std::numeric_limits<double>::quiet_NaN(), inv_r};
}

}  // namespace detail

/// Heun scheme with grid-exact delays. Consumes a copy of the buffer.
[[nodiscard]] inline Trajectory integrate(HistoryBuffer buf, const SimulationOptions& opts = {}) {
    const ModelParams& p = buf.params;
    const double r_star = *p.r_star;
    const double dt = buf.dt_hat;
    const std::size_t d = buf.delay_steps;
    const std::size_t last = d;  // newest ring index
    const double floor = kExtinctionFloor * p.n_total;
    const std::size_t stride = std::max<std::size_t>(1, opts.record_every);

    Trajectory traj;
    traj.params = p;
    traj.dt_hat = dt;
    traj.t_delay = transformed_delay(p);

    // History rows with physical time accumulated backwards from t = 0.
    {
        std::vector<double> t_hist(d + 1, 0.0);
        for (std::size_t j = d; j-- > 0;)
            t_hist[j] = t_hist[j + 1] - detail::panel(buf.ring.inv_r(j), buf.ring.inv_r(j + 1), dt);
        for (std::size_t j = 0; j <= d; ++j) {
            const double t_hat = -static_cast<double>(d - j) * dt;
            traj.rows.push_back(detail::make_row(t_hat, t_hist[j], buf.ring.state(j), buf.tau_sum, buf.ring.inv_r(j)));
        }
        // tau_m on history rows is only meaningful at t_hat = 0.
        for (std::size_t j = 0; j < d; ++j) traj.rows[j].tau_m = std::numeric_limits<double>::quiet_NaN();
    }
    traj.history_rows = traj.rows.size();
    if (opts.conservation) {
        traj.rows.back().cons_residual =
            conservation_value(buf.ring.contiguous(), dt, p) - p.n_total;
    }

    const auto steps_total = static_cast<std::size_t>(std::llround(opts.horizon_hat / dt));
    double t_phys = 0.0;
    std::size_t emitted_step = 0;
    const auto emit = [&](std::size_t step) {
        TrajectoryRow row = detail::make_row(static_cast<double>(step) * dt, t_phys, buf.ring.state(last), buf.tau_sum,
                                             buf.ring.inv_r(last));
        if (opts.conservation) row.cons_residual = conservation_value(buf.ring.contiguous(), dt, p) - p.n_total;
        traj.rows.push_back(row);
        emitted_step = step;
    };
    std::size_t k = 0;
    try {
        for (; k < steps_total; ++k) {
            const StateNPZ y = buf.ring.state(last);
            const double y_inv = buf.ring.inv_r(last);
            const StateNPZ& delayed_now = buf.ring.state(0);
            const StateNPZ f1 = dde_rhs(y, d == 0 ? y : delayed_now, buf.tau_sum, p);
            const StateNPZ pred = y + dt * f1;
            if (!(pred.p > 0.0)) {
                traj.termination = SimTermination::Extinction;
                break;
            }
            const double pred_inv = rate_ratio(pred.p, r_star, p);
            double tau_pred = 0.0;
            if (d > 0)
                tau_pred = buf.tau_sum + detail::panel(y_inv, pred_inv, dt) -
                           detail::panel(buf.ring.inv_r(0), buf.ring.inv_r(1), dt);
            const StateNPZ delayed_next = d == 0 ? pred : buf.ring.state(1);
            const StateNPZ f2 = dde_rhs(pred, delayed_next, tau_pred, p);
            const StateNPZ next = y + (0.5 * dt) * (f1 + f2);
            if (!(next.p > 0.0) || !std::isfinite(next.n) || !std::isfinite(next.z)) {
                traj.termination = SimTermination::Extinction;
                break;
            }
            const double next_inv = rate_ratio(next.p, r_star, p);
            t_phys += detail::panel(y_inv, next_inv, dt);
            if (d > 0) {
                buf.tau_sum += detail::panel(y_inv, next_inv, dt) -
                               detail::panel(buf.ring.inv_r(0), buf.ring.inv_r(1), dt);
                buf.ring.push(next, next_inv);
                const bool recompute = opts.tau_recompute_every > 0 && (k + 1) % opts.tau_recompute_every == 0;
                if (recompute || opts.verify_tau) {
                    const double fresh = detail::ring_tau(buf.ring, dt);
                    traj.max_tau_drift = std::max(traj.max_tau_drift, std::fabs(fresh - buf.tau_sum) / fresh);
                    if (recompute) buf.tau_sum = fresh;
                }
            } else {
                buf.ring.push(next, next_inv);
            }

            const bool extinct = next.p < floor;
            if ((k + 1) % stride == 0 || k + 1 == steps_total || extinct) emit(k + 1);
            if (extinct) {
                traj.termination = SimTermination::Extinction;
                break;
            }
        }
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::SingularRate) throw;
        traj.termination = SimTermination::SingularRate;
    }
    if (emitted_step != k && k > 0 && traj.termination != SimTermination::HorizonReached) emit(k);
    return traj;
}

/// Recomputes the physical time column by cumulative trapezoid of R*/R(P)
/// over t_hat, anchored at t(0) = 0.
[[nodiscard]] inline Trajectory to_physical_time(Trajectory traj) {
    auto& rows = traj.rows;
    if (rows.empty() || traj.history_rows == 0) return traj;
    const std::size_t zero = traj.history_rows - 1;
    rows[zero].t = 0.0;
    for (std::size_t i = zero + 1; i < rows.size(); ++i)
        rows[i].t = rows[i - 1].t + 0.5 * (rows[i].t_hat - rows[i - 1].t_hat) * (rows[i].inv_r + rows[i - 1].inv_r);
    for (std::size_t i = zero; i-- > 0;)
        rows[i].t = rows[i + 1].t - 0.5 * (rows[i + 1].t_hat - rows[i].t_hat) * (rows[i].inv_r + rows[i + 1].inv_r);
    return traj;
}

namespace detail {

/// Piecewise-linear view of a trajectory on the physical time axis, with the
/// accumulated maturity I(t) = integral of R(P) dt.
class PhysicalGrid {
public:
    PhysicalGrid(const Trajectory& traj, const ModelParams& p) : traj_(traj) {
        const auto& rows = traj.rows;
        t_.reserve(rows.size());
        acc_.reserve(rows.size());
        r_.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            t_.push_back(rows[i].t);
            r_.push_back(r_growth(rows[i].p, p));
            acc_.push_back(i == 0 ? 0.0 : acc_.back() + 0.5 * (t_[i] - t_[i - 1]) * (r_[i] + r_[i - 1]));
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return t_.size(); }
    [[nodiscard]] double t(std::size_t i) const { return t_[i]; }
    [[nodiscard]] double accumulated(std::size_t i) const { return acc_[i]; }

    /// Time u <= t_i at which maturity s has accumulated since u; nullopt if
    /// it lies before the first row.
    [[nodiscard]] std::optional<double> birth_time(std::size_t i, double s) const {
        const double target = acc_[i] - s;
        if (target < acc_.front()) return std::nullopt;
        const auto it = std::lower_bound(acc_.begin(), acc_.begin() + static_cast<std::ptrdiff_t>(i) + 1, target);
        const auto j = static_cast<std::size_t>(it - acc_.begin());
        if (j == 0) return t_.front();
        const double w = (target - acc_[j - 1]) / (acc_[j] - acc_[j - 1]);
        return t_[j - 1] + w * (t_[j] - t_[j - 1]);
    }

    /// (N, P, Z) linearly interpolated at physical time u.
    [[nodiscard]] StateNPZ at(double u) const {
        const auto it = std::lower_bound(t_.begin(), t_.end(), u);
        const auto& rows = traj_.rows;
        if (it == t_.begin()) return {rows.front().n, rows.front().p, rows.front().z};
        if (it == t_.end()) return {rows.back().n, rows.back().p, rows.back().z};
        const auto j = static_cast<std::size_t>(it - t_.begin());
        const double w = (u - t_[j - 1]) / (t_[j] - t_[j - 1]);
        const auto& a = rows[j - 1];
        const auto& b = rows[j];
        return {a.n + w * (b.n - a.n), a.p + w * (b.p - a.p), a.z + w * (b.z - a.z)};
    }

private:
    const Trajectory& traj_;
    std::vector<double> t_;
    std::vector<double> acc_;
    std::vector<double> r_;
};

}  // namespace detail

/// Max over interior rows of |d/dt (N,P,Z) - TDE right-hand side| / max(1, N_T),
/// derivatives by centered differences on the physical grid. Rows within three
/// steps of t_hat = 0 and t_hat = T are skipped (derivative breakpoints).
[[nodiscard]] inline double tde_residual(const Trajectory& traj) {
    const ModelParams& p = traj.params;
    const auto& rows = traj.rows;
    const detail::PhysicalGrid grid(traj, p);
    const double guard = 3.0 * traj.dt_hat * (1.0 + 1e-9);
    double worst = 0.0;
    std::size_t used = 0;
    for (std::size_t i = traj.history_rows; i + 1 < rows.size(); ++i) {
        const double th = rows[i].t_hat;
        if (th <= guard || std::fabs(th - traj.t_delay) <= guard) continue;
        if (rows[i - 1].t_hat < 0.0) continue;
        double zoo_in = 0.0;
        double tau = 0.0;
        if (p.m > 0.0) {
            const auto birth = grid.birth_time(i, p.m);
            if (!birth) continue;
            tau = rows[i].t - *birth;
            const StateNPZ old = grid.at(*birth);
            zoo_in = p.gamma * p.g * std::exp(-p.delta0 * tau) * old.z * h_grazing(old.p, p) *
                     r_growth(rows[i].p, p) / r_growth(old.p, p);
        } else {
            zoo_in = p.gamma * p.g * rows[i].z * h_grazing(rows[i].p, p);
        }
        const auto& r = rows[i];
        const double span = rows[i + 1].t - rows[i - 1].t;
        const double dn = (rows[i + 1].n - rows[i - 1].n) / span;
        const double dp = (rows[i + 1].p - rows[i - 1].p) / span;
        const double dz = (rows[i + 1].z - rows[i - 1].z) / span;
        const double uptake = p.mu * r.p * f_uptake(r.n, p);
        const double grazing = p.g * r.z * h_grazing(r.p, p);
        const double rn = -uptake + p.lambda * r.p + p.delta * r.z + (1.0 - p.gamma) * grazing +
                          p.delta0 * (p.n_total - r.n - r.p - r.z);
        const double rp = uptake - p.lambda * r.p - grazing;
        const double rz = zoo_in - p.delta * r.z;
        worst = std::max({worst, std::fabs(dn - rn), std::fabs(dp - rp), std::fabs(dz - rz)});
        ++used;
    }
    if (used == 0) throw Error(ErrorKind::InsufficientHistory, "trajectory too short for a TDE residual");
    return worst / std::max(1.0, p.n_total);
}

/// Juvenile density rho(t, s) on `s_grid` at physical time t (interpolated).
[[nodiscard]] inline std::vector<double> reconstruct_rho(const Trajectory& traj, double t,
                                                         const std::vector<double>& s_grid) {
    const ModelParams& p = traj.params;
    const auto& rows = traj.rows;
    if (rows.empty() || t > rows.back().t) throw Error(ErrorKind::OutOfRegion, "time beyond the trajectory");
    // Extend the grid with an interpolated node at t so maturity is accumulated up to t exactly.
    Trajectory cut;
    cut.params = p;
    cut.dt_hat = traj.dt_hat;
    cut.history_rows = traj.history_rows;
    for (const auto& r : rows) {
        if (r.t < t) cut.rows.push_back(r);
        else break;
    }
    {
        const detail::PhysicalGrid full(traj, p);
        const StateNPZ s = full.at(t);
        TrajectoryRow r;
        r.t = t;
        r.n = s.n;
        r.p = s.p;
        r.z = s.z;
        cut.rows.push_back(r);
    }
    const detail::PhysicalGrid grid(cut, p);
    const std::size_t now = cut.rows.size() - 1;
    std::vector<double> rho;
    rho.reserve(s_grid.size());
    for (double s : s_grid) {
        if (!(s >= 0.0 && s <= p.m)) throw Error(ErrorKind::Domain, "maturity outside [0, m]");
        const auto birth = grid.birth_time(now, s);
        if (!birth || *birth < 0.0) {
            std::ostringstream os;
            os << "(t, s) = (" << t << ", " << s << ") lies in the initial-data region";
            throw Error(ErrorKind::OutOfRegion, os.str());
        }
        const double tau = t - *birth;
        const StateNPZ old = grid.at(*birth);
        rho.push_back(std::exp(-p.delta0 * tau) * p.gamma * p.g * old.z * h_grazing(old.p, p) / r_growth(old.p, p));
    }
    return rho;
}

struct DeltaDecayReport {
    bool conserved = false;  // Delta constant (delta0 = 0, Delta(0) = 0 or sign change)
    double rate = 0.0;       // fitted d log|Delta| / dt in 1/day
    double delta_initial = 0.0;
    double max_deviation = 0.0;  // max |Delta(t) - Delta(0)|
    std::size_t samples = 0;
};

/// Runs `spec` (with its n_offset) and fits the decay of the conservation
/// defect Delta(t) = N + P + Z + pool - N_T against physical time. Samples
/// with |Delta| below fit_floor * |Delta(0)| are left out of the fit, where
/// the discretisation error would dominate.
[[nodiscard]] inline DeltaDecayReport delta_decay_check(const HistorySpec& spec, const ModelParams& params,
                                                        double horizon_hat,
                                                        std::optional<double> dt_hat = std::nullopt,
                                                        double fit_floor = 1e-2) {
    SimulationOptions opts;
    opts.horizon_hat = horizon_hat;
    const Trajectory traj = integrate(build_initial(spec, params, dt_hat), opts);
    DeltaDecayReport rep;
    const auto& rows = traj.rows;
    rep.delta_initial = rows[traj.history_rows - 1].cons_residual;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    bool sign_change = false;
    const bool zero = rep.delta_initial == 0.0;
    for (std::size_t i = traj.history_rows - 1; i < rows.size(); ++i) {
        const double delta = rows[i].cons_residual;
        rep.max_deviation = std::max(rep.max_deviation, std::fabs(delta - rep.delta_initial));
        if (zero || std::fabs(delta) < fit_floor * std::fabs(rep.delta_initial)) continue;
        if (delta * rep.delta_initial < 0.0) sign_change = true;
        const double x = rows[i].t;
        const double y = std::log(std::fabs(delta));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++rep.samples;
    }
    const double cnt = static_cast<double>(rep.samples);
    if (params.delta0 == 0.0 || zero || sign_change || rep.samples < 2) {
        rep.conserved = true;
        return rep;
    }
    rep.rate = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    return rep;
}

struct FrequencyEstimate {
    double omega = 0.0;  // rad/day in physical time
    double period = 0.0;
    std::size_t crossings = 0;
};

/// Angular frequency from upward zero crossings of P - mean(P) over the last
/// half of the run (physical time).
[[nodiscard]] inline std::optional<FrequencyEstimate> measure_frequency(const Trajectory& traj) {
    const auto& rows = traj.rows;
    if (rows.size() <= traj.history_rows + 4) return std::nullopt;
    const double t_end = rows.back().t;
    const double t_mid = 0.5 * t_end;
    std::size_t first = traj.history_rows;
    while (first < rows.size() && rows[first].t < t_mid) ++first;
    double mean = 0.0;
    for (std::size_t i = first; i < rows.size(); ++i) mean += rows[i].p;
    mean /= static_cast<double>(rows.size() - first);
    std::vector<double> ups;
    for (std::size_t i = first + 1; i < rows.size(); ++i) {
        const double a = rows[i - 1].p - mean;
        const double b = rows[i].p - mean;
        if (a < 0.0 && b >= 0.0) ups.push_back(rows[i - 1].t + (rows[i].t - rows[i - 1].t) * (-a) / (b - a));
    }
    if (ups.size() < 3) return std::nullopt;
    FrequencyEstimate est;
    est.crossings = ups.size();
    est.period = (ups.back() - ups.front()) / static_cast<double>(ups.size() - 1);
    est.omega = 2.0 * std::numbers::pi / est.period;
    return est;
}

}  // namespace tde_plankton
