#pragma once

// Flat `key = value` run configuration with sectioned keys (model.*, run.*,
// continuation.*, check.*). Every key can be parsed, overridden and emitted
// back, so a written config reproduces the run that produced it.

#include "tde_plankton/errors.hpp"
#include "tde_plankton/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace tde_plankton::app {

enum class HistoryKind { Equilibrium, Constant };
enum class CrossingKind { Rightmost, Count };

struct RunConfig {
    ModelParams model = ModelParams::table1();

    // equilibria sweeps
    std::vector<double> m_values;       // empty: model.m
    std::vector<double> delta0_values;  // empty: model.delta0
    double nt_min = 1e-4;
    double nt_max = 1e2;
    int nt_points = 200;

    // simulation
    HistoryKind history = HistoryKind::Equilibrium;
    double eps_p = 1e-3;
    double eps_z = 1e-3;
    double p0 = 0.1;
    double z0 = 0.1;
    double n_offset = 0.0;
    int steps_per_delay = 200;
    std::optional<double> dt_hat;  // overrides steps_per_delay
    double horizon = 1000.0;       // transformed time
    int record_every = 1;
    std::vector<double> rho_times;
    int rho_points = 1000;

    // continuation
    double cont_m_min = 0.0;
    std::optional<double> cont_m_max;  // default: maturity ceiling (20 when delta0 = 0)
    int m_seeds = 4;
    double cont_nt_min = 1e-2;
    double cont_nt_max = 1e2;
    int bracket_points = 48;
    CrossingKind criterion = CrossingKind::Count;
    double h_init = 1e-2;
    double h_min = 1e-6;
    double h_max = 1e-1;
    double tol = 1e-9;
    int max_steps = 4000;
    double dedupe_tol = 0.02;

    bool inject_a2_sign_error = false;
};

namespace detail {

[[nodiscard]] inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[nodiscard]] inline Error config_error(const std::string& key, const std::string& what) {
    return Error(ErrorKind::Config, key + ": " + what);
}

/// Number, or `10^x` for decades.
[[nodiscard]] inline double parse_number(const std::string& key, const std::string& text) {
    std::string s = trim(text);
    bool decade = false;
    if (s.rfind("10^", 0) == 0) {
        decade = true;
        s = s.substr(3);
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw config_error(key, "expected a number, got '" + text + "'");
    }
    if (used != s.size() || !std::isfinite(v)) throw config_error(key, "expected a number, got '" + text + "'");
    return decade ? std::pow(10.0, v) : v;
}

[[nodiscard]] inline int parse_int(const std::string& key, const std::string& text) {
    const double v = parse_number(key, text);
    if (v != std::floor(v) || std::fabs(v) > 1e9) throw config_error(key, "expected an integer, got '" + text + "'");
    return static_cast<int>(v);
}

[[nodiscard]] inline bool parse_bool(const std::string& key, const std::string& text) {
    const std::string s = trim(text);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw config_error(key, "expected true/false, got '" + text + "'");
}

[[nodiscard]] inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (trim(item).empty()) continue;
        out.push_back(parse_number(key, item));
    }
    return out;
}

[[nodiscard]] inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

[[nodiscard]] inline std::string fmt_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
    return out;
}

struct Field {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define TDE_NUM(key, member)                                                                    \
    {key, {[](RunConfig& c, const std::string& v) { c.member = parse_number(key, v); },        \
           [](const RunConfig& c) { return fmt(c.member); }}}
#define TDE_INT(key, member)                                                                    \
    {key, {[](RunConfig& c, const std::string& v) { c.member = parse_int(key, v); },           \
           [](const RunConfig& c) { return std::to_string(c.member); }}}
#define TDE_LIST(key, member)                                                                   \
    {key, {[](RunConfig& c, const std::string& v) { c.member = parse_list(key, v); },          \
           [](const RunConfig& c) { return fmt_list(c.member); }}}
#define TDE_AUTO(key, member)                                                                   \
    {key, {[](RunConfig& c, const std::string& v) {                                            \
               if (trim(v) == "auto") c.member.reset();                                         \
               else c.member = parse_number(key, v);                                            \
           },                                                                                   \
           [](const RunConfig& c) { return c.member ? fmt(*c.member) : std::string("auto"); }}}

[[nodiscard]] inline const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = {
        TDE_NUM("model.mu", model.mu),
        TDE_NUM("model.lambda", model.lambda),
        TDE_NUM("model.g", model.g),
        TDE_NUM("model.gamma", model.gamma),
        TDE_NUM("model.delta", model.delta),
        TDE_NUM("model.delta0", model.delta0),
        TDE_NUM("model.k", model.k),
        TDE_NUM("model.kk", model.kk),
        TDE_NUM("model.l", model.response.l),
        TDE_NUM("model.m", model.m),
        TDE_NUM("model.n_total", model.n_total),
        TDE_AUTO("model.r_star", model.r_star),
        {"model.response",
         {[](RunConfig& c, const std::string& v) {
              const std::string s = trim(v);
              if (s == "mm" || s == "michaelis-menten") c.model.response.variant = ResponseVariant::MichaelisMenten;
              else if (s == "constant") c.model.response.variant = ResponseVariant::Constant;
              else throw config_error("model.response", "expected mm or constant, got '" + v + "'");
          },
          [](const RunConfig& c) { return std::string(c.model.response.is_constant() ? "constant" : "mm"); }}},

        TDE_LIST("run.m_values", m_values),
        TDE_LIST("run.delta0_values", delta0_values),
        TDE_NUM("run.nt_min", nt_min),
        TDE_NUM("run.nt_max", nt_max),
        TDE_INT("run.nt_points", nt_points),
        {"run.history",
         {[](RunConfig& c, const std::string& v) {
              const std::string s = trim(v);
              if (s == "equilibrium") c.history = HistoryKind::Equilibrium;
              else if (s == "constant") c.history = HistoryKind::Constant;
              else throw config_error("run.history", "expected equilibrium or constant, got '" + v + "'");
          },
          [](const RunConfig& c) {
              return std::string(c.history == HistoryKind::Equilibrium ? "equilibrium" : "constant");
          }}},
        TDE_NUM("run.eps_p", eps_p),
        TDE_NUM("run.eps_z", eps_z),
        TDE_NUM("run.p0", p0),
        TDE_NUM("run.z0", z0),
        TDE_NUM("run.n_offset", n_offset),
        TDE_INT("run.steps_per_delay", steps_per_delay),
        TDE_AUTO("run.dt_hat", dt_hat),
        TDE_NUM("run.horizon", horizon),
        TDE_INT("run.record_every", record_every),
        TDE_LIST("run.rho_times", rho_times),
        TDE_INT("run.rho_points", rho_points),

        TDE_NUM("continuation.m_min", cont_m_min),
        TDE_AUTO("continuation.m_max", cont_m_max),
        TDE_INT("continuation.m_seeds", m_seeds),
        TDE_NUM("continuation.nt_min", cont_nt_min),
        TDE_NUM("continuation.nt_max", cont_nt_max),
        TDE_INT("continuation.bracket_points", bracket_points),
        {"continuation.criterion",
         {[](RunConfig& c, const std::string& v) {
              const std::string s = trim(v);
              if (s == "rightmost") c.criterion = CrossingKind::Rightmost;
              else if (s == "count") c.criterion = CrossingKind::Count;
              else throw config_error("continuation.criterion", "expected rightmost or count, got '" + v + "'");
          },
          [](const RunConfig& c) { return std::string(c.criterion == CrossingKind::Count ? "count" : "rightmost"); }}},
        TDE_NUM("continuation.h_init", h_init),
        TDE_NUM("continuation.h_min", h_min),
        TDE_NUM("continuation.h_max", h_max),
        TDE_NUM("continuation.tol", tol),
        TDE_INT("continuation.max_steps", max_steps),
        TDE_NUM("continuation.dedupe_tol", dedupe_tol),

        {"check.inject_a2_sign_error",
         {[](RunConfig& c, const std::string& v) { c.inject_a2_sign_error = parse_bool("check.inject_a2_sign_error", v); },
          [](const RunConfig& c) { return std::string(c.inject_a2_sign_error ? "true" : "false"); }}},
    };
    return table;
}

#undef TDE_NUM
#undef TDE_INT
#undef TDE_LIST
#undef TDE_AUTO

}  // namespace detail

/// Applies one `key = value` assignment; unknown keys are rejected.
inline void apply(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto& table = detail::fields();
    const auto it = table.find(detail::trim(key));
    if (it == table.end()) throw detail::config_error(key, "unknown key");
    it->second.set(cfg, value);
}

/// Applies `key=value` (the --set form).
inline void apply_assignment(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw detail::config_error(assignment, "expected key=value");
    apply(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

/// Parses config text on top of `cfg`. `#` starts a comment.
inline void apply_text(RunConfig& cfg, const std::string& text, const std::string& origin = "config") {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorKind::Config, origin + ":" + std::to_string(lineno) + ": expected key = value");
        apply(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
}

inline void apply_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    apply_text(cfg, ss.str(), path);
}

/// Full config text with every key, in key order.
[[nodiscard]] inline std::string to_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& [key, field] : detail::fields()) out += key + " = " + field.get(cfg) + "\n";
    return out;
}

[[nodiscard]] inline std::map<std::string, std::string> to_map(const RunConfig& cfg) {
    std::map<std::string, std::string> out;
    for (const auto& [key, field] : detail::fields()) out[key] = field.get(cfg);
    return out;
}

/// Checks the model invariants and the run options.
inline void validate(const RunConfig& cfg) {
    try {
        tde_plankton::validate(cfg.model);
        for (double d0 : cfg.delta0_values) {
            ModelParams p = cfg.model;
            p.delta0 = d0;
            tde_plankton::validate(p);
        }
        for (double m : cfg.m_values)
            if (!(m >= 0.0)) throw Error(ErrorKind::InvalidParams, "run.m_values must be >= 0");
    } catch (const Error& e) {
        throw Error(ErrorKind::Config, e.what());
    }
    const auto require = [](bool ok, const char* what) {
        if (!ok) throw Error(ErrorKind::Config, what);
    };
    require(cfg.nt_min > 0.0 && cfg.nt_max >= cfg.nt_min, "run.nt_min/nt_max must satisfy 0 < min <= max");
    require(cfg.nt_points >= 0, "run.nt_points must be >= 0");
    require(cfg.steps_per_delay >= 1, "run.steps_per_delay must be >= 1");
    require(!cfg.dt_hat || *cfg.dt_hat > 0.0, "run.dt_hat must be positive");
    require(cfg.horizon > 0.0, "run.horizon must be positive");
    require(cfg.record_every >= 1, "run.record_every must be >= 1");
    require(cfg.rho_points >= 2, "run.rho_points must be >= 2");
    require(cfg.cont_nt_min > 0.0 && cfg.cont_nt_max > cfg.cont_nt_min, "continuation.nt_min/nt_max invalid");
    require(cfg.m_seeds >= 1, "continuation.m_seeds must be >= 1");
    require(cfg.bracket_points >= 2, "continuation.bracket_points must be >= 2");
    require(cfg.h_min > 0.0 && cfg.h_min <= cfg.h_init && cfg.h_init <= cfg.h_max,
            "continuation step sizes need 0 < h_min <= h_init <= h_max");
    require(cfg.tol > 0.0, "continuation.tol must be positive");
    require(cfg.max_steps >= 1, "continuation.max_steps must be >= 1");
    require(cfg.cont_m_min >= 0.0, "continuation.m_min must be >= 0");
}

}  // namespace tde_plankton::app
