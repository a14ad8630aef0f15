#pragma once

// Named configurations for the standard runs. N_T ranges for the boundary
// traces are approximate.

#include "tde_plankton/app/config.hpp"

#include <array>
#include <optional>
#include <string_view>

namespace tde_plankton::app {

struct Preset {
    std::string_view name;
    std::string_view command;  // subcommand the preset is meant for
    std::string_view text;
};

inline constexpr std::array kPresets = {
    Preset{"fig1-left", "equilibria", R"(
model.response = mm
model.l = 0.159
model.delta0 = 0
run.m_values = 0, 5, 10, 15, 19.7
run.nt_min = 1e-4
run.nt_max = 1e2
run.nt_points = 200
)"},
    Preset{"fig1-right", "equilibria", R"(
model.response = mm
model.l = 0.159
model.delta0 = 0.17
run.m_values = 0, 5, 10, 15, 19.7
run.nt_min = 1e-4
run.nt_max = 1e2
run.nt_points = 200
)"},
    Preset{"fig2-left", "trace-boundary", R"(
model.response = constant
model.delta0 = 0
continuation.m_min = 0
continuation.m_max = 19.7
continuation.m_seeds = 3
continuation.nt_min = 1e-2
continuation.nt_max = 1e2
)"},
    Preset{"fig2-right", "trace-boundary", R"(
model.response = constant
model.delta0 = 0.17
continuation.m_min = 0
continuation.m_seeds = 4
continuation.nt_min = 1e-2
continuation.nt_max = 1e2
)"},
    Preset{"fig4-l0.01-d0", "trace-boundary", R"(
model.response = mm
model.l = 0.01
model.delta0 = 0
continuation.m_max = 19.7
continuation.m_seeds = 4
)"},
    Preset{"fig4-l0.01-dd", "trace-boundary", R"(
model.response = mm
model.l = 0.01
model.delta0 = 0.17
continuation.m_seeds = 4
)"},
    Preset{"fig4-l0.159-d0", "trace-boundary", R"(
model.response = mm
model.l = 0.159
model.delta0 = 0
continuation.m_max = 19.7
continuation.m_seeds = 4
)"},
    Preset{"fig4-l0.159-dd", "trace-boundary", R"(
model.response = mm
model.l = 0.159
model.delta0 = 0.17
continuation.m_seeds = 4
)"},
    Preset{"fig4-l1.00-d0", "trace-boundary", R"(
model.response = mm
model.l = 1.0
model.delta0 = 0
continuation.m_max = 19.7
continuation.m_seeds = 6
)"},
    Preset{"fig4-l1.00-dd", "trace-boundary", R"(
model.response = mm
model.l = 1.0
model.delta0 = 0.17
continuation.m_seeds = 6
)"},
    Preset{"fig6-stable", "simulate", R"(
model.response = mm
model.l = 0.159
model.delta0 = 0.17
model.m = 6
model.n_total = 10^0.49
run.history = equilibrium
run.eps_p = 1e-3
run.eps_z = 1e-3
run.horizon = 1500
run.record_every = 5
)"},
    Preset{"fig6-unstable", "simulate", R"(
model.response = mm
model.l = 0.159
model.delta0 = 0.17
model.m = 6
model.n_total = 10^0.51
run.history = equilibrium
run.eps_p = 1e-3
run.eps_z = 1e-3
run.horizon = 1500
run.record_every = 5
)"},
    Preset{"fig7", "simulate", R"(
model.response = mm
model.l = 0.159
model.delta0 = 0.17
model.m = 8
model.n_total = 10^0.73
run.history = equilibrium
run.eps_p = 1e-2
run.eps_z = 1e-2
run.horizon = 3000
run.record_every = 5
)"},
    // N_T = nt1 / 2 with the default parameters. A short maturity keeps the delay
    // grid fine enough to resolve the approach to P = 0.
    Preset{"extinction", "simulate", R"(
model.response = mm
model.l = 0.159
model.delta0 = 0.17
model.m = 0.1
model.n_total = 0.0014448410674825769
run.history = constant
run.p0 = 4e-4
run.z0 = 3e-4
run.steps_per_delay = 111000
run.horizon = 60
run.record_every = 200
)"},
    // N_T = (nt1 + nt2) / 2 at m = 6.
    Preset{"e1-attract", "simulate", R"(
model.response = mm
model.l = 0.159
model.delta0 = 0.17
model.m = 6
model.n_total = 0.12103296820697768
run.history = constant
run.p0 = 0.05
run.z0 = 0.02
run.horizon = 4000
run.record_every = 20
)"},
};

[[nodiscard]] inline std::optional<Preset> find_preset(std::string_view name) {
    for (const auto& p : kPresets)
        if (p.name == name) return p;
    return std::nullopt;
}

}  // namespace tde_plankton::app
