#include "tde_plankton/app/commands.hpp"
#include "tde_plankton/app/presets.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace tde_plankton;
using namespace tde_plankton::app;

struct Inputs {
    std::string config;
    std::string out = "out";
    std::string preset;
    std::vector<std::string> sets;
};

void add_inputs(CLI::App* cmd, Inputs& in) {
    cmd->add_option("--config", in.config, "key = value config file");
    cmd->add_option("--out", in.out, "output directory")->capture_default_str();
    cmd->add_option("--preset", in.preset, "named preset (see `presets`)");
    cmd->add_option("--set", in.sets, "override, key=value (repeatable)")->take_all();
}

// Layering: defaults, then preset, then config file, then --set flags.
RunConfig assemble(const Inputs& in) {
    RunConfig cfg;
    if (!in.preset.empty()) {
        const auto preset = find_preset(in.preset);
        if (!preset) throw Error(ErrorKind::Config, "unknown preset '" + in.preset + "'");
        apply_text(cfg, std::string(preset->text), "preset " + in.preset);
    }
    if (!in.config.empty()) apply_file(cfg, in.config);
    for (const auto& s : in.sets) apply_assignment(cfg, s);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Threshold-delay NPZ plankton model: equilibria, stability boundaries, simulation"};
    app.require_subcommand(1);

    Inputs in;
    auto* eq = app.add_subcommand("equilibria", "equilibrium sweeps over N_T");
    auto* trace = app.add_subcommand("trace-boundary", "trace zero-real-part curves in (m, N_T)");
    auto* sim = app.add_subcommand("simulate", "integrate the delay system");
    auto* check = app.add_subcommand("check", "run the invariant suite");
    auto* list = app.add_subcommand("presets", "list named presets");
    for (auto* cmd : {eq, trace, sim, check}) add_inputs(cmd, in);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    if (list->parsed()) {
        for (const auto& p : kPresets) std::cout << p.name << "\t" << p.command << '\n';
        return kExitOk;
    }

    try {
        const RunConfig cfg = assemble(in);
        if (eq->parsed()) return cmd_equilibria(cfg, in.out, std::cerr);
        if (trace->parsed()) return cmd_trace_boundary(cfg, in.out, std::cerr);
        if (sim->parsed()) return cmd_simulate(cfg, in.out, std::cerr);
        if (check->parsed()) return cmd_check(cfg, in.out, std::cout, std::cerr);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitRuntime;
}
