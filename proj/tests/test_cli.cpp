#include <catch_amalgamated.hpp>
#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path& scratch() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("tde_cli_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

struct Run {
    int code;
    std::string log;
};

Run cli(const std::string& args, const std::string& tag) {
    const fs::path log = scratch() / (tag + ".log");
    const std::string cmd = std::string(TDE_PLANKTON_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string out(const std::string& tag) { return (scratch() / tag).string(); }

}  // namespace

TEST_CASE("equilibria preset writes one table per maturity", "[cli]") {
    const Run r = cli("equilibria --preset fig1-left --out " + out("fig1"), "fig1");
    REQUIRE(r.code == 0);
    int tables = 0;
    for (const auto& e : fs::directory_iterator(out("fig1")))
        if (e.path().extension() == ".csv") ++tables;
    CHECK(tables == 5);
    CHECK(fs::exists(scratch() / "fig1" / "equilibria.meta.json"));
    CHECK(fs::exists(scratch() / "fig1" / "run.cfg"));
}

TEST_CASE("equilibria output is deterministic and config round-trips", "[cli]") {
    REQUIRE(cli("equilibria --set model.m=6 --set run.nt_points=40 --out " + out("a"), "a").code == 0);
    REQUIRE(cli("equilibria --set model.m=6 --set run.nt_points=40 --out " + out("b"), "b").code == 0);
    fs::path table;
    for (const auto& e : fs::directory_iterator(out("a")))
        if (e.path().extension() == ".csv") table = e.path().filename();
    REQUIRE_FALSE(table.empty());
    const std::string first = slurp(scratch() / "a" / table);
    CHECK(first == slurp(scratch() / "b" / table));

    const std::string cfg = (scratch() / "a" / "run.cfg").string();
    REQUIRE(cli("equilibria --config " + cfg + " --out " + out("c"), "c").code == 0);
    CHECK(first == slurp(scratch() / "c" / table));
}

TEST_CASE("empty grid gives a header-only table", "[cli]") {
    REQUIRE(cli("equilibria --set run.nt_points=0 --out " + out("empty"), "empty").code == 0);
    for (const auto& e : fs::directory_iterator(out("empty"))) {
        if (e.path().extension() != ".csv") continue;
        const std::string text = slurp(e.path());
        CHECK(std::count(text.begin(), text.end(), '\n') == 1);
    }
}

TEST_CASE("invalid configuration exits with code 2", "[cli]") {
    CHECK(cli("equilibria --set model.lambda=6 --out " + out("bad1"), "bad1").code == 2);
    CHECK(cli("equilibria --set model.no_such_key=1 --out " + out("bad2"), "bad2").code == 2);
    CHECK(cli("equilibria --preset no-such-preset --out " + out("bad3"), "bad3").code == 2);
    CHECK(cli("equilibria --bogus-flag", "bad4").code == 2);
    CHECK(cli("equilibria --config /nonexistent/file.cfg", "bad5").code == 2);
}

TEST_CASE("check suite passes and catches an injected sign error", "[cli]") {
    const Run ok = cli("check --out " + out("check"), "check");
    CHECK(ok.code == 0);
    const Run bad = cli("check --set check.inject_a2_sign_error=true --out " + out("check_bad"), "check_bad");
    CHECK(bad.code == 3);
    CHECK(bad.log.find("e1_factorization") != std::string::npos);
}

TEST_CASE("periodicity check is skipped under juvenile mortality", "[cli]") {
    const Run r = cli("check --preset fig1-right --out " + out("check_dd"), "check_dd");
    CHECK(r.code == 0);
    CHECK(r.log.find("periodicity_in_m") != std::string::npos);
    CHECK(r.log.find("skip") != std::string::npos);
}

TEST_CASE("trace-boundary writes curves and warns when m_max is clipped", "[cli]") {
    const Run r = cli("trace-boundary --set model.delta0=0.17 --set continuation.m_seeds=1 "
                      "--set continuation.m_max=25 --out " + out("trace"),
                      "trace");
    REQUIRE(r.code == 0);
    CHECK(r.log.find("warning") != std::string::npos);
    const json meta = json::parse(slurp(scratch() / "trace" / "curves.meta.json"));
    CHECK(meta["m_max"].get<double>() < 19.8);
    CHECK(meta["curves"].size() >= 1);
    const std::string csv = slurp(scratch() / "trace" / "curves.csv");
    CHECK(csv.rfind("curve_id,point_index,m,n_total,omega", 0) == 0);
}

TEST_CASE("simulate reports extinction below the first threshold", "[cli]") {
    const Run r = cli("simulate --preset extinction --out " + out("ext"), "ext");
    REQUIRE(r.code == 0);
    const json meta = json::parse(slurp(scratch() / "ext" / "trajectory.meta.json"));
    CHECK(meta["termination"] == "Extinction");
    const double nt = meta["params"]["n_total"].get<double>();
    CHECK(std::abs(meta["diagnostics"]["final"]["n"].get<double>() - nt) <= 1e-6 * nt);
    CHECK(fs::exists(scratch() / "ext" / "trajectory.csv"));
}

TEST_CASE("history heavier than N_T exits with code 4", "[cli]") {
    const Run r = cli("simulate --set model.m=2 --set model.n_total=1 --set run.history=constant --set run.p0=5 "
                      "--set run.z0=1 --out " + out("heavy"),
                      "heavy");
    CHECK(r.code == 4);
    const json meta = json::parse(slurp(scratch() / "heavy" / "trajectory.meta.json"));
    CHECK(meta["termination"] == "InfeasibleBiomass");
}

TEST_CASE("presets are listed", "[cli]") {
    const Run r = cli("presets", "presets");
    CHECK(r.code == 0);
    for (const char* name : {"fig1-left", "fig6-unstable", "fig7", "extinction", "e1-attract"})
        CHECK(r.log.find(name) != std::string::npos);
}
