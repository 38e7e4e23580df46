#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "delayid/config.hpp"
#include "delayid/experiment.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace delayid;

namespace {

const fs::path kConfigs = DELAYID_CONFIG_DIR;
const std::string kCli = DELAYID_CLI;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("delayid_it_" + std::to_string(::getpid()) + "_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = "\"" + kCli + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST_CASE("every bundled config validates without warnings") {
    int count = 0;
    for (const auto& e : fs::directory_iterator(kConfigs)) {
        if (e.path().extension() != ".ini") continue;
        ++count;
        CAPTURE(e.path().string());
        std::vector<Diagnostic> diags;
        const auto cfg = Config::load(e.path().string(), diags);
        read_experiment(cfg, diags);
        for (const auto& d : diags) MESSAGE(d.str());
        CHECK(diags.empty());
    }
    CHECK(count >= 9);
}

TEST_CASE("logistic_table1 output is byte-identical across runs") {
    std::vector<Diagnostic> warnings;
    const auto cfg = load_experiment((kConfigs / "logistic_table1.ini").string(), warnings);
    const fs::path a = scratch("a"), b = scratch("b");
    std::ostringstream log;
    const auto tables = run_experiment(Command::fit, cfg, a, log);
    run_experiment(Command::fit, cfg, b, log);
    REQUIRE(tables.count("table1"));
    CHECK(tables.at("table1").size() == 4);
    int files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        ++files;
        CAPTURE(e.path().filename().string());
        REQUIRE(fs::exists(b / e.path().filename()));
        CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
    }
    CHECK(files > 3);
    const std::string table = slurp(a / "table_table1.csv");
    CHECK(table.rfind("sampling,regression,RMSE_dx_train,RMSE_dx,RMSE_x\n", 0) == 0);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("simulate writes trajectories that read back") {
    std::vector<Diagnostic> warnings;
    const auto cfg = load_experiment((kConfigs / "logistic_table1.ini").string(), warnings);
    const fs::path out = scratch("sim");
    std::ostringstream log;
    run_experiment(Command::simulate, cfg, out, log);
    int n = 0;
    for (const auto& e : fs::directory_iterator(out)) {
        if (e.path().filename().string().rfind("trajectory_", 0) != 0) continue;
        ++n;
        std::ifstream in(e.path());
        const auto tr = read_trajectory_csv(in);
        CHECK(tr.size() > 0);
    }
    CHECK(n >= 2);
    fs::remove_all(out);
}

TEST_CASE("CLI exit codes") {
    const fs::path dir = scratch("cli");
    CHECK(run_cli("validate --config \"" + (kConfigs / "mg_table3.ini").string() + "\"") == 0);
    CHECK(run_cli("list") == 0);
    CHECK(run_cli("") == 2);
    CHECK(run_cli("fit --config /nonexistent.ini") == 2);
    CHECK(run_cli("fit --config \"" + (kConfigs / "logistic_table1.ini").string() + "\" --threads 0") == 2);

    write(dir / "bad.ini", "[experiment]\ncommand = fit\n[model]\nid = lorenz\n");
    CHECK(run_cli("validate --config \"" + (dir / "bad.ini").string() + "\"") == 2);
    CHECK(run_cli("fit --config \"" + (dir / "bad.ini").string() + "\"") == 2);

    // A config for another command.
    CHECK(run_cli("train-ndde --config \"" + (kConfigs / "logistic_table1.ini").string() + "\" --out \"" +
                  (dir / "x").string() + "\"") == 2);

    // Negative history makes the logistic solution blow up.
    write(dir / "div.ini", "[experiment]\ncommand = simulate\n[model]\nid = logistic\n[history]\nvalue = -5\n");
    CHECK(run_cli("simulate --config \"" + (dir / "div.ini").string() + "\" --out \"" + (dir / "o").string() + "\"") ==
          3);

    CHECK(run_cli("fit --config \"" + (kConfigs / "logistic_table1.ini").string() + "\" --out \"" +
                  (dir / "ok").string() + "\"") == 0);
    CHECK(fs::exists(dir / "ok" / "table_table1.csv"));
    fs::remove_all(dir);
}
