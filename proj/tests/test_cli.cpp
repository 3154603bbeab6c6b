// End-to-end checks of the command-line binary: each case shells out to the
// executable named by the RECFG_CLI environment variable (set by the test
// runner) and inspects exit codes and emitted files.
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("RECFG_CLI");
    REQUIRE_MESSAGE(p != nullptr, "RECFG_CLI must point at the command-line binary");
    return p;
}

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs the binary with the given arguments, capturing exit code and both
// streams through temporary files.
RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    const fs::path dir = fs::temp_directory_path() / ("recfg_cli_io_" + std::to_string(counter++));
    fs::create_directories(dir);
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = env_prefix + cli_path() + " " + args + " >" + out.string() + " 2>" +
                            err.string();
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("recfg_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("verify subcommand runs the whole suite and exits zero") {
    const auto dir = fresh_dir("verify");
    const auto r = run_cli("verify --out " + dir.string());
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("checks passed") != std::string::npos);
    CHECK(fs::exists(dir / "verify" / "report.csv"));
}

TEST_CASE("limit rows carry the exact integer mean coefficients") {
    const auto dir = fresh_dir("shift");
    const auto r = run_cli("shift-analyze --out " + dir.string());
    REQUIRE(r.exit_code == 0);
    const std::string csv = slurp(dir / "shift-analyze" / "shift_reports.csv");
    CHECK(csv.rfind("gamma1,gamma0,T,mean_coeff,variance,source", 0) == 0);
    // Long-horizon rows for the two odd integer weights are exact.
    CHECK(csv.find("\n1,0,inf,1,1,closed-form") != std::string::npos);
    CHECK(csv.find("\n3,-2,inf,2,0.25,closed-form") != std::string::npos);
}

TEST_CASE("prediction-cache gaps abort with a structured error report") {
    const auto dir = fresh_dir("gap");
    const fs::path cache = dir / "cache.csv";
    {
        std::ofstream f(cache);
        f << "cond_id,t_index,dim,sum_cond,sum_uncond,count\n";
        f << "1,0,0,10.0,20.0,100\n";  // t_index 1 is never covered
    }
    const auto r = run_cli("build-table --set T=3 --set nfe=2 --set cache_path=\"" +
                           cache.string() + "\" --out " + dir.string());
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("incomplete") != std::string::npos);
    const std::string report = slurp(dir / "error.json");
    CHECK(report.find("\"error_kind\": \"incomplete\"") != std::string::npos);
    CHECK(report.find("\"exit_code\": 1") != std::string::npos);
}

TEST_CASE("table builds rerun byte-identically") {
    const auto da = fresh_dir("rerun_a");
    const auto db = fresh_dir("rerun_b");
    const std::string args = "build-table --set T=3 --set nfe=8 --set n_per_condition=2000";
    REQUIRE(run_cli(args + " --out " + da.string()).exit_code == 0);
    REQUIRE(run_cli(args + " --out " + db.string()).exit_code == 0);
    const std::string a = slurp(da / "build-table" / "table.json");
    const std::string b = slurp(db / "build-table" / "table.json");
    REQUIRE(!a.empty());
    CHECK(a == b);
    CHECK(slurp(da / "build-table" / "heatmap.csv") == slurp(db / "build-table" / "heatmap.csv"));
}

TEST_CASE("command-line overrides beat config-file values") {
    const auto dir = fresh_dir("prec");
    const fs::path config = dir / "config.json";
    {
        std::ofstream f(config);
        f << "{\"gamma_grid\": [1.0]}\n";
    }
    const auto r = run_cli("shift-analyze --config " + config.string() +
                           " --set gamma_grid=[3.0] --out " + dir.string());
    REQUIRE(r.exit_code == 0);
    const std::string csv = slurp(dir / "shift-analyze" / "shift_reports.csv");
    CHECK(csv.find("\n3,") != std::string::npos);   // override took effect
    CHECK(csv.find("\n1,") == std::string::npos);   // file value was superseded
}

TEST_CASE("unknown configuration keys are rejected by name") {
    const auto dir = fresh_dir("badkey");
    const auto r = run_cli("shift-analyze --set no_such=1 --out " + dir.string());
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("unknown config key 'no_such'") != std::string::npos);
}

TEST_CASE("the output root honors its environment variable") {
    const auto dir = fresh_dir("envroot");
    const auto r = run_cli("shift-analyze", "RECFG_OUT_ROOT=" + dir.string() + " ");
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(dir / "shift-analyze" / "shift_reports.csv"));
}
