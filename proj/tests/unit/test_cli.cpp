#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "builders.hpp"
#include "nmassvs/analysis.hpp"
#include "nmassvs/cli.hpp"
#include "nmassvs/config.hpp"
#include "nmassvs/errors.hpp"
#include "nmassvs/report.hpp"

using namespace nmassvs;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("nmassvs-test-" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name) << text;
        return path / name;
    }
};

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

const char* kTriangle =
    "study,t1,t2,y,se\n"
    "ab1,A,B,0.35,0.2\nab2,A,B,0.26,0.2\nac1,A,C,0.55,0.2\n"
    "ac2,A,C,0.63,0.2\nbc1,B,C,0.84,0.2\nbc2,B,C,0.75,0.2\n";

const char* kTree = "study,t1,t2,y,se\ns1,A,B,0.2,0.3\ns2,A,C,0.1,0.3\ns3,C,D,-0.3,0.25\n";

} // namespace

TEST_CASE("configuration round-trips through JSON") {
    AnalysisConfig c;
    c.data = "d.csv";
    c.arms = "a.csv";
    c.method = PlacementMethod::Jackson;
    c.correlation = CorrelationMode::Zellner;
    c.g = 12.0;
    c.consistency = ConsistencyPrior::beta_prior(157, 44);
    c.omega = 0.3;
    c.c = 20.0;
    c.mcmc.seed = 77;
    c.mcmc.fixed_tau = 0.1;
    c.mcmc.tau_prior = TauPrior::uniform(4);
    const auto once = to_json(c);
    const auto twice = to_json(config_from_json(nlohmann::json::parse(once.dump())));
    CHECK(once == twice);
    CHECK_THROWS(config_from_json(nlohmann::json::parse(R"({"no_such_key": 1})")));
}

TEST_CASE("config file values are overridden by flags") {
    TempDir dir;
    const auto cfg = dir.write("c.json", R"({"c": 5.0, "omega": 0.3, "mcmc": {"seed": 4}})");
    const auto r = cli({"analyze", "--config", cfg.string(), "--omega", "0.4", "--print-config"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["c"] == 5.0);
    CHECK(j["omega"] == 0.4);
}

TEST_CASE("exit codes") {
    TempDir dir;
    const auto tri = dir.write("tri.csv", kTriangle);
    CHECK(cli({"analyze", "--data", (dir.path / "missing.csv").string()}).code == kExitValidation);
    CHECK(cli({"analyze", "--data", tri.string(), "--method", "nope"}).code == kExitValidation);
    CHECK(cli({"analyze", "--data", tri.string(), "--c", "0.5", "--out", (dir.path / "o").string()}).code ==
          kExitValidation);
    CHECK(cli({"analyze", "--data", tri.string(), "--pi-cons", "0.5", "--pi-cons-beta", "1", "1"}).code ==
          kExitValidation);
    const auto bad = dir.write("bad.csv", "study,t1,t2,y,se\ns1,A,B,0.1,-1\ns2,A,A,0.1,0.2\n");
    const auto r = cli({"structure", "--data", bad.string()});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("line 2") != std::string::npos);
    CHECK(r.err.find("line 3") != std::string::npos);
    CHECK(cli({}).code == kExitValidation);
    CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("loop-free networks are consistent by construction") {
    TempDir dir;
    const auto tree = dir.write("tree.csv", kTree);
    const auto out = dir.path / "out";
    const auto r = cli({"analyze", "--data", tree.string(), "--out", out.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("consistent by construction") != std::string::npos);
    const auto report = nlohmann::json::parse(slurp(out / "report.json"));
    CHECK(report["status"] == "consistent by construction");
    CHECK(report["p"] == 0);
}

TEST_CASE("structure prints Z") {
    TempDir dir;
    const auto tri = dir.write("tri.csv", kTriangle);
    const auto r = cli({"structure", "--data", tri.string(), "--method", "lu-ades"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("independent loops: 1") != std::string::npos);
    CHECK(r.out.find("factors: 1") != std::string::npos);
    CHECK(r.out.find("Z:") != std::string::npos);
}

TEST_CASE("oracle refuses large factor sets") {
    TempDir dir;
    std::string csv = "study,t1,t2,y,se\n";
    const std::string names = "ABCDEFG";
    int k = 0;
    for (std::size_t i = 0; i < names.size(); ++i)
        for (std::size_t j = i + 1; j < names.size(); ++j)
            csv += "s" + std::to_string(++k) + "," + names[i] + "," + names[j] + ",0.1,0.2\n";
    const auto k7 = dir.write("k7.csv", csv);
    const auto r = cli({"oracle", "--data", k7.string(), "--method", "dbt", "--iters", "200", "--burnin", "100"});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("p = 15") != std::string::npos);
}

TEST_CASE("oracle compares exact and sampled model probabilities") {
    TempDir dir;
    const auto tri = dir.write("tri.csv", kTriangle);
    const auto r = cli({"oracle", "--data", tri.string(), "--iters", "20000", "--burnin", "2000"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("model_id,factors,exact,mcmc,abs_diff") != std::string::npos);
}

TEST_CASE("analysis outputs are reproducible") {
    TempDir dir;
    const auto tri = dir.write("tri.csv", kTriangle);
    std::vector<std::string> reports;
    for (const char* name : {"a", "b"}) {
        const auto out = dir.path / name;
        const auto r = cli({"analyze", "--data", tri.string(), "--iters", "6000", "--burnin", "1000", "--seed", "5",
                            "--traces", "--out", out.string()});
        REQUIRE(r.code == 0);
        for (const char* f : {"report.json", "manifest.json", "pips.csv", "model_table.csv", "traces/chain-1.csv",
                              "traces/chain-2.csv"})
            CHECK(fs::exists(out / f));
        reports.push_back(slurp(out / "report.json"));
        const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
        CHECK(manifest["seed"] == 5);
        CHECK(manifest["chain_seeds"].size() == 2);
        CHECK(slurp(out / "pips.csv").rfind("factor,label,pip,mc_se\n", 0) == 0);
    }
    CHECK(reports[0] == reports[1]);
    const auto j = nlohmann::json::parse(reports[0]);
    double total = 0.0;
    for (const auto& m : j["model_table"]) total += m["probability"].get<double>();
    CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("library entry point runs in memory") {
    AnalysisConfig c;
    c.method = PlacementMethod::LuAdes;
    c.mcmc.iterations = 4000;
    c.mcmc.burn_in = 1000;
    const auto r = run_analysis(testing::triangle(0.8, 0.1), c);
    REQUIRE(r.report);
    CHECK(r.chains.size() == 2);
    CHECK(r.report->pips.size() == 1);
    CHECK(r.spike_slab.psi.size() == 1);
}
