#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "commands.hpp"
#include "sbrel/dataio.hpp"

using namespace sbrel;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("sbrel_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

// A small campaign with a few detections, written once per test directory.
std::string small_campaign(const TempDir& dir) {
  const auto r = invoke({"simulate", "--missions", "4", "--phases", "3", "--true-bugs", "20", "--max-bugs", "60",
                      "--seed", "3", "--out", dir.path.string()});
  REQUIRE(r.code == 0);
  return dir / "campaign.csv";
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(invoke({}).code == cli::kFailure);
  CHECK(invoke({"frobnicate"}).code == cli::kFailure);
  CHECK(invoke({"fit"}).code == cli::kFailure);  // --campaign is required
  CHECK(invoke({"fit", "--campaign", "x.csv", "--no-such-flag"}).code == cli::kFailure);
  CHECK(invoke({"simulate", "--missions", "many"}).code == cli::kFailure);
  CHECK(invoke({"--help"}).code == cli::kOk);
}

TEST_CASE("simulate") {
  TempDir dir;
  SUBCASE("defaults follow the simulation protocol") {
    const auto r = invoke({"simulate", "--out", dir.path.string()});
    REQUIRE(r.code == 0);
    const auto c = read_campaign(dir / "campaign.csv");
    CHECK(c.missions == 30);
    CHECK(c.phases == 8);
    const auto t = read_truth(dir / "truth.csv");
    CHECK(t.real.size() == 400);
    CHECK(t.real_count() == 100);
    CHECK(t.detected_count() == c.detected());
    CHECK(contains(r.out, "100 real bugs"));
  }
  SUBCASE("no real bugs") {
    REQUIRE(invoke({"simulate", "--true-bugs", "0", "--out", dir.path.string()}).code == 0);
    CHECK(read_campaign(dir / "campaign.csv").detected() == 0);
  }
  SUBCASE("same seed, identical files") {
    REQUIRE(invoke({"simulate", "--seed", "5", "--out", dir / "a"}).code == 0);
    REQUIRE(invoke({"simulate", "--seed", "5", "--out", dir / "b"}).code == 0);
    REQUIRE(invoke({"simulate", "--seed", "6", "--out", dir / "c"}).code == 0);
    CHECK(slurp(dir / "a/campaign.csv") == slurp(dir / "b/campaign.csv"));
    CHECK(slurp(dir / "a/truth.csv") == slurp(dir / "b/truth.csv"));
    CHECK(slurp(dir / "a/truth.csv") != slurp(dir / "c/truth.csv"));
  }
  SUBCASE("invalid combinations") {
    auto r = invoke({"simulate", "--true-bugs", "500", "--out", dir.path.string()});
    CHECK(r.code == cli::kFailure);
    CHECK(contains(r.err, "error:"));
    CHECK(invoke({"simulate", "--t-min", "9", "--t-max", "3", "--out", dir.path.string()}).code == cli::kFailure);
    CHECK(invoke({"simulate", "--layout", "diagonal", "--out", dir.path.string()}).code == cli::kFailure);
  }
  SUBCASE("output directory from the environment") {
    ::setenv("SBREL_OUT_DIR", (dir / "env").c_str(), 1);
    const auto r = invoke({"simulate", "--missions", "2", "--phases", "2"});
    ::unsetenv("SBREL_OUT_DIR");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "env/campaign.csv"));
  }
}

TEST_CASE("fit") {
  TempDir dir;
  const auto campaign = small_campaign(dir);

  SUBCASE("smoke run") {
    const auto start = std::chrono::steady_clock::now();
    const auto r = invoke({"fit", "--campaign", campaign, "--max-bugs", "60", "--iters", "100", "--out", dir / "fit"});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    REQUIRE(r.code == 0);
    CHECK(secs < 5.0);
    CHECK(contains(r.out, "total bugs N mean"));
    CHECK(contains(r.out, "95% CI"));
    CHECK(contains(r.out, "psi mean"));
    CHECK(contains(r.out, "worst R-hat"));
    const auto draws = read_draws(dir / "fit/draws.csv");
    CHECK(draws.chains.size() == 3);
    CHECK(draws.chains[0].draws() == 50);
    CHECK(draws.metadata.at("sampler.iterations") == "100");
    CHECK(draws.metadata.at("model.max_bugs") == "60");
    CHECK(draws.has_parameter("S[60]"));
    CHECK(fs::exists(dir / "fit/report.json"));
    CHECK_FALSE(fs::exists(dir / "fit/draws.csv.state.csv"));
  }
  SUBCASE("tracking, thinning, burn-in and full state") {
    const auto r = invoke({"fit", "--campaign", campaign, "--max-bugs", "60", "--iters", "120", "--burn-in", "20",
                        "--thin", "10", "--chains", "2", "--track", "2,7", "--full-state", "--out", dir / "fit"});
    REQUIRE(r.code == 0);
    const auto draws = read_draws(dir / "fit/draws.csv", true);
    CHECK(draws.parameters ==
          std::vector<std::string>{"psi", "N", "R", "z[2]", "S[2]", "lambda[2]", "z[7]", "S[7]", "lambda[7]"});
    CHECK(draws.chains[1].draws() == 10);
    CHECK(draws.chains[1].full_states.size() == 10);
    CHECK(draws.chains[1].full_states[0].candidates() == 60);
  }
  SUBCASE("refusals") {
    auto r = invoke({"fit", "--campaign", campaign, "--max-bugs", "2", "--iters", "10"});
    CHECK(r.code == cli::kFailure);
    CHECK(contains(r.err, "candidate ceiling below detected count"));
    r = invoke({"fit", "--campaign", dir / "missing.csv", "--iters", "10"});
    CHECK(r.code == cli::kFailure);
    CHECK(contains(r.err, "cannot read"));
    CHECK(invoke({"fit", "--campaign", campaign, "--iters", "10", "--burn-in", "10"}).code == cli::kFailure);
    CHECK(invoke({"fit", "--campaign", campaign, "--iters", "10", "--epsilon", "5,1"}).code == cli::kFailure);
  }
  SUBCASE("convergence warnings are soft unless strict") {
    const std::vector<std::string> base{"fit", "--campaign", campaign, "--max-bugs", "60", "--iters", "40",
                                        "--rhat-warn", "0.5", "--out", dir / "w"};
    const auto soft = invoke(base);
    CHECK(soft.code == cli::kOk);
    CHECK(contains(soft.err, "warning: R-hat"));
    auto strict_args = base;
    strict_args.push_back("--strict");
    CHECK(invoke(strict_args).code == cli::kConvergenceWarning);
  }
  SUBCASE("bit-reproducible with a seed, regardless of threads") {
    REQUIRE(invoke({"fit", "--campaign", campaign, "--max-bugs", "60", "--iters", "200", "--seed", "9", "--out",
                 dir / "a"}).code == 0);
    REQUIRE(invoke({"fit", "--campaign", campaign, "--max-bugs", "60", "--iters", "200", "--seed", "9", "--threads",
                 "3", "--out", dir / "b"}).code == 0);
    CHECK(slurp(dir / "a/draws.csv") == slurp(dir / "b/draws.csv"));
    CHECK(slurp(dir / "a/report.json") == slurp(dir / "b/report.json"));
  }
}

TEST_CASE("reliability, diagnose and report on fitted draws") {
  TempDir dir;
  const auto campaign = small_campaign(dir);
  REQUIRE(invoke({"fit", "--campaign", campaign, "--max-bugs", "60", "--iters", "400", "--out", dir / "fit"}).code == 0);
  const auto draws = dir / "fit/draws.csv";

  SUBCASE("reliability curve") {
    auto r = invoke({"reliability", "--draws", draws, "--epsilon", "50,100,1e9", "--out", dir / "curve.csv"});
    REQUIRE(r.code == 0);
    CHECK(contains(r.out, "epsilon    reliability"));
    const auto text = slurp(dir / "curve.csv");
    CHECK(text.rfind("epsilon,reliability\n50,", 0) == 0);
    CHECK(contains(text, "\n1e+09,1\n"));
    r = invoke({"reliability", "--draws", draws, "--epsilon", "100", "--out", dir / "one.csv"});
    REQUIRE(r.code == 0);
    const auto one = slurp(dir / "one.csv");
    CHECK(std::count(one.begin(), one.end(), '\n') == 2);
    CHECK(invoke({"reliability", "--draws", draws, "--epsilon", "200,100"}).code == cli::kFailure);
  }
  SUBCASE("diagnose") {
    auto r = invoke({"diagnose", "--draws", draws, "--params", "N,psi,S[1]", "--out", dir / "diag"});
    REQUIRE(r.code == 0);
    CHECK(contains(r.out, "R-hat"));
    CHECK(fs::exists(dir / "diag/diagnostics.json"));
    CHECK(fs::exists(dir / "diag/trace_S_1.csv"));
    CHECK(read_trace(dir / "diag/trace_N.csv").size() == 600);
    r = invoke({"diagnose", "--draws", draws, "--params", "theta"});
    CHECK(r.code == cli::kFailure);
    CHECK(contains(r.err, "available: psi, N, R"));

    REQUIRE(invoke({"fit", "--campaign", campaign, "--max-bugs", "60", "--iters", "40", "--chains", "1", "--out",
                 dir / "one"}).code == 0);
    r = invoke({"diagnose", "--draws", dir / "one/draws.csv", "--out", dir / "one"});
    CHECK(r.code == cli::kFailure);
    CHECK(contains(r.err, "need >= 2 chains"));
  }
  SUBCASE("report") {
    const auto r = invoke({"report", "--draws", draws, "--params", "N", "--epsilon", "100", "--out", dir / "r.json"});
    REQUIRE(r.code == 0);
    const auto text = slurp(dir / "r.json");
    CHECK(contains(text, "\"schema\": \"sbrel-report/1\""));
    CHECK(contains(text, "\"name\": \"N\""));
    CHECK_FALSE(contains(text, "\"name\": \"psi\""));
    CHECK(invoke({"report", "--draws", dir / "nope.csv"}).code == cli::kFailure);
  }
}
