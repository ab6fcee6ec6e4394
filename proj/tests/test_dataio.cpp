#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "sbrel/dataio.hpp"

using namespace sbrel;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("sbrel_dataio_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TestCampaign parse(const std::string& text) {
  std::istringstream in(text);
  return parse_campaign(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

ChainSet sample_set(std::size_t chains, std::size_t draws) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  ChainSet set;
  set.parameters = {"psi", "N", "R", "S[1]"};
  set.metadata = {{"model.nu", "1.5"}, {"campaign.detected", "61"}};
  for (std::size_t c = 0; c < chains; ++c) {
    ChainDraws d;
    d.seed = derive_seed(3, c);
    d.acceptance = {0.123456789, 0.987654321};
    d.values.resize(4);
    for (std::size_t i = 0; i < draws; ++i) {
      d.iterations.push_back(100 + i);
      d.values[0].push_back(0.25 + 0.01 * g(rng));
      d.values[1].push_back(100.0 + std::round(3 * g(rng)));
      d.values[2].push_back(std::exp(g(rng)) * 1e-7);
      d.values[3].push_back(std::round(100 + 10 * g(rng)));
      AugmentedState st;
      st.z = {1, 0, 1};
      st.size = {int(i), 7, 0};
      st.lambda = {99.5 + g(rng), 1.0 / 3.0, 100.0};
      st.psi = d.values[0].back();
      d.full_states.push_back(st);
    }
    set.chains.push_back(std::move(d));
  }
  return set;
}

void check_equal(const ChainSet& a, const ChainSet& b) {
  CHECK(a.parameters == b.parameters);
  CHECK(a.metadata == b.metadata);
  REQUIRE(a.chains.size() == b.chains.size());
  for (std::size_t c = 0; c < a.chains.size(); ++c) {
    CHECK(a.chains[c].seed == b.chains[c].seed);
    CHECK(a.chains[c].iterations == b.chains[c].iterations);
    CHECK(a.chains[c].values == b.chains[c].values);
    CHECK(a.chains[c].acceptance == b.chains[c].acceptance);
  }
}

}  // namespace

TEST_CASE("campaign rows from the flight-software sample") {
  const auto c = parse(
      "mission,phase,test_cases,bugs_detected\n"
      "M1,1,61,3\nM1,2,10,0\nM1,3,38,0\n"
      "M2,1,59,9\nM2,2,10,0\nM2,3,65,0\n");
  CHECK(c.missions == 2);
  CHECK(c.phases == 3);
  CHECK(c.test_cases(0, 0) == 61);
  CHECK(c.bugs(0, 0) == 3);
  CHECK(c.test_cases(1, 0) == 59);
  CHECK(c.bugs(1, 0) == 9);
  CHECK(c.detected() == 12);
}

TEST_CASE("campaign parsing accepts any row order and CRLF") {
  const auto c = parse("mission,phase,test_cases,bugs_detected\r\nB,2,4,1\r\nA,1,5,0\r\nB,1,6,2\r\nA,2,7,0\r\n");
  // Missions keep first-appearance order; phases are sorted numerically.
  CHECK(c.test_cases(0, 0) == 6);
  CHECK(c.test_cases(0, 1) == 4);
  CHECK(c.test_cases(1, 0) == 5);
  CHECK(c.bugs(0, 0) == 2);
}

TEST_CASE("campaign parsing errors") {
  CHECK(error_of("") == "no rows");
  CHECK(error_of("mission,phase,test_cases,bugs_detected\n") == "no rows");
  CHECK(error_of("mission,phase,test_cases,bugs_detected\nM1,1,5,0\nM1,2,5,0\nM2,1,5,0\n") ==
        "missing cell: mission M2, phase 2");
  CHECK(error_of("mission,phase,test_cases,bugs_detected\nM1,1,-5,0\n").find("negative") != std::string::npos);
  CHECK(error_of("mission,phase,test_cases,bugs_detected\nM1,1,5,-1\n").find("negative") != std::string::npos);
  CHECK(error_of("mission,phase,test_cases,bugs_detected\nM1,1,5,0\nM1,1,6,0\n").find("duplicate") !=
        std::string::npos);
  CHECK(error_of("mission,phase,tests,bugs\nM1,1,5,0\n").find("header") != std::string::npos);
  CHECK(error_of("mission,phase,test_cases,bugs_detected\nM1,1,5\n").find("4 fields") != std::string::npos);
  CHECK(error_of("mission,phase,test_cases,bugs_detected\nM1,one,5,0\n").find("phase") != std::string::npos);
  // Bugs in a cell without test cases parse, but such a campaign cannot be fitted.
  const auto odd = parse("mission,phase,test_cases,bugs_detected\nM1,1,0,2\nM1,2,5,0\n");
  CHECK(odd.detected() == 2);
  CHECK_THROWS_AS(FitProblem::make(odd, ModelConfig{}), Error);
  CHECK_THROWS_AS(read_campaign("/nonexistent/campaign.csv"), Error);
}

TEST_CASE("campaign round trip") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> dim(1, 6), tc(0, 80);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t j = dim(rng), k = dim(rng);
    CountMatrix t(j, k), y(j, k);
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      t.values[i] = tc(rng);
      y.values[i] = t.values[i] > 0 ? tc(rng) % 4 : 0;
    }
    t.values[0] = std::max<std::int64_t>(t.values[0], 1);
    const auto c = TestCampaign::make(t, y);
    std::ostringstream out;
    write_campaign(c, out);
    const auto back = parse(out.str());
    CHECK(back.test_cases.values == c.test_cases.values);
    CHECK(back.bugs.values == c.bugs.values);
    CHECK(back.missions == c.missions);
    CHECK(back.phases == c.phases);
  }
}

TEST_CASE("shipped flight-software stand-in") {
  const auto c = read_campaign(SBREL_DATA_DIR "/isro_shaped_campaign.csv");
  CHECK(c.missions == 35);
  CHECK(c.phases == 8);
  CHECK(c.detected() == 61);
  CHECK(c.test_cases(0, 0) == 61);
  CHECK(c.bugs(0, 0) == 3);
  CHECK(c.test_cases(1, 0) == 59);
  CHECK(c.bugs(1, 0) == 9);
  const auto a = build_assignment(c, 400);
  CHECK(a.detected_count() == 61);
  CHECK(a.slots.size() == 400);
  CHECK(a.reconstruct_counts(c.missions, c.phases).values == c.bugs.values);
}

TEST_CASE("assignment construction") {
  CountMatrix t(1, 1, 10), y(1, 1, 1);
  const auto c = TestCampaign::make(t, y);
  const auto a = build_assignment(c, 3);
  REQUIRE(a.slots.size() == 3);
  CHECK(a.slots[0] == Cell{0, 0});
  CHECK(a.undetected(1));
  CHECK(a.undetected(2));

  CountMatrix t2(2, 2, 10), y2(2, 2);
  y2.values = {0, 2, 1, 0};
  const auto c2 = TestCampaign::make(t2, y2);
  const auto a2 = build_assignment(c2, 5);
  CHECK(a2.slots[0] == Cell{0, 1});
  CHECK(a2.slots[1] == Cell{0, 1});
  CHECK(a2.slots[2] == Cell{1, 0});
  CHECK(a2.reconstruct_counts(2, 2).values == y2.values);
  const auto again = build_assignment(c2, 5);
  CHECK(again.slots == a2.slots);
  CHECK(build_assignment(c2, 3).detected_count() == 3);

  try {
    build_assignment(c2, 2);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).rfind("candidate ceiling below detected count", 0) == 0);
  }
}

TEST_CASE("number formatting round-trips exactly") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double v = i % 3 ? u(rng) : u(rng) * 1e-300;
    CHECK(parse_number(format_number(v)) == v);
  }
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(100.0) == "100");
  CHECK(format_number(-2.5e-10) == "-2.5e-10");
  CHECK(std::isinf(parse_number(format_number(INFINITY))));
  CHECK_THROWS_AS(parse_number("1.5x"), Error);
  CHECK_THROWS_AS(parse_number(""), Error);
}

TEST_CASE("draws round trip") {
  TempDir dir;
  SUBCASE("tracked scalars") {
    const auto set = sample_set(3, 40);
    write_draws(set, dir.path / "draws.csv");
    CHECK_FALSE(fs::exists(state_companion_path(dir.path / "draws.csv")));
    check_equal(read_draws(dir.path / "draws.csv"), set);
  }
  SUBCASE("with the per-candidate companion") {
    const auto set = sample_set(2, 5);
    write_draws(set, dir.path / "d.csv", true);
    REQUIRE(fs::exists(dir.path / "d.csv.state.csv"));
    const auto back = read_draws(dir.path / "d.csv", true);
    check_equal(back, set);
    for (std::size_t c = 0; c < 2; ++c) {
      REQUIRE(back.chains[c].full_states.size() == 5);
      for (std::size_t d = 0; d < 5; ++d) {
        const auto& x = back.chains[c].full_states[d];
        const auto& y = set.chains[c].full_states[d];
        CHECK(x.z == y.z);
        CHECK(x.size == y.size);
        CHECK(x.lambda == y.lambda);
        CHECK(x.psi == y.psi);
      }
    }
  }
  SUBCASE("empty chain set is a header-only file") {
    std::ostringstream out;
    write_draws(ChainSet{}, out);
    const std::string text = out.str();
    CHECK(text.find("chain,iteration,parameter,value\n") == text.size() - 32);
    std::istringstream in(text);
    const auto back = parse_draws(in);
    CHECK(back.chains.empty());
    CHECK(back.parameters.empty());
  }
  SUBCASE("row bookkeeping") {
    ChainSet set;
    set.parameters = {"psi"};
    for (int c = 0; c < 3; ++c) {
      ChainDraws d;
      d.values.resize(1);
      for (std::size_t i = 0; i < 25000; ++i) {
        d.iterations.push_back(25001 + i);
        d.values[0].push_back(0.25);
      }
      set.chains.push_back(std::move(d));
    }
    std::ostringstream out;
    write_draws(set, out);
    const std::string text = out.str();
    const auto header = text.find("chain,iteration,parameter,value\n");
    std::size_t rows = 0;
    for (std::size_t i = header + 32; i < text.size(); ++i) rows += text[i] == '\n';
    CHECK(rows == 75000);
  }
}

TEST_CASE("draws parsing errors") {
  auto err = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_draws(in);
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(err("# sbrel-draws 2\nchain,iteration,parameter,value\n").find("version mismatch") != std::string::npos);
  CHECK(err("chain,iteration,parameter,value\n").find("version stamp") != std::string::npos);
  CHECK_FALSE(err("").empty());
  const std::string head =
      "# sbrel-draws 1\n# chains=1\n# parameters=psi;N\n# chain.1.seed=5\n"
      "# chain.1.acceptance.size=1\n# chain.1.acceptance.lambda=1\nchain,iteration,parameter,value\n";
  CHECK(err(head + "1,1,psi,0.5\n1,1,N,3\n").empty());
  CHECK(err(head + "1,1,psi,0.5\n").find("incomplete") != std::string::npos);
  CHECK(err(head + "1,1,psi,0.5\n1,1,lambda[2],3\n").find("unknown parameter") != std::string::npos);
  CHECK(err(head + "2,1,psi,0.5\n1,1,N,3\n").find("chain out of range") != std::string::npos);
  CHECK(err(head + "1,1,psi,0.5\n1,2,N,3\n").find("out of order") != std::string::npos);
  CHECK(err("# sbrel-draws 1\n# chains=1\n# parameters=psi\nchain,iteration,parameter,value\n").find("missing") !=
        std::string::npos);
}

TEST_CASE("truth and trace files round trip") {
  TempDir dir;
  GroundTruth t;
  t.real = {1, 1, 0};
  t.size = {120, 0, 0};
  t.lambda = {101.25, 0.1 + 0.2, 0.0};
  t.detection = {Cell{2, 0}, std::nullopt, std::nullopt};
  write_truth(t, dir.path / "truth.csv");
  const auto back = read_truth(dir.path / "truth.csv");
  CHECK(back.real == t.real);
  CHECK(back.size == t.size);
  CHECK(back.lambda == t.lambda);
  CHECK(back.detection == t.detection);

  const std::vector<TraceRecord> tr{{1, 6, 0.1}, {1, 7, 1.0 / 3.0}, {2, 6, -4.5}};
  write_trace(tr, dir.path / "trace.csv");
  CHECK(read_trace(dir.path / "trace.csv") == tr);
}

TEST_CASE("curve file keeps the grid order") {
  TempDir dir;
  const std::vector<ReliabilityPoint> curve{{100, 0.85, {}}, {150, 0.9, {}}, {200, 0.976, {}}};
  write_curve(curve, dir.path / "curve.csv");
  std::ifstream in(dir.path / "curve.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "epsilon,reliability\n100,0.85\n150,0.9\n200,0.976\n");
}

TEST_CASE("report document") {
  TempDir dir;
  auto set = sample_set(3, 40);
  ModelConfig model;
  model.nu = 1.25;
  SamplerConfig sampler;
  sampler.seed = 42;
  sampler.tracked = {1, 400};
  set.metadata = config_metadata(model, sampler);
  const std::vector<double> eps{3e-7, 1e-7, 5e-7};
  std::vector<double> sorted_eps{1e-7, 3e-7, 5e-7};
  const auto report = build_report(set, {"psi"}, sorted_eps);
  write_report(report, dir.path / "report.json");
  std::ifstream in(dir.path / "report.json");
  const auto doc = nlohmann::ordered_json::parse(in);
  CHECK(doc["schema"] == "sbrel-report/1");
  CHECK(doc["chains"] == 3);
  CHECK(doc["draws_per_chain"] == 40);
  CHECK(doc["seeds"].size() == 3);
  CHECK(doc["seeds"][1].get<std::uint64_t>() == derive_seed(3, 1));
  REQUIRE(doc["parameters"].size() == 1);
  const auto& p = doc["parameters"][0];
  CHECK(p["name"] == "psi");
  CHECK(p["per_chain"].size() == 3);
  CHECK(p["ci"][0].get<double>() <= p["ci"][1].get<double>());
  CHECK(p["rhat"].is_number());
  CHECK(p["rhat_upper"].is_number());
  CHECK(p["ess"].is_number());
  REQUIRE(doc["reliability"].size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(doc["reliability"][i]["epsilon"].get<double>() == sorted_eps[i]);

  std::map<std::string, std::string> echo;
  for (auto& [k, v] : doc["config"].items()) echo[k] = v.get<std::string>();
  CHECK(echo == set.metadata);
  const auto m2 = model_config_from_metadata(echo);
  const auto s2 = sampler_config_from_metadata(echo);
  CHECK(m2.nu == 1.25);
  CHECK(m2.max_bugs == model.max_bugs);
  CHECK(m2.dispersion == model.dispersion);
  CHECK(s2.seed == 42);
  CHECK(s2.tracked == sampler.tracked);
  CHECK(s2.iterations == sampler.iterations);
  CHECK(s2.effective_burn_in() == sampler.effective_burn_in());
  CHECK(config_metadata(m2, s2) == echo);

  {
    std::ofstream blocker(dir.path / "blocker");
  }
  CHECK_THROWS_AS(write_report(report, dir.path / "blocker" / "report.json"), Error);
  CHECK_THROWS_AS(model_config_from_metadata({}), Error);
}
