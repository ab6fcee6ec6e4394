#include "sbrel/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace sbrel {

namespace {

constexpr const char* kDrawsStamp = "# sbrel-draws 1";
constexpr const char* kDrawsStampPrefix = "# sbrel-draws ";
constexpr const char* kCampaignHeader = "mission,phase,test_cases,bugs_detected";
constexpr const char* kDrawsHeader = "chain,iteration,parameter,value";
constexpr const char* kStateHeader = "chain,iteration,candidate,z,S,lambda";
constexpr const char* kTruthHeader = "candidate,real,size,lambda,mission,phase";
constexpr const char* kTraceHeader = "chain,iteration,value";
constexpr const char* kCurveHeader = "epsilon,reliability";

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

template <class Int>
Int parse_int(const std::string& s, const std::string& what) {
  Int v{};
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || p != end) throw Error("invalid " + what + ": '" + s + "'");
  return v;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return in;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw Error("number formatting failed");
  return std::string(buf, p);
}

double parse_number(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || p != end) throw Error("invalid number: '" + s + "'");
  return v;
}

// ---------------------------------------------------------------- campaign

TestCampaign parse_campaign(std::istream& in) {
  std::string line;
  if (!next_line(in, line) || line.empty()) throw Error("no rows");
  if (line != kCampaignHeader) throw Error("campaign header must be '" + std::string(kCampaignHeader) + "'");

  std::vector<std::string> missions;  // first-appearance order
  std::map<std::string, std::size_t> mission_index;
  std::set<std::int64_t> phase_set;
  std::map<std::pair<std::size_t, std::int64_t>, std::pair<std::int64_t, std::int64_t>> cells;

  std::size_t lineno = 1;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 4) throw Error("line " + std::to_string(lineno) + ": expected 4 fields");
    const std::string& mission = f[0];
    if (mission.empty()) throw Error("line " + std::to_string(lineno) + ": empty mission label");
    const auto phase = parse_int<std::int64_t>(f[1], "phase");
    const auto tests = parse_int<std::int64_t>(f[2], "test_cases");
    const auto bugs = parse_int<std::int64_t>(f[3], "bugs_detected");
    if (tests < 0 || bugs < 0)
      throw Error("negative count at mission " + mission + ", phase " + f[1]);
    auto [it, fresh] = mission_index.emplace(mission, missions.size());
    if (fresh) missions.push_back(mission);
    phase_set.insert(phase);
    if (!cells.emplace(std::make_pair(it->second, phase), std::make_pair(tests, bugs)).second)
      throw Error("duplicate row for mission " + mission + ", phase " + f[1]);
  }
  if (cells.empty()) throw Error("no rows");

  const std::vector<std::int64_t> phases(phase_set.begin(), phase_set.end());
  CountMatrix t(missions.size(), phases.size(), 0);
  CountMatrix y(missions.size(), phases.size(), 0);
  for (std::size_t j = 0; j < missions.size(); ++j) {
    for (std::size_t k = 0; k < phases.size(); ++k) {
      auto it = cells.find({j, phases[k]});
      if (it == cells.end())
        throw Error("missing cell: mission " + missions[j] + ", phase " + std::to_string(phases[k]));
      t(j, k) = it->second.first;
      y(j, k) = it->second.second;
    }
  }
  return TestCampaign::make(std::move(t), std::move(y));
}

TestCampaign read_campaign(const fs::path& path) {
  auto in = open_in(path);
  return parse_campaign(in);
}

void write_campaign(const TestCampaign& campaign, std::ostream& out) {
  out << kCampaignHeader << '\n';
  for (std::size_t j = 0; j < campaign.missions; ++j)
    for (std::size_t k = 0; k < campaign.phases; ++k)
      out << 'M' << (j + 1) << ',' << (k + 1) << ',' << campaign.test_cases(j, k) << ','
          << campaign.bugs(j, k) << '\n';
}

void write_campaign(const TestCampaign& campaign, const fs::path& path) {
  auto out = open_out(path);
  write_campaign(campaign, out);
  finish(out, path);
}

BugAssignment build_assignment(const TestCampaign& campaign, std::int64_t max_bugs) {
  const std::int64_t n = campaign.detected();
  if (max_bugs < n)
    throw Error("candidate ceiling below detected count (M=" + std::to_string(max_bugs) +
                ", n=" + std::to_string(n) + ")");
  BugAssignment a;
  a.slots.reserve(static_cast<std::size_t>(max_bugs));
  for (std::size_t j = 0; j < campaign.missions; ++j)
    for (std::size_t k = 0; k < campaign.phases; ++k)
      for (std::int64_t c = 0; c < campaign.bugs(j, k); ++c) a.slots.push_back(Cell{j, k});
  a.slots.resize(static_cast<std::size_t>(max_bugs), std::nullopt);
  return a;
}

// ---------------------------------------------------------------- draws

fs::path state_companion_path(const fs::path& draws_path) {
  fs::path p = draws_path;
  p += ".state.csv";
  return p;
}

void write_draws(const ChainSet& draws, std::ostream& out) {
  out << kDrawsStamp << '\n';
  out << "# chains=" << draws.chains.size() << '\n';
  out << "# parameters=";
  for (std::size_t i = 0; i < draws.parameters.size(); ++i)
    out << (i ? ";" : "") << draws.parameters[i];
  out << '\n';
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const auto& ch = draws.chains[c];
    out << "# chain." << (c + 1) << ".seed=" << ch.seed << '\n';
    out << "# chain." << (c + 1) << ".acceptance.size=" << format_number(ch.acceptance.size) << '\n';
    out << "# chain." << (c + 1) << ".acceptance.lambda=" << format_number(ch.acceptance.lambda) << '\n';
  }
  for (const auto& [k, v] : draws.metadata) out << "# meta." << k << '=' << v << '\n';
  out << kDrawsHeader << '\n';
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const auto& ch = draws.chains[c];
    for (std::size_t d = 0; d < ch.draws(); ++d) {
      for (std::size_t p = 0; p < draws.parameters.size(); ++p) {
        out << (c + 1) << ',' << ch.iterations[d] << ',' << draws.parameters[p] << ','
            << format_number(ch.values[p][d]) << '\n';
      }
    }
  }
}

namespace {

void write_state(const ChainSet& draws, std::ostream& out) {
  out << kStateHeader << '\n';
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const auto& ch = draws.chains[c];
    for (std::size_t d = 0; d < ch.full_states.size(); ++d) {
      const auto& st = ch.full_states[d];
      for (std::size_t i = 0; i < st.candidates(); ++i) {
        out << (c + 1) << ',' << ch.iterations[d] << ',' << (i + 1) << ',' << int(st.z[i]) << ','
            << st.size[i] << ',' << format_number(st.lambda[i]) << '\n';
      }
    }
  }
}

void read_state(ChainSet& draws, std::istream& in) {
  std::string line;
  if (!next_line(in, line) || line != kStateHeader) throw Error("state file header mismatch");
  const bool has_psi = draws.has_parameter("psi");
  const std::size_t psi_idx = has_psi ? draws.parameter_index("psi") : 0;
  std::size_t lineno = 1;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 6) throw Error("state line " + std::to_string(lineno) + ": expected 6 fields");
    const auto c = parse_int<std::size_t>(f[0], "chain");
    const auto it = parse_int<std::size_t>(f[1], "iteration");
    const auto cand = parse_int<std::size_t>(f[2], "candidate");
    if (c < 1 || c > draws.chains.size()) throw Error("state chain out of range");
    auto& ch = draws.chains[c - 1];
    if (cand == 1) {
      const std::size_t d = ch.full_states.size();
      if (d >= ch.draws() || ch.iterations[d] != it) throw Error("state rows out of step with draws");
      AugmentedState st;
      st.psi = has_psi ? ch.values[psi_idx][d] : 0.5;
      ch.full_states.push_back(std::move(st));
    }
    if (ch.full_states.empty()) throw Error("state rows must start at candidate 1");
    auto& st = ch.full_states.back();
    if (cand != st.candidates() + 1) throw Error("state candidates out of order");
    st.z.push_back(static_cast<std::uint8_t>(parse_int<int>(f[3], "z")));
    st.size.push_back(parse_int<std::int64_t>(f[4], "S"));
    st.lambda.push_back(parse_number(f[5]));
  }
}

}  // namespace

void write_draws(const ChainSet& draws, const fs::path& path, bool include_full_state) {
  {
    auto out = open_out(path);
    write_draws(draws, out);
    finish(out, path);
  }
  if (include_full_state) {
    const auto sp = state_companion_path(path);
    auto out = open_out(sp);
    write_state(draws, out);
    finish(out, sp);
  }
}

ChainSet parse_draws(std::istream& in) {
  std::string line;
  if (!next_line(in, line)) throw Error("empty draws file");
  if (line.rfind(kDrawsStampPrefix, 0) != 0) throw Error("draws file is missing its version stamp");
  if (line != kDrawsStamp) throw Error("draws format version mismatch: '" + line + "'");

  ChainSet set;
  std::size_t chains = 0;
  std::map<std::string, std::string> raw;
  while (true) {
    if (!next_line(in, line)) throw Error("draws file has no header row");
    if (line.rfind("# ", 0) != 0) break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    raw[line.substr(2, eq - 2)] = line.substr(eq + 1);
  }
  if (line != kDrawsHeader) throw Error("draws header must be '" + std::string(kDrawsHeader) + "'");

  if (auto it = raw.find("chains"); it != raw.end()) chains = parse_int<std::size_t>(it->second, "chains");
  if (auto it = raw.find("parameters"); it != raw.end() && !it->second.empty())
    set.parameters = split(it->second, ';');
  set.chains.resize(chains);
  for (std::size_t c = 0; c < chains; ++c) {
    const std::string pre = "chain." + std::to_string(c + 1) + ".";
    auto get = [&](const std::string& key) -> const std::string& {
      auto it = raw.find(pre + key);
      if (it == raw.end()) throw Error("draws metadata missing " + pre + key);
      return it->second;
    };
    set.chains[c].seed = parse_int<std::uint64_t>(get("seed"), "seed");
    set.chains[c].acceptance.size = parse_number(get("acceptance.size"));
    set.chains[c].acceptance.lambda = parse_number(get("acceptance.lambda"));
    set.chains[c].values.assign(set.parameters.size(), {});
  }
  for (const auto& [k, v] : raw)
    if (k.rfind("meta.", 0) == 0) set.metadata[k.substr(5)] = v;

  std::map<std::string, std::size_t> index;
  for (std::size_t p = 0; p < set.parameters.size(); ++p) index[set.parameters[p]] = p;

  std::size_t lineno = 0;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 4) throw Error("draws row " + std::to_string(lineno) + ": expected 4 fields");
    const auto c = parse_int<std::size_t>(f[0], "chain");
    if (c < 1 || c > chains) throw Error("draws row " + std::to_string(lineno) + ": chain out of range");
    const auto iter = parse_int<std::size_t>(f[1], "iteration");
    auto pit = index.find(f[2]);
    if (pit == index.end()) throw Error("draws row " + std::to_string(lineno) + ": unknown parameter " + f[2]);
    auto& ch = set.chains[c - 1];
    if (pit->second == 0) ch.iterations.push_back(iter);
    if (ch.iterations.empty() || ch.iterations.back() != iter)
      throw Error("draws row " + std::to_string(lineno) + ": rows out of order");
    auto& series = ch.values[pit->second];
    if (series.size() + 1 != ch.iterations.size())
      throw Error("draws row " + std::to_string(lineno) + ": incomplete draw");
    series.push_back(parse_number(f[3]));
  }
  for (const auto& ch : set.chains)
    for (const auto& v : ch.values)
      if (v.size() != ch.iterations.size()) throw Error("draws file ends with an incomplete draw");
  return set;
}

ChainSet read_draws(const fs::path& path, bool load_full_state) {
  ChainSet set;
  {
    auto in = open_in(path);
    set = parse_draws(in);
  }
  if (load_full_state) {
    auto in = open_in(state_companion_path(path));
    read_state(set, in);
  }
  return set;
}

// ---------------------------------------------------------------- truth

void write_truth(const GroundTruth& truth, const fs::path& path) {
  auto out = open_out(path);
  out << kTruthHeader << '\n';
  for (std::size_t i = 0; i < truth.real.size(); ++i) {
    out << (i + 1) << ',' << int(truth.real[i]) << ',' << truth.size[i] << ','
        << format_number(truth.lambda[i]) << ',';
    if (truth.detection[i])
      out << (truth.detection[i]->mission + 1) << ',' << (truth.detection[i]->phase + 1);
    else
      out << ',';
    out << '\n';
  }
  finish(out, path);
}

GroundTruth read_truth(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!next_line(in, line) || line != kTruthHeader) throw Error("truth header mismatch");
  GroundTruth t;
  while (next_line(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 6) throw Error("truth row: expected 6 fields");
    t.real.push_back(static_cast<std::uint8_t>(parse_int<int>(f[1], "real")));
    t.size.push_back(parse_int<std::int64_t>(f[2], "size"));
    t.lambda.push_back(parse_number(f[3]));
    if (f[4].empty()) {
      t.detection.emplace_back(std::nullopt);
    } else {
      t.detection.emplace_back(Cell{parse_int<std::size_t>(f[4], "mission") - 1,
                                    parse_int<std::size_t>(f[5], "phase") - 1});
    }
  }
  return t;
}

// ---------------------------------------------------------------- traces, curves

void write_trace(const std::vector<TraceRecord>& records, const fs::path& path) {
  auto out = open_out(path);
  out << kTraceHeader << '\n';
  for (const auto& r : records)
    out << r.chain << ',' << r.iteration << ',' << format_number(r.value) << '\n';
  finish(out, path);
}

std::vector<TraceRecord> read_trace(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!next_line(in, line) || line != kTraceHeader) throw Error("trace header mismatch");
  std::vector<TraceRecord> out;
  while (next_line(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 3) throw Error("trace row: expected 3 fields");
    out.push_back({parse_int<std::size_t>(f[0], "chain"), parse_int<std::size_t>(f[1], "iteration"),
                   parse_number(f[2])});
  }
  return out;
}

void write_curve(const std::vector<ReliabilityPoint>& curve, const fs::path& path) {
  auto out = open_out(path);
  out << kCurveHeader << '\n';
  for (const auto& p : curve) out << format_number(p.epsilon) << ',' << format_number(p.probability) << '\n';
  finish(out, path);
}

// ---------------------------------------------------------------- report

std::string report_to_json(const PosteriorReport& report) {
  using json = nlohmann::ordered_json;
  json doc;
  doc["schema"] = PosteriorReport::kSchema;
  doc["ci_level"] = report.ci_level;
  doc["chains"] = report.chains;
  doc["draws_per_chain"] = report.draws_per_chain;
  doc["seeds"] = report.seeds;
  json acc = json::array();
  for (std::size_t c = 0; c < report.acceptance.size(); ++c)
    acc.push_back({{"chain", c + 1}, {"size", report.acceptance[c].size}, {"lambda", report.acceptance[c].lambda}});
  doc["acceptance"] = acc;
  json cfg = json::object();
  for (const auto& [k, v] : report.config) cfg[k] = v;
  doc["config"] = cfg;

  json params = json::array();
  for (const auto& p : report.parameters) {
    json j;
    j["name"] = p.name;
    json chains = json::array();
    for (std::size_t c = 0; c < p.per_chain.size(); ++c) {
      const auto& s = p.per_chain[c];
      json cj{{"chain", c + 1}, {"draws", s.draws}, {"mean", s.mean}, {"sd", s.sd}};
      cj["cv"] = s.cv ? json(*s.cv) : json(nullptr);
      chains.push_back(cj);
    }
    j["per_chain"] = chains;
    j["mean"] = p.mean;
    j["sd"] = p.sd;
    j["ci"] = {p.ci_lower, p.ci_upper};
    j["rhat"] = p.rhat ? json(p.rhat->rhat) : json(nullptr);
    j["rhat_upper"] = p.rhat ? json(p.rhat->upper) : json(nullptr);
    j["ess"] = p.ess ? json(*p.ess) : json(nullptr);
    params.push_back(j);
  }
  doc["parameters"] = params;

  json rel = json::array();
  for (const auto& r : report.reliability)
    rel.push_back({{"epsilon", r.epsilon}, {"probability", r.probability}, {"per_chain", r.per_chain}});
  doc["reliability"] = rel;
  return doc.dump(2) + "\n";
}

void write_report(const PosteriorReport& report, const fs::path& path) {
  auto out = open_out(path);
  out << report_to_json(report);
  finish(out, path);
}

// ---------------------------------------------------------------- config echo

std::map<std::string, std::string> config_metadata(const ModelConfig& model,
                                                   const SamplerConfig& sampler) {
  std::map<std::string, std::string> m;
  m["model.max_bugs"] = std::to_string(model.max_bugs);
  m["model.nu"] = format_number(model.nu);
  m["model.gamma_shape"] = format_number(model.gamma_shape);
  m["model.gamma_rate"] = format_number(model.gamma_rate);
  m["model.dispersion"] = format_number(model.dispersion);
  m["model.normalization"] = to_string(model.normalization);
  if (model.size_cap) m["model.size_cap"] = std::to_string(*model.size_cap);
  m["sampler.chains"] = std::to_string(sampler.chains);
  m["sampler.iterations"] = std::to_string(sampler.iterations);
  m["sampler.burn_in"] = std::to_string(sampler.effective_burn_in());
  m["sampler.seed"] = std::to_string(sampler.seed);
  m["sampler.thin"] = std::to_string(sampler.thin);
  std::string tracked;
  for (std::size_t i = 0; i < sampler.tracked.size(); ++i)
    tracked += (i ? ";" : "") + std::to_string(sampler.tracked[i]);
  m["sampler.tracked"] = tracked;
  m["sampler.use_likelihood"] = sampler.use_likelihood ? "true" : "false";
  if (sampler.fixed_lambda) m["sampler.fixed_lambda"] = format_number(*sampler.fixed_lambda);
  return m;
}

namespace {
const std::string& need(const std::map<std::string, std::string>& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw Error("run metadata is missing " + key);
  return it->second;
}
}  // namespace

ModelConfig model_config_from_metadata(const std::map<std::string, std::string>& meta) {
  ModelConfig m;
  m.max_bugs = parse_int<std::int64_t>(need(meta, "model.max_bugs"), "max_bugs");
  m.nu = parse_number(need(meta, "model.nu"));
  m.gamma_shape = parse_number(need(meta, "model.gamma_shape"));
  m.gamma_rate = parse_number(need(meta, "model.gamma_rate"));
  m.dispersion = parse_number(need(meta, "model.dispersion"));
  m.normalization = parse_normalization(need(meta, "model.normalization"));
  if (auto it = meta.find("model.size_cap"); it != meta.end())
    m.size_cap = parse_int<std::int64_t>(it->second, "size_cap");
  return m;
}

SamplerConfig sampler_config_from_metadata(const std::map<std::string, std::string>& meta) {
  SamplerConfig s;
  s.chains = parse_int<std::size_t>(need(meta, "sampler.chains"), "chains");
  s.iterations = parse_int<std::size_t>(need(meta, "sampler.iterations"), "iterations");
  s.burn_in = parse_int<std::size_t>(need(meta, "sampler.burn_in"), "burn_in");
  s.seed = parse_int<std::uint64_t>(need(meta, "sampler.seed"), "seed");
  s.thin = parse_int<std::size_t>(need(meta, "sampler.thin"), "thin");
  const auto& tracked = need(meta, "sampler.tracked");
  if (!tracked.empty())
    for (const auto& t : split(tracked, ';')) s.tracked.push_back(parse_int<std::size_t>(t, "tracked"));
  s.use_likelihood = need(meta, "sampler.use_likelihood") == "true";
  if (auto it = meta.find("sampler.fixed_lambda"); it != meta.end()) s.fixed_lambda = parse_number(it->second);
  return s;
}

}  // namespace sbrel
