#include "commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "sbrel/dataio.hpp"
#include "sbrel/diagnostics.hpp"
#include "sbrel/reliability.hpp"
#include "sbrel/sampler.hpp"
#include "sbrel/simulate.hpp"

namespace sbrel::cli {

namespace {

fs::path default_out_dir() {
  if (const char* env = std::getenv("SBREL_OUT_DIR"); env && *env) return env;
  return ".";
}

std::vector<double> parse_epsilons(const std::string& text) {
  std::vector<double> eps;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    eps.push_back(parse_number(item));
  }
  if (eps.empty()) throw Error("empty epsilon list");
  for (std::size_t i = 1; i < eps.size(); ++i)
    if (!(eps[i] > eps[i - 1])) throw Error("epsilon list must be strictly increasing");
  return eps;
}

std::vector<std::string> parse_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string file_safe(const std::string& name) {
  std::string s;
  for (char c : name) {
    if (c == '[') s.push_back('_');
    else if (c != ']') s.push_back(c);
  }
  return s;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

struct SimulateArgs {
  SimulationSpec spec;
  ModelConfig model;
  std::string layout = "per-cell";
  std::uint64_t seed = 1;
  std::string out;
};

struct FitArgs {
  std::string campaign;
  ModelConfig model;
  SamplerConfig sampler;
  std::size_t burn_in = 0;
  bool burn_in_set = false;
  double rhat_warn = 1.1;
  bool strict = false;
  std::string epsilons = "100,120,140,160,180,200";
  std::vector<std::size_t> track;
  bool full_state = false;
  std::string out;
};

struct DrawsArgs {
  std::string draws;
  std::string epsilons;
  std::string params;
  std::string out;
};

int cmd_simulate(SimulateArgs& a, std::ostream& out) {
  a.spec.layout = parse_test_case_layout(a.layout);
  a.spec.validate(a.model);
  Rng rng(a.seed);
  const auto sim = generate_campaign(a.model, a.spec, rng);
  const fs::path dir = a.out.empty() ? default_out_dir() : fs::path(a.out);
  write_campaign(sim.campaign, dir / "campaign.csv");
  write_truth(sim.truth, dir / "truth.csv");
  out << "simulated " << a.spec.missions << " missions x " << a.spec.phases << " phases, "
      << sim.truth.real_count() << " real bugs, " << sim.campaign.detected() << " detected\n"
      << "wrote " << (dir / "campaign.csv").string() << " and " << (dir / "truth.csv").string() << "\n";
  return kOk;
}

int cmd_fit(FitArgs& a, std::ostream& out, std::ostream& err) {
  const auto campaign = read_campaign(a.campaign);
  a.model.validate_for(campaign);
  if (a.burn_in_set) a.sampler.burn_in = a.burn_in;
  a.sampler.tracked = a.track;
  a.sampler.keep_full_state = a.full_state;
  const auto eps = parse_epsilons(a.epsilons);

  auto draws = run_all(campaign, a.model, a.sampler);
  draws.metadata = config_metadata(a.model, a.sampler);
  draws.metadata["campaign.missions"] = std::to_string(campaign.missions);
  draws.metadata["campaign.phases"] = std::to_string(campaign.phases);
  draws.metadata["campaign.detected"] = std::to_string(campaign.detected());

  const fs::path dir = a.out.empty() ? default_out_dir() : fs::path(a.out);
  write_draws(draws, dir / "draws.csv", a.full_state);
  const auto report = build_report(draws, {}, eps);
  write_report(report, dir / "report.json");

  const auto& n = report.parameters[draws.parameter_index("N")];
  const auto& psi = report.parameters[draws.parameter_index("psi")];
  const auto& rem = report.parameters[draws.parameter_index("R")];
  out << "detected bugs n      " << campaign.detected() << "\n"
      << "total bugs N mean    " << fmt(n.mean) << "  95% CI (" << fmt(n.ci_lower, 1) << ", "
      << fmt(n.ci_upper, 1) << ")\n"
      << "psi mean             " << fmt(psi.mean) << "\n"
      << "remaining size R     " << fmt(rem.mean) << "\n"
      << "Pr(R < " << format_number(eps.front()) << ")" << std::string(12 - std::min<std::size_t>(12, format_number(eps.front()).size()), ' ')
      << fmt(report.reliability.front().probability) << "\n";

  double worst = 1.0;
  std::string worst_name;
  for (const auto& p : report.parameters) {
    if (p.rhat && !(p.rhat->rhat <= worst)) {
      worst = p.rhat->rhat;
      worst_name = p.name;
    }
  }
  if (draws.chains.size() >= 2)
    out << "worst R-hat          " << fmt(worst, 4) << (worst_name.empty() ? "" : " (" + worst_name + ")") << "\n";
  out << "wrote " << (dir / "draws.csv").string() << " and " << (dir / "report.json").string() << "\n";

  if (!(worst <= a.rhat_warn)) {
    err << "warning: R-hat " << fmt(worst, 4) << " for " << worst_name << " exceeds " << a.rhat_warn
        << "; chains may not have converged\n";
    if (a.strict) return kConvergenceWarning;
  }
  return kOk;
}

int cmd_reliability(DrawsArgs& a, std::ostream& out) {
  const auto draws = read_draws(a.draws);
  const auto eps = parse_epsilons(a.epsilons.empty() ? "100,120,140,160,180,200" : a.epsilons);
  const auto curve = reliability_curve(draws, eps);
  const fs::path path = a.out.empty() ? default_out_dir() / "reliability.csv" : fs::path(a.out);
  write_curve(curve, path);
  out << "epsilon    reliability\n";
  for (const auto& p : curve) {
    const auto e = format_number(p.epsilon);
    out << e << std::string(e.size() < 11 ? 11 - e.size() : 1, ' ') << fmt(p.probability, 7) << "\n";
  }
  out << "wrote " << path.string() << "\n";
  return kOk;
}

int cmd_diagnose(DrawsArgs& a, std::ostream& out) {
  const auto draws = read_draws(a.draws);
  if (draws.chains.size() < 2) throw Error("need >= 2 chains for convergence diagnostics");
  auto names = parse_names(a.params);
  if (names.empty()) names = draws.parameters;
  for (const auto& n : names) draws.parameter_index(n);

  const fs::path dir = a.out.empty() ? default_out_dir() : fs::path(a.out);
  const auto report = build_report(draws, names);
  write_report(report, dir / "diagnostics.json");

  out << std::left << std::setw(14) << "parameter" << std::setw(10) << "R-hat" << std::setw(10)
      << "upper" << "ESS\n";
  for (const auto& p : report.parameters) {
    out << std::left << std::setw(14) << p.name << std::setw(10) << fmt(p.rhat->rhat, 4)
        << std::setw(10) << fmt(p.rhat->upper, 4) << fmt(*p.ess, 1) << "\n";
    write_trace(trace_export(draws, p.name), dir / ("trace_" + file_safe(p.name) + ".csv"));
  }
  out << "wrote " << (dir / "diagnostics.json").string() << " and trace files\n";
  return kOk;
}

int cmd_report(DrawsArgs& a, std::ostream& out) {
  const auto draws = read_draws(a.draws);
  const auto eps = parse_epsilons(a.epsilons.empty() ? "100,120,140,160,180,200" : a.epsilons);
  const auto names = parse_names(a.params);
  const auto report = build_report(draws, names, eps);
  const fs::path path = a.out.empty() ? default_out_dir() / "report.json" : fs::path(a.out);
  write_report(report, path);
  out << "wrote " << path.string() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Size-biased software reliability estimation"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic testing campaign");
  simulate->add_option("--missions", sim.spec.missions, "Number of missions J")->capture_default_str();
  simulate->add_option("--phases", sim.spec.phases, "Phases per mission K")->capture_default_str();
  simulate->add_option("--true-bugs", sim.spec.true_bugs, "Number of real bugs")->capture_default_str();
  simulate->add_option("--max-bugs", sim.model.max_bugs, "Candidate ceiling M")->capture_default_str();
  simulate->add_option("--t-min", sim.spec.t_min, "Smallest test-case count")->capture_default_str();
  simulate->add_option("--t-max", sim.spec.t_max, "Largest test-case count")->capture_default_str();
  simulate->add_option("--layout", sim.layout, "per-cell or per-phase test-case draws")->capture_default_str();
  simulate->add_option("--nu", sim.model.nu, "Detection decay exponent")->capture_default_str();
  simulate->add_option("--dispersion", sim.model.dispersion, "Negative-binomial dispersion r")->capture_default_str();
  simulate->add_option("--a-s", sim.model.gamma_shape, "Gamma prior shape")->capture_default_str();
  simulate->add_option("--b-s", sim.model.gamma_rate, "Gamma prior rate")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "RNG seed")->capture_default_str();
  simulate->add_option("--out", sim.out, "Output directory (default $SBREL_OUT_DIR or .)");

  FitArgs fit;
  auto* fitcmd = app.add_subcommand("fit", "Fit the model to a campaign by MCMC");
  fitcmd->add_option("--campaign", fit.campaign, "Campaign CSV")->required();
  fitcmd->add_option("--chains", fit.sampler.chains, "Number of chains")->capture_default_str();
  fitcmd->add_option("--iters", fit.sampler.iterations, "Iterations per chain")->capture_default_str();
  auto* burn = fitcmd->add_option("--burn-in", fit.burn_in, "Discarded iterations (default iters/2)");
  fitcmd->add_option("--thin", fit.sampler.thin, "Keep every n-th draw")->capture_default_str();
  fitcmd->add_option("--nu", fit.model.nu, "Detection decay exponent")->capture_default_str();
  fitcmd->add_option("--max-bugs", fit.model.max_bugs, "Candidate ceiling M")->capture_default_str();
  fitcmd->add_option("--dispersion", fit.model.dispersion, "Negative-binomial dispersion r")->capture_default_str();
  fitcmd->add_option("--a-s", fit.model.gamma_shape, "Gamma prior shape")->capture_default_str();
  fitcmd->add_option("--b-s", fit.model.gamma_rate, "Gamma prior rate")->capture_default_str();
  fitcmd->add_option("--seed", fit.sampler.seed, "Base RNG seed")->capture_default_str();
  fitcmd->add_option("--threads", fit.sampler.threads, "Chains run concurrently")->capture_default_str();
  fitcmd->add_option("--rhat-warn", fit.rhat_warn, "R-hat warning threshold")->capture_default_str();
  fitcmd->add_flag("--strict", fit.strict, "Exit 2 on a convergence warning");
  fitcmd->add_option("--epsilon", fit.epsilons, "Reliability thresholds, increasing")->capture_default_str();
  fitcmd->add_option("--track", fit.track, "1-based candidate indices to record")->delimiter(',');
  fitcmd->add_flag("--full-state", fit.full_state, "Also write every candidate's state");
  fitcmd->add_option("--out", fit.out, "Output directory (default $SBREL_OUT_DIR or .)");

  DrawsArgs rel;
  auto* relcmd = app.add_subcommand("reliability", "Reliability curve Pr(R < epsilon) from draws");
  relcmd->add_option("--draws", rel.draws, "Draws CSV")->required();
  relcmd->add_option("--epsilon", rel.epsilons, "Thresholds, strictly increasing");
  relcmd->add_option("--out", rel.out, "Curve CSV path");

  DrawsArgs diag;
  auto* diagcmd = app.add_subcommand("diagnose", "R-hat, ESS and trace export");
  diagcmd->add_option("--draws", diag.draws, "Draws CSV")->required();
  diagcmd->add_option("--params", diag.params, "Comma-separated parameter filter");
  diagcmd->add_option("--out", diag.out, "Output directory for traces and diagnostics.json");

  DrawsArgs rep;
  auto* repcmd = app.add_subcommand("report", "Posterior report JSON from draws");
  repcmd->add_option("--draws", rep.draws, "Draws CSV")->required();
  repcmd->add_option("--epsilon", rep.epsilons, "Reliability thresholds");
  repcmd->add_option("--params", rep.params, "Comma-separated parameter filter");
  repcmd->add_option("--out", rep.out, "Report path");

  std::vector<std::string> argv_store{"sbrel"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kFailure;
  }

  try {
    if (*simulate) return cmd_simulate(sim, out);
    if (*fitcmd) {
      fit.burn_in_set = burn->count() > 0;
      return cmd_fit(fit, out, err);
    }
    if (*relcmd) return cmd_reliability(rel, out);
    if (*diagcmd) return cmd_diagnose(diag, out);
    if (*repcmd) return cmd_report(rep, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace sbrel::cli
