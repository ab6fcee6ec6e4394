#include "sbrel/simulate.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "sbrel/dataio.hpp"
#include "sbrel/diagnostics.hpp"

namespace sbrel {

std::string to_string(TestCaseLayout layout) {
  return layout == TestCaseLayout::PerPhase ? "per-phase" : "per-cell";
}

TestCaseLayout parse_test_case_layout(const std::string& s) {
  if (s == "per-cell") return TestCaseLayout::PerCell;
  if (s == "per-phase") return TestCaseLayout::PerPhase;
  throw Error("unknown test-case layout: " + s);
}

void SimulationSpec::validate(const ModelConfig& model) const {
  model.validate();
  if (missions < 1 || phases < 1) throw Error("need at least one mission and one phase");
  if (true_bugs < 0 || true_bugs > model.max_bugs) throw Error("true bug count must lie in [0, M]");
  if (t_min < 0 || t_max < t_min) throw Error("invalid test-case range");
  if (t_max < 1) throw Error("test-case range must allow at least one test case");
}

std::int64_t GroundTruth::real_count() const {
  return std::accumulate(real.begin(), real.end(), std::int64_t{0});
}

std::int64_t GroundTruth::detected_count() const {
  return std::count_if(detection.begin(), detection.end(), [](const auto& d) { return d.has_value(); });
}

double GroundTruth::remaining_size() const {
  double r = 0.0;
  for (std::size_t i = 0; i < real.size(); ++i)
    if (real[i] && !detection[i]) r += double(size[i]);
  return r;
}

namespace {

CountMatrix draw_test_cases(const SimulationSpec& spec, Rng& rng) {
  std::uniform_int_distribution<std::int64_t> uniform(spec.t_min, spec.t_max);
  CountMatrix t(spec.missions, spec.phases, 0);
  if (spec.layout == TestCaseLayout::PerPhase) {
    for (std::size_t k = 0; k < spec.phases; ++k) {
      const auto v = uniform(rng);
      for (std::size_t j = 0; j < spec.missions; ++j) t(j, k) = v;
    }
  } else {
    for (auto& v : t.values) v = uniform(rng);
  }
  return t;
}

}  // namespace

SimulatedCampaign generate_campaign(const ModelConfig& model, const SimulationSpec& spec, Rng& rng) {
  spec.validate(model);
  CountMatrix tests = draw_test_cases(spec, rng);
  // All-zero draws leave the detection kernel undefined; redraw them.
  while (std::all_of(tests.values.begin(), tests.values.end(), [](auto v) { return v == 0; }))
    tests = draw_test_cases(spec, rng);

  const ProbMatrix cells = cell_probabilities(tests, model.normalization);
  const double t_max = double(*std::max_element(tests.values.begin(), tests.values.end()));
  std::discrete_distribution<std::size_t> pick_cell(cells.values.begin(), cells.values.end());

  const auto m = static_cast<std::size_t>(model.max_bugs);
  GroundTruth truth;
  truth.real.assign(m, 0);
  truth.size.assign(m, 0);
  truth.lambda.assign(m, 0.0);
  truth.detection.assign(m, std::nullopt);

  CountMatrix bugs(spec.missions, spec.phases, 0);
  for (std::size_t i = 0; i < static_cast<std::size_t>(spec.true_bugs); ++i) {
    truth.real[i] = 1;
    truth.lambda[i] = draw_gamma(rng, model.gamma_shape, model.gamma_rate);
    truth.size[i] = draw_negative_binomial(rng, truth.lambda[i], model.dispersion, model.size_cap);
    const double alpha = detection_prob(double(truth.size[i]), model.nu, t_max);
    if (draw_uniform(rng) < alpha) {
      const std::size_t flat = pick_cell(rng);
      const Cell c{flat / spec.phases, flat % spec.phases};
      truth.detection[i] = c;
      ++bugs(c.mission, c.phase);
    }
  }
  return {TestCampaign::make(std::move(tests), std::move(bugs)), std::move(truth)};
}

std::vector<RecoveryRow> replicate_study(const std::vector<double>& nu_values,
                                         const std::vector<std::uint64_t>& seeds,
                                         const StudyOptions& options) {
  if (nu_values.empty()) throw Error("need at least one nu value");
  if (seeds.empty()) throw Error("need at least one seed");
  std::vector<RecoveryRow> rows;
  for (double nu : nu_values) {
    for (std::uint64_t seed : seeds) {
      try {
        ModelConfig model = options.model;
        model.nu = nu;
        Rng rng(derive_seed(seed, 0));
        const auto sim = generate_campaign(model, options.simulation, rng);

        SamplerConfig sampler = options.sampler;
        sampler.seed = derive_seed(seed, 1);
        const auto draws = run_all(sim.campaign, model, sampler);
        const auto problem = FitProblem::make(sim.campaign, model);

        RecoveryRow row;
        row.nu = nu;
        row.seed = seed;
        row.true_bugs = sim.truth.real_count();
        row.detected = sim.campaign.detected();
        row.true_psi = double(row.true_bugs) / double(model.max_bugs);
        row.remaining_true = sim.truth.remaining_size();

        const auto n = summarize("N", draws.per_chain("N"));
        const auto psi = summarize("psi", draws.per_chain("psi"));
        const auto rem = summarize("R", draws.per_chain("R"));
        row.n_mean = n.mean;
        row.psi_mean = psi.mean;
        row.n_rhat = n.rhat ? n.rhat->rhat : 1.0;
        row.psi_rhat = psi.rhat ? psi.rhat->rhat : 1.0;
        row.remaining_mean = rem.mean;

        // Detected slots are filled in (mission, phase) order; sort the true
        // detected bugs the same way to pair them with fitted slots.
        std::vector<std::size_t> detected_truth;
        for (std::size_t i = 0; i < sim.truth.detection.size(); ++i)
          if (sim.truth.detection[i]) detected_truth.push_back(i);
        std::stable_sort(detected_truth.begin(), detected_truth.end(), [&](auto a, auto b) {
          return *sim.truth.detection[a] < *sim.truth.detection[b];
        });

        for (const auto& name : draws.parameters) {
          if (name.rfind("S[", 0) != 0) continue;
          const std::string tag = name.substr(1);
          CandidateRecovery cr;
          cr.candidate = std::stoul(tag.substr(1, tag.size() - 2));
          cr.size_mean = summarize(name, draws.per_chain(name)).mean;
          cr.lambda_mean = summarize("lambda" + tag, draws.per_chain("lambda" + tag)).mean;
          const std::size_t slot = cr.candidate - 1;
          if (!problem.assignment.undetected(slot) && slot < detected_truth.size()) {
            cr.true_size = sim.truth.size[detected_truth[slot]];
            cr.true_lambda = sim.truth.lambda[detected_truth[slot]];
          }
          row.candidates.push_back(cr);
        }
        rows.push_back(std::move(row));
      } catch (const std::exception& e) {
        std::ostringstream msg;
        msg << "study run failed for nu=" << nu << " seed=" << seed << ": " << e.what();
        throw Error(msg.str());
      }
    }
  }
  return rows;
}

}  // namespace sbrel
