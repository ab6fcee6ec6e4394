#include "sbrel/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <set>
#include <thread>

#include "sbrel/dataio.hpp"
#include "sbrel/reliability.hpp"

namespace sbrel {

void SamplerConfig::validate() const {
  if (chains < 1) throw Error("need at least one chain");
  if (iterations < 1) throw Error("iterations must be positive");
  if (effective_burn_in() >= iterations) throw Error("burn-in must be smaller than iterations");
  if (thin < 1) throw Error("thin must be at least 1");
  if (fixed_lambda && !(*fixed_lambda > 0.0)) throw Error("fixed lambda must be positive");
}

FitProblem FitProblem::make(const TestCampaign& campaign, const ModelConfig& model) {
  campaign.validate();
  model.validate_for(campaign);
  for (std::size_t j = 0; j < campaign.missions; ++j)
    for (std::size_t k = 0; k < campaign.phases; ++k)
      if (campaign.bugs(j, k) > 0 && campaign.test_cases(j, k) == 0)
        throw Error("bugs detected without test cases at mission " + std::to_string(j + 1) +
                    ", phase " + std::to_string(k + 1));
  FitProblem p;
  p.campaign = campaign;
  p.model = model;
  p.assignment = build_assignment(campaign, model.max_bugs);
  p.cells = cell_probabilities(campaign.test_cases, model.normalization);
  p.t_max = static_cast<double>(campaign.max_test_cases());
  if (!(p.t_max > 0.0)) throw Error("kernel undefined without test cases");
  return p;
}

std::size_t ChainSet::parameter_index(const std::string& name) const {
  auto it = std::find(parameters.begin(), parameters.end(), name);
  if (it == parameters.end()) {
    std::string names;
    for (const auto& p : parameters) names += (names.empty() ? "" : ", ") + p;
    throw Error("unknown parameter '" + name + "'; available: " + names);
  }
  return static_cast<std::size_t>(it - parameters.begin());
}

bool ChainSet::has_parameter(const std::string& name) const {
  return std::find(parameters.begin(), parameters.end(), name) != parameters.end();
}

std::vector<std::span<const double>> ChainSet::per_chain(const std::string& name) const {
  const std::size_t idx = parameter_index(name);
  std::vector<std::span<const double>> out;
  out.reserve(chains.size());
  for (const auto& c : chains) out.emplace_back(c.values[idx]);
  return out;
}

std::size_t ChainSet::total_draws() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.draws();
  return n;
}

double inclusion_probability(double psi, double log_nondetection) {
  const double kept = psi * std::exp(log_nondetection);
  const double denom = kept + (1.0 - psi);
  return denom > 0.0 ? kept / denom : 1.0;
}

void update_z(AugmentedState& state, const FitProblem& problem, Rng& rng, bool use_likelihood) {
  const auto& model = problem.model;
  for (std::size_t i = 0; i < state.candidates(); ++i) {
    if (!problem.assignment.undetected(i)) continue;
    const double log_miss =
        use_likelihood ? log_nondetection_prob(static_cast<double>(state.size[i]), model.nu, problem.t_max)
                       : 0.0;
    state.z[i] = draw_bernoulli(rng, inclusion_probability(state.psi, log_miss)) ? 1 : 0;
  }
}

double draw_psi(std::int64_t real_count, std::int64_t max_bugs, Rng& rng) {
  if (real_count < 0 || real_count > max_bugs) throw Error("real count outside [0, M]");
  return draw_beta(rng, static_cast<double>(real_count + 1),
                   static_cast<double>(max_bugs - real_count + 1));
}

namespace {

double size_log_likelihood(const FitProblem& problem, std::size_t i, std::int64_t s) {
  const double sd = static_cast<double>(s);
  return problem.assignment.undetected(i) ? log_nondetection_prob(sd, problem.model.nu, problem.t_max)
                                          : log_detection_prob(sd, problem.model.nu, problem.t_max);
}

bool accept_log_ratio(Rng& rng, double current, double proposed) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (proposed == kNegInf) return false;
  if (current == kNegInf) return true;
  const double log_ratio = proposed - current;
  return log_ratio >= 0.0 || std::log(draw_uniform(rng)) < log_ratio;
}

}  // namespace

UpdateStats update_size(AugmentedState& state, const FitProblem& problem, Rng& rng,
                        bool use_likelihood) {
  const auto& model = problem.model;
  UpdateStats stats;
  for (std::size_t i = 0; i < state.candidates(); ++i) {
    const std::int64_t proposal =
        draw_negative_binomial(rng, state.lambda[i], model.dispersion, model.size_cap);
    if (!state.z[i]) {
      // No data touch a candidate that is not real: refresh from the prior.
      state.size[i] = proposal;
      continue;
    }
    ++stats.proposed;
    bool accept = true;
    if (use_likelihood) {
      accept = accept_log_ratio(rng, size_log_likelihood(problem, i, state.size[i]),
                                size_log_likelihood(problem, i, proposal));
    }
    if (accept) {
      state.size[i] = proposal;
      ++stats.accepted;
    }
  }
  return stats;
}

UpdateStats update_lambda(AugmentedState& state, const ModelConfig& model, Rng& rng,
                          LambdaTarget target) {
  const double r = model.dispersion;
  UpdateStats stats;
  for (std::size_t i = 0; i < state.candidates(); ++i) {
    const double s = static_cast<double>(state.size[i]);
    const double current = state.lambda[i];
    const double proposal = draw_gamma(rng, model.gamma_shape + s, model.gamma_rate + 1.0);
    ++stats.proposed;
    if (!(proposal > 0.0)) continue;
    // The proposal is the exact conditional when S | lambda is Poisson, so
    // the MH ratio reduces to the NB-to-Poisson kernel ratio
    // h(lambda) = lambda - (r + s) log1p(lambda / r), up to a constant.
    double log_ratio;
    if (target == LambdaTarget::Posterior) {
      auto h = [&](double l) { return l - (r + s) * std::log1p(l / r); };
      log_ratio = h(proposal) - h(current);
      if (model.size_cap) {
        log_ratio -= nb_log_cdf(*model.size_cap, proposal, r) - nb_log_cdf(*model.size_cap, current, r);
      }
    } else {
      // Target Gamma(a, b) alone: ratio of gamma prior to proposal density.
      auto h = [&](double l) { return l - s * std::log(l); };
      log_ratio = h(proposal) - h(current);
    }
    if (log_ratio >= 0.0 || std::log(draw_uniform(rng)) < log_ratio) {
      state.lambda[i] = proposal;
      ++stats.accepted;
    }
  }
  return stats;
}

AugmentedState initial_state(const FitProblem& problem, const SamplerConfig& config, Rng& rng) {
  const auto& model = problem.model;
  const std::size_t m = static_cast<std::size_t>(model.max_bugs);
  AugmentedState st;
  st.z.assign(m, 0);
  st.size.assign(m, 0);
  st.lambda.assign(m, 0.0);
  st.psi = draw_uniform(rng);
  for (std::size_t i = 0; i < m; ++i) {
    const bool detected = !problem.assignment.undetected(i);
    st.z[i] = detected ? 1 : (draw_bernoulli(rng, 0.5) ? 1 : 0);
    st.lambda[i] = config.fixed_lambda ? *config.fixed_lambda
                                       : draw_gamma(rng, model.gamma_shape, model.gamma_rate);
    st.size[i] = draw_negative_binomial(rng, st.lambda[i], model.dispersion, model.size_cap);
    // A detected bug of size zero has zero likelihood; start it somewhere valid.
    for (int tries = 0; detected && st.size[i] == 0 && tries < 1000; ++tries)
      st.size[i] = draw_negative_binomial(rng, st.lambda[i], model.dispersion, model.size_cap);
    if (detected && st.size[i] == 0) st.size[i] = 1;
  }
  return st;
}

std::vector<std::string> tracked_parameter_names(const FitProblem& problem,
                                                 const SamplerConfig& config) {
  const auto m = static_cast<std::size_t>(problem.model.max_bugs);
  std::vector<std::size_t> idx = config.tracked;
  if (idx.empty()) {
    for (std::size_t k : {std::size_t{1}, std::size_t{2}, m - 2, m - 1, m})
      if (k >= 1 && k <= m && std::find(idx.begin(), idx.end(), k) == idx.end()) idx.push_back(k);
  }
  std::vector<std::string> names{"psi", "N", "R"};
  for (std::size_t k : idx) {
    if (k < 1 || k > m) throw Error("tracked candidate index out of range: " + std::to_string(k));
    const std::string tag = "[" + std::to_string(k) + "]";
    names.push_back("z" + tag);
    names.push_back("S" + tag);
    names.push_back("lambda" + tag);
  }
  return names;
}

namespace {

std::vector<std::size_t> tracked_indices(const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  for (const auto& n : names) {
    if (n.rfind("z[", 0) == 0) out.push_back(std::stoul(n.substr(2, n.size() - 3)) - 1);
  }
  return out;
}

}  // namespace

ChainDraws run_chain(const FitProblem& problem, const SamplerConfig& config,
                     std::size_t chain_index) {
  config.validate();
  const auto names = tracked_parameter_names(problem, config);
  const auto candidates = tracked_indices(names);

  ChainDraws out;
  out.seed = derive_seed(config.seed, chain_index);
  Rng rng(out.seed);
  AugmentedState st = initial_state(problem, config, rng);

  const std::size_t burn_in = config.effective_burn_in();
  const std::size_t kept = config.kept_per_chain();
  out.values.assign(names.size(), {});
  for (auto& v : out.values) v.reserve(kept);
  out.iterations.reserve(kept);

  UpdateStats size_stats;
  UpdateStats lambda_stats;
  for (std::size_t t = 1; t <= config.iterations; ++t) {
    update_z(st, problem, rng, config.use_likelihood);
    st.psi = draw_psi(st.real_count(), problem.model.max_bugs, rng);
    const auto ss = update_size(st, problem, rng, config.use_likelihood);
    UpdateStats ls;
    if (!config.fixed_lambda) ls = update_lambda(st, problem.model, rng);
    if (t <= burn_in) continue;
    size_stats += ss;
    lambda_stats += ls;
    if ((t - burn_in) % config.thin != 0 || out.draws() >= kept) continue;

    out.iterations.push_back(t);
    std::size_t p = 0;
    out.values[p++].push_back(st.psi);
    out.values[p++].push_back(static_cast<double>(st.real_count()));
    out.values[p++].push_back(remaining_size(st, problem.assignment));
    for (std::size_t i : candidates) {
      out.values[p++].push_back(static_cast<double>(st.z[i]));
      out.values[p++].push_back(static_cast<double>(st.size[i]));
      out.values[p++].push_back(st.lambda[i]);
    }
    if (config.keep_full_state) out.full_states.push_back(st);
  }
  out.acceptance.size = size_stats.rate();
  out.acceptance.lambda = lambda_stats.rate();
  return out;
}

ChainSet run_all(const TestCampaign& campaign, const ModelConfig& model,
                 const SamplerConfig& config) {
  config.validate();
  const FitProblem problem = FitProblem::make(campaign, model);

  ChainSet set;
  set.parameters = tracked_parameter_names(problem, config);
  set.chains.resize(config.chains);

  std::vector<std::exception_ptr> errors(config.chains);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < config.chains; c = next++) {
      try {
        set.chains[c] = run_chain(problem, config, c);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(config.threads, 1, config.chains);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (std::size_t c = 0; c < errors.size(); ++c) {
    if (!errors[c]) continue;
    try {
      std::rethrow_exception(errors[c]);
    } catch (const std::exception& e) {
      throw Error("chain " + std::to_string(c + 1) + " failed: " + e.what());
    }
  }
  return set;
}

}  // namespace sbrel
