#pragma once
// Metropolis-within-Gibbs sampler over the augmented state (z, psi, S, lambda).
//
// One sweep updates, in order: the real-bug indicators z, the inclusion
// probability psi (exact beta draw), the eventual sizes S (independence MH
// from the negative-binomial prior), and the mean sizes lambda
// (independence MH from the Poisson-conjugate gamma).

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbrel/model.hpp"
#include "sbrel/random.hpp"

namespace sbrel {

struct SamplerConfig {
  std::size_t chains = 3;
  std::size_t iterations = 50000;
  std::optional<std::size_t> burn_in;  // defaults to iterations / 2
  std::uint64_t seed = 1;
  std::size_t thin = 1;
  std::size_t threads = 1;
  /// 1-based candidate indices whose z, S and lambda are recorded. Empty
  /// selects {1, 2, M-2, M-1, M}.
  std::vector<std::size_t> tracked;
  /// Keep every candidate's (z, S, lambda) for each kept draw.
  bool keep_full_state = false;
  /// With false the detection likelihood is treated as constant, so the
  /// chain samples the prior. Used for prior-recovery checks.
  bool use_likelihood = true;
  /// Pins every lambda to this value and skips the lambda update.
  std::optional<double> fixed_lambda;

  std::size_t effective_burn_in() const { return burn_in.value_or(iterations / 2); }
  std::size_t kept_per_chain() const { return (iterations - effective_burn_in()) / thin; }
  void validate() const;
};

/// Everything the updates need that is fixed for a given fit.
struct FitProblem {
  TestCampaign campaign;
  ModelConfig model;
  BugAssignment assignment;
  ProbMatrix cells;
  double t_max = 0.0;

  /// Validates inputs and builds the deterministic detection assignment.
  static FitProblem make(const TestCampaign& campaign, const ModelConfig& model);
};

struct UpdateStats {
  std::size_t proposed = 0;
  std::size_t accepted = 0;
  UpdateStats& operator+=(const UpdateStats& o) {
    proposed += o.proposed;
    accepted += o.accepted;
    return *this;
  }
  double rate() const { return proposed == 0 ? 1.0 : double(accepted) / double(proposed); }
};

struct AcceptanceRates {
  double size = 1.0;
  double lambda = 1.0;
  friend bool operator==(const AcceptanceRates&, const AcceptanceRates&) = default;
};

struct ChainDraws {
  std::uint64_t seed = 0;
  std::vector<std::size_t> iterations;      // 1-based sweep index of each kept draw
  std::vector<std::vector<double>> values;  // [parameter][draw]
  AcceptanceRates acceptance;
  std::vector<AugmentedState> full_states;  // only with keep_full_state

  std::size_t draws() const { return iterations.size(); }
};

struct ChainSet {
  std::vector<std::string> parameters;
  std::vector<ChainDraws> chains;
  /// Free-form run description (config echo), kept in insertion-stable order.
  std::map<std::string, std::string> metadata;

  /// Throws Error naming the available parameters if `name` is not tracked.
  std::size_t parameter_index(const std::string& name) const;
  bool has_parameter(const std::string& name) const;
  /// Draws of one parameter for every chain.
  std::vector<std::span<const double>> per_chain(const std::string& name) const;
  std::size_t total_draws() const;
};

/// Full conditional P(z_i = 1 | psi, S_i) for a candidate never detected.
double inclusion_probability(double psi, double log_nondetection);

void update_z(AugmentedState& state, const FitProblem& problem, Rng& rng,
              bool use_likelihood = true);

/// Exact draw from Beta(N + 1, M - N + 1).
double draw_psi(std::int64_t real_count, std::int64_t max_bugs, Rng& rng);

UpdateStats update_size(AugmentedState& state, const FitProblem& problem, Rng& rng,
                        bool use_likelihood = true);

enum class LambdaTarget {
  Posterior,  // NB(S | lambda) x Gamma(lambda)
  PriorOnly,  // Gamma(lambda) alone
};

UpdateStats update_lambda(AugmentedState& state, const ModelConfig& model, Rng& rng,
                          LambdaTarget target = LambdaTarget::Posterior);

/// Dispersed starting state: detected candidates real, others coin flips.
AugmentedState initial_state(const FitProblem& problem, const SamplerConfig& config, Rng& rng);

/// Names of the recorded parameters, in storage order.
std::vector<std::string> tracked_parameter_names(const FitProblem& problem,
                                                 const SamplerConfig& config);

ChainDraws run_chain(const FitProblem& problem, const SamplerConfig& config,
                     std::size_t chain_index);

/// Runs config.chains independent chains, up to config.threads at a time.
/// Results are ordered by chain index regardless of scheduling.
ChainSet run_all(const TestCampaign& campaign, const ModelConfig& model,
                 const SamplerConfig& config);

}  // namespace sbrel
