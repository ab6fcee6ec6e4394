#pragma once
// Convergence diagnostics and posterior summaries over kept draws.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbrel/reliability.hpp"
#include "sbrel/sampler.hpp"

namespace sbrel {

using ChainViews = std::span<const std::span<const double>>;

struct RhatResult {
  double rhat = 1.0;
  double upper = 1.0;  // upper confidence bound
};

/// Split potential scale reduction factor. Every chain is cut in half (the
/// middle draw of an odd-length chain is dropped) and, with L draws per
/// half, W the mean within-half variance and B = L * var(half means),
///   rhat = sqrt(((L - 1) / L * W + B / L) / W).
/// The upper bound replaces B / (L W) by its F(m - 1, df_W) quantile-scaled
/// value, df_W being the moment estimate of W's degrees of freedom.
/// Requires >= 2 chains of equal length >= 4.
RhatResult split_rhat(ChainViews chains, double confidence = 0.95);

/// Multi-chain effective sample size on split chains, truncating the summed
/// autocorrelations with Geyer's initial monotone positive sequence.
/// Capped at twice the draw count; constant input returns the draw count.
double effective_sample_size(ChainViews chains);

struct ChainSummary {
  std::size_t draws = 0;
  double mean = 0.0;
  double sd = 0.0;
  std::optional<double> cv;  // percent; unset when the mean is zero and sd is not
};

struct ParameterSummary {
  std::string name;
  std::vector<ChainSummary> per_chain;
  double mean = 0.0;  // pooled
  double sd = 0.0;    // pooled
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  std::optional<RhatResult> rhat;  // needs >= 2 chains
  std::optional<double> ess;
};

ChainSummary summarize_chain(std::span<const double> draws);

/// Per-chain moments, pooled mean, equal-tailed credible interval and, when
/// there are at least two chains, R-hat and ESS.
ParameterSummary summarize(const std::string& name, ChainViews chains, double ci_level = 0.95);

/// Empirical quantile with linear interpolation between order statistics.
double empirical_quantile(std::vector<double> values, double p);

struct PosteriorReport {
  static constexpr const char* kSchema = "sbrel-report/1";

  double ci_level = 0.95;
  std::size_t chains = 0;
  std::size_t draws_per_chain = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<AcceptanceRates> acceptance;
  std::vector<ParameterSummary> parameters;
  std::vector<ReliabilityPoint> reliability;
  std::map<std::string, std::string> config;
};

/// Summaries for `parameters` (all tracked ones when empty) plus the
/// reliability curve when epsilons are given.
PosteriorReport build_report(const ChainSet& draws, const std::vector<std::string>& parameters = {},
                             std::span<const double> epsilons = {}, double ci_level = 0.95);

struct TraceRecord {
  std::size_t chain = 0;  // 1-based
  std::size_t iteration = 0;
  double value = 0.0;
  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

/// Long-form (chain, iteration, value) records ordered by chain then iteration.
std::vector<TraceRecord> trace_export(const ChainSet& draws, const std::string& parameter);

struct Histogram {
  double lower = 0.0;
  double upper = 0.0;
  std::vector<std::size_t> counts;
};

/// Equal-width bins spanning [min, max] of the values.
Histogram histogram(std::span<const double> values, std::size_t bins);

}  // namespace sbrel
