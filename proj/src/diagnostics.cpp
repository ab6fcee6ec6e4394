#include "sbrel/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

#include "sbrel/kernels.hpp"

namespace sbrel {

namespace {

struct Half {
  std::span<const double> draws;
  double mean = 0.0;
  double var = 0.0;  // unbiased
};

std::vector<Half> split_halves(ChainViews chains, std::size_t min_chains) {
  if (chains.size() < min_chains)
    throw Error("need >= " + std::to_string(min_chains) + " chains for this diagnostic");
  const std::size_t n = chains.front().size();
  for (auto c : chains)
    if (c.size() != n) throw Error("chains have mismatched lengths");
  if (n < 4) throw Error("chains need at least 4 draws");
  const std::size_t len = n / 2;
  std::vector<Half> halves;
  halves.reserve(2 * chains.size());
  for (auto c : chains) {
    for (auto part : {c.first(len), c.last(len)}) {
      Half h{part};
      h.mean = kernels::sum(part) / double(len);
      h.var = kernels::centered_sum_squares(part, h.mean) / double(len - 1);
      halves.push_back(h);
    }
  }
  return halves;
}

double mean_of(const std::vector<Half>& hs, double Half::*field) {
  double s = 0.0;
  for (const auto& h : hs) s += h.*field;
  return s / double(hs.size());
}

double variance_of(const std::vector<Half>& hs, double Half::*field) {
  if (hs.size() < 2) return 0.0;
  const double m = mean_of(hs, field);
  double s = 0.0;
  for (const auto& h : hs) s += (h.*field - m) * (h.*field - m);
  return s / double(hs.size() - 1);
}

double f_quantile(double p, double df1, double df2) {
  if (!std::isfinite(df2) || df2 > 1e8) {
    boost::math::chi_squared chi(df1);
    return boost::math::quantile(chi, p) / df1;
  }
  boost::math::fisher_f f(df1, df2);
  return boost::math::quantile(f, p);
}

}  // namespace

RhatResult split_rhat(ChainViews chains, double confidence) {
  const auto halves = split_halves(chains, 2);
  const double len = double(halves.front().draws.size());
  const double m = double(halves.size());

  const double w = mean_of(halves, &Half::var);
  const double b = len * variance_of(halves, &Half::mean);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (w == 0.0) {
    const double r = b == 0.0 ? 1.0 : kInf;
    return {r, r};
  }

  const double fixed = (len - 1.0) / len;
  const double random = b / (len * w);
  RhatResult out;
  out.rhat = std::sqrt(fixed + random);

  const double var_w = variance_of(halves, &Half::var) / m;
  const double df_w = var_w > 0.0 ? 2.0 * w * w / var_w : kInf;
  const double q = f_quantile((1.0 + confidence) / 2.0, m - 1.0, df_w);
  out.upper = std::sqrt(fixed + q * random);
  return out;
}

double effective_sample_size(ChainViews chains) {
  const auto halves = split_halves(chains, 1);
  const std::size_t len = halves.front().draws.size();
  const double total = double(halves.size() * len);
  const double lend = double(len);

  const double w = mean_of(halves, &Half::var);
  const double var_plus = w * (lend - 1.0) / lend + variance_of(halves, &Half::mean);
  if (var_plus == 0.0) {
    std::size_t n = 0;
    for (auto c : chains) n += c.size();
    return double(n);
  }

  std::vector<std::vector<double>> centered;
  centered.reserve(halves.size());
  for (const auto& h : halves) {
    std::vector<double> c(h.draws.begin(), h.draws.end());
    for (double& v : c) v -= h.mean;
    centered.push_back(std::move(c));
  }
  auto rho = [&](std::size_t lag) {
    double acov = 0.0;
    for (const auto& c : centered) acov += kernels::lagged_cross(c, lag) / lend;
    acov /= double(centered.size());
    return 1.0 - (w - acov) / var_plus;
  };

  // Geyer initial positive sequence, then the initial monotone sequence,
  // with the first dropped even lag added back as in Stan.
  const auto n = static_cast<std::ptrdiff_t>(len);
  std::vector<double> r(len, 0.0);
  double even = 1.0;
  double odd = rho(1);
  r[0] = even;
  r[1] = odd;
  std::ptrdiff_t t = 1;
  while (t < n - 3 && even + odd > 0.0) {
    even = rho(std::size_t(t + 1));
    odd = rho(std::size_t(t + 2));
    if (even + odd >= 0.0) {
      r[std::size_t(t + 1)] = even;
      r[std::size_t(t + 2)] = odd;
    }
    t += 2;
  }
  const std::ptrdiff_t max_t = t - 2;
  if (even > 0.0) r[std::size_t(max_t + 1)] = even;
  for (t = 1; t <= max_t - 2; t += 2) {
    const double prev = r[std::size_t(t - 1)] + r[std::size_t(t)];
    if (r[std::size_t(t + 1)] + r[std::size_t(t + 2)] > prev) {
      r[std::size_t(t + 1)] = prev / 2.0;
      r[std::size_t(t + 2)] = prev / 2.0;
    }
  }
  double tau = -1.0;
  for (std::ptrdiff_t k = 0; k <= max_t; ++k) tau += 2.0 * r[std::size_t(k)];
  if (max_t + 1 < n) tau += r[std::size_t(max_t + 1)];
  tau = std::max(tau, 0.5);
  return total / tau;
}

ChainSummary summarize_chain(std::span<const double> draws) {
  ChainSummary s;
  s.draws = draws.size();
  if (draws.empty()) return s;
  s.mean = kernels::sum(draws) / double(draws.size());
  s.sd = draws.size() > 1
             ? std::sqrt(kernels::centered_sum_squares(draws, s.mean) / double(draws.size() - 1))
             : 0.0;
  if (s.mean != 0.0)
    s.cv = 100.0 * s.sd / std::abs(s.mean);
  else if (s.sd == 0.0)
    s.cv = 0.0;
  return s;
}

double empirical_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw Error("quantile of empty sample");
  const double h = (double(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + lo, values.end());
  const double xlo = values[lo];
  if (hi == lo) return xlo;
  const double xhi = *std::min_element(values.begin() + lo + 1, values.end());
  return xlo + (h - double(lo)) * (xhi - xlo);
}

ParameterSummary summarize(const std::string& name, ChainViews chains, double ci_level) {
  ParameterSummary out;
  out.name = name;
  std::vector<double> pooled;
  double weighted = 0.0;
  for (auto c : chains) {
    out.per_chain.push_back(summarize_chain(c));
    weighted += out.per_chain.back().mean * double(c.size());
    pooled.insert(pooled.end(), c.begin(), c.end());
  }
  if (pooled.empty()) throw Error("no draws to summarize for " + name);
  out.mean = weighted / double(pooled.size());
  out.sd = pooled.size() > 1
               ? std::sqrt(kernels::centered_sum_squares(pooled, out.mean) / double(pooled.size() - 1))
               : 0.0;
  const double tail = (1.0 - ci_level) / 2.0;
  out.ci_lower = empirical_quantile(pooled, tail);
  out.ci_upper = empirical_quantile(std::move(pooled), 1.0 - tail);

  bool equal = chains.size() >= 2;
  for (auto c : chains) equal = equal && c.size() == chains.front().size() && c.size() >= 4;
  if (equal) {
    out.rhat = split_rhat(chains);
    out.ess = effective_sample_size(chains);
  }
  return out;
}

PosteriorReport build_report(const ChainSet& draws, const std::vector<std::string>& parameters,
                             std::span<const double> epsilons, double ci_level) {
  PosteriorReport r;
  r.ci_level = ci_level;
  r.chains = draws.chains.size();
  r.draws_per_chain = draws.chains.empty() ? 0 : draws.chains.front().draws();
  r.config = draws.metadata;
  for (const auto& c : draws.chains) {
    r.seeds.push_back(c.seed);
    r.acceptance.push_back(c.acceptance);
  }
  const auto& names = parameters.empty() ? draws.parameters : parameters;
  for (const auto& name : names) {
    const auto views = draws.per_chain(name);
    r.parameters.push_back(summarize(name, views, ci_level));
  }
  if (!epsilons.empty()) r.reliability = reliability_curve(draws, epsilons);
  return r;
}

std::vector<TraceRecord> trace_export(const ChainSet& draws, const std::string& parameter) {
  const std::size_t idx = draws.parameter_index(parameter);
  std::vector<TraceRecord> out;
  out.reserve(draws.total_draws());
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const auto& chain = draws.chains[c];
    for (std::size_t d = 0; d < chain.draws(); ++d)
      out.push_back({c + 1, chain.iterations[d], chain.values[idx][d]});
  }
  return out;
}

Histogram histogram(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw Error("histogram needs at least one bin");
  Histogram h;
  h.counts.assign(bins, 0);
  if (values.empty()) return h;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  h.lower = *lo;
  h.upper = *hi;
  const double width = (h.upper - h.lower) / double(bins);
  for (double v : values) {
    std::size_t b = width > 0.0 ? static_cast<std::size_t>((v - h.lower) / width) : 0;
    ++h.counts[std::min(b, bins - 1)];
  }
  return h;
}

}  // namespace sbrel
