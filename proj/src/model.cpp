#include "sbrel/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sbrel {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

TestCampaign TestCampaign::make(CountMatrix test_cases, CountMatrix bugs) {
  TestCampaign c;
  c.missions = test_cases.rows;
  c.phases = test_cases.cols;
  c.test_cases = std::move(test_cases);
  c.bugs = std::move(bugs);
  c.validate();
  return c;
}

std::int64_t TestCampaign::detected() const {
  return std::accumulate(bugs.values.begin(), bugs.values.end(), std::int64_t{0});
}

std::int64_t TestCampaign::max_test_cases() const {
  if (test_cases.values.empty()) return 0;
  return *std::max_element(test_cases.values.begin(), test_cases.values.end());
}

void TestCampaign::validate() const {
  if (missions < 1 || phases < 1) throw Error("campaign needs at least one mission and one phase");
  auto shaped = [&](const CountMatrix& m) {
    return m.rows == missions && m.cols == phases && m.values.size() == missions * phases;
  };
  if (!shaped(test_cases) || !shaped(bugs)) throw Error("campaign matrices do not match J x K");
  for (std::size_t j = 0; j < missions; ++j) {
    for (std::size_t k = 0; k < phases; ++k) {
      if (test_cases(j, k) < 0 || bugs(j, k) < 0)
        throw Error("negative count at mission " + std::to_string(j + 1) + ", phase " +
                    std::to_string(k + 1));
    }
  }
}

std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::Proportional:
      return "proportional";
  }
  return "unknown";
}

Normalization parse_normalization(const std::string& s) {
  if (s == "proportional") return Normalization::Proportional;
  throw Error("unknown normalization policy: " + s);
}

void ModelConfig::validate() const {
  if (max_bugs < 1) throw Error("max_bugs must be positive");
  if (!(nu > 0.0)) throw Error("nu must be positive");
  if (!(gamma_shape > 0.0) || !(gamma_rate > 0.0)) throw Error("gamma prior parameters must be positive");
  if (!(dispersion > 0.0)) throw Error("dispersion must be positive");
  if (size_cap && *size_cap < 1) throw Error("size cap must be at least 1");
}

void ModelConfig::validate_for(const TestCampaign& campaign) const {
  validate();
  if (max_bugs < campaign.detected())
    throw Error("candidate ceiling below detected count (M=" + std::to_string(max_bugs) +
                ", n=" + std::to_string(campaign.detected()) + ")");
}

std::size_t BugAssignment::detected_count() const {
  return static_cast<std::size_t>(
      std::count_if(slots.begin(), slots.end(), [](const auto& s) { return s.has_value(); }));
}

CountMatrix BugAssignment::reconstruct_counts(std::size_t missions, std::size_t phases) const {
  CountMatrix y(missions, phases, 0);
  for (const auto& s : slots) {
    if (!s) continue;
    if (s->mission >= missions || s->phase >= phases) throw Error("assignment cell outside campaign");
    ++y(s->mission, s->phase);
  }
  return y;
}

std::int64_t AugmentedState::real_count() const {
  return std::accumulate(z.begin(), z.end(), std::int64_t{0});
}

double phase_detection_prob(double test_cases) { return -std::expm1(-test_cases); }

ProbMatrix cell_probabilities(const CountMatrix& test_cases, Normalization policy) {
  ProbMatrix p(test_cases.rows, test_cases.cols, 0.0);
  switch (policy) {
    case Normalization::Proportional: {
      double total = 0.0;
      for (std::size_t i = 0; i < p.values.size(); ++i) {
        p.values[i] = phase_detection_prob(static_cast<double>(test_cases.values[i]));
        total += p.values[i];
      }
      if (!(total > 0.0)) throw Error("no testing effort");
      for (double& v : p.values) v /= total;
      break;
    }
  }
  return p;
}

namespace {
double scaled_size(double size, double nu, double t_max) {
  if (!(t_max > 0.0)) throw Error("kernel undefined without test cases");
  return std::pow(size, nu) / t_max;
}
}  // namespace

double detection_prob(double size, double nu, double t_max) {
  return -std::expm1(-scaled_size(size, nu, t_max));
}

double log_detection_prob(double size, double nu, double t_max) {
  const double x = scaled_size(size, nu, t_max);
  if (x == 0.0) return kNegInf;
  // log(1 - e^-x): log(-expm1(-x)) loses nothing for small x, log1p for large x.
  return x < 0.6931471805599453 ? std::log(-std::expm1(-x)) : std::log1p(-std::exp(-x));
}

double log_nondetection_prob(double size, double nu, double t_max) {
  return -scaled_size(size, nu, t_max);
}

double bug_log_likelihood(const std::optional<Cell>& entry, bool real, std::int64_t size,
                          const ProbMatrix& cells, double nu, double t_max) {
  if (entry) {
    if (!real) throw Error("impossible configuration: detected candidate marked not real");
    const double pc = cells(entry->mission, entry->phase);
    if (pc <= 0.0) return kNegInf;
    return log_detection_prob(static_cast<double>(size), nu, t_max) + std::log(pc);
  }
  if (!real) return 0.0;
  return log_nondetection_prob(static_cast<double>(size), nu, t_max);
}

double nb_log_pmf(std::int64_t s, double mean, double r) {
  if (s < 0) return kNegInf;
  if (s == 0) return -r * std::log1p(mean / r);
  const double sd = static_cast<double>(s);
  // log Gamma(s + r) - log Gamma(r); direct sum keeps precision when r >> s.
  double rising;
  if (s < 256 || r > 1e6) {
    rising = 0.0;
    for (std::int64_t k = 0; k < s; ++k) rising += std::log(r + static_cast<double>(k));
  } else {
    rising = std::lgamma(sd + r) - std::lgamma(r);
  }
  return rising - std::lgamma(sd + 1.0) - r * std::log1p(mean / r) +
         sd * (std::log(mean) - std::log(r + mean));
}

double nb_log_cdf(std::int64_t cap, double mean, double r) {
  if (cap < 0) return kNegInf;
  double m = kNegInf;
  std::vector<double> terms(static_cast<std::size_t>(cap) + 1);
  for (std::int64_t s = 0; s <= cap; ++s) {
    terms[static_cast<std::size_t>(s)] = nb_log_pmf(s, mean, r);
    m = std::max(m, terms[static_cast<std::size_t>(s)]);
  }
  if (m == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - m);
  return std::min(0.0, m + std::log(acc));
}

double gamma_log_pdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

}  // namespace sbrel
